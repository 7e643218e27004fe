//! Helpers shared by the integration tests.

#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Budgets small enough for a full pipeline in seconds.
pub const TINY_CONFIG: &str = r#"
[rl]
coop_iterations = 3
robot_iterations = 2
robot_warmup = 0

[rl.ppo]
steps_per_iter = 200

[attack]
iterations = 2
eval_episodes = 5

[attack.ppo]
steps_per_iter = 200

[frontier]
calibration_episodes = 5
canonical_episodes = 5

[scan]
rounds = 2
samples = 3
seeds = [0, 1]

[robust]
iterations = 1
nat_range = [0.0, 1.0]
"#;

pub fn write_tiny_config(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY_CONFIG).unwrap();
    p
}

pub fn natadv(out: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_natadv"));
    cmd.arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().expect("binary runs")
}

/// Runs a command that must succeed and returns its trimmed stdout.
pub fn ok(out: &Path, config: Option<&Path>, args: &[&str]) -> String {
    let o = natadv(out, config, args);
    assert!(
        o.status.success(),
        "natadv {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap().trim().to_string()
}

/// Co-optimizes and trains a personalized robot; returns the robot id.
pub fn robot(out: &Path, config: Option<&Path>) -> String {
    let coop = ok(out, config, &["cooptimize"]);
    ok(out, config, &["train-robot", "--coop", &coop])
}

/// Scan id from the final `scan <id> auc <x>` line.
pub fn scan_id(stdout: &str) -> String {
    let last = stdout.lines().last().expect("scan output");
    let mut parts = last.split_whitespace();
    assert_eq!(parts.next(), Some("scan"), "{last}");
    parts.next().unwrap().to_string()
}
