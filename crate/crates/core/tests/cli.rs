//! Exit codes, error handling and a tiny end-to-end pipeline through the
//! `natadv` binary.

mod common;

use common::{natadv, ok, robot, scan_id, write_tiny_config};

#[test]
fn malformed_config_exits_2_without_creating_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[rl]\ncoop_iterations = \"many\"\n").unwrap();
    let out = dir.path().join("out");
    let o = natadv(&out, Some(&cfg), &["cooptimize"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("runs").exists());

    std::fs::write(&cfg, "[nope]\nx = 1\n").unwrap();
    assert_eq!(
        natadv(&out, Some(&cfg), &["cooptimize"]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("absent.toml");
    assert_eq!(
        natadv(&out, Some(&missing), &["cooptimize"]).status.code(),
        Some(2)
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        natadv(dir.path(), None, &["teleport"]).status.code(),
        Some(2)
    );
    assert_eq!(
        natadv(dir.path(), None, &["attack", "--robot", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        natadv(dir.path(), None, &["--jobs", "0", "cooptimize"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        natadv(
            dir.path(),
            None,
            &["scan", "--robot", "x", "--seeds", "a,b"]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn unknown_runs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = natadv(
        dir.path(),
        None,
        &["attack", "--robot", "0123456789abcdef", "--lambda", "1"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        natadv(dir.path(), None, &["frontier", "--scan", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        natadv(dir.path(), None, &["train-robot", "--coop", "nope"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn auc_of_a_csv_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    std::fs::write(
        &csv,
        "run_id,lambda,seed,naturalness,adversarialness,pareto_flag\na,1,0,0,1,1\nb,2,0,1,0,1\n",
    )
    .unwrap();
    assert_eq!(
        ok(dir.path(), None, &["auc", "--csv", csv.to_str().unwrap()]),
        "0.5"
    );
    let o = natadv(
        dir.path(),
        None,
        &[
            "auc",
            "--csv",
            dir.path().join("none.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tiny_pipeline_runs_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = dir.path().join("out");
    let c = Some(cfg.as_path());
    let robot_id = robot(&out, c);

    let attack = ok(
        &out,
        c,
        &["attack", "--robot", &robot_id, "--lambda", "0.1"],
    );
    let summary: serde_json::Value = serde_json::from_str(&attack).unwrap();
    let attack_id = summary["run_id"].as_str().unwrap().to_string();
    let nat = summary["naturalness"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&nat));

    let scan_out = ok(&out, c, &["scan", "--robot", &robot_id]);
    assert_eq!(
        scan_out
            .lines()
            .filter(|l| l.starts_with("lambda="))
            .count(),
        12
    );
    let scan = scan_id(&scan_out);

    let auc: f64 = ok(&out, c, &["frontier", "--scan", &scan]).parse().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    for f in ["frontier.csv", "frontier.json", "frontier.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv_auc: f64 = ok(
        &out,
        c,
        &["auc", "--csv", out.join("frontier.csv").to_str().unwrap()],
    )
    .parse()
    .unwrap();
    assert!((csv_auc - auc).abs() < 1e-12);
    let scan_auc: f64 = ok(&out, c, &["auc", "--scan", &scan]).parse().unwrap();
    assert_eq!(scan_auc, auc);

    ok(&out, c, &["export", "--scan", &scan]);
    assert!(out.join("scan.json").is_file());
    let runs_csv = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs_csv.lines().count(), 13);

    let ft = ok(
        &out,
        c,
        &["robust-ft", "--robot", &robot_id, "--frontier", &scan],
    );
    assert_eq!(ft.len(), 16);
    let ft_json = ok(
        &out,
        c,
        &[
            "robust-ft",
            "--robot",
            &robot_id,
            "--frontier",
            out.join("frontier.json").to_str().unwrap(),
        ],
    );
    assert_eq!(ft_json, ft);

    let probe = ok(
        &out,
        c,
        &[
            "probe-disc",
            "--run",
            &attack_id,
            "--robot",
            &robot_id,
            "--levels",
            "0,5",
        ],
    );
    assert_eq!(probe.lines().count(), 3);
    let sanity = ok(&out, c, &["sanity", "--robot", &robot_id]);
    assert_eq!(
        sanity
            .lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .count(),
        3
    );
}
