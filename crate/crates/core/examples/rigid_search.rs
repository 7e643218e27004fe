//! Runs the rigid λ search against a cheap synthetic attack to show the
//! log grid, the per-seed refinement bounds and the largest-jump rule.
//!
//! cargo run --release --example rigid_search

use natadv::rigid::{
    largest_jump, log_space_grid, rigid_scan, AttackJob, AttackOutcome, ScanConfig,
};

/// Naturalness switches on sharply near λ = 3e-3.
fn synthetic(job: &AttackJob) -> natadv::Result<AttackOutcome> {
    let nat = 1.0 / (1.0 + (-(job.lambda.log10() + 2.5) * 6.0).exp());
    Ok(AttackOutcome {
        run_id: format!("{:016x}", job.attack_seed),
        naturalness: nat,
        adversarialness: 1.0 - nat,
        robot_return: 0.0,
    })
}

fn main() -> natadv::Result<()> {
    let grid = log_space_grid(1e-5, 10.0, 6)?;
    println!("initial grid {grid:?}");
    let nat: Vec<f64> = grid
        .iter()
        .map(|&l| 1.0 / (1.0 + (-(l.log10() + 2.5) * 6.0).exp()))
        .collect();
    println!(
        "largest jump on the grid {:?}",
        largest_jump(&nat, &grid, 3)?
    );

    let cfg = ScanConfig::default();
    let state = rigid_scan(&cfg, 2, synthetic, |_| {})?;
    println!("{} runs", state.runs.len());
    for h in &state.histories {
        println!("seed {} bounds per round:", h.seed);
        for (lo, hi) in &h.bounds {
            println!("  [{lo:.3e}, {hi:.3e}]");
        }
    }
    Ok(())
}
