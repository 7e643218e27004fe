//! λ grid, jump search and scan bookkeeping against hand-worked answers.

mod common;

use common::oracles::{brute_force_pareto, largest_jump_traces};
use natadv::error::Error;
use natadv::frontier::{pareto_extract, FrontierPoint};
use natadv::rigid::{
    largest_jump, largest_jump_indices, log_space_grid, rigid_scan, AttackJob, AttackOutcome,
    ScanConfig, ScanRunStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn largest_jump_matches_hand_traces() {
    for (nat, window, want) in largest_jump_traces() {
        assert_eq!(
            largest_jump_indices(&nat, window).unwrap(),
            want,
            "nat={nat:?} L={window}"
        );
        let lambdas: Vec<f64> = (1..=nat.len()).map(|i| i as f64).collect();
        let (lo, hi) = largest_jump(&nat, &lambdas, window).unwrap();
        assert_eq!((lo, hi), ((want.0 + 1) as f64, (want.1 + 1) as f64));
    }
}

#[test]
fn largest_jump_sorts_pairs_by_lambda_first() {
    let (nat, lam) = ([0.7, 0.1, 0.72, 0.12], [3.0, 1.0, 4.0, 2.0]);
    assert_eq!(largest_jump(&nat, &lam, 2).unwrap(), (2.0, 3.0));
}

#[test]
fn largest_jump_rejects_short_or_unpaired_input() {
    assert!(matches!(
        largest_jump(&[0.3], &[1.0], 1),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        largest_jump(&[0.3, 0.4], &[1.0], 1),
        Err(Error::Contract(_))
    ));
}

#[test]
fn log_grid_examples() {
    assert_eq!(
        log_space_grid(1.0, 100.0, 3).unwrap(),
        vec![1.0, 10.0, 100.0]
    );
    assert_eq!(log_space_grid(5.0, 5.0, 1).unwrap(), vec![5.0]);
    let g = log_space_grid(1e-5, 10.0, 6).unwrap();
    let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
    for r in &ratios {
        assert!((r - ratios[0]).abs() < 1e-9);
    }
    assert!(matches!(
        log_space_grid(0.0, 1.0, 2),
        Err(Error::Contract(_))
    ));
}

/// Deterministic stand-in for an attack: naturalness rises with λ plus
/// seed-dependent noise.
fn stub(job: &AttackJob) -> natadv::Result<AttackOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(job.attack_seed);
    let x = ((job.lambda.log10() + 5.0) / 6.0).clamp(0.0, 1.0);
    let nat = (x + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0);
    Ok(AttackOutcome {
        run_id: format!("{:016x}", job.attack_seed),
        naturalness: nat,
        adversarialness: (1.0 - nat + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0),
        robot_return: 0.0,
    })
}

#[test]
fn scan_run_counts() {
    for (cfg, want) in [(ScanConfig::default(), 54), (ScanConfig::desk(), 16)] {
        let state = rigid_scan(&cfg, 2, stub, |_| {}).unwrap();
        assert_eq!(state.runs.len(), want);
        assert_eq!(cfg.total_runs(), want);
        for h in &state.histories {
            assert_eq!(h.lambdas_all.len(), cfg.rounds * cfg.samples);
            assert_eq!(h.nat_scores.len(), h.lambdas_all.len());
            assert_eq!(h.adv_scores.len(), h.lambdas_all.len());
        }
    }
}

#[test]
fn refinement_bounds_nest() {
    let cfg = ScanConfig {
        rounds: 4,
        ..ScanConfig::default()
    };
    let state = rigid_scan(&cfg, 1, stub, |_| {}).unwrap();
    for h in &state.histories {
        assert_eq!(h.bounds.len(), cfg.rounds + 1);
        for w in h.bounds.windows(2) {
            let ((plo, phi), (lo, hi)) = (w[0], w[1]);
            assert!(
                plo <= lo && hi <= phi && lo < hi,
                "{:?} then {:?}",
                w[0],
                w[1]
            );
            assert!(h.lambdas_all.contains(&lo) && h.lambdas_all.contains(&hi));
        }
    }
}

#[test]
fn single_round_is_the_log_grid() {
    let cfg = ScanConfig {
        rounds: 1,
        ..ScanConfig::default()
    };
    let state = rigid_scan(&cfg, 1, stub, |_| {}).unwrap();
    let grid = log_space_grid(cfg.lambda_min, cfg.lambda_max, cfg.samples).unwrap();
    for h in &state.histories {
        assert_eq!(h.lambdas_all, grid);
    }
}

#[test]
fn parallel_scan_equals_serial() {
    let cfg = ScanConfig::default();
    let a = rigid_scan(&cfg, 1, stub, |_| {}).unwrap();
    let b = rigid_scan(&cfg, 4, stub, |_| {}).unwrap();
    assert_eq!(a, b);
}

#[test]
fn failed_runs_are_isolated() {
    let cfg = ScanConfig::desk();
    let clean = rigid_scan(&cfg, 1, stub, |_| {}).unwrap();
    let bad = clean.histories[0].lambdas_all[1];
    let flaky = rigid_scan(
        &cfg,
        1,
        |j| {
            if j.lambda == bad && j.seed == cfg.seeds[0] {
                Err(Error::Diverged("stub".into()))
            } else {
                stub(j)
            }
        },
        |_| {},
    )
    .unwrap();
    assert_eq!(flaky.failed(), 1);
    assert_eq!(flaky.runs.len(), clean.runs.len());
    // A missing point may move that seed's later bounds; every other run
    // must be untouched.
    for r in flaky
        .successful()
        .filter(|r| r.seed != cfg.seeds[0] || r.round == 0)
    {
        let twin = clean
            .runs
            .iter()
            .find(|c| c.run_id == r.run_id)
            .expect("same run in the clean scan");
        assert_eq!(twin.naturalness, r.naturalness);
        assert_eq!(twin.adversarialness, r.adversarialness);
    }
    let failed = flaky
        .runs
        .iter()
        .find(|r| r.status == ScanRunStatus::Failed)
        .unwrap();
    assert_eq!(failed.lambda, bad);
}

#[test]
fn interruption_stops_the_scan() {
    let cfg = ScanConfig::desk();
    let res = rigid_scan(
        &cfg,
        1,
        |j| {
            if j.round == 1 {
                Err(Error::Interrupted { completed: 0 })
            } else {
                stub(j)
            }
        },
        |_| {},
    );
    assert!(matches!(res, Err(Error::Interrupted { completed: 8 })));
}

#[test]
fn pareto_subset_equals_brute_force_on_random_scans() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = 1 + trial % 50;
        let points: Vec<FrontierPoint> = (0..n)
            .map(|i| FrontierPoint {
                run_id: format!("r{i}"),
                lambda: i as f64,
                seed: 0,
                // Coarse grid so ties and duplicates occur.
                naturalness: (rng.gen_range(0..20) as f64) / 19.0,
                adversarialness: (rng.gen_range(0..20) as f64) / 19.0,
            })
            .collect();
        let got: Vec<(f64, f64)> = pareto_extract(&points)
            .iter()
            .map(|p| (p.naturalness, p.adversarialness))
            .collect();
        assert_eq!(got, brute_force_pareto(&points), "trial {trial}");
    }
}
