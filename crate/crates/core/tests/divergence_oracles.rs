//! Trained discriminators against their closed-form optima on discrete
//! outcome distributions.

mod common;

use common::oracles::{divergence_max_error, prob, train_discriminator, DIVERGENCE_CASES};
use natadv::env::Trajectory;
use natadv::naturalness::{
    chi2_from_scores, kl_logistic_optimum, ls_gan_optimum, DiscLoss, GanConfig,
};

#[test]
fn ls_gan_matches_closed_form_optimum() {
    let worst = divergence_max_error(DiscLoss::LsGan);
    assert!(worst <= 0.05, "max error {worst}");
}

#[test]
fn kl_logistic_matches_log_density_ratio() {
    let cfg = GanConfig::default().plain();
    for (adv, can) in DIVERGENCE_CASES {
        for i in 0..adv.len() {
            let (p, q) = (prob(adv, i), prob(can, i));
            assert!((kl_logistic_optimum(p, q, &cfg) - (p / q).ln()).abs() < 1e-12);
        }
    }
    let worst = divergence_max_error(DiscLoss::KlLogistic);
    assert!(worst <= 0.05, "max error {worst}");
}

fn single_step(k: usize, i: usize) -> Trajectory {
    let mut o = vec![0.0; k];
    o[i] = 1.0;
    Trajectory {
        human_obs: vec![o],
        robot_obs: vec![vec![]],
        human_actions: vec![vec![]],
        robot_actions: vec![vec![]],
        rewards: vec![0.0],
        success: false,
        goal_index: 0,
    }
}

#[test]
fn chi2_estimate_at_the_optimum_matches_enumeration() {
    let cfg = GanConfig::default().plain();
    let (adv, can) = (&[120u32, 50, 20, 10][..], &[40u32, 60, 50, 50][..]);
    let k = adv.len();
    let optimum = |i: usize| ls_gan_optimum(prob(adv, i), prob(can, i), &cfg);

    // Scores of a sample drawn exactly in proportion to the adversary.
    let scores: Vec<f64> = (0..k)
        .flat_map(|i| std::iter::repeat(optimum(i)).take(adv[i] as usize))
        .collect();
    let enumerated: f64 = (0..k).map(|i| prob(adv, i) * optimum(i).powi(2)).sum();
    assert!((chi2_from_scores(&scores) - enumerated).abs() < 1e-12);

    // Under the even mixture the same statistic is Pearson χ² to the mixture.
    let mixture: f64 = (0..k)
        .map(|i| 0.5 * (prob(adv, i) + prob(can, i)) * optimum(i).powi(2))
        .sum();
    let pearson: f64 = (0..k)
        .map(|i| {
            let (p, q) = (prob(adv, i), prob(can, i));
            let m = 0.5 * (p + q);
            (p - m).powi(2) / m
        })
        .sum();
    assert!((mixture - pearson).abs() < 1e-12);

    // A trained discriminator reproduces the estimate on real trajectories.
    let d = train_discriminator(DiscLoss::LsGan, adv, can);
    let trajs: Vec<Trajectory> = (0..k)
        .flat_map(|i| std::iter::repeat_with(move || single_step(k, i)).take(adv[i] as usize))
        .collect();
    let est = d.chi2_estimate(&trajs).unwrap();
    assert!((est - enumerated).abs() < 0.02, "{est} vs {enumerated}");
}
