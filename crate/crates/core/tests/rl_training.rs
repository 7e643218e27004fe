//! Seeding, behaviour cloning and partner mixing in robot training.

use natadv::env::{CursorAssist, CursorAssistConfig};
use natadv::rl::{cooptimize, partner_schedule, train_robot, NnConfig, Partners, RlConfig};

fn env() -> CursorAssist {
    CursorAssist::new(CursorAssistConfig::default()).unwrap()
}

fn small_rl() -> RlConfig {
    let mut rl = RlConfig {
        coop_iterations: 2,
        robot_warmup: 0,
        ..RlConfig::default()
    };
    rl.ppo.steps_per_iter = 400;
    rl
}

#[test]
fn seeds_give_distinct_humans_and_repeat_exactly() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let a = cooptimize(&env, &nn, &rl, 1).unwrap();
    let b = cooptimize(&env, &nn, &rl, 2).unwrap();
    let again = cooptimize(&env, &nn, &rl, 1).unwrap();
    assert_ne!(a.human.policy, b.human.policy);
    assert_eq!(a, again);
}

#[test]
fn no_expert_means_no_bc_loss() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let mut pair = cooptimize(&env, &nn, &rl, 3).unwrap();
    let human = pair.human.policy.clone();
    let history = train_robot(
        &mut pair.robot,
        &env,
        &Partners::only(&human),
        None,
        &rl,
        2,
        4,
    )
    .unwrap();
    for rec in history {
        assert_eq!(rec.robot.unwrap().bc_loss, 0.0);
    }
}

#[test]
fn expert_adds_a_positive_bc_loss() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let pair = cooptimize(&env, &nn, &rl, 3).unwrap();
    let other = cooptimize(&env, &nn, &rl, 5).unwrap();
    let mut robot = other.robot.clone();
    let history = train_robot(
        &mut robot,
        &env,
        &Partners::only(&pair.human.policy),
        Some(&pair.robot.policy),
        &rl,
        1,
        4,
    )
    .unwrap();
    assert!(history[0].robot.unwrap().bc_loss > 0.0);
}

#[test]
fn partner_mixture_matches_the_rate() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let pair = cooptimize(&env, &nn, &rl, 3).unwrap();
    let (h, a, b) = (&pair.human.policy, &pair.robot.policy, &pair.robot.policy);
    let partners = Partners {
        base: h,
        others: vec![a, b],
        rate: 0.15,
    };
    let schedule = partner_schedule(&partners, 10_000, 9);
    let frac = schedule.iter().filter(|&&i| i != 0).count() as f64 / 10_000.0;
    assert!((0.13..=0.17).contains(&frac), "{frac}");
    assert!(schedule.contains(&1) && schedule.contains(&2));
    assert_eq!(schedule, partner_schedule(&partners, 10_000, 9));
}

#[test]
fn zero_rate_equals_continued_vanilla_training() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let pair = cooptimize(&env, &nn, &rl, 3).unwrap();
    let adversary = cooptimize(&env, &nn, &rl, 6).unwrap().human.policy;
    let mut vanilla = pair.robot.clone();
    let mut mixed = pair.robot.clone();
    let hv = train_robot(
        &mut vanilla,
        &env,
        &Partners::only(&pair.human.policy),
        None,
        &rl,
        2,
        8,
    )
    .unwrap();
    let partners = Partners {
        base: &pair.human.policy,
        others: vec![&adversary],
        rate: 0.0,
    };
    let hm = train_robot(&mut mixed, &env, &partners, None, &rl, 2, 8).unwrap();
    assert_eq!(vanilla, mixed);
    assert_eq!(hv, hm);
}

#[test]
fn invalid_rate_is_a_config_error() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let mut pair = cooptimize(&env, &nn, &rl, 3).unwrap();
    let human = pair.human.policy.clone();
    let partners = Partners {
        base: &human,
        others: vec![],
        rate: 0.5,
    };
    let err = train_robot(&mut pair.robot, &env, &partners, None, &rl, 1, 0).unwrap_err();
    assert!(matches!(err, natadv::Error::Config(_)));
}

#[test]
fn resumed_learner_uses_the_configured_learning_rate() {
    let (env, nn, rl) = (env(), NnConfig::default(), small_rl());
    let pair = cooptimize(&env, &nn, &rl, 3).unwrap();
    let human = pair.human.policy.clone();
    let mut slow_rl = rl.clone();
    slow_rl.ppo.lr = 1e-6;
    let (mut a, mut b) = (pair.robot.clone(), pair.robot.clone());
    train_robot(&mut a, &env, &Partners::only(&human), None, &rl, 1, 4).unwrap();
    train_robot(&mut b, &env, &Partners::only(&human), None, &slow_rl, 1, 4).unwrap();
    assert_eq!(a.policy_opt.lr, rl.ppo.lr);
    assert_eq!(b.policy_opt.lr, 1e-6);
    let moved = |l: &natadv::rl::Learner| pair.robot.policy.distance(&l.policy);
    assert!(moved(&b) < moved(&a));
}
