//! Co-optimizes a synthetic human with a robot, then trains a personalized
//! robot for the frozen human and reports deployment success.
//!
//! cargo run --release --example cooptimize -- [seed]

use natadv::env::{CursorAssist, CursorAssistConfig};
use natadv::rl::{cooptimize, evaluate, train_personalized, NnConfig, RlConfig};

fn main() -> natadv::Result<()> {
    env_logger::init();
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let env = CursorAssist::new(CursorAssistConfig::default())?;
    let nn = NnConfig::default();
    let rl = RlConfig::default();

    let t = std::time::Instant::now();
    let pair = cooptimize(&env, &nn, &rl, seed)?;
    for r in pair.history.iter().step_by(5) {
        println!(
            "coop iter {:3}  return {:8.2}  success {:.2}",
            r.iter, r.mean_return, r.success_rate
        );
    }
    let coop = evaluate(&env, &pair.human.policy, &pair.robot.policy, 100, seed)?;
    println!(
        "co-optimized pair: success {:.2}, return {:.2} ({:.1?})",
        coop.success_rate,
        coop.mean_return,
        t.elapsed()
    );

    let t = std::time::Instant::now();
    let personal = train_personalized(
        &pair.human.policy,
        &env,
        &nn,
        &rl,
        Some(&pair.robot.policy),
        seed,
    )?;
    let stats = evaluate(&env, &pair.human.policy, &personal.robot.policy, 100, seed)?;
    println!(
        "personalized robot: success {:.2}, return {:.2} ({:.1?})",
        stats.success_rate,
        stats.mean_return,
        t.elapsed()
    );
    Ok(())
}
