//! Trains a natural-adversarial human against a personalized robot at one
//! λ and reports naturalness, adversarialness and the robot's return. Runs
//! are cached in the store, so repeated calls are instant.
//!
//! cargo run --release --example attack -- [lambda] [store_dir]

use natadv::config::RunConfig;
use natadv::naturalness::MetricKind;
use natadv::runstore::RunStore;
use natadv::workflow::Workflow;

fn main() -> natadv::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let lambda: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let root = args.next().unwrap_or_else(|| "natadv-examples".into());
    let wf = Workflow::new(
        RunStore::open(format!("{root}/runs"))?,
        RunConfig::default(),
    )?;

    let coop = wf.cooptimize(0)?;
    let robot_id = wf.train_robot(&coop, 0, true)?;
    let robot = wf.robot(&robot_id)?;
    let (norm, cal) = wf.normalization(&robot, MetricKind::LsGan, 0)?;
    if let Some(c) = cal {
        println!(
            "calibration: cooperative return {:.1}, unconstrained adversary return {:.1}",
            c.cooperative_return, c.adversary_return
        );
    }
    let s = wf.attack(&robot, lambda, MetricKind::LsGan, 0, norm)?;
    println!(
        "lambda {:e}: naturalness {:.3}, adversarialness {:.3}, robot return {:.1}, success {:.2} (run {})",
        s.lambda, s.naturalness, s.adversarialness, s.robot_return, s.success_rate, s.run_id
    );
    Ok(())
}
