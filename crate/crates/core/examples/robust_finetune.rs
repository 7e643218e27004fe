//! Full pipeline: co-optimize, personalize a robot, scan λ to build its
//! frontier, fine-tune the robot against failure cases from that frontier,
//! and compare the two frontiers on the same normalization and canonical
//! data. A lower AUC means a more robust robot.
//!
//! cargo run --release --example robust_finetune -- [store_dir]

use natadv::config::RunConfig;
use natadv::naturalness::MetricKind;
use natadv::runstore::RunStore;
use natadv::workflow::{ScanRequest, Workflow};

fn main() -> natadv::Result<()> {
    env_logger::init();
    let root = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "natadv-examples".into());
    let mut cfg = RunConfig::default();
    cfg.scan.seeds = vec![0, 1, 2];
    let wf = Workflow::new(RunStore::open(format!("{root}/runs"))?, cfg.clone())?;

    let coop = wf.cooptimize(0)?;
    let robot_id = wf.train_robot(&coop, 0, true)?;
    let request = |robot_id: &str| ScanRequest {
        robot_id: robot_id.to_string(),
        canonical: None,
        metric: MetricKind::LsGan,
        seed: 0,
        config: cfg.clone(),
    };
    let progress = |r: &natadv::rigid::ScanRun| {
        println!(
            "  lambda {:.3e} seed {} nat {:.3} adv {:.3}",
            r.lambda,
            r.seed,
            r.naturalness.unwrap_or(f64::NAN),
            r.adversarialness.unwrap_or(f64::NAN)
        )
    };

    println!("scanning the personalized robot");
    let vanilla = wf.scan(&request(&robot_id), 1, None, &progress)?;
    let frontier = wf.scan_frontier(&vanilla.scan_id)?;
    let ft_id = wf.robust_ft(&robot_id, &frontier, 0)?;
    let ft = wf.store.load(&ft_id)?;
    println!(
        "fine-tuned against {} with base-human success {}",
        ft.record.summary["adversaries"], ft.record.summary["success_rate"]
    );
    println!("scanning the fine-tuned robot");
    let robust = wf.scan(&request(&ft_id), 1, None, &progress)?;
    println!(
        "median per-seed AUC: vanilla {:.4}, robust {:.4}",
        vanilla.median_seed_auc(),
        robust.median_seed_auc()
    );
    Ok(())
}
