//! Scores natural and unnatural behaviour against a canonical dataset with
//! the LS-GAN and KL discriminators and the MMD scorer, then probes the
//! LS-GAN discriminator under input noise.
//!
//! cargo run --release --example naturalness

use natadv::env::{CursorAssist, CursorAssistConfig};
use natadv::naturalness::{
    probe_discriminator, stacked_features, CanonicalDataset, DiscLoss, Discriminator, GanConfig,
    MmdConfig, MmdScorer,
};
use natadv::nn::{ActionMode, Policy, UniformPolicy};
use natadv::seed::{self, Rng};

/// A human that ignores its goal and pushes toward one corner.
struct CornerPusher {
    obs_dim: usize,
}

impl Policy for CornerPusher {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }
    fn action_dim(&self) -> usize {
        2
    }
    fn act(&self, _: &[f64], _: &mut Rng, _: ActionMode) -> Vec<f64> {
        vec![1.0, 1.0]
    }
}

fn main() -> natadv::Result<()> {
    let env = CursorAssist::new(CursorAssistConfig::default())?;
    let spec = env.spec();
    let human = |scale| UniformPolicy {
        obs_dim: spec.human_obs_dim,
        action_dim: spec.human_action_dim,
        scale,
    };
    let robot = UniformPolicy {
        obs_dim: spec.robot_obs_dim,
        action_dim: spec.robot_action_dim,
        scale: 0.2,
    };
    let canonical = CanonicalDataset::collect(&env, &human(0.2), &robot, 40, 0)?;
    let natural = CanonicalDataset::collect(&env, &human(0.2), &robot, 40, 1)?;
    let pusher = CornerPusher {
        obs_dim: spec.human_obs_dim,
    };
    let wild = CanonicalDataset::collect(&env, &pusher, &robot, 40, 1)?;

    let gan = GanConfig::desk();
    for loss in [DiscLoss::LsGan, DiscLoss::KlLogistic] {
        let mut d = Discriminator::for_dataset(loss, &canonical, &gan, 0)?;
        let mut rng = seed::rng(1);
        let (xa, xc) = (stacked_features(wild.trajectories()), canonical.features());
        for _ in 0..300 {
            d.update(xa.view(), xc.view(), &mut rng)?;
        }
        println!(
            "{loss:?}: naturalness natural {:.2} wild {:.2}, chi2 estimate on wild {:.3}",
            d.naturalness(natural.trajectories())?,
            d.naturalness(wild.trajectories())?,
            d.chi2_estimate(wild.trajectories())?
        );
        if loss == DiscLoss::LsGan {
            let levels = [0.0, 1.0, 5.0, 20.0];
            let acc = probe_discriminator(&d, &canonical, &levels, 2)?;
            for (l, a) in levels.iter().zip(acc) {
                println!("  probe noise {l:>4}: canonical accuracy {a:.2}");
            }
        }
    }

    let mmd = MmdScorer::fit(&canonical, &MmdConfig::default(), 0)?;
    println!(
        "MMD: naturalness natural {:.2} wild {:.2}",
        mmd.naturalness(natural.trajectories())?,
        mmd.naturalness(wild.trajectories())?
    );
    Ok(())
}
