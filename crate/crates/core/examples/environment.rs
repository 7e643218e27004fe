//! Plays CursorAssist episodes with scripted partners and prints returns.
//!
//! cargo run --release --example environment

use natadv::env::{rollout, CursorAssist, CursorAssistConfig, EpisodeStats, RolloutModes};
use natadv::nn::{UniformPolicy, ZeroPolicy};

fn main() -> natadv::Result<()> {
    let env = CursorAssist::new(CursorAssistConfig::default())?;
    let spec = env.spec();
    println!("{spec:?}");
    let robot = ZeroPolicy {
        obs_dim: spec.robot_obs_dim,
        action_dim: spec.robot_action_dim,
    };
    for scale in [0.0, 0.3, 1.0] {
        let human = UniformPolicy {
            obs_dim: spec.human_obs_dim,
            action_dim: spec.human_action_dim,
            scale,
        };
        let trajs = rollout(&env, &human, &robot, 20, 0, RolloutModes::DEPLOY)?;
        let stats = EpisodeStats::of(&trajs);
        println!(
            "uniform human scale {scale}: return {:.2}, success {:.2}, {} steps per episode",
            stats.mean_return,
            stats.success_rate,
            trajs[0].len()
        );
    }
    Ok(())
}
