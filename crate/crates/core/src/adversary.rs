//! Natural-yet-adversarial partner training: PPO on the inverted task reward
//! minus a λ-weighted naturalness penalty, interleaved with discriminator
//! updates.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, CursorAssist, EpisodeStats, RolloutModes, Trajectory};
use crate::error::{Error, Result};
use crate::frontier::Normalization;
use crate::naturalness::{
    features, stacked_features, CanonicalDataset, DiscMetrics, Discriminator, GanConfig,
    MetricKind, MmdScorer, NaturalnessMetric,
};
use crate::nn::{GaussianPolicy, Policy};
use crate::rl::{
    build_batch, iteration_seed, ppo_update, EpisodeSamples, Learner, NnConfig, PpoConfig,
    PpoMetrics,
};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub lambda: f64,
    pub metric: MetricKind,
    pub iterations: usize,
    pub ppo: PpoConfig,
    /// Held-out episodes for the final naturalness and return.
    pub eval_episodes: usize,
    /// Exploration log-std the adversary starts from; the synthetic human's
    /// own when unset.
    pub init_log_std: Option<f64>,
    pub seed: u64,
}

impl Default for AdversaryConfig {
    /// Full-size settings: 120 iterations of 4,800 steps.
    fn default() -> Self {
        Self {
            lambda: 0.0,
            metric: MetricKind::LsGan,
            iterations: 120,
            ppo: PpoConfig {
                rl_coeff: 1.0,
                ..PpoConfig::default()
            },
            eval_episodes: 40,
            init_log_std: None,
            seed: 0,
        }
    }
}

impl AdversaryConfig {
    /// 120 iterations of 1,600 steps.
    pub fn desk() -> Self {
        Self {
            ppo: PpoConfig {
                rl_coeff: 1.0,
                ..PpoConfig::desk()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 || self.eval_episodes == 0 {
            return Err(Error::config(
                "attack iterations and eval_episodes must be > 0",
            ));
        }
        self.ppo.validate()
    }
}

/// Per-step adversary reward for discriminator metrics. `env_reward` is the
/// (scaled) shared task reward and `score` the discriminator output at the
/// step. MMD penalties are episode-level; see [`mmd_episode_penalty`].
pub fn adversary_reward(
    env_reward: f64,
    score: f64,
    lambda: f64,
    metric: MetricKind,
    c: f64,
) -> f64 {
    match metric {
        MetricKind::LsGan => -env_reward - lambda * (score - c).powi(2),
        MetricKind::KlLogistic => -env_reward - lambda * score,
        MetricKind::Mmd => -env_reward,
    }
}

/// Penalty added at the final step of an episode under the MMD metric.
pub fn mmd_episode_penalty(mmd2: f64, lambda: f64) -> f64 {
    -lambda * mmd2
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackIter {
    pub iter: usize,
    /// Mean robot return (unscaled) on this iteration's rollouts.
    pub robot_return: f64,
    /// Mean per-episode adversary reward actually optimized.
    pub adversary_return: f64,
    /// Mean per-episode naturalness penalty (positive).
    pub penalty: f64,
    pub ppo: PpoMetrics,
    pub disc: Option<DiscMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryResult {
    pub lambda: f64,
    pub metric: MetricKind,
    pub seed: u64,
    pub policy: GaussianPolicy,
    pub naturalness: f64,
    pub adversarialness: f64,
    pub robot_return: f64,
    pub success_rate: f64,
    pub curves: Vec<AttackIter>,
    pub final_metric: NaturalnessMetric,
    /// Held-out episodes the final numbers come from.
    pub evaluation: Vec<Trajectory>,
}

impl AdversaryResult {
    pub const CSV_HEADER: &'static str =
        "iter,robot_return,adversary_return,penalty,policy_loss,value_loss,approx_kl,disc_loss,disc_canonical_acc";

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for c in &self.curves {
            let d = c.disc.unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.iter,
                c.robot_return,
                c.adversary_return,
                c.penalty,
                c.ppo.policy_loss,
                c.ppo.value_loss,
                c.ppo.approx_kl,
                d.loss,
                d.canonical_accuracy
            ));
        }
        s
    }
}

fn fresh_metric(
    kind: MetricKind,
    canonical: &CanonicalDataset,
    gan: &GanConfig,
    seed: u64,
) -> Result<NaturalnessMetric> {
    Ok(match kind.disc_loss() {
        Some(loss) => NaturalnessMetric::Discriminator(Discriminator::for_dataset(
            loss, canonical, gan, seed,
        )?),
        None => NaturalnessMetric::Mmd(MmdScorer::fit(canonical, &gan.mmd, seed)?),
    })
}

/// Penalized adversary rewards for one episode, plus the episode's total
/// penalty.
fn shaped_rewards(
    traj: &Trajectory,
    metric: &NaturalnessMetric,
    cfg: &AdversaryConfig,
    gan: &GanConfig,
) -> Result<(Vec<f64>, f64)> {
    let scale = cfg.ppo.reward_scale;
    let mut rewards: Vec<f64>;
    let penalty;
    match metric {
        NaturalnessMetric::Discriminator(d) => {
            let scores = d.score_rows(features(traj).view())?;
            rewards = traj
                .rewards
                .iter()
                .zip(&scores)
                .map(|(&r, &s)| adversary_reward(scale * r, s, cfg.lambda, cfg.metric, gan.c))
                .collect();
            penalty = traj
                .rewards
                .iter()
                .zip(&rewards)
                .map(|(&r, &a)| -scale * r - a)
                .sum();
        }
        NaturalnessMetric::Mmd(m) => {
            rewards = traj.rewards.iter().map(|&r| -scale * r).collect();
            let p = mmd_episode_penalty(m.episode_mmd2(traj)?, cfg.lambda);
            if let Some(last) = rewards.last_mut() {
                *last += p;
            }
            penalty = -p;
        }
    }
    Ok((rewards, penalty))
}

/// Trains an adversarial human against the frozen `robot`, starting from
/// the synthetic human `init`.
#[allow(clippy::too_many_arguments)]
pub fn train_adversary(
    env: &CursorAssist,
    robot: &dyn Policy,
    init: &GaussianPolicy,
    canonical: &CanonicalDataset,
    nn: &NnConfig,
    gan: &GanConfig,
    cfg: &AdversaryConfig,
    normalization: Normalization,
) -> Result<AdversaryResult> {
    cfg.validate()?;
    gan.validate()?;
    let attack_seed = seed::derive(cfg.seed, stream::ATTACK);
    let mut init_rng = seed::rng_for(attack_seed, stream::INIT);
    let mut start = init.clone();
    if let Some(v) = cfg.init_log_std {
        start
            .log_std
            .fill(v.clamp(start.log_std_min, start.log_std_max));
    }
    let mut learner = Learner::new(start, &nn.hidden, &cfg.ppo, &mut init_rng)?;
    let mut metric = fresh_metric(cfg.metric, canonical, gan, attack_seed)?;
    let canonical_x: Array2<f64> = canonical.features();
    let mut shuffle = seed::rng_for(attack_seed, stream::SHUFFLE);
    let mut disc_rng = seed::rng_for(attack_seed, stream::NOISE);
    let n_ep = (cfg.ppo.steps_per_iter / env.spec().horizon).max(1);
    let mut curves = Vec::with_capacity(cfg.iterations);
    let mut warned = false;

    for it in 0..cfg.iterations {
        let trajs = rollout(
            env,
            &learner.policy,
            robot,
            n_ep,
            iteration_seed(attack_seed, it),
            RolloutModes::DEPLOY,
        )?;
        let mut rewards = Vec::with_capacity(trajs.len());
        let mut penalty = 0.0;
        for t in &trajs {
            let (r, p) = shaped_rewards(t, &metric, cfg, gan)?;
            rewards.push(r);
            penalty += p;
        }
        let samples: Vec<_> = trajs
            .iter()
            .zip(&rewards)
            .map(|(t, r)| EpisodeSamples {
                obs: &t.human_obs,
                actions: &t.human_actions,
                rewards: r,
            })
            .collect();
        let batch = build_batch(&learner, &samples, &cfg.ppo)?;
        let ppo = ppo_update(&mut learner, &batch, &cfg.ppo, &mut shuffle)?;

        let mut disc_metrics = None;
        if let NaturalnessMetric::Discriminator(d) = &mut metric {
            let adv_x = stacked_features(&trajs);
            for _ in 0..gan.updates_per_iter {
                disc_metrics = Some(d.update(adv_x.view(), canonical_x.view(), &mut disc_rng)?);
            }
            if let Some(m) = disc_metrics {
                if m.canonical_accuracy < 0.6 && !warned {
                    log::warn!(
                        "λ={} seed={}: discriminator canonical accuracy {:.2} at iteration {it}; possible mode collapse",
                        cfg.lambda,
                        cfg.seed,
                        m.canonical_accuracy
                    );
                    warned = true;
                }
            }
        }
        let n = trajs.len() as f64;
        curves.push(AttackIter {
            iter: it,
            robot_return: EpisodeStats::of(&trajs).mean_return,
            adversary_return: rewards.iter().map(|r| r.iter().sum::<f64>()).sum::<f64>() / n,
            penalty: penalty / n,
            ppo,
            disc: disc_metrics,
        });
    }

    let eval = rollout(
        env,
        &learner.policy,
        robot,
        cfg.eval_episodes,
        seed::derive(attack_seed, stream::EVAL),
        RolloutModes::DEPLOY,
    )?;
    let stats = EpisodeStats::of(&eval);
    let naturalness = metric.naturalness(&eval)?;
    Ok(AdversaryResult {
        lambda: cfg.lambda,
        metric: cfg.metric,
        seed: cfg.seed,
        policy: learner.policy,
        naturalness,
        adversarialness: normalization.adversarialness(stats.mean_return),
        robot_return: stats.mean_return,
        success_rate: stats.success_rate,
        curves,
        final_metric: metric,
        evaluation: eval,
    })
}

/// Measured endpoints of the adversarialness scale for one robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub cooperative_return: f64,
    pub adversary_return: f64,
    pub normalization: Normalization,
}

/// Cooperative return of (`human`, `robot`) and the return under a λ=0
/// adversary, trained with `cfg`'s budget.
#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    env: &CursorAssist,
    robot: &dyn Policy,
    human: &GaussianPolicy,
    canonical: &CanonicalDataset,
    nn: &NnConfig,
    gan: &GanConfig,
    cfg: &AdversaryConfig,
    eval_episodes: usize,
) -> Result<Calibration> {
    Ok(calibrate_run(env, robot, human, canonical, nn, gan, cfg, eval_episodes)?.0)
}

/// [`calibrate`], also returning the λ=0 run with adversarialness on the
/// calibrated scale.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_run(
    env: &CursorAssist,
    robot: &dyn Policy,
    human: &GaussianPolicy,
    canonical: &CanonicalDataset,
    nn: &NnConfig,
    gan: &GanConfig,
    cfg: &AdversaryConfig,
    eval_episodes: usize,
) -> Result<(Calibration, AdversaryResult)> {
    let coop = crate::rl::evaluate(
        env,
        human,
        robot,
        eval_episodes,
        seed::derive(cfg.seed, stream::CALIBRATE),
    )?;
    let probe = calibration_config(cfg);
    // Any valid range works here; only the raw return is used.
    let placeholder = Normalization::new(0.0, 1.0)?;
    let mut adv = train_adversary(env, robot, human, canonical, nn, gan, &probe, placeholder)?;
    let normalization = Normalization::from_returns(
        coop.mean_return,
        adv.robot_return.min(coop.mean_return - 1e-9),
    )?;
    adv.adversarialness = normalization.adversarialness(adv.robot_return);
    Ok((
        Calibration {
            cooperative_return: coop.mean_return,
            adversary_return: adv.robot_return,
            normalization,
        },
        adv,
    ))
}

/// The λ=0 attack configuration [`calibrate`] trains.
pub fn calibration_config(cfg: &AdversaryConfig) -> AdversaryConfig {
    AdversaryConfig {
        lambda: 0.0,
        seed: seed::derive(cfg.seed, stream::CALIBRATE),
        ..cfg.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_inverts_reward_exactly() {
        for r in [-3.25, 0.0, 1.5, 1e-9] {
            for kind in [MetricKind::LsGan, MetricKind::KlLogistic, MetricKind::Mmd] {
                assert_eq!(
                    adversary_reward(r, 0.7, 0.0, kind, 0.0).to_bits(),
                    (-r).to_bits()
                );
            }
        }
    }

    #[test]
    fn ls_gan_penalty_arithmetic() {
        assert_eq!(
            adversary_reward(0.0, 2.0, 0.5, MetricKind::LsGan, 0.0),
            -2.0
        );
        assert_eq!(
            adversary_reward(1.0, -1.0, 2.0, MetricKind::KlLogistic, 0.0),
            1.0
        );
    }

    #[test]
    fn large_lambda_is_dominated_by_penalty() {
        let r = adversary_reward(5.0, 0.3, 1e6, MetricKind::LsGan, 0.0);
        assert!(r < 0.0);
        assert!((r - (-5.0 - 1e6 * 0.09)).abs() < 1e-6);
        assert!(adversary_reward(-5.0, 0.3, 1e6, MetricKind::LsGan, 0.0) < 0.0);
    }

    #[test]
    fn invalid_lambda_is_rejected() {
        let cfg = AdversaryConfig {
            lambda: -1.0,
            ..AdversaryConfig::desk()
        };
        assert!(cfg.validate().is_err());
    }
}
