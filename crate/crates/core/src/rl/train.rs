use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ppo::{build_batch, ppo_update, EpisodeSamples, Learner, PpoConfig, PpoMetrics};
use crate::env::{episode_seed, CursorAssist, EpisodeStats, RolloutModes, Trajectory};
use crate::error::{Error, Result};
use crate::nn::{GaussianPolicy, Policy};
use crate::seed::{self, stream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            init_log_std: 0.0,
            log_std_min: -5.0,
            log_std_max: 1.0,
        }
    }
}

impl NnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("nn.hidden sizes must be > 0"));
        }
        if self.log_std_min >= self.log_std_max {
            return Err(Error::config("nn.log_std_min must be below nn.log_std_max"));
        }
        Ok(())
    }

    pub fn policy(
        &self,
        obs_dim: usize,
        action_dim: usize,
        rng: &mut Rng,
    ) -> Result<GaussianPolicy> {
        GaussianPolicy::new(
            obs_dim,
            action_dim,
            &self.hidden,
            self.init_log_std,
            (self.log_std_min, self.log_std_max),
            rng,
        )
    }

    pub fn learner(
        &self,
        obs_dim: usize,
        action_dim: usize,
        ppo: &PpoConfig,
        rng: &mut Rng,
    ) -> Result<Learner> {
        let policy = self.policy(obs_dim, action_dim, rng)?;
        Learner::new(policy, &self.hidden, ppo, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub ppo: PpoConfig,
    pub coop_iterations: usize,
    pub robot_iterations: usize,
    /// Co-optimization iterations at the start during which only the human
    /// learns.
    pub robot_warmup: usize,
    /// Abort when the mean return stays below the floor this many
    /// iterations in a row.
    pub divergence_window: usize,
    /// Defaults to half the environment's minimum return.
    pub divergence_floor: Option<f64>,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::desk(),
            coop_iterations: 150,
            robot_iterations: 100,
            robot_warmup: 30,
            divergence_window: 50,
            divergence_floor: None,
        }
    }
}

/// One row of a training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub human: Option<PpoMetrics>,
    pub robot: Option<PpoMetrics>,
}

impl IterRecord {
    pub const CSV_HEADER: &'static str =
        "iter,return,success,policy_loss,value_loss,bc_loss,approx_kl,entropy";

    /// Robot-side losses when present, otherwise the human's.
    pub fn csv_row(&self) -> String {
        let m = self.robot.or(self.human).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iter,
            self.mean_return,
            self.success_rate,
            m.policy_loss,
            m.value_loss,
            m.bc_loss,
            m.approx_kl,
            m.entropy
        )
    }
}

pub fn metrics_csv(history: &[IterRecord]) -> String {
    let mut s = String::from(IterRecord::CSV_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Seed for the rollouts of training iteration `iter`.
pub fn iteration_seed(seed: u64, iter: usize) -> u64 {
    seed::derive(seed::derive(seed, stream::EPISODE), iter as u64)
}

struct DivergenceGuard {
    floor: f64,
    window: usize,
    below: usize,
}

impl DivergenceGuard {
    fn new(env: &CursorAssist, rl: &RlConfig) -> Self {
        Self {
            floor: rl
                .divergence_floor
                .unwrap_or(0.5 * env.spec().reward_range_hint.0),
            window: rl.divergence_window.max(1),
            below: 0,
        }
    }

    fn observe(&mut self, iter: usize, mean_return: f64) -> Result<()> {
        if !mean_return.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite return at iteration {iter}"
            )));
        }
        if mean_return < self.floor {
            self.below += 1;
        } else {
            self.below = 0;
        }
        if self.below >= self.window {
            return Err(Error::Diverged(format!(
                "mean return below {} for {} iterations (last {mean_return:.2} at iteration {iter})",
                self.floor, self.window
            )));
        }
        Ok(())
    }
}

fn scaled_rewards(trajs: &[Trajectory], scale: f64) -> Vec<Vec<f64>> {
    trajs
        .iter()
        .map(|t| t.rewards.iter().map(|r| r * scale).collect())
        .collect()
}

/// Human and robot trained jointly on the shared reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopPair {
    pub human: Learner,
    pub robot: Learner,
    pub history: Vec<IterRecord>,
}

fn episodes_per_iter(env: &CursorAssist, ppo: &PpoConfig) -> usize {
    (ppo.steps_per_iter / env.spec().horizon).max(1)
}

/// Trains a fresh human/robot pair on the shared reward, updating both
/// players every iteration.
pub fn cooptimize(env: &CursorAssist, nn: &NnConfig, rl: &RlConfig, seed: u64) -> Result<CoopPair> {
    nn.validate()?;
    rl.ppo.validate()?;
    let spec = env.spec();
    let ppo = PpoConfig {
        rl_coeff: 1.0,
        ..rl.ppo.clone()
    };
    let mut init = seed::rng_for(seed, stream::INIT);
    let mut human = nn.learner(spec.human_obs_dim, spec.human_action_dim, &ppo, &mut init)?;
    let mut robot = nn.learner(spec.robot_obs_dim, spec.robot_action_dim, &ppo, &mut init)?;
    let mut shuffle = seed::rng_for(seed, stream::SHUFFLE);
    let mut guard = DivergenceGuard::new(env, rl);
    let n_ep = episodes_per_iter(env, &ppo);
    let mut history = Vec::with_capacity(rl.coop_iterations);

    for it in 0..rl.coop_iterations {
        let trajs = crate::env::rollout(
            env,
            &human.policy,
            &robot.policy,
            n_ep,
            iteration_seed(seed, it),
            RolloutModes::TRAIN,
        )?;
        let rewards = scaled_rewards(&trajs, ppo.reward_scale);
        let h_samples: Vec<_> = trajs
            .iter()
            .zip(&rewards)
            .map(|(t, r)| EpisodeSamples {
                obs: &t.human_obs,
                actions: &t.human_actions,
                rewards: r,
            })
            .collect();
        let r_samples: Vec<_> = trajs
            .iter()
            .zip(&rewards)
            .map(|(t, r)| EpisodeSamples {
                obs: &t.robot_obs,
                actions: &t.robot_actions,
                rewards: r,
            })
            .collect();
        let hb = build_batch(&human, &h_samples, &ppo)?;
        let rb = build_batch(&robot, &r_samples, &ppo)?;
        let hm = ppo_update(&mut human, &hb, &ppo, &mut shuffle)?;
        let rm = if it >= rl.robot_warmup {
            Some(ppo_update(&mut robot, &rb, &ppo, &mut shuffle)?)
        } else {
            None
        };
        let stats = EpisodeStats::of(&trajs);
        log::debug!(
            "cooptimize iter {it}: return {:.2} success {:.2}",
            stats.mean_return,
            stats.success_rate
        );
        history.push(IterRecord {
            iter: it,
            mean_return: stats.mean_return,
            success_rate: stats.success_rate,
            human: Some(hm),
            robot: rm,
        });
        guard.observe(it, stats.mean_return)?;
    }
    Ok(CoopPair {
        human,
        robot,
        history,
    })
}

/// Who partners the robot in each training episode: the base human, or
/// with probability `rate` one of `others` chosen uniformly.
pub struct Partners<'a> {
    pub base: &'a dyn Policy,
    pub others: Vec<&'a dyn Policy>,
    pub rate: f64,
}

impl<'a> Partners<'a> {
    pub fn only(base: &'a dyn Policy) -> Self {
        Self {
            base,
            others: Vec::new(),
            rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::config(format!(
                "partner rate must be in [0,1], got {}",
                self.rate
            )));
        }
        if self.rate > 0.0 && self.others.is_empty() {
            return Err(Error::config(
                "partner rate > 0 needs at least one alternative partner",
            ));
        }
        Ok(())
    }

    /// Index of the drawn partner: 0 for the base human, `k` for
    /// `others[k - 1]`.
    pub fn draw(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        if self.others.is_empty() || u >= self.rate {
            0
        } else {
            1 + rng.gen_range(0..self.others.len())
        }
    }

    pub fn get(&self, index: usize) -> &'a dyn Policy {
        if index == 0 {
            self.base
        } else {
            self.others[index - 1]
        }
    }
}

/// Partner indices for `count` episodes; a pure function of the inputs.
pub fn partner_schedule(partners: &Partners<'_>, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng_for(seed, stream::PARTNER);
    (0..count).map(|_| partners.draw(&mut rng)).collect()
}

/// Continues PPO on `learner` as the robot, against `partners`, for
/// `iterations` iterations. With an expert the loss adds the
/// behaviour-cloning term weighted by `bc_coeff` and scales the PPO term
/// by `rl_coeff`; without one the PPO term is used alone.
#[allow(clippy::too_many_arguments)]
pub fn train_robot(
    learner: &mut Learner,
    env: &CursorAssist,
    partners: &Partners<'_>,
    expert: Option<&GaussianPolicy>,
    rl: &RlConfig,
    iterations: usize,
    seed: u64,
) -> Result<Vec<IterRecord>> {
    rl.ppo.validate()?;
    partners.validate()?;
    let ppo = if expert.is_some() {
        rl.ppo.clone()
    } else {
        PpoConfig {
            rl_coeff: 1.0,
            ..rl.ppo.clone()
        }
    };
    let mut shuffle = seed::rng_for(seed, stream::SHUFFLE);
    let mut guard = DivergenceGuard::new(env, rl);
    let n_ep = episodes_per_iter(env, &ppo);
    let schedule = partner_schedule(partners, n_ep * iterations, seed);
    let mut history = Vec::with_capacity(iterations);

    for it in 0..iterations {
        let iter_seed = iteration_seed(seed, it);
        let trajs = (0..n_ep)
            .map(|i| {
                let human = partners.get(schedule[it * n_ep + i]);
                env.run_episode(
                    human,
                    &learner.policy,
                    episode_seed(iter_seed, i),
                    RolloutModes::TRAIN,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let rewards = scaled_rewards(&trajs, ppo.reward_scale);
        let samples: Vec<_> = trajs
            .iter()
            .zip(&rewards)
            .map(|(t, r)| EpisodeSamples {
                obs: &t.robot_obs,
                actions: &t.robot_actions,
                rewards: r,
            })
            .collect();
        let mut batch = build_batch(learner, &samples, &ppo)?;
        if let Some(expert) = expert {
            batch.expert_actions = Some(expert.mean_batch(batch.obs.view())?);
        }
        let m = ppo_update(learner, &batch, &ppo, &mut shuffle)?;
        let stats = EpisodeStats::of(&trajs);
        history.push(IterRecord {
            iter: it,
            mean_return: stats.mean_return,
            success_rate: stats.success_rate,
            human: None,
            robot: Some(m),
        });
        guard.observe(it, stats.mean_return)?;
    }
    Ok(history)
}

/// Result of training a robot for a frozen human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotTraining {
    pub robot: Learner,
    pub history: Vec<IterRecord>,
}

/// Trains a fresh robot to assist the frozen `human`, optionally guided by
/// an expert robot policy.
pub fn train_personalized(
    human: &GaussianPolicy,
    env: &CursorAssist,
    nn: &NnConfig,
    rl: &RlConfig,
    expert: Option<&GaussianPolicy>,
    seed: u64,
) -> Result<RobotTraining> {
    nn.validate()?;
    let spec = env.spec();
    let mut init = seed::rng_for(seed, stream::INIT);
    let mut robot = nn.learner(
        spec.robot_obs_dim,
        spec.robot_action_dim,
        &rl.ppo,
        &mut init,
    )?;
    let history = train_robot(
        &mut robot,
        env,
        &Partners::only(human),
        expert,
        rl,
        rl.robot_iterations,
        seed,
    )?;
    Ok(RobotTraining { robot, history })
}

/// Deployment-mode statistics (sampling human, greedy robot) on evaluation
/// seeds disjoint from every training stream.
pub fn evaluate(
    env: &CursorAssist,
    human: &dyn Policy,
    robot: &dyn Policy,
    episodes: usize,
    seed: u64,
) -> Result<EpisodeStats> {
    let trajs = crate::env::rollout(
        env,
        human,
        robot,
        episodes,
        seed::derive(seed, stream::EVAL),
        RolloutModes::DEPLOY,
    )?;
    Ok(EpisodeStats::of(&trajs))
}
