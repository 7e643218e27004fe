use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, AdamState, GaussianPolicy, Mlp, Tape};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs_per_iter: usize,
    pub minibatches: usize,
    pub steps_per_iter: usize,
    pub value_clip: f64,
    pub grad_clip: f64,
    pub bc_coeff: f64,
    pub rl_coeff: f64,
    pub entropy_coeff: f64,
    pub lr: f64,
    pub critic_lr: f64,
    pub adam_eps: f64,
    /// Multiplier applied to environment rewards before learning.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    /// Values stated for the full-size experiments.
    fn default() -> Self {
        Self {
            clip_eps: 0.3,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs_per_iter: 30,
            minibatches: 20,
            steps_per_iter: 4800,
            value_clip: 10.0,
            grad_clip: 20.0,
            bc_coeff: 1.0,
            rl_coeff: 0.1,
            entropy_coeff: 0.001,
            lr: 5e-5,
            critic_lr: 5e-5,
            adam_eps: 1e-4,
            reward_scale: 0.1,
        }
    }
}

impl PpoConfig {
    /// Small preset that trains the desk-scale task in seconds on one core.
    pub fn desk() -> Self {
        Self {
            epochs_per_iter: 4,
            minibatches: 4,
            steps_per_iter: 1600,
            lr: 1e-3,
            critic_lr: 2e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config(format!(
                "clip_eps must be in (0,1), got {}",
                self.clip_eps
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!(
                "gamma must be in (0,1], got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("gae_lambda must be in [0,1]"));
        }
        if self.epochs_per_iter == 0 || self.minibatches == 0 || self.steps_per_iter == 0 {
            return Err(Error::config("PPO counts must be > 0"));
        }
        if self.lr <= 0.0 || self.critic_lr <= 0.0 || self.adam_eps <= 0.0 {
            return Err(Error::config("learning rates and adam_eps must be > 0"));
        }
        Ok(())
    }
}

/// The clipped PPO surrogate for one sample.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Generalised advantage estimates for one finite-horizon episode that
/// terminates after its last step. Returns `(advantages, returns)`.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_v - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// A policy, its value baseline and both optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub policy_opt: AdamState,
    pub critic_opt: AdamState,
}

impl Learner {
    pub fn new(
        policy: GaussianPolicy,
        critic_hidden: &[usize],
        cfg: &PpoConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut sizes = vec![policy.mean.input_dim()];
        sizes.extend_from_slice(critic_hidden);
        sizes.push(1);
        let critic = Mlp::new(&sizes, 1.0, rng)?;
        Ok(Self::from_parts(policy, critic, cfg))
    }

    pub fn from_parts(policy: GaussianPolicy, critic: Mlp, cfg: &PpoConfig) -> Self {
        let policy_opt = AdamState::new(policy.params(), cfg.lr, cfg.adam_eps);
        let critic_opt = AdamState::new(critic.params(), cfg.critic_lr, cfg.adam_eps);
        Self {
            policy,
            critic,
            policy_opt,
            critic_opt,
        }
    }

    pub fn values(&self, obs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self
            .critic
            .forward_batch(obs.view())?
            .into_raw_vec_and_offset()
            .0)
    }
}

/// Flattened on-policy samples with the statistics PPO needs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub old_log_prob: Vec<f64>,
    pub old_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Behaviour-cloning targets, one row per sample.
    pub expert_actions: Option<Array2<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.nrows() == 0
    }
}

/// One episode's worth of samples for a single player.
pub struct EpisodeSamples<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [Vec<f64>],
    pub rewards: &'a [f64],
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, cols: usize) -> Result<Array2<f64>> {
    let flat: Vec<f64> = rows.flatten().collect();
    let n = flat.len() / cols.max(1);
    Array2::from_shape_vec((n, cols), flat).map_err(|e| Error::contract(e.to_string()))
}

/// Evaluates the learner on every sample, runs GAE per episode and packs
/// the result. Rewards are used as given, so callers apply any scaling.
/// Old log-probabilities come from the same recorded computation the
/// update uses, so fresh ratios are exactly one.
pub fn build_batch(
    learner: &Learner,
    episodes: &[EpisodeSamples<'_>],
    cfg: &PpoConfig,
) -> Result<Batch> {
    if episodes.iter().all(|e| e.obs.is_empty()) {
        return Err(Error::contract("empty PPO batch"));
    }
    let obs_dim = learner.policy.mean.input_dim();
    let act_dim = learner.policy.mean.output_dim();
    let obs = stack(episodes.iter().flat_map(|e| e.obs.iter().cloned()), obs_dim)?;
    let actions = stack(
        episodes.iter().flat_map(|e| e.actions.iter().cloned()),
        act_dim,
    )?;
    let old_values = learner.values(&obs)?;
    let old_log_prob = log_probs(&learner.policy, &obs, &actions);

    let mut advantages = Vec::with_capacity(obs.nrows());
    let mut returns = Vec::with_capacity(obs.nrows());
    let mut offset = 0;
    for e in episodes {
        let n = e.rewards.len();
        let (a, r) = gae(
            e.rewards,
            &old_values[offset..offset + n],
            cfg.gamma,
            cfg.gae_lambda,
        );
        advantages.extend(a);
        returns.extend(r);
        offset += n;
    }
    Ok(Batch {
        obs,
        actions,
        old_log_prob,
        old_values,
        advantages,
        returns,
        expert_actions: None,
    })
}

/// Per-row log-densities computed through the tape.
pub fn log_probs(policy: &GaussianPolicy, obs: &Array2<f64>, actions: &Array2<f64>) -> Vec<f64> {
    let mut tape = Tape::new();
    let vars = policy.bind(&mut tape);
    let o = tape.leaf(obs.clone());
    let a = tape.leaf(actions.clone());
    let (lp, _) = policy.record_log_prob(&mut tape, &vars, o, a);
    tape.value(lp).iter().copied().collect()
}

/// Importance ratios of `policy` against the batch's stored log-densities.
pub fn importance_ratios(policy: &GaussianPolicy, batch: &Batch) -> Vec<f64> {
    log_probs(policy, &batch.obs, &batch.actions)
        .iter()
        .zip(&batch.old_log_prob)
        .map(|(new, old)| (new - old).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub bc_loss: f64,
    pub entropy: f64,
    /// Mean `log π_old − log π_new` over the batch after the update.
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

fn normalized(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-8 {
        adv.iter().map(|a| a - mean).collect()
    } else {
        adv.iter().map(|a| (a - mean) / std).collect()
    }
}

fn column(v: &[f64], idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), 1), |(i, _)| v[idx[i]])
}

fn check_finite(what: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Optimizer(format!("non-finite {what} loss")))
    }
}

/// Runs `epochs_per_iter × minibatches` clipped-surrogate steps on the
/// policy and clipped-value steps on the critic. The configured learning
/// rates apply even to a learner resumed from a checkpoint.
pub fn ppo_update(
    learner: &mut Learner,
    batch: &Batch,
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<PpoMetrics> {
    if batch.is_empty() {
        return Err(Error::contract("empty PPO batch"));
    }
    learner.policy_opt.lr = cfg.lr;
    learner.critic_opt.lr = cfg.critic_lr;
    let n = batch.len();
    let adv = normalized(&batch.advantages);
    let mut order: Vec<usize> = (0..n).collect();
    let mb_size = n.div_ceil(cfg.minibatches);
    let mut metrics = PpoMetrics::default();
    let mut steps = 0usize;

    for _ in 0..cfg.epochs_per_iter {
        order.shuffle(rng);
        for idx in order.chunks(mb_size) {
            let obs = batch.obs.select(Axis(0), idx);
            let actions = batch.actions.select(Axis(0), idx);

            // Policy step.
            let mut tape = Tape::new();
            let vars = learner.policy.bind(&mut tape);
            let o = tape.leaf(obs.clone());
            let a = tape.leaf(actions);
            let (lp, mu) = learner.policy.record_log_prob(&mut tape, &vars, o, a);
            let old = tape.leaf(column(&batch.old_log_prob, idx));
            let log_ratio = tape.sub(lp, old);
            let ratio = tape.exp(log_ratio);
            let a_mb = tape.leaf(column(&adv, idx));
            let s1 = tape.mul(ratio, a_mb);
            let clipped = tape.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
            let s2 = tape.mul(clipped, a_mb);
            let surr = tape.minimum(s1, s2);
            let surr = tape.mean(surr);
            let pg_loss = tape.neg(surr);
            let entropy = learner.policy.record_entropy(&mut tape, &vars);
            let mut loss = tape.scale(pg_loss, cfg.rl_coeff);
            let ent_term = tape.scale(entropy, -cfg.entropy_coeff);
            loss = tape.add(loss, ent_term);
            let mut bc_value = 0.0;
            if let Some(expert) = &batch.expert_actions {
                let target = tape.leaf(expert.select(Axis(0), idx));
                let diff = tape.sub(mu, target);
                let sq = tape.square(diff);
                let per_row = tape.row_sum(sq);
                let bc = tape.mean(per_row);
                bc_value = tape.item(bc);
                let bc_term = tape.scale(bc, cfg.bc_coeff);
                loss = tape.add(loss, bc_term);
            }
            check_finite("policy", tape.item(loss))?;
            let pg_value = tape.item(pg_loss);
            let grads = tape.backward(loss);
            let mut g: Vec<Array2<f64>> = vars.mean.iter().map(|&v| grads.wrt(v)).collect();
            g.push(grads.wrt(vars.log_std));
            clip_grad_norm(&mut g, cfg.grad_clip);
            learner
                .policy_opt
                .update(&mut learner.policy.params_mut(), &g)?;

            // Critic step.
            let mut tape = Tape::new();
            let cvars = learner.critic.bind(&mut tape);
            let o = tape.leaf(obs);
            let v = Mlp::apply(&mut tape, &cvars, o).output;
            let ret = tape.leaf(column(&batch.returns, idx));
            let v_old = tape.leaf(column(&batch.old_values, idx));
            let dv = tape.sub(v, v_old);
            let dv = tape.clamp(dv, -cfg.value_clip, cfg.value_clip);
            let v_clipped = tape.add(v_old, dv);
            let e1 = tape.sub(v, ret);
            let e1 = tape.square(e1);
            let e2 = tape.sub(v_clipped, ret);
            let e2 = tape.square(e2);
            let worst = tape.maximum(e1, e2);
            let vloss = tape.mean(worst);
            let vloss = tape.scale(vloss, 0.5);
            check_finite("value", tape.item(vloss))?;
            let grads = tape.backward(vloss);
            let mut g: Vec<Array2<f64>> = cvars.iter().map(|&v| grads.wrt(v)).collect();
            clip_grad_norm(&mut g, cfg.grad_clip);
            learner.critic_opt.update(
                &mut learner.critic.params_mut().iter_mut().collect::<Vec<_>>(),
                &g,
            )?;

            metrics.policy_loss += pg_value;
            metrics.value_loss += tape.item(vloss);
            metrics.bc_loss += bc_value;
            steps += 1;
        }
    }
    let k = steps.max(1) as f64;
    metrics.policy_loss /= k;
    metrics.value_loss /= k;
    metrics.bc_loss /= k;
    metrics.entropy = learner.policy.entropy();
    let new_lp = log_probs(&learner.policy, &batch.obs, &batch.actions);
    metrics.approx_kl = batch
        .old_log_prob
        .iter()
        .zip(&new_lp)
        .map(|(o, n)| o - n)
        .sum::<f64>()
        / n as f64;
    metrics.clip_fraction = new_lp
        .iter()
        .zip(&batch.old_log_prob)
        .filter(|(n, o)| ((*n - *o).exp() - 1.0).abs() > cfg.clip_eps)
        .count() as f64
        / n as f64;
    Ok(metrics)
}
