use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::seed::Rng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionMode {
    /// Draw from the action distribution.
    Sample,
    /// Use the distribution mean.
    Greedy,
}

/// Stochastic mapping from observation to continuous action.
pub trait Policy: Send + Sync {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn act(&self, obs: &[f64], rng: &mut Rng, mode: ActionMode) -> Vec<f64>;
}

/// Always outputs zeros.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy {
    pub obs_dim: usize,
    pub action_dim: usize,
}

impl Policy for ZeroPolicy {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }
    fn action_dim(&self) -> usize {
        self.action_dim
    }
    fn act(&self, _: &[f64], _: &mut Rng, _: ActionMode) -> Vec<f64> {
        vec![0.0; self.action_dim]
    }
}

/// Uniform noise in `[-scale, scale]` on every action dimension, ignoring
/// the observation.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub scale: f64,
}

impl Policy for UniformPolicy {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }
    fn action_dim(&self) -> usize {
        self.action_dim
    }
    fn act(&self, _: &[f64], rng: &mut Rng, _: ActionMode) -> Vec<f64> {
        use rand::Rng as _;
        (0..self.action_dim)
            .map(|_| rng.gen_range(-self.scale..=self.scale))
            .collect()
    }
}

/// Diagonal Gaussian head with mean `tanh(mlp(obs))` and a learned,
/// state-independent log standard deviation. The squashed mean keeps the
/// Gaussian's mass inside the actuator range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    /// `1 × action_dim`
    pub log_std: Array2<f64>,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// Tape handles for a bound [`GaussianPolicy`].
pub struct PolicyVars {
    pub mean: Vec<Var>,
    pub log_std: Var,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        log_std_bounds: (f64, f64),
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Ok(Self {
            mean: Mlp::new(&sizes, 0.01, rng)?,
            log_std: Array2::from_elem((1, action_dim), init_log_std),
            log_std_min: log_std_bounds.0,
            log_std_max: log_std_bounds.1,
        })
    }

    pub fn clamped_log_std(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|x| x.clamp(self.log_std_min, self.log_std_max))
            .collect()
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean.forward(obs)?.into_iter().map(f64::tanh).collect())
    }

    pub fn mean_batch(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.mean.forward_batch(obs)?.mapv(f64::tanh))
    }

    /// Closed-form diagonal Gaussian log-density of `action`.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mu = self.mean_action(obs)?;
        Ok(self
            .clamped_log_std()
            .iter()
            .zip(mu.iter().zip(action))
            .map(|(&ls, (&m, &a))| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum())
    }

    pub fn entropy(&self) -> f64 {
        self.clamped_log_std()
            .iter()
            .map(|ls| ls + 0.5 + HALF_LN_2PI)
            .sum()
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        let mut v: Vec<&Array2<f64>> = self.mean.params().iter().collect();
        v.push(&self.log_std);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v: Vec<&mut Array2<f64>> = self.mean.params_mut().iter_mut().collect();
        v.push(&mut self.log_std);
        v
    }

    pub fn bind(&self, tape: &mut Tape) -> PolicyVars {
        PolicyVars {
            mean: self.mean.bind(tape),
            log_std: tape.leaf(self.log_std.clone()),
        }
    }

    /// Records per-row log-densities (`B × 1`) of `actions` under the
    /// policy at `obs`, and returns them with the mean (`B × A`).
    pub fn record_log_prob(
        &self,
        tape: &mut Tape,
        vars: &PolicyVars,
        obs: Var,
        actions: Var,
    ) -> (Var, Var) {
        let pre = Mlp::apply(tape, &vars.mean, obs).output;
        let mu = tape.tanh(pre);
        let ls = tape.clamp(vars.log_std, self.log_std_min, self.log_std_max);
        let neg_ls = tape.neg(ls);
        let inv_std = tape.exp(neg_ls);
        let diff = tape.sub(actions, mu);
        let z = tape.mul(diff, inv_std);
        let z2 = tape.square(z);
        let quad = tape.row_sum(z2);
        let quad = tape.scale(quad, -0.5);
        let ls_sum = tape.sum(ls);
        let lp = tape.sub(quad, ls_sum);
        let act_dim = self.log_std.ncols() as f64;
        let lp = tape.add_const(lp, -act_dim * HALF_LN_2PI);
        (lp, mu)
    }

    pub fn record_entropy(&self, tape: &mut Tape, vars: &PolicyVars) -> Var {
        let ls = tape.clamp(vars.log_std, self.log_std_min, self.log_std_max);
        let s = tape.sum(ls);
        tape.add_const(s, self.log_std.ncols() as f64 * (0.5 + HALF_LN_2PI))
    }

    /// Parameter-space L2 distance to another policy of the same shape.
    pub fn distance(&self, other: &GaussianPolicy) -> f64 {
        self.params()
            .iter()
            .zip(other.params())
            .map(|(a, b)| (*a - b).mapv(|x| x * x).sum())
            .sum::<f64>()
            .sqrt()
    }
}

impl Policy for GaussianPolicy {
    fn obs_dim(&self) -> usize {
        self.mean.input_dim()
    }

    fn action_dim(&self) -> usize {
        self.mean.output_dim()
    }

    fn act(&self, obs: &[f64], rng: &mut Rng, mode: ActionMode) -> Vec<f64> {
        let mu = self
            .mean_action(obs)
            .expect("observation size checked by the rollout engine");
        match mode {
            ActionMode::Greedy => mu,
            ActionMode::Sample => mu
                .iter()
                .zip(self.clamped_log_std())
                .map(|(m, ls)| {
                    let eps: f64 = StandardNormal.sample(rng);
                    m + ls.exp() * eps
                })
                .collect(),
        }
    }
}
