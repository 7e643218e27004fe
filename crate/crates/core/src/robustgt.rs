//! Robust fine-tuning: resume robot training against a mixture of the
//! synthetic human and adversaries picked from a frontier.

use serde::{Deserialize, Serialize};

use crate::env::CursorAssist;
use crate::error::{Error, Result};
use crate::frontier::{Frontier, FrontierPoint};
use crate::nn::{GaussianPolicy, Policy};
use crate::rl::{train_robot, IterRecord, Learner, Partners, RlConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustConfig {
    /// Probability that an episode's partner is an adversary.
    pub rate: f64,
    /// Adversaries selected from the frontier.
    pub n: usize,
    /// Inclusive naturalness range the adversaries are picked from.
    pub nat_range: [f64; 2],
    pub iterations: usize,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            rate: 0.15,
            n: 3,
            nat_range: [0.2, 0.8],
            iterations: 100,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::config(format!(
                "robust.rate must be in [0,1], got {}",
                self.rate
            )));
        }
        let [lo, hi] = self.nat_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::config(format!(
                "robust.nat_range must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
            )));
        }
        if self.n == 0 || self.iterations == 0 {
            return Err(Error::config("robust.n and robust.iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Points with naturalness in `nat_range`, most adversarial first; ties go
/// to the lower λ, then the lower run id. At most `n` are returned.
pub fn select_failure_points(
    points: &[FrontierPoint],
    nat_range: [f64; 2],
    n: usize,
) -> Vec<FrontierPoint> {
    let [lo, hi] = nat_range;
    let mut c: Vec<&FrontierPoint> = points
        .iter()
        .filter(|p| p.naturalness >= lo && p.naturalness <= hi)
        .collect();
    c.sort_by(|a, b| {
        b.adversarialness
            .total_cmp(&a.adversarialness)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.run_id.cmp(&b.run_id))
    });
    c.into_iter().take(n).cloned().collect()
}

/// Run ids of the failure cases to train against, drawn from every run
/// of the frontier.
pub fn select_failure_cases(frontier: &Frontier, nat_range: [f64; 2], n: usize) -> Vec<String> {
    let picked = select_failure_points(&frontier.all_points, nat_range, n);
    if picked.is_empty() {
        log::warn!(
            "no run with naturalness in [{}, {}]; nothing to fine-tune against",
            nat_range[0],
            nat_range[1]
        );
    }
    picked.into_iter().map(|p| p.run_id).collect()
}

/// The base human plus frozen adversaries.
pub struct PopulationSpec<'a> {
    pub base_human: &'a GaussianPolicy,
    pub adversaries: &'a [GaussianPolicy],
    pub adversary_rate: f64,
}

impl<'a> PopulationSpec<'a> {
    pub fn partners(&self) -> Result<Partners<'a>> {
        let p = Partners {
            base: self.base_human as &dyn Policy,
            others: self.adversaries.iter().map(|a| a as &dyn Policy).collect(),
            rate: self.adversary_rate,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Continues training `robot` for `iterations` iterations with partners
/// drawn from `population`. `expert` keeps the behaviour-cloning term of the
/// robot's original objective.
pub fn robust_finetune(
    robot: &mut Learner,
    env: &CursorAssist,
    population: &PopulationSpec<'_>,
    expert: Option<&GaussianPolicy>,
    rl: &RlConfig,
    iterations: usize,
    seed: u64,
) -> Result<Vec<IterRecord>> {
    let partners = population.partners()?;
    train_robot(robot, env, &partners, expert, rl, iterations, seed)
}
