//! Naturalness measures: how closely an attack policy's trajectories
//! resemble the canonical human's.

mod canonical;
mod discriminator;
mod mmd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use canonical::*;
pub use discriminator::*;
pub use mmd::*;

use crate::env::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    LsGan,
    KlLogistic,
    Mmd,
}

impl MetricKind {
    pub fn disc_loss(self) -> Option<DiscLoss> {
        match self {
            MetricKind::LsGan => Some(DiscLoss::LsGan),
            MetricKind::KlLogistic => Some(DiscLoss::KlLogistic),
            MetricKind::Mmd => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::LsGan => "ls_gan",
            MetricKind::KlLogistic => "kl_logistic",
            MetricKind::Mmd => "mmd",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "ls_gan" | "lsgan" => Ok(MetricKind::LsGan),
            "kl_logistic" | "kl" => Ok(MetricKind::KlLogistic),
            "mmd" => Ok(MetricKind::Mmd),
            other => Err(Error::config(format!(
                "unknown metric {other:?} (expected ls_gan, kl_logistic or mmd)"
            ))),
        }
    }
}

/// A trained or calibrated naturalness measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaturalnessMetric {
    Discriminator(Discriminator),
    Mmd(MmdScorer),
}

impl NaturalnessMetric {
    pub fn kind(&self) -> MetricKind {
        match self {
            NaturalnessMetric::Discriminator(d) => match d.loss {
                DiscLoss::LsGan => MetricKind::LsGan,
                DiscLoss::KlLogistic => MetricKind::KlLogistic,
            },
            NaturalnessMetric::Mmd(_) => MetricKind::Mmd,
        }
    }

    /// Score in `[0, 1]`; higher is more natural.
    pub fn naturalness(&self, trajs: &[Trajectory]) -> Result<f64> {
        match self {
            NaturalnessMetric::Discriminator(d) => d.naturalness(trajs),
            NaturalnessMetric::Mmd(m) => m.naturalness(trajs),
        }
    }
}
