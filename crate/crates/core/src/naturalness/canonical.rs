use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, CursorAssist, RolloutModes, Trajectory};
use crate::error::{Error, Result};
use crate::nn::Policy;
use crate::seed::{self, stream};

pub const CANONICAL_SCHEMA: u32 = 1;

/// Default number of canonical episodes.
pub const CANONICAL_EPISODES: usize = 40;

/// Per-step features seen by naturalness metrics: the human observation.
pub fn features(traj: &Trajectory) -> Array2<f64> {
    let cols = traj.human_obs.first().map_or(0, Vec::len);
    let flat: Vec<f64> = traj.human_obs.iter().flatten().copied().collect();
    Array2::from_shape_vec((traj.human_obs.len(), cols), flat).expect("rectangular observations")
}

/// Stacks the features of every step of every trajectory.
pub fn stacked_features(trajs: &[Trajectory]) -> Array2<f64> {
    let cols = trajs
        .iter()
        .find_map(|t| t.human_obs.first())
        .map_or(0, Vec::len);
    let flat: Vec<f64> = trajs
        .iter()
        .flat_map(|t| t.human_obs.iter().flatten().copied())
        .collect();
    let rows = flat.len() / cols.max(1);
    Array2::from_shape_vec((rows, cols), flat).expect("rectangular observations")
}

/// Reference trajectories of the trusted human with its robot.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalDataset {
    trajectories: Vec<Trajectory>,
    movement_std: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    schema_version: u32,
    trajectory: Trajectory,
}

impl CanonicalDataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::contract("canonical dataset is empty"))?;
        let dim = first.human_obs.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::contract("canonical trajectories have no steps"));
        }
        if trajectories
            .iter()
            .any(|t| t.human_obs.is_empty() || t.human_obs.iter().any(|o| o.len() != dim))
        {
            return Err(Error::contract(
                "canonical trajectories disagree on observation size",
            ));
        }
        let movement_std = movement_std(&trajectories, dim);
        Ok(Self {
            trajectories,
            movement_std,
        })
    }

    /// Rolls out `episodes` deployment-mode episodes of (`human`, `robot`).
    pub fn collect(
        env: &CursorAssist,
        human: &dyn Policy,
        robot: &dyn Policy,
        episodes: usize,
        seed: u64,
    ) -> Result<Self> {
        let trajs = rollout(
            env,
            human,
            robot,
            episodes,
            seed::derive(seed, stream::CANONICAL),
            RolloutModes::DEPLOY,
        )?;
        Self::new(trajs)
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.movement_std.len()
    }

    /// Standard deviation of the per-step change of each feature.
    pub fn movement_std(&self) -> &[f64] {
        &self.movement_std
    }

    pub fn features(&self) -> Array2<f64> {
        stacked_features(&self.trajectories)
    }

    /// One JSON record per episode.
    pub fn to_ndjson(&self) -> String {
        let mut s = String::new();
        for t in &self.trajectories {
            let rec = Record {
                schema_version: CANONICAL_SCHEMA,
                trajectory: t.clone(),
            };
            s.push_str(&serde_json::to_string(&rec).expect("trajectory serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut trajs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| Error::contract(format!("canonical record {}: {e}", i + 1)))?;
            if rec.schema_version != CANONICAL_SCHEMA {
                return Err(Error::contract(format!(
                    "canonical record {} has schema {}, expected {CANONICAL_SCHEMA}",
                    i + 1,
                    rec.schema_version
                )));
            }
            trajs.push(rec.trajectory);
        }
        Self::new(trajs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_ndjson().as_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
            _ => e.into(),
        })?;
        Self::from_ndjson(&text)
    }
}

fn movement_std(trajs: &[Trajectory], dim: usize) -> Vec<f64> {
    let deltas: Vec<Vec<f64>> = trajs
        .iter()
        .flat_map(|t| t.human_obs.windows(2))
        .map(|w| (0..dim).map(|k| w[1][k] - w[0][k]).collect())
        .collect();
    if deltas.is_empty() {
        return vec![0.0; dim];
    }
    let n = deltas.len() as f64;
    (0..dim)
        .map(|k| {
            let mean = deltas.iter().map(|d| d[k]).sum::<f64>() / n;
            (deltas.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::CursorAssistConfig;
    use crate::nn::UniformPolicy;

    fn dataset() -> CanonicalDataset {
        let env = CursorAssist::new(CursorAssistConfig::default()).unwrap();
        let h = UniformPolicy {
            obs_dim: 7,
            action_dim: 2,
            scale: 1.0,
        };
        let r = UniformPolicy {
            obs_dim: 5,
            action_dim: 2,
            scale: 1.0,
        };
        CanonicalDataset::collect(&env, &h, &r, 5, 3).unwrap()
    }

    #[test]
    fn ndjson_round_trip_is_exact() {
        let d = dataset();
        let text = d.to_ndjson();
        assert_eq!(text.lines().count(), 5);
        let back = CanonicalDataset::from_ndjson(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_ndjson(), text);
    }

    #[test]
    fn movement_std_ignores_static_features() {
        let d = dataset();
        let s = d.movement_std();
        assert_eq!(s.len(), 7);
        // Positions move, time advances by a constant, the goal never changes.
        assert!(s[..4].iter().all(|&v| v > 0.0));
        assert!(s[4].abs() < 1e-12);
        assert_eq!(&s[5..], &[0.0, 0.0]);
    }

    #[test]
    fn empty_and_wrong_schema_are_rejected() {
        assert!(CanonicalDataset::new(Vec::new()).is_err());
        let text =
            dataset()
                .to_ndjson()
                .replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert!(CanonicalDataset::from_ndjson(&text).is_err());
    }
}
