//! Whole-workflow configuration, read from TOML with one table per section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryConfig;
use crate::env::CursorAssistConfig;
use crate::error::{Error, Result};
use crate::naturalness::{GanConfig, CANONICAL_EPISODES};
use crate::rigid::ScanConfig;
use crate::rl::{NnConfig, PpoConfig, RlConfig};
use crate::robustgt::RobustConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    /// Episodes for the cooperative baseline of the calibration.
    pub calibration_episodes: usize,
    /// Episodes in each canonical dataset.
    pub canonical_episodes: usize,
    /// Fixed `[lo, hi]` negated-return range; calibrated per robot when
    /// unset.
    pub normalization: Option<[f64; 2]>,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            calibration_episodes: 100,
            canonical_episodes: CANONICAL_EPISODES,
            normalization: None,
        }
    }
}

/// Every tunable of the workflow. Defaults are the desk-scale presets;
/// [`RunConfig::full`] gives the full-size budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: CursorAssistConfig,
    pub nn: NnConfig,
    pub rl: RlConfig,
    pub gan: GanConfig,
    pub attack: AdversaryConfig,
    pub scan: ScanConfig,
    pub frontier: FrontierConfig,
    pub robust: RobustConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: CursorAssistConfig::default(),
            nn: NnConfig::default(),
            rl: RlConfig::default(),
            gan: GanConfig::desk(),
            attack: AdversaryConfig::desk(),
            scan: ScanConfig::desk(),
            frontier: FrontierConfig::default(),
            robust: RobustConfig::default(),
        }
    }
}

impl RunConfig {
    /// Full-size PPO batches, attack length and scan.
    pub fn full() -> Self {
        Self {
            rl: RlConfig {
                ppo: PpoConfig::default(),
                ..RlConfig::default()
            },
            gan: GanConfig::default(),
            attack: AdversaryConfig::default(),
            scan: ScanConfig::default(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.nn.validate()?;
        self.rl.ppo.validate()?;
        self.gan.validate()?;
        self.attack.validate()?;
        self.scan.validate()?;
        self.robust.validate()?;
        if self.frontier.calibration_episodes == 0 || self.frontier.canonical_episodes < 2 {
            return Err(Error::config(
                "frontier.calibration_episodes must be >= 1 and canonical_episodes >= 2",
            ));
        }
        if let Some([lo, hi]) = self.frontier.normalization {
            if !(lo < hi) {
                return Err(Error::config(format!(
                    "frontier.normalization needs lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Keys in `text` override the desk defaults one by one, so a partial
    /// section keeps the preset's other values.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_over(text, &Self::default())
    }

    pub fn from_toml_over(text: &str, base: &Self) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut merged = toml::Table::try_from(base).expect("config serializes");
        merge(&mut merged, user);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        for cfg in [RunConfig::default(), RunConfig::full()] {
            assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn sections_override_fields() {
        let cfg =
            RunConfig::from_toml("[scan]\nrounds = 1\nseeds = [4]\n[gan]\nlr = 0.01\n").unwrap();
        assert_eq!(cfg.scan.rounds, 1);
        assert_eq!(cfg.scan.seeds, vec![4]);
        assert_eq!(cfg.gan.lr, 0.01);
        assert_eq!(cfg.scan.samples, ScanConfig::desk().samples);
        assert_eq!(cfg.gan.updates_per_iter, GanConfig::desk().updates_per_iter);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(
            RunConfig::from_toml("[scan]\nbogus = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("[scan]\nlambda_min = -1.0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("not toml ["),
            Err(Error::Config(_))
        ));
    }
}
