use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::canonical::{features, CanonicalDataset};
use super::mmd::MmdConfig;
use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, AdamState, Mlp, Tape, Var};
use crate::seed::{self, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscLoss {
    /// Least-squares GAN; the optimum encodes a χ² divergence.
    #[default]
    LsGan,
    /// Logistic loss; the optimum is the log density ratio.
    KlLogistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub adam_eps: f64,
    /// LS-GAN target for canonical samples.
    pub a: f64,
    /// LS-GAN target for adversarial samples.
    pub b: f64,
    /// Score the adversary is pulled toward.
    pub c: f64,
    pub noise_std_scale: f64,
    pub noise_decay: f64,
    pub grad_penalty: f64,
    pub expert_weight: f64,
    pub agent_weight: f64,
    pub updates_per_iter: usize,
    /// Rows drawn from each side per update.
    pub batch_size: usize,
    pub grad_clip: f64,
    pub mmd: MmdConfig,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            lr: 1e-3,
            adam_eps: 1e-4,
            a: -1.0,
            b: 1.0,
            c: 0.0,
            noise_std_scale: 10.0,
            noise_decay: 0.98,
            grad_penalty: 0.3,
            expert_weight: 4.0,
            agent_weight: 1.0,
            updates_per_iter: 3,
            batch_size: 512,
            grad_clip: 20.0,
            mmd: MmdConfig::default(),
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(Error::config(format!(
                "gan.noise_decay must be in (0,1], got {}",
                self.noise_decay
            )));
        }
        if self.a >= self.b {
            return Err(Error::config("gan.a must be below gan.b"));
        }
        if self.expert_weight <= 0.0 || self.agent_weight <= 0.0 {
            return Err(Error::config("gan loss weights must be > 0"));
        }
        if self.lr <= 0.0 || self.batch_size == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config(
                "gan.lr, gan.batch_size and gan.hidden must be positive",
            ));
        }
        if self.noise_std_scale < 0.0 || self.grad_penalty < 0.0 {
            return Err(Error::config(
                "gan.noise_std_scale and gan.grad_penalty must be >= 0",
            ));
        }
        self.mmd.validate()
    }

    /// Same settings with noise and gradient penalty disabled and equal
    /// loss weights.
    /// Shorter attacks need a faster discriminator: 15 steps per policy
    /// iteration at a higher learning rate, with slower noise decay so the
    /// annealing spans the run.
    pub fn desk() -> Self {
        Self {
            lr: 3e-3,
            noise_decay: 0.99,
            updates_per_iter: 15,
            ..Self::default()
        }
    }

    pub fn plain(&self) -> Self {
        Self {
            noise_std_scale: 0.0,
            grad_penalty: 0.0,
            expert_weight: 1.0,
            agent_weight: 1.0,
            ..self.clone()
        }
    }
}

/// Weighted LS-GAN objective on precomputed scores, without noise or
/// penalty.
pub fn ls_gan_loss(d_adv: &[f64], d_can: &[f64], cfg: &GanConfig) -> f64 {
    cfg.agent_weight * mean(d_adv.iter().map(|d| (d - cfg.b).powi(2)))
        + cfg.expert_weight * mean(d_can.iter().map(|d| (d - cfg.a).powi(2)))
}

/// Weighted logistic objective on precomputed scores.
pub fn kl_logistic_loss(d_adv: &[f64], d_can: &[f64], cfg: &GanConfig) -> f64 {
    cfg.agent_weight * mean(d_adv.iter().map(|&d| softplus(-d)))
        + cfg.expert_weight * mean(d_can.iter().map(|&d| softplus(d)))
}

/// Pointwise minimiser of the LS-GAN objective where the adversarial and
/// canonical densities are `p_adv` and `p_can`.
pub fn ls_gan_optimum(p_adv: f64, p_can: f64, cfg: &GanConfig) -> f64 {
    let wa = cfg.agent_weight * p_adv;
    let we = cfg.expert_weight * p_can;
    (wa * cfg.b + we * cfg.a) / (wa + we)
}

/// Pointwise minimiser of the logistic objective.
pub fn kl_logistic_optimum(p_adv: f64, p_can: f64, cfg: &GanConfig) -> f64 {
    (cfg.agent_weight * p_adv / (cfg.expert_weight * p_can)).ln()
}

/// Fraction of trajectory scores below zero, i.e. classified canonical.
pub fn fraction_natural(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| s < 0.0).count() as f64 / scores.len() as f64
}

/// Mean squared trajectory score.
pub fn chi2_from_scores(scores: &[f64]) -> f64 {
    mean(scores.iter().map(|s| s * s))
}

fn mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len();
    if n == 0 {
        0.0
    } else {
        it.sum::<f64>() / n as f64
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscMetrics {
    pub loss: f64,
    pub gradient_penalty: f64,
    /// Fraction of canonical rows scored below zero.
    pub canonical_accuracy: f64,
    /// Fraction of adversarial rows scored at or above zero.
    pub adversarial_accuracy: f64,
}

/// Observation-only discriminator trained to score adversarial steps high
/// and canonical steps low.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub net: Mlp,
    pub loss: DiscLoss,
    pub config: GanConfig,
    movement_std: Vec<f64>,
    opt: AdamState,
    updates: usize,
}

impl Discriminator {
    pub fn new(
        loss: DiscLoss,
        feature_dim: usize,
        movement_std: Vec<f64>,
        config: &GanConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        if movement_std.len() != feature_dim {
            return Err(Error::contract(
                "movement_std length differs from feature_dim",
            ));
        }
        let mut sizes = vec![feature_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, 1.0, rng)?;
        let opt = AdamState::new(net.params(), config.lr, config.adam_eps);
        Ok(Self {
            net,
            loss,
            config: config.clone(),
            movement_std,
            opt,
            updates: 0,
        })
    }

    /// Fresh discriminator sized for `canonical`'s features.
    pub fn for_dataset(
        loss: DiscLoss,
        canonical: &CanonicalDataset,
        config: &GanConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = seed::rng_for(seed, stream::DISCRIMINATOR);
        Self::new(
            loss,
            canonical.feature_dim(),
            canonical.movement_std().to_vec(),
            config,
            &mut rng,
        )
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Current per-feature input noise standard deviation.
    pub fn noise_std(&self) -> Vec<f64> {
        let f = self.config.noise_std_scale * self.config.noise_decay.powi(self.updates as i32);
        self.movement_std.iter().map(|s| s * f).collect()
    }

    pub fn score_rows(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Mean per-step score of one trajectory.
    pub fn trajectory_score(&self, traj: &Trajectory) -> Result<f64> {
        let s = self.score_rows(features(traj).view())?;
        Ok(mean(s.into_iter()))
    }

    pub fn trajectory_scores(&self, trajs: &[Trajectory]) -> Result<Vec<f64>> {
        trajs.iter().map(|t| self.trajectory_score(t)).collect()
    }

    pub fn naturalness(&self, trajs: &[Trajectory]) -> Result<f64> {
        Ok(fraction_natural(&self.trajectory_scores(trajs)?))
    }

    pub fn chi2_estimate(&self, trajs: &[Trajectory]) -> Result<f64> {
        Ok(chi2_from_scores(&self.trajectory_scores(trajs)?))
    }

    fn draw(&self, x: ArrayView2<f64>, rng: &mut Rng) -> Array2<f64> {
        let n = x.nrows();
        let take = self.config.batch_size.min(n);
        let rows: Vec<usize> = if take == n {
            (0..n).collect()
        } else {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx.truncate(take);
            idx.sort_unstable();
            idx
        };
        let mut out = x.select(Axis(0), &rows);
        let std = self.noise_std();
        if std.iter().any(|&s| s > 0.0) {
            for mut row in out.rows_mut() {
                for (v, s) in row.iter_mut().zip(&std) {
                    if *s > 0.0 {
                        let e: f64 = StandardNormal.sample(rng);
                        *v += s * e;
                    }
                }
            }
        }
        out
    }

    fn side_loss(&self, tape: &mut Tape, d: Var, adversarial: bool) -> Var {
        let cfg = &self.config;
        let (weight, per_row) = match self.loss {
            DiscLoss::LsGan => {
                let target = if adversarial { cfg.b } else { cfg.a };
                let shifted = tape.add_const(d, -target);
                (
                    if adversarial {
                        cfg.agent_weight
                    } else {
                        cfg.expert_weight
                    },
                    tape.square(shifted),
                )
            }
            DiscLoss::KlLogistic => {
                if adversarial {
                    let neg = tape.neg(d);
                    (cfg.agent_weight, tape.softplus(neg))
                } else {
                    (cfg.expert_weight, tape.softplus(d))
                }
            }
        };
        let m = tape.mean(per_row);
        tape.scale(m, weight)
    }

    /// One gradient step on noised minibatches of adversarial and canonical
    /// feature rows.
    pub fn update(
        &mut self,
        adversarial: ArrayView2<f64>,
        canonical: ArrayView2<f64>,
        rng: &mut Rng,
    ) -> Result<DiscMetrics> {
        if adversarial.nrows() == 0 || canonical.nrows() == 0 {
            return Err(Error::contract("discriminator update needs both batches"));
        }
        let adv = self.draw(adversarial, rng);
        let can = self.draw(canonical, rng);

        let mut tape = Tape::new();
        let p = self.net.bind(&mut tape);
        let xa = tape.leaf(adv);
        let xc = tape.leaf(can);
        let da = Mlp::apply(&mut tape, &p, xa).output;
        let trace_c = Mlp::apply(&mut tape, &p, xc);
        let dc = trace_c.output;
        let la = self.side_loss(&mut tape, da, true);
        let lc = self.side_loss(&mut tape, dc, false);
        let mut loss = tape.add(la, lc);
        let mut gp_value = 0.0;
        if self.config.grad_penalty > 0.0 {
            let g = Mlp::input_gradient(&mut tape, &p, &trace_c);
            let g2 = tape.square(g);
            let norms = tape.row_sum(g2);
            let gp = tape.mean(norms);
            gp_value = tape.item(gp);
            let term = tape.scale(gp, self.config.grad_penalty);
            loss = tape.add(loss, term);
        }
        let loss_value = tape.item(loss);
        if !loss_value.is_finite() {
            return Err(Error::Optimizer("non-finite discriminator loss".into()));
        }
        let metrics = DiscMetrics {
            loss: loss_value,
            gradient_penalty: gp_value,
            canonical_accuracy: fraction_natural(tape.value(dc).as_slice().expect("contiguous")),
            adversarial_accuracy: 1.0
                - fraction_natural(tape.value(da).as_slice().expect("contiguous")),
        };
        let grads = tape.backward(loss);
        let mut g: Vec<Array2<f64>> = p.iter().map(|&v| grads.wrt(v)).collect();
        clip_grad_norm(&mut g, self.config.grad_clip);
        self.opt.update(
            &mut self.net.params_mut().iter_mut().collect::<Vec<_>>(),
            &g,
        )?;
        self.updates += 1;
        Ok(metrics)
    }
}

/// Fraction of noised canonical trajectories still scored canonical, for
/// each noise multiplier of the per-feature movement std.
pub fn probe_discriminator(
    disc: &Discriminator,
    canonical: &CanonicalDataset,
    noise_levels: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let std = canonical.movement_std();
    noise_levels
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let mut rng = seed::rng_for(seed::derive(seed, stream::PROBE), i as u64);
            let scores = canonical
                .trajectories()
                .iter()
                .map(|t| {
                    let mut x = features(t);
                    for mut row in x.rows_mut() {
                        for (v, s) in row.iter_mut().zip(std) {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            *v += level * s * e;
                        }
                    }
                    Ok(mean(disc.score_rows(x.view())?.into_iter()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(fraction_natural(&scores))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain() -> GanConfig {
        GanConfig::default().plain()
    }

    fn argmin(f: impl Fn(f64) -> f64) -> f64 {
        let (mut lo, mut hi) = (-5.0, 5.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn ls_gan_loss_fixtures() {
        let c = plain();
        assert_eq!(ls_gan_loss(&[1.0, 1.0], &[-1.0], &c), 0.0);
        assert_eq!(ls_gan_loss(&[0.0; 3], &[0.0; 5], &c), 2.0);
    }

    #[test]
    fn ls_gan_pointwise_optimum() {
        let c = plain();
        let (pa, pc) = (3.0, 1.0);
        let weighted = GanConfig {
            agent_weight: pa,
            expert_weight: pc,
            ..c.clone()
        };
        let d = argmin(|d| ls_gan_loss(&[d], &[d], &weighted));
        assert!((d - 0.5).abs() < 1e-3, "{d}");
        assert!((ls_gan_optimum(pa, pc, &c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_logistic_fixtures() {
        let c = plain();
        assert!((kl_logistic_loss(&[0.0], &[0.0], &c) - 2.0 * 2f64.ln()).abs() < 1e-12);
        let weighted = GanConfig {
            agent_weight: 2.0,
            expert_weight: 1.0,
            ..c.clone()
        };
        let d = argmin(|d| kl_logistic_loss(&[d], &[d], &weighted));
        assert!((d - 2f64.ln()).abs() < 1e-3, "{d}");
        let equal = argmin(|d| kl_logistic_loss(&[d], &[d], &c));
        assert!(equal.abs() < 1e-3);
        assert!(kl_logistic_loss(&[800.0], &[-800.0], &c).is_finite());
    }

    #[test]
    fn naturalness_fraction_fixtures() {
        assert_eq!(fraction_natural(&[-1.0, -0.2, -3.0]), 1.0);
        assert_eq!(fraction_natural(&[0.5, 2.0]), 0.0);
        assert_eq!(fraction_natural(&[-1.0, -1.0, -1.0, 1.0]), 0.75);
    }

    #[test]
    fn chi2_fixtures() {
        assert_eq!(chi2_from_scores(&[0.0, 0.0]), 0.0);
        assert_eq!(chi2_from_scores(&[1.0, -1.0]), 1.0);
    }

    #[test]
    fn noise_decays_per_update() {
        let mut rng = seed::rng(0);
        let cfg = GanConfig::default();
        let mut d = Discriminator::new(DiscLoss::LsGan, 2, vec![0.1, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(d.noise_std(), vec![1.0, 0.0]);
        let x = Array2::zeros((4, 2));
        d.update(x.view(), x.view(), &mut rng).unwrap();
        d.update(x.view(), x.view(), &mut rng).unwrap();
        assert!((d.noise_std()[0] - 0.98 * 0.98).abs() < 1e-12);
    }

    #[test]
    fn defaults_match_stated_values() {
        let c = GanConfig::default();
        assert_eq!((c.a, c.b, c.c), (-1.0, 1.0, 0.0));
        assert_eq!((c.expert_weight, c.agent_weight), (4.0, 1.0));
        assert_eq!(
            (c.noise_std_scale, c.noise_decay, c.grad_penalty),
            (10.0, 0.98, 0.3)
        );
    }
}
