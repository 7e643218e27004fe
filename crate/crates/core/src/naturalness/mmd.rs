use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::canonical::{features, stacked_features, CanonicalDataset};
use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdConfig {
    /// RBF length scale; the median heuristic on canonical features when unset.
    pub bandwidth: Option<f64>,
    pub unbiased: bool,
    /// Random half-splits used to calibrate the naturalness scale.
    pub bootstrap_rounds: usize,
    /// Rows subsampled for the median heuristic.
    pub heuristic_points: usize,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            unbiased: false,
            bootstrap_rounds: 20,
            heuristic_points: 1000,
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!(
                    "gan.mmd.bandwidth must be > 0, got {s}"
                )));
            }
        }
        if self.bootstrap_rounds == 0 || self.heuristic_points < 2 {
            return Err(Error::config(
                "gan.mmd.bootstrap_rounds must be > 0 and heuristic_points >= 2",
            ));
        }
        Ok(())
    }
}

/// `exp(−‖x − y‖² / 2σ²)`
pub fn rbf(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

fn cmp_sets(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Ordering {
    a.dim().cmp(&b.dim()).then_with(|| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn kernel_sum(x: ArrayView2<f64>, y: ArrayView2<f64>, sigma: f64, skip_diagonal: bool) -> f64 {
    let xn: Array1<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let yn: Array1<f64> = y.rows().into_iter().map(|r| r.dot(&r)).collect();
    let g = x.dot(&y.t());
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut total = 0.0;
    for (i, row) in g.axis_iter(Axis(0)).enumerate() {
        for (j, &dot) in row.iter().enumerate() {
            if skip_diagonal && i == j {
                continue;
            }
            let d2 = (xn[i] + yn[j] - 2.0 * dot).max(0.0);
            total += (-d2 * inv).exp();
        }
    }
    total
}

fn mean_kernel(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    sigma: f64,
    within: bool,
    unbiased: bool,
) -> f64 {
    let (m, n) = (x.nrows() as f64, y.nrows() as f64);
    if within && unbiased {
        if x.nrows() < 2 {
            return 0.0;
        }
        kernel_sum(x, y, sigma, true) / (m * (m - 1.0))
    } else {
        kernel_sum(x, y, sigma, false) / (m * n)
    }
}

/// Squared maximum mean discrepancy between two sets of row vectors under
/// an RBF kernel. Symmetric in its arguments bit for bit.
pub fn mmd2<'a>(
    a: ArrayView2<'a, f64>,
    b: ArrayView2<'a, f64>,
    sigma: f64,
    unbiased: bool,
) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::contract("MMD needs two nonempty sets"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::contract("MMD sets have different feature sizes"));
    }
    if !(sigma > 0.0) {
        return Err(Error::contract(format!(
            "MMD bandwidth must be > 0, got {sigma}"
        )));
    }
    let (x, y) = if cmp_sets(&a, &b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    Ok(
        mean_kernel(x, x, sigma, true, unbiased) + mean_kernel(y, y, sigma, true, unbiased)
            - 2.0 * mean_kernel(x, y, sigma, false, unbiased),
    )
}

/// Direct double sum over [`rbf`]; the reference for [`mmd2`].
pub fn mmd2_naive(a: ArrayView2<f64>, b: ArrayView2<f64>, sigma: f64, unbiased: bool) -> f64 {
    let rows = |m: ArrayView2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let (xa, xb) = (rows(a), rows(b));
    let within = |s: &[Vec<f64>]| {
        let mut t = 0.0;
        let mut count = 0.0;
        for (i, p) in s.iter().enumerate() {
            for (j, q) in s.iter().enumerate() {
                if unbiased && i == j {
                    continue;
                }
                t += rbf(p, q, sigma);
                count += 1.0;
            }
        }
        t / count
    };
    let mut cross = 0.0;
    for p in &xa {
        for q in &xb {
            cross += rbf(p, q, sigma);
        }
    }
    within(&xa) + within(&xb) - 2.0 * cross / (xa.len() * xb.len()) as f64
}

/// Median pairwise distance among (a strided subsample of) the rows.
pub fn median_heuristic(x: ArrayView2<f64>, max_points: usize) -> f64 {
    let stride = x.nrows().div_ceil(max_points.max(2)).max(1);
    let pts: Vec<_> = x.rows().into_iter().step_by(stride).collect();
    let mut d = Vec::with_capacity(pts.len() * pts.len() / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let diff = &pts[i] - &pts[j];
            let v = diff.dot(&diff).sqrt();
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Discriminator-free naturalness: MMD of attack features against the
/// canonical set, mapped to `exp(−MMD²/ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdScorer {
    canonical: Array2<f64>,
    pub sigma: f64,
    /// Median MMD² between random halves of the canonical episodes.
    pub rho: f64,
    pub unbiased: bool,
    canonical_self: f64,
}

impl MmdScorer {
    pub fn fit(canonical: &CanonicalDataset, cfg: &MmdConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if canonical.len() < 2 {
            return Err(Error::contract(
                "MMD calibration needs at least two canonical episodes",
            ));
        }
        let feats = canonical.features();
        let sigma = cfg
            .bandwidth
            .unwrap_or_else(|| median_heuristic(feats.view(), cfg.heuristic_points));
        let mut rng = seed::rng_for(seed, stream::BOOTSTRAP);
        let trajs = canonical.trajectories();
        let mut idx: Vec<usize> = (0..trajs.len()).collect();
        let mut halves = Vec::with_capacity(cfg.bootstrap_rounds);
        for _ in 0..cfg.bootstrap_rounds {
            idx.shuffle(&mut rng);
            let (l, r) = idx.split_at(idx.len() / 2);
            let pick = |ids: &[usize]| {
                stacked_features(&ids.iter().map(|&i| trajs[i].clone()).collect::<Vec<_>>())
            };
            halves.push(mmd2(pick(l).view(), pick(r).view(), sigma, cfg.unbiased)?);
        }
        halves.sort_by(f64::total_cmp);
        let rho = halves[halves.len() / 2].max(1e-12);
        let canonical_self = mean_kernel(feats.view(), feats.view(), sigma, true, cfg.unbiased);
        Ok(Self {
            canonical: feats,
            sigma,
            rho,
            unbiased: cfg.unbiased,
            canonical_self,
        })
    }

    fn to_canonical(&self, x: ArrayView2<f64>) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::contract("MMD needs a nonempty set"));
        }
        if x.ncols() != self.canonical.ncols() {
            return Err(Error::contract(
                "feature size differs from the canonical set",
            ));
        }
        let s = self.sigma;
        Ok(
            mean_kernel(x, x, s, true, self.unbiased) + self.canonical_self
                - 2.0 * mean_kernel(x, self.canonical.view(), s, false, self.unbiased),
        )
    }

    pub fn mmd2_to_canonical(&self, trajs: &[Trajectory]) -> Result<f64> {
        self.to_canonical(stacked_features(trajs).view())
    }

    /// Per-episode MMD² used as an adversary penalty.
    pub fn episode_mmd2(&self, traj: &Trajectory) -> Result<f64> {
        self.to_canonical(features(traj).view())
    }

    pub fn naturalness(&self, trajs: &[Trajectory]) -> Result<f64> {
        Ok((-self.mmd2_to_canonical(trajs)?.max(0.0) / self.rho).exp())
    }
}
