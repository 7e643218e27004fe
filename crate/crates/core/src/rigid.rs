//! λ scan: log-spaced sampling refined around the largest naturalness jump,
//! one independent history per seed.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Refinement rounds d.
    pub rounds: usize,
    /// λ samples per round k.
    pub samples: usize,
    pub seeds: Vec<u64>,
    /// Sliding window L of the jump search.
    pub window: usize,
}

impl Default for ScanConfig {
    /// Full-size scan: 3 rounds of 6 samples over 3 seeds.
    fn default() -> Self {
        Self {
            lambda_min: 1e-5,
            lambda_max: 10.0,
            rounds: 3,
            samples: 6,
            seeds: vec![0, 1, 2],
            window: 3,
        }
    }
}

impl ScanConfig {
    /// 2 rounds of 4 samples over 2 seeds.
    pub fn desk() -> Self {
        Self {
            rounds: 2,
            samples: 4,
            seeds: vec![0, 1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0
            && self.lambda_min < self.lambda_max
            && self.lambda_max.is_finite())
        {
            return Err(Error::config(format!(
                "scan needs 0 < lambda_min < lambda_max, got ({}, {})",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.rounds == 0 || self.samples == 0 || self.window == 0 {
            return Err(Error::config(
                "scan rounds, samples and window must be >= 1",
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("scan needs at least one seed"));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::config("scan seeds must be distinct"));
        }
        Ok(())
    }

    pub fn total_runs(&self) -> usize {
        self.rounds * self.samples * self.seeds.len()
    }
}

/// `k` values with evenly spaced logarithms from `lo` to `hi`, endpoints
/// included exactly.
pub fn log_space_grid(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::contract(format!(
            "log grid needs 0 < lo <= hi, got ({lo}, {hi})"
        )));
    }
    if k == 0 {
        return Err(Error::contract("log grid needs k >= 1"));
    }
    if k == 1 {
        return Ok(vec![lo]);
    }
    let ratio = hi / lo;
    let mut out: Vec<f64> = (0..k)
        .map(|j| lo * ratio.powf(j as f64 / (k - 1) as f64))
        .collect();
    out[0] = lo;
    out[k - 1] = hi;
    Ok(out)
}

/// The `k` interior points of a `k + 2` point log grid; refinement rounds
/// sample these since the endpoints were already run.
pub fn refinement_grid(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    let full = log_space_grid(lo, hi, k + 2)?;
    Ok(full[1..=k].to_vec())
}

/// Anchor indices of the largest robust rise in `nat` (already ordered by
/// λ). For each split between `i` and `i + 1` the lower anchor is the
/// highest value among the `window` entries ending at `i` and the upper
/// anchor the lowest among the `window` entries starting at `i + 1`, so a
/// single noisy dip cannot produce a large gap. The split with the largest
/// gap wins; ties go to the earliest split.
pub fn largest_jump_indices(nat: &[f64], window: usize) -> Result<(usize, usize)> {
    if nat.len() < 2 {
        return Err(Error::contract("largest jump needs at least two values"));
    }
    if window == 0 {
        return Err(Error::contract("largest jump window must be >= 1"));
    }
    if nat.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("largest jump values must be finite"));
    }
    let n = nat.len();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..n - 1 {
        let start = (i + 1).saturating_sub(window);
        // Latest index among equal maxima, earliest among equal minima:
        // the tightest bracket.
        let lo = (start..=i)
            .reduce(|a, b| if nat[b] >= nat[a] { b } else { a })
            .expect("nonempty window");
        let end = (i + 1 + window).min(n);
        let hi = (i + 1..end)
            .reduce(|a, b| if nat[b] < nat[a] { b } else { a })
            .expect("nonempty window");
        let gap = nat[hi] - nat[lo];
        if best.is_none_or(|(g, _, _)| gap > g) {
            best = Some((gap, lo, hi));
        }
    }
    let (_, lo, hi) = best.expect("at least one split");
    Ok((lo, hi))
}

/// λ pair bracketing the largest robust naturalness rise. Inputs are paired
/// by position and sorted by λ first.
pub fn largest_jump(nat: &[f64], lambdas: &[f64], window: usize) -> Result<(f64, f64)> {
    if nat.len() != lambdas.len() {
        return Err(Error::contract("largest jump needs paired lists"));
    }
    let mut order: Vec<usize> = (0..nat.len()).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| nat[i]).collect();
    let (lo, hi) = largest_jump_indices(&sorted, window)?;
    Ok((lambdas[order[lo]], lambdas[order[hi]]))
}

/// Seed of the attack at `lambda` in the history of `history_seed`.
pub fn attack_seed(history_seed: u64, lambda: f64) -> u64 {
    seed::derive(history_seed, lambda.to_bits())
}

/// One attack the scan asks for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackJob {
    pub lambda: f64,
    /// Seed of the history the job belongs to.
    pub seed: u64,
    pub attack_seed: u64,
    pub round: usize,
}

/// What a finished attack reports back to the scan.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub run_id: String,
    pub naturalness: f64,
    pub adversarialness: f64,
    pub robot_return: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRunStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRun {
    pub run_id: Option<String>,
    pub lambda: f64,
    pub seed: u64,
    pub round: usize,
    pub status: ScanRunStatus,
    pub naturalness: Option<f64>,
    pub adversarialness: Option<f64>,
    pub robot_return: Option<f64>,
    pub error: Option<String>,
}

/// Successful runs of one seed's history, in completion-independent order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedHistory {
    pub seed: u64,
    pub lambdas_all: Vec<f64>,
    pub nat_scores: Vec<f64>,
    pub adv_scores: Vec<f64>,
    pub run_ids: Vec<String>,
    /// Bounds in force for each round, then the bounds after the last.
    pub bounds: Vec<(f64, f64)>,
}

impl SeedHistory {
    fn refine(&self, window: usize) -> Result<(f64, f64)> {
        let (lo, hi) = *self.bounds.last().expect("initial bounds");
        let (mut lams, mut nats) = (Vec::new(), Vec::new());
        for (&l, &n) in self.lambdas_all.iter().zip(&self.nat_scores) {
            if l >= lo && l <= hi {
                lams.push(l);
                nats.push(n);
            }
        }
        if lams.len() < 2 {
            log::warn!(
                "seed {}: fewer than two successful runs in [{lo:e}, {hi:e}]; keeping bounds",
                self.seed
            );
            return Ok((lo, hi));
        }
        largest_jump(&nats, &lams, window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanState {
    pub config: ScanConfig,
    pub histories: Vec<SeedHistory>,
    /// Every requested run, successful or not, by round, seed, then λ.
    pub runs: Vec<ScanRun>,
}

impl ScanState {
    pub fn successful(&self) -> impl Iterator<Item = &ScanRun> {
        self.runs.iter().filter(|r| r.status == ScanRunStatus::Done)
    }

    pub fn failed(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.status == ScanRunStatus::Failed)
            .count()
    }
}

/// Runs the scan. `attack` performs one run; it is called from up to `jobs`
/// threads at once. An [`Error::Interrupted`] from `attack` stops the scan
/// after the current round's other jobs finish; any other error marks that
/// run failed and the scan continues. `progress` sees each run as it
/// completes.
pub fn rigid_scan<A, P>(cfg: &ScanConfig, jobs: usize, attack: A, progress: P) -> Result<ScanState>
where
    A: Fn(&AttackJob) -> Result<AttackOutcome> + Sync,
    P: Fn(&ScanRun) + Sync,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {jobs} workers: {e}")))?;
    let mut histories: Vec<SeedHistory> = cfg
        .seeds
        .iter()
        .map(|&s| SeedHistory {
            seed: s,
            bounds: vec![(cfg.lambda_min, cfg.lambda_max)],
            ..SeedHistory::default()
        })
        .collect();
    let mut runs = Vec::with_capacity(cfg.total_runs());
    let completed = Mutex::new(0usize);

    for round in 0..cfg.rounds {
        let mut round_jobs = Vec::new();
        for h in &histories {
            let (lo, hi) = *h.bounds.last().expect("initial bounds");
            let grid = if round == 0 {
                log_space_grid(lo, hi, cfg.samples)?
            } else {
                refinement_grid(lo, hi, cfg.samples)?
            };
            round_jobs.extend(grid.into_iter().map(|lambda| AttackJob {
                lambda,
                seed: h.seed,
                attack_seed: attack_seed(h.seed, lambda),
                round,
            }));
        }
        let results: Vec<(AttackJob, Result<AttackOutcome>)> = pool.install(|| {
            round_jobs
                .par_iter()
                .map(|job| {
                    let res = attack(job);
                    if let Ok(o) = &res {
                        *completed.lock().expect("counter") += 1;
                        progress(&done_run(job, o));
                    } else if let Err(e) = &res {
                        if !matches!(e, Error::Interrupted { .. }) {
                            progress(&failed_run(job, e));
                        }
                    }
                    (*job, res)
                })
                .collect()
        });
        if results
            .iter()
            .any(|(_, r)| matches!(r, Err(Error::Interrupted { .. })))
        {
            return Err(Error::Interrupted {
                completed: *completed.lock().expect("counter"),
            });
        }
        for (job, res) in results {
            let h = histories
                .iter_mut()
                .find(|h| h.seed == job.seed)
                .expect("job belongs to a history");
            match res {
                Ok(o) => {
                    h.lambdas_all.push(job.lambda);
                    h.nat_scores.push(o.naturalness);
                    h.adv_scores.push(o.adversarialness);
                    h.run_ids.push(o.run_id.clone());
                    runs.push(done_run(&job, &o));
                }
                Err(e) => {
                    log::warn!("λ={:e} seed={}: run failed: {e}", job.lambda, job.seed);
                    runs.push(failed_run(&job, &e));
                }
            }
        }
        for h in &mut histories {
            let next = h.refine(cfg.window)?;
            h.bounds.push(next);
        }
    }
    Ok(ScanState {
        config: cfg.clone(),
        histories,
        runs,
    })
}

fn done_run(job: &AttackJob, o: &AttackOutcome) -> ScanRun {
    ScanRun {
        run_id: Some(o.run_id.clone()),
        lambda: job.lambda,
        seed: job.seed,
        round: job.round,
        status: ScanRunStatus::Done,
        naturalness: Some(o.naturalness),
        adversarialness: Some(o.adversarialness),
        robot_return: Some(o.robot_return),
        error: None,
    }
}

fn failed_run(job: &AttackJob, e: &Error) -> ScanRun {
    ScanRun {
        run_id: None,
        lambda: job.lambda,
        seed: job.seed,
        round: job.round,
        status: ScanRunStatus::Failed,
        naturalness: None,
        adversarialness: None,
        robot_return: None,
        error: Some(e.to_string()),
    }
}
