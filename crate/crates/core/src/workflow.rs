//! End-to-end steps over a [`RunStore`]: every step is content addressed,
//! so repeating it with the same inputs loads the stored run instead of
//! training again. This is what makes scans resumable.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adversary::{
    calibrate_run, calibration_config, train_adversary, AdversaryConfig, AdversaryResult,
    Calibration,
};
use crate::config::RunConfig;
use crate::env::CursorAssist;
use crate::error::{Error, Result};
use crate::frontier::{Frontier, Normalization, RunPoint};
use crate::naturalness::{probe_discriminator, CanonicalDataset, MetricKind, NaturalnessMetric};
use crate::nn::GaussianPolicy;
use crate::rigid::{rigid_scan, AttackOutcome, ScanRun, ScanState};
use crate::rl::{cooptimize, evaluate, metrics_csv, train_personalized, Learner};
use crate::robustgt::{robust_finetune, select_failure_cases, PopulationSpec};
use crate::runstore::{content_id, sha256_hex, LoadedRun, RunKind, RunRecord, RunStatus, RunStore};

const HUMAN: &str = "checkpoints/human.json";
const ROBOT: &str = "checkpoints/robot.json";
const ADVERSARY: &str = "checkpoints/adversary.json";
const METRIC: &str = "checkpoints/metric.json";
const TRAJECTORIES: &str = "trajectories.ndjson";
const METRICS: &str = "metrics.csv";
const SCAN: &str = "scan.json";
const PENDING: &str = "pending";

/// Evaluation episodes for success rates reported by training steps.
pub const EVAL_EPISODES: usize = 100;

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializable")
}

/// A robot checkpoint with the human it serves and its canonical dataset.
#[derive(Debug, Clone)]
pub struct RobotAssets {
    pub run_id: String,
    pub kind: RunKind,
    pub robot: Learner,
    pub human: GaussianPolicy,
    pub canonical: CanonicalDataset,
    pub robot_digest: String,
    pub canonical_digest: String,
    /// Normalization inherited from the frontier a fine-tuned robot was
    /// trained against.
    pub normalization: Option<Normalization>,
}

impl RobotAssets {
    /// Replaces the canonical dataset with one read from `path`.
    pub fn with_canonical_file(mut self, path: &Path) -> Result<Self> {
        self.canonical = CanonicalDataset::load(path)?;
        self.canonical_digest = sha256_hex(self.canonical.to_ndjson().as_bytes());
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub run_id: String,
    pub lambda: f64,
    pub metric: MetricKind,
    pub seed: u64,
    pub naturalness: f64,
    pub adversarialness: f64,
    pub robot_return: f64,
    pub success_rate: f64,
}

impl AttackSummary {
    fn of(run_id: &str, r: &AdversaryResult) -> Self {
        Self {
            run_id: run_id.to_string(),
            lambda: r.lambda,
            metric: r.metric,
            seed: r.seed,
            naturalness: r.naturalness,
            adversarialness: r.adversarialness,
            robot_return: r.robot_return,
            success_rate: r.success_rate,
        }
    }
}

/// Everything a scan needs, stored so an interrupted scan can be resumed
/// by id alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub robot_id: String,
    pub canonical: Option<PathBuf>,
    pub metric: MetricKind,
    pub seed: u64,
    pub config: RunConfig,
}

/// Stored result of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub scan_id: String,
    pub request: ScanRequest,
    pub normalization: Normalization,
    pub calibration: Option<Calibration>,
    pub state: ScanState,
    pub auc: f64,
    /// AUC of each seed's own frontier.
    pub seed_auc: Vec<(u64, f64)>,
}

impl ScanRecord {
    pub fn median_seed_auc(&self) -> f64 {
        median(self.seed_auc.iter().map(|&(_, a)| a).collect())
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of nothing");
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub cooperative_return: f64,
    pub low: AttackSummary,
    pub high: AttackSummary,
    /// λ_min reaches adversarialness ≥ 0.9.
    pub adversarial_ok: bool,
    /// λ_max keeps naturalness ≥ 0.8.
    pub natural_ok: bool,
    /// λ_max keeps the robot return within 20% of the cooperative one.
    pub return_ok: bool,
}

pub struct Workflow {
    pub store: RunStore,
    pub cfg: RunConfig,
    env: CursorAssist,
}

impl Workflow {
    pub fn new(store: RunStore, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let env = CursorAssist::new(cfg.env.clone())?;
        Ok(Self { store, cfg, env })
    }

    pub fn env(&self) -> &CursorAssist {
        &self.env
    }

    /// Co-optimizes a human/robot pair and records the pair's canonical
    /// dataset.
    pub fn cooptimize(&self, seed: u64) -> Result<String> {
        let c = &self.cfg;
        let config = json!({"env": c.env, "nn": c.nn, "rl": c.rl, "canonical_episodes": c.frontier.canonical_episodes});
        let id = content_id(RunKind::Cooptimize, seed, &config);
        if self.store.contains(&id)? {
            return Ok(id);
        }
        let pair = cooptimize(&self.env, &c.nn, &c.rl, seed)?;
        let canonical = CanonicalDataset::collect(
            &self.env,
            &pair.human.policy,
            &pair.robot.policy,
            c.frontier.canonical_episodes,
            seed,
        )?;
        let stats = evaluate(
            &self.env,
            &pair.human.policy,
            &pair.robot.policy,
            EVAL_EPISODES,
            seed,
        )?;
        let record = RunRecord {
            run_id: id,
            kind: RunKind::Cooptimize,
            config,
            seed,
            status: RunStatus::Done,
            summary: json!({"success_rate": stats.success_rate, "mean_return": stats.mean_return}),
            artifacts: Default::default(),
        };
        let (h, r, t, m) = (
            to_json(&pair.human),
            to_json(&pair.robot),
            canonical.to_ndjson(),
            metrics_csv(&pair.history),
        );
        self.store.persist(
            &record,
            &[
                (HUMAN, &h),
                (ROBOT, &r),
                (TRAJECTORIES, t.as_bytes()),
                (METRICS, m.as_bytes()),
            ],
        )
    }

    /// Trains a personalized robot for the human of a co-optimization run,
    /// with the co-optimized robot as behaviour-cloning expert when
    /// `use_expert`.
    pub fn train_robot(&self, coop_id: &str, seed: u64, use_expert: bool) -> Result<String> {
        let c = &self.cfg;
        let coop = self.store.load_kind(coop_id, RunKind::Cooptimize)?;
        let config = json!({
            "coop": coop_id, "env": c.env, "nn": c.nn, "rl": c.rl,
            "expert": use_expert, "canonical_episodes": c.frontier.canonical_episodes,
        });
        let id = content_id(RunKind::TrainRobot, seed, &config);
        if self.store.contains(&id)? {
            return Ok(id);
        }
        let human: Learner = coop.read_json(HUMAN)?;
        let expert: Learner = coop.read_json(ROBOT)?;
        let trained = train_personalized(
            &human.policy,
            &self.env,
            &c.nn,
            &c.rl,
            use_expert.then_some(&expert.policy),
            seed,
        )?;
        let canonical = CanonicalDataset::collect(
            &self.env,
            &human.policy,
            &trained.robot.policy,
            c.frontier.canonical_episodes,
            seed,
        )?;
        let stats = evaluate(
            &self.env,
            &human.policy,
            &trained.robot.policy,
            EVAL_EPISODES,
            seed,
        )?;
        let record = RunRecord {
            run_id: id,
            kind: RunKind::TrainRobot,
            config,
            seed,
            status: RunStatus::Done,
            summary: json!({"success_rate": stats.success_rate, "mean_return": stats.mean_return}),
            artifacts: Default::default(),
        };
        let (h, r, t, m) = (
            to_json(&human.policy),
            to_json(&trained.robot),
            canonical.to_ndjson(),
            metrics_csv(&trained.history),
        );
        self.store.persist(
            &record,
            &[
                (HUMAN, &h),
                (ROBOT, &r),
                (TRAJECTORIES, t.as_bytes()),
                (METRICS, m.as_bytes()),
            ],
        )
    }

    /// Loads a personalized or fine-tuned robot run.
    pub fn robot(&self, robot_id: &str) -> Result<RobotAssets> {
        let run = self.store.load(robot_id)?;
        let kind = run.record.kind;
        if !matches!(kind, RunKind::TrainRobot | RunKind::RobustFt) {
            return Err(Error::config(format!(
                "run {robot_id} is a {kind:?} run, not a robot"
            )));
        }
        let robot: Learner = run.read_json(ROBOT)?;
        let human: GaussianPolicy = run.read_json(HUMAN)?;
        let text = run.read_string(TRAJECTORIES)?;
        let canonical = CanonicalDataset::from_ndjson(&text)?;
        let normalization = run
            .record
            .summary
            .get("normalization")
            .map(|v| serde_json::from_value(v.clone()))
            .transpose()?;
        Ok(RobotAssets {
            run_id: robot_id.to_string(),
            kind,
            robot_digest: run.record.artifacts[ROBOT].clone(),
            canonical_digest: sha256_hex(text.as_bytes()),
            robot,
            human,
            canonical,
            normalization,
        })
    }

    fn attack_base(&self, metric: MetricKind, seed: u64) -> AdversaryConfig {
        AdversaryConfig {
            metric,
            seed,
            ..self.cfg.attack.clone()
        }
    }

    /// Calibrated normalization for a robot, cached as a λ=0 attack run.
    pub fn calibration(
        &self,
        robot: &RobotAssets,
        metric: MetricKind,
        seed: u64,
    ) -> Result<Calibration> {
        let c = &self.cfg;
        let base = self.attack_base(metric, seed);
        let config = json!({
            "role": "calibration", "robot": robot.robot_digest, "canonical": robot.canonical_digest,
            "env": c.env, "nn": c.nn, "gan": c.gan, "attack": calibration_config(&base),
            "episodes": c.frontier.calibration_episodes,
        });
        let id = content_id(RunKind::Attack, seed, &config);
        if let Ok(run) = self.store.load(&id) {
            return Ok(serde_json::from_value(
                run.record.summary["calibration"].clone(),
            )?);
        }
        let (cal, adv) = calibrate_run(
            &self.env,
            &robot.robot.policy,
            &robot.human,
            &robot.canonical,
            &c.nn,
            &c.gan,
            &base,
            c.frontier.calibration_episodes,
        )?;
        let mut summary = serde_json::to_value(AttackSummary::of(&id, &adv))?;
        summary["calibration"] = serde_json::to_value(cal)?;
        self.persist_attack(id, config, adv.seed, summary, &adv)?;
        Ok(cal)
    }

    fn persist_attack(
        &self,
        id: String,
        config: serde_json::Value,
        seed: u64,
        summary: serde_json::Value,
        r: &AdversaryResult,
    ) -> Result<String> {
        let record = RunRecord {
            run_id: id,
            kind: RunKind::Attack,
            config,
            seed,
            status: RunStatus::Done,
            summary,
            artifacts: Default::default(),
        };
        let (a, m, t, c) = (
            to_json(&r.policy),
            to_json(&r.final_metric),
            CanonicalDataset::new(r.evaluation.clone())?.to_ndjson(),
            r.metrics_csv(),
        );
        self.store.persist(
            &record,
            &[
                (ADVERSARY, &a),
                (METRIC, &m),
                (TRAJECTORIES, t.as_bytes()),
                (METRICS, c.as_bytes()),
            ],
        )
    }

    fn attack_config(
        &self,
        robot: &RobotAssets,
        cfg: &AdversaryConfig,
        normalization: Normalization,
    ) -> serde_json::Value {
        let c = &self.cfg;
        json!({
            "robot": robot.robot_digest, "canonical": robot.canonical_digest,
            "env": c.env, "nn": c.nn, "gan": c.gan, "attack": cfg, "normalization": normalization,
        })
    }

    /// Trains (or loads) one attack on `robot`.
    pub fn attack(
        &self,
        robot: &RobotAssets,
        lambda: f64,
        metric: MetricKind,
        seed: u64,
        normalization: Normalization,
    ) -> Result<AttackSummary> {
        let cfg = AdversaryConfig {
            lambda,
            ..self.attack_base(metric, seed)
        };
        self.attack_with(robot, &cfg, normalization, None)
    }

    fn attack_with(
        &self,
        robot: &RobotAssets,
        cfg: &AdversaryConfig,
        normalization: Normalization,
        budget: Option<(&AtomicUsize, usize)>,
    ) -> Result<AttackSummary> {
        let config = self.attack_config(robot, cfg, normalization);
        let id = content_id(RunKind::Attack, cfg.seed, &config);
        if let Ok(run) = self.store.load(&id) {
            return Ok(serde_json::from_value(run.record.summary)?);
        }
        if let Some((used, limit)) = budget {
            let before = used.fetch_add(1, Ordering::SeqCst);
            if before >= limit {
                return Err(Error::Interrupted { completed: before });
            }
        }
        let r = train_adversary(
            &self.env,
            &robot.robot.policy,
            &robot.human,
            &robot.canonical,
            &self.cfg.nn,
            &self.cfg.gan,
            cfg,
            normalization,
        )?;
        let summary = AttackSummary::of(&id, &r);
        self.persist_attack(id, config, cfg.seed, serde_json::to_value(&summary)?, &r)?;
        Ok(summary)
    }

    /// The normalization attacks on `robot` are scored with: the
    /// configured range, else the one a fine-tuned robot inherited, else a
    /// fresh calibration.
    pub fn normalization(
        &self,
        robot: &RobotAssets,
        metric: MetricKind,
        seed: u64,
    ) -> Result<(Normalization, Option<Calibration>)> {
        if let Some([lo, hi]) = self.cfg.frontier.normalization {
            return Ok((Normalization::new(lo, hi)?, None));
        }
        if let Some(n) = robot.normalization {
            return Ok((n, None));
        }
        let cal = self.calibration(robot, metric, seed)?;
        Ok((cal.normalization, Some(cal)))
    }

    pub fn scan_id(&self, request: &ScanRequest, robot: &RobotAssets) -> String {
        let config = json!({
            "robot": request.robot_id, "robot_digest": robot.robot_digest,
            "canonical": robot.canonical_digest, "metric": request.metric, "config": request.config,
        });
        content_id(RunKind::Scan, request.seed, &config)
    }

    fn load_robot_for(&self, request: &ScanRequest) -> Result<RobotAssets> {
        let robot = self.robot(&request.robot_id)?;
        match &request.canonical {
            Some(p) => robot.with_canonical_file(p),
            None => Ok(robot),
        }
    }

    fn pending_path(&self, scan_id: &str) -> PathBuf {
        self.store
            .root()
            .join(PENDING)
            .join(format!("{scan_id}.json"))
    }

    /// Request of a scan that was started but not finished.
    pub fn pending_scan(&self, scan_id: &str) -> Result<ScanRequest> {
        let path = self.pending_path(scan_id);
        let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("pending scan {scan_id}")),
            _ => e.into(),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Runs the scan described by `request` with this workflow's store.
    /// The request's own configuration is used throughout. With
    /// `stop_after`, at most that many attacks are trained before the scan
    /// stops with [`Error::Interrupted`]; running the same request again
    /// picks up where it stopped.
    pub fn scan(
        &self,
        request: &ScanRequest,
        jobs: usize,
        stop_after: Option<usize>,
        progress: &(dyn Fn(&ScanRun) + Sync),
    ) -> Result<ScanRecord> {
        let wf = Workflow::new(self.store.clone(), request.config.clone())?;
        let robot = wf.load_robot_for(request)?;
        let scan_id = wf.scan_id(request, &robot);
        if let Ok(run) = wf.store.load(&scan_id) {
            return run.read_json(SCAN);
        }
        let pending = wf.pending_path(&scan_id);
        std::fs::create_dir_all(pending.parent().expect("pending dir"))?;
        let tmp = pending.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(request)?)?;
        std::fs::rename(&tmp, &pending)?;

        let (normalization, calibration) =
            wf.normalization(&robot, request.metric, request.seed)?;
        let used = AtomicUsize::new(0);
        let state = rigid_scan(
            &request.config.scan,
            jobs,
            |job| {
                let cfg = AdversaryConfig {
                    lambda: job.lambda,
                    ..wf.attack_base(request.metric, job.attack_seed)
                };
                let s =
                    wf.attack_with(&robot, &cfg, normalization, stop_after.map(|l| (&used, l)))?;
                Ok(AttackOutcome {
                    run_id: s.run_id,
                    naturalness: s.naturalness,
                    adversarialness: s.adversarialness,
                    robot_return: s.robot_return,
                })
            },
            progress,
        )?;
        let points = |seed: Option<u64>| -> Vec<RunPoint> {
            state
                .successful()
                .filter(|r| seed.is_none_or(|s| r.seed == s))
                .map(|r| RunPoint {
                    run_id: r.run_id.clone().expect("successful run has an id"),
                    lambda: r.lambda,
                    seed: r.seed,
                    naturalness: r.naturalness.expect("successful"),
                    robot_return: r.robot_return.expect("successful"),
                })
                .collect()
        };
        let frontier = Frontier::build(&points(None), normalization)?;
        let mut seed_auc = Vec::new();
        for h in &state.histories {
            let p = points(Some(h.seed));
            if !p.is_empty() {
                seed_auc.push((h.seed, Frontier::build(&p, normalization)?.auc));
            }
        }
        let record = ScanRecord {
            scan_id: scan_id.clone(),
            request: request.clone(),
            normalization,
            calibration,
            auc: frontier.auc,
            seed_auc,
            state,
        };
        let run = RunRecord {
            run_id: scan_id,
            kind: RunKind::Scan,
            config: serde_json::to_value(request)?,
            seed: request.seed,
            status: RunStatus::Done,
            summary: json!({
                "auc": record.auc, "seed_auc": record.seed_auc,
                "runs": record.state.runs.len(), "failed": record.state.failed(),
            }),
            artifacts: Default::default(),
        };
        let (s, csv, js, svg) = (
            serde_json::to_vec_pretty(&record)?,
            frontier.to_csv(),
            frontier.to_json(),
            frontier.to_svg(),
        );
        wf.store.persist(
            &run,
            &[
                (SCAN, &s),
                ("frontier.csv", csv.as_bytes()),
                ("frontier.json", js.as_bytes()),
                ("frontier.svg", svg.as_bytes()),
            ],
        )?;
        let _ = std::fs::remove_file(&pending);
        Ok(record)
    }

    pub fn scan_record(&self, scan_id: &str) -> Result<(ScanRecord, LoadedRun)> {
        let run = self.store.load_kind(scan_id, RunKind::Scan)?;
        Ok((run.read_json(SCAN)?, run))
    }

    /// Frontier stored by a scan run.
    pub fn scan_frontier(&self, scan_id: &str) -> Result<Frontier> {
        let run = self.store.load_kind(scan_id, RunKind::Scan)?;
        Frontier::from_json(&run.read_string("frontier.json")?)
    }

    /// Fine-tunes the robot of `robot_id` against failure cases picked from
    /// `frontier`, whose runs must be in this store. The result inherits the
    /// frontier's normalization and the robot's canonical dataset so its
    /// own frontier is comparable.
    pub fn robust_ft(&self, robot_id: &str, frontier: &Frontier, seed: u64) -> Result<String> {
        let c = &self.cfg;
        let picked = select_failure_cases(frontier, c.robust.nat_range, c.robust.n);
        if picked.is_empty() && c.robust.rate > 0.0 {
            return Err(Error::config(format!(
                "no frontier run has naturalness in [{}, {}]",
                c.robust.nat_range[0], c.robust.nat_range[1]
            )));
        }
        let config = json!({
            "robot": robot_id, "picked": picked, "normalization": frontier.normalization,
            "env": c.env, "rl": c.rl, "robust": c.robust,
        });
        let id = content_id(RunKind::RobustFt, seed, &config);
        if self.store.contains(&id)? {
            return Ok(id);
        }
        let assets = self.robot(robot_id)?;
        let adversaries = picked
            .iter()
            .map(|a| {
                self.store
                    .load_kind(a, RunKind::Attack)?
                    .read_json::<GaussianPolicy>(ADVERSARY)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut robot = assets.robot.clone();
        let population = PopulationSpec {
            base_human: &assets.human,
            adversaries: &adversaries,
            adversary_rate: c.robust.rate,
        };
        let expert = self.expert_of(robot_id)?;
        let history = robust_finetune(
            &mut robot,
            &self.env,
            &population,
            expert.as_ref(),
            &c.rl,
            c.robust.iterations,
            seed,
        )?;
        let stats = evaluate(&self.env, &assets.human, &robot.policy, EVAL_EPISODES, seed)?;
        let record = RunRecord {
            run_id: id,
            kind: RunKind::RobustFt,
            config,
            seed,
            status: RunStatus::Done,
            summary: json!({
                "success_rate": stats.success_rate, "mean_return": stats.mean_return,
                "adversaries": picked, "normalization": frontier.normalization,
            }),
            artifacts: Default::default(),
        };
        let (h, r, t, m) = (
            to_json(&assets.human),
            to_json(&robot),
            assets.canonical.to_ndjson(),
            metrics_csv(&history),
        );
        self.store.persist(
            &record,
            &[
                (HUMAN, &h),
                (ROBOT, &r),
                (TRAJECTORIES, t.as_bytes()),
                (METRICS, m.as_bytes()),
            ],
        )
    }

    /// The behaviour-cloning expert a robot run was trained with, if any.
    fn expert_of(&self, robot_id: &str) -> Result<Option<GaussianPolicy>> {
        let record = self.store.load(robot_id)?.record;
        let id_at = |key: &str| record.config[key].as_str().map(str::to_string);
        match record.kind {
            RunKind::RobustFt => match id_at("robot") {
                Some(parent) => self.expert_of(&parent),
                None => Ok(None),
            },
            RunKind::TrainRobot if record.config["expert"] == json!(true) => match id_at("coop") {
                Some(coop) => {
                    let expert: Learner = self
                        .store
                        .load_kind(&coop, RunKind::Cooptimize)?
                        .read_json(ROBOT)?;
                    Ok(Some(expert.policy))
                }
                None => Ok(None),
            },
            _ => Ok(None),
        }
    }

    /// Endpoint attacks at `scan.lambda_min` and `scan.lambda_max`.
    pub fn sanity(
        &self,
        robot: &RobotAssets,
        metric: MetricKind,
        seed: u64,
    ) -> Result<SanityReport> {
        let (norm, cal) = self.normalization(robot, metric, seed)?;
        let coop = match cal {
            Some(c) => c.cooperative_return,
            None => {
                evaluate(
                    &self.env,
                    &robot.human,
                    &robot.robot.policy,
                    self.cfg.frontier.calibration_episodes,
                    seed,
                )?
                .mean_return
            }
        };
        let low = self.attack(robot, self.cfg.scan.lambda_min, metric, seed, norm)?;
        let high = self.attack(robot, self.cfg.scan.lambda_max, metric, seed, norm)?;
        Ok(SanityReport {
            cooperative_return: coop,
            adversarial_ok: low.adversarialness >= 0.9,
            natural_ok: high.naturalness >= 0.8,
            return_ok: (high.robot_return - coop).abs() <= 0.2 * coop.abs(),
            low,
            high,
        })
    }

    /// Canonical accuracy of an attack run's discriminator at each noise
    /// multiple of the movement std.
    pub fn probe(
        &self,
        attack_id: &str,
        robot: &RobotAssets,
        levels: &[f64],
        seed: u64,
    ) -> Result<Vec<f64>> {
        let run = self.store.load_kind(attack_id, RunKind::Attack)?;
        match run.read_json::<NaturalnessMetric>(METRIC)? {
            NaturalnessMetric::Discriminator(d) => {
                probe_discriminator(&d, &robot.canonical, levels, seed)
            }
            NaturalnessMetric::Mmd(_) => Err(Error::config(format!(
                "run {attack_id} used the MMD metric, which has no discriminator to probe"
            ))),
        }
    }
}
