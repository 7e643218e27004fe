//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use natadv::config::RunConfig;
use natadv::frontier::{auc_from_csv, Frontier};
use natadv::naturalness::MetricKind;
use natadv::rigid::ScanRunStatus;
use natadv::runstore::RunStore;
use natadv::workflow::{ScanRequest, Workflow};
use natadv::{Error, Result};

#[derive(Parser)]
#[command(
    name = "natadv",
    version,
    about = "Natural-adversarial robustness toolkit for CursorAssist"
)]
struct Cli {
    /// TOML file with env/nn/rl/gan/attack/scan/frontier/robust sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for scan rounds.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory; runs live in `<out>/runs`.
    #[arg(long, global = true, default_value = "natadv-out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Co-optimize a human/robot pair and record the canonical dataset.
    Cooptimize,
    /// Train a personalized robot for a co-optimized human.
    TrainRobot {
        #[arg(long)]
        coop: String,
        /// Train without the co-optimized robot as behaviour-cloning expert.
        #[arg(long)]
        no_expert: bool,
    },
    /// Train one natural-adversarial human against a robot.
    Attack {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "ls_gan")]
        metric: MetricKind,
        #[arg(long)]
        robot: String,
        #[arg(long)]
        canonical: Option<PathBuf>,
    },
    /// Scan λ with log-grid refinement and build the frontier.
    Scan {
        #[arg(long, required_unless_present = "resume")]
        robot: Option<String>,
        #[arg(long)]
        canonical: Option<PathBuf>,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Comma-separated history seeds, or a count n meaning seeds 0..n.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value = "ls_gan")]
        metric: MetricKind,
        /// Continue an interrupted scan by id, with its stored settings.
        #[arg(long, conflicts_with = "robot")]
        resume: Option<String>,
        /// Stop after training this many new attacks.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Write frontier.csv, frontier.json and frontier.svg for a scan.
    Frontier {
        #[arg(long)]
        scan: String,
    },
    /// Print the AUC of a scan, a frontier.csv or a frontier.json.
    Auc {
        #[arg(long, required_unless_present_any = ["csv", "json"])]
        scan: Option<String>,
        #[arg(long, conflicts_with_all = ["scan", "json"])]
        csv: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["scan", "csv"])]
        json: Option<PathBuf>,
    },
    /// Fine-tune a robot against failure cases from a frontier.
    RobustFt {
        #[arg(long)]
        robot: String,
        /// Scan id, or a frontier.json whose runs are in the store.
        #[arg(long)]
        frontier: String,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Canonical accuracy of an attack's discriminator under input noise.
    ProbeDisc {
        #[arg(long)]
        run: String,
        #[arg(long)]
        robot: String,
        /// Comma-separated noise multiples of the movement std.
        #[arg(long, default_value = "0,1,2,5,10,20")]
        levels: String,
    },
    /// Endpoint attacks at lambda_min and lambda_max with pass/fail report.
    Sanity {
        #[arg(long)]
        robot: String,
        #[arg(long, default_value = "ls_gan")]
        metric: MetricKind,
    },
    /// Copy a scan's frontier files, scan state and run table to --out.
    Export {
        #[arg(long)]
        scan: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::NotFound(_) | Error::Rejected(_) => 2,
        _ => 1,
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

/// `"0,3,7"` lists seeds; a lone `"3"` means seeds 0, 1, 2.
fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if s.contains(',') {
        parse_list(s, "seed")
    } else {
        let n: u64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad seeds {s:?}")))?;
        Ok((0..n).collect())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn write_frontier(dir: &Path, f: &Frontier) -> Result<()> {
    write_out(dir, "frontier.csv", f.to_csv().as_bytes())?;
    write_out(dir, "frontier.json", f.to_json().as_bytes())?;
    write_out(dir, "frontier.svg", f.to_svg().as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be >= 1".into()));
    }
    let seed = cli.seed;
    let out = cli.out.clone();
    let open = |cfg: RunConfig| -> Result<Workflow> {
        Workflow::new(RunStore::open(out.join("runs"))?, cfg)
    };

    match cli.cmd {
        Cmd::Cooptimize => {
            let wf = open(cfg)?;
            let id = wf.cooptimize(seed)?;
            let run = wf.store.load(&id)?;
            println!("{id}");
            eprintln!("cooperative success {}", run.record.summary["success_rate"]);
        }
        Cmd::TrainRobot { coop, no_expert } => {
            let wf = open(cfg)?;
            let id = wf.train_robot(&coop, seed, !no_expert)?;
            let run = wf.store.load(&id)?;
            println!("{id}");
            eprintln!(
                "success with the synthetic human {}",
                run.record.summary["success_rate"]
            );
        }
        Cmd::Attack {
            lambda,
            metric,
            robot,
            canonical,
        } => {
            let wf = open(cfg)?;
            let mut assets = wf.robot(&robot)?;
            if let Some(p) = &canonical {
                assets = assets.with_canonical_file(p)?;
            }
            let (norm, _) = wf.normalization(&assets, metric, seed)?;
            let s = wf.attack(&assets, lambda, metric, seed, norm)?;
            println!("{}", serde_json::to_string(&s)?);
        }
        Cmd::Scan {
            robot,
            canonical,
            lambda_min,
            lambda_max,
            rounds,
            samples,
            seeds,
            window,
            metric,
            resume,
            stop_after,
        } => {
            let wf = open(cfg.clone())?;
            let request = match resume {
                Some(id) => wf.pending_scan(&id)?,
                None => {
                    let s = &mut cfg.scan;
                    s.lambda_min = lambda_min.unwrap_or(s.lambda_min);
                    s.lambda_max = lambda_max.unwrap_or(s.lambda_max);
                    s.rounds = rounds.unwrap_or(s.rounds);
                    s.samples = samples.unwrap_or(s.samples);
                    s.window = window.unwrap_or(s.window);
                    if let Some(text) = &seeds {
                        s.seeds = parse_seeds(text)?;
                    }
                    cfg.validate()?;
                    ScanRequest {
                        robot_id: robot.expect("required without --resume"),
                        canonical,
                        metric,
                        seed,
                        config: cfg,
                    }
                }
            };
            let progress = |r: &natadv::rigid::ScanRun| match r.status {
                ScanRunStatus::Done => println!(
                    "lambda={:.6e} seed={} nat={:.4} adv={:.4} run={}",
                    r.lambda,
                    r.seed,
                    r.naturalness.unwrap_or(f64::NAN),
                    r.adversarialness.unwrap_or(f64::NAN),
                    r.run_id.as_deref().unwrap_or("-")
                ),
                ScanRunStatus::Failed => println!(
                    "lambda={:.6e} seed={} failed: {}",
                    r.lambda,
                    r.seed,
                    r.error.as_deref().unwrap_or("")
                ),
            };
            let robot_assets = wf.robot(&request.robot_id)?;
            let scan_id = wf.scan_id(&request, &robot_assets);
            match wf.scan(&request, cli.jobs, stop_after, &progress) {
                Ok(rec) => {
                    println!("scan {} auc {}", rec.scan_id, rec.auc);
                }
                Err(e @ Error::Interrupted { .. }) => {
                    eprintln!("error: {e}; continue with --resume {scan_id}");
                    std::process::exit(exit_code(&e).into());
                }
                Err(e) => return Err(e),
            }
        }
        Cmd::Frontier { scan } => {
            let wf = open(cfg)?;
            let f = wf.scan_frontier(&scan)?;
            write_frontier(&out, &f)?;
            println!("{}", f.auc);
        }
        Cmd::Auc { scan, csv, json } => {
            let auc = if let Some(p) = csv {
                auc_from_csv(&read_input(&p)?)?
            } else if let Some(p) = json {
                Frontier::from_json(&read_input(&p)?)?.auc
            } else {
                open(cfg)?.scan_frontier(&scan.expect("required"))?.auc
            };
            println!("{auc}");
        }
        Cmd::RobustFt {
            robot,
            frontier,
            rate,
            n,
        } => {
            cfg.robust.rate = rate.unwrap_or(cfg.robust.rate);
            cfg.robust.n = n.unwrap_or(cfg.robust.n);
            let wf = open(cfg)?;
            let f = if Path::new(&frontier).is_file() {
                Frontier::from_json(&read_input(Path::new(&frontier))?)?
            } else {
                wf.scan_frontier(&frontier)?
            };
            let id = wf.robust_ft(&robot, &f, seed)?;
            let run = wf.store.load(&id)?;
            println!("{id}");
            eprintln!(
                "adversaries {} success with the synthetic human {}",
                run.record.summary["adversaries"], run.record.summary["success_rate"]
            );
        }
        Cmd::ProbeDisc { run, robot, levels } => {
            let wf = open(cfg)?;
            let levels: Vec<f64> = parse_list(&levels, "noise level")?;
            let assets = wf.robot(&robot)?;
            let acc = wf.probe(&run, &assets, &levels, seed)?;
            println!("noise_level,canonical_accuracy");
            for (l, a) in levels.iter().zip(acc) {
                println!("{l},{a}");
            }
        }
        Cmd::Sanity { robot, metric } => {
            let wf = open(cfg)?;
            let assets = wf.robot(&robot)?;
            let r = wf.sanity(&assets, metric, seed)?;
            let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
            println!("cooperative return {:.3}", r.cooperative_return);
            println!(
                "{} lambda={:e} adversarialness {:.4} (needs >= 0.9)",
                verdict(r.adversarial_ok),
                r.low.lambda,
                r.low.adversarialness
            );
            println!(
                "{} lambda={:e} naturalness {:.4} (needs >= 0.8)",
                verdict(r.natural_ok),
                r.high.lambda,
                r.high.naturalness
            );
            println!(
                "{} lambda={:e} robot return {:.3} (needs within 20% of cooperative)",
                verdict(r.return_ok),
                r.high.lambda,
                r.high.robot_return
            );
        }
        Cmd::Export { scan } => {
            let wf = open(cfg)?;
            let (rec, run) = wf.scan_record(&scan)?;
            for name in ["frontier.csv", "frontier.json", "frontier.svg", "scan.json"] {
                write_out(&out, name, &run.read(name)?)?;
            }
            let mut table = String::from(
                "run_id,lambda,seed,round,status,naturalness,adversarialness,robot_return\n",
            );
            for r in &rec.state.runs {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.run_id.as_deref().unwrap_or(""),
                    r.lambda,
                    r.seed,
                    r.round,
                    match r.status {
                        ScanRunStatus::Done => "done",
                        ScanRunStatus::Failed => "failed",
                    },
                    opt(r.naturalness),
                    opt(r.adversarialness),
                    opt(r.robot_return)
                ));
            }
            write_out(&out, "runs.csv", table.as_bytes())?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
        _ => e.into(),
    })
}
