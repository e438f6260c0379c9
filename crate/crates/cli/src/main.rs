use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand, ValueEnum};
use covisloop::harness::{
    ate_timeline, evaluate_sequence, graph_dot, load_dataset, load_reports, report_dot, reports_json, run_ablation,
    run_online, timeline_csv, write_jsonl, EvaluationReport,
};
use covisloop::{DetectionParams, KeyframeId, KeyframeRecord, MapDatabase, Scenario};
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "covisloop",
    version,
    about = "Object-level loop closure detection on simulated keyframe logs"
)]
struct Cli {
    /// Directory to write results into. Results go to standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format. Each command accepts a subset.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Render a preset (single_loop, two_floor_twin, noise_free_loop) or a
    /// TOML/JSON scenario file into a keyframe dataset.
    Simulate {
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay a dataset through map building and loop detection.
    Detect {
        dataset: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// RANSAC seed, overriding the parameters file and environment.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score loop reports against ground-truth loops and trajectory error.
    Eval {
        dataset: PathBuf,
        reports: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Precision and recall as the verification checks are enabled in turn.
    Ablate {
        dataset: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Graphviz view of the covisibility graph, one keyframe's subgraph, or
    /// the matched subgraphs of each loop report.
    ExportGraph {
        dataset: PathBuf,
        #[arg(long, conflicts_with = "keyframe")]
        reports: Option<PathBuf>,
        #[arg(long)]
        keyframe: Option<u64>,
    },
}

enum Failure {
    /// Bad input files, parameters or arguments; exit code 2.
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

trait InputResult<T> {
    fn input(self, what: impl Display) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputResult<T> for Result<T, E> {
    fn input(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(what.to_string())))
    }
}

fn bad_input(message: impl Display) -> Failure {
    Failure::Input(anyhow!("{message}"))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_scenario(name: &str) -> Result<Scenario, Failure> {
    if let Some(s) = Scenario::by_name(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    let text = fs::read_to_string(path).input(format!("scenario {name} is neither a preset nor a readable file"))?;
    let scenario: Scenario = if is_json(path) {
        serde_json::from_str(&text).input(name)?
    } else {
        toml::from_str(&text).input(name)?
    };
    scenario.validate().input(name)?;
    Ok(scenario)
}

/// Defaults, then the parameters file, then environment overrides, then
/// `--seed`.
fn load_params(path: Option<&Path>, seed: Option<u64>) -> Result<DetectionParams, Failure> {
    let mut params = match path {
        None => DetectionParams::default(),
        Some(p) => {
            let what = p.display().to_string();
            let text = fs::read_to_string(p).input(&what)?;
            if is_json(p) {
                serde_json::from_str(&text).input(&what)?
            } else {
                toml::from_str(&text).input(&what)?
            }
        }
    };
    params = params.with_env_overrides().input("parameter overrides")?;
    if let Some(s) = seed {
        params.ransac_seed = s;
    }
    params.validate().input("parameters")?;
    Ok(params)
}

fn dataset(path: &Path) -> Result<Vec<KeyframeRecord>, Failure> {
    load_dataset(path).input(format!("dataset {}", path.display()))
}

fn require_format(given: Option<Format>, allowed: &[Format], command: &str) -> Result<Format, Failure> {
    match given {
        None => Ok(allowed[0]),
        Some(f) if allowed.contains(&f) => Ok(f),
        Some(f) => Err(bad_input(
            format!("{command} does not support --format {f:?}").to_lowercase(),
        )),
    }
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, text)?;
            info!(path = %path.display(), "wrote");
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn evaluation_csv(ev: &EvaluationReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    format!(
        "detections,true_positives,labeled_loops,precision,recall,ate_before_cm,ate_after_cm\n{},{},{},{:.6},{:.6},{},{}\n",
        ev.detections,
        ev.true_positives,
        ev.labeled_loops,
        ev.precision,
        ev.recall,
        opt(ev.ate_before_cm),
        opt(ev.ate_after_cm)
    )
}

fn map_of(records: &[KeyframeRecord]) -> Result<MapDatabase, Failure> {
    let mut db = MapDatabase::new();
    for r in records {
        db.integrate(r.clone()).input("dataset")?;
    }
    Ok(db)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate { scenario, seed } => {
            require_format(cli.format, &[Format::Json], "simulate")?;
            let sim = load_scenario(&scenario)?.generate(seed).input("scenario")?;
            let mut buf = Vec::new();
            write_jsonl(sim.keyframes(), &mut buf)?;
            emit(out, "keyframes.jsonl", &String::from_utf8(buf)?)
        }
        Command::Detect {
            dataset: path,
            params,
            seed,
        } => {
            require_format(cli.format, &[Format::Json], "detect")?;
            let params = load_params(params.as_deref(), seed)?;
            let records = dataset(&path)?;
            let run = run_online(&records, &params).input("dataset")?;
            emit(out, "reports.json", &reports_json(&run.reports()))
        }
        Command::Eval {
            dataset: path,
            reports,
            params,
        } => {
            let format = require_format(cli.format, &[Format::Json, Format::Csv], "eval")?;
            let params = load_params(params.as_deref(), None)?;
            let records = dataset(&path)?;
            let reports = load_reports(&reports).input(format!("reports {}", reports.display()))?;
            let ev = evaluate_sequence(&records, &reports, params.min_kf_gap).input("dataset")?;
            match format {
                Format::Csv => emit(out, "evaluation.csv", &evaluation_csv(&ev))?,
                _ => emit(out, "evaluation.json", &to_json(&ev))?,
            }
            if out.is_some() {
                let closing = reports.iter().max_by_key(|r| r.current_kf);
                let rows = ate_timeline(&records, closing).input("dataset")?;
                emit(out, "timeline.csv", &timeline_csv(&rows))?;
            }
            Ok(())
        }
        Command::Ablate {
            dataset: path,
            params,
            seed,
        } => {
            let format = require_format(cli.format, &[Format::Json, Format::Csv], "ablate")?;
            let params = load_params(params.as_deref(), seed)?;
            let table = run_ablation(&dataset(&path)?, &params).input("dataset")?;
            match format {
                Format::Csv => emit(out, "ablation.csv", &table.to_csv()),
                _ => emit(out, "ablation.json", &to_json(&table)),
            }
        }
        Command::ExportGraph {
            dataset: path,
            reports,
            keyframe,
        } => {
            require_format(cli.format, &[Format::Dot], "export-graph")?;
            let db = map_of(&dataset(&path)?)?;
            match reports {
                Some(rp) => {
                    let reports = load_reports(&rp).input(format!("reports {}", rp.display()))?;
                    let mut all = String::new();
                    for r in &reports {
                        let dot = report_dot(&db, r).input("report")?;
                        match out {
                            Some(_) => emit(out, &format!("loop_{}_{}.dot", r.current_kf.0, r.loop_kf.0), &dot)?,
                            None => all.push_str(&dot),
                        }
                    }
                    if out.is_none() {
                        emit(None, "", &all)?;
                    }
                    Ok(())
                }
                None => {
                    let kf = keyframe.map(KeyframeId);
                    let dot = graph_dot(&db, kf).input("keyframe")?;
                    let name = kf.map_or("map.dot".to_string(), |k| format!("keyframe_{}.dot", k.0));
                    emit(out, &name, &dot)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
