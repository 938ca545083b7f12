//! Command-line front end. Exit codes: 0 success, 1 invalid input, 2 runtime
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::harness::bench::{
    ablation_attention, ablation_layers, ablation_to_csv, accuracy_on, bench_pmax_sweep, eval_channels,
    eval_off_training, Models, Scheme, SweepOptions,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::dataset::{gen_dataset_with, Dataset, SolverChoice};
use crate::harness::init_threads;
use crate::netmodel::generate_channels_with_seed;
use crate::unfold_fum::{fum_train_incremental, FumModel, LogRow};
use crate::unfold_masum::{masum_train, MasumModel};

#[derive(Debug, Parser)]
#[command(name = "unfold-ee", version, about = "Energy-efficient power control: FP solvers and unfolded models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Fum,
    Masum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationKind {
    /// FUM layer count.
    Layers,
    /// MASUM attention-block count.
    Attention,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a solver-labelled dataset (JSON lines).
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides dataset.n_samples.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        solver: Option<SolverChoice>,
    },
    /// Solve one channel drawn from the scenario and print the report (JSON).
    Solve {
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        #[arg(long)]
        config: PathBuf,
        /// Channel seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report the measured wall time instead of 0.
        #[arg(long)]
        timing: bool,
    },
    /// Per-iteration WSEE of one solve (CSV).
    Trace {
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on the training split of a dataset.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Shuffling and initialisation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Training log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Achieved-WSEE ratios of trained models (JSON).
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        fum: Option<PathBuf>,
        #[arg(long)]
        masum: Option<PathBuf>,
        /// Evaluate on freshly drawn channels from the shifted distribution.
        #[arg(long)]
        shifted: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// P_max sweep over every configured scheme (CSV).
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fum: Option<PathBuf>,
        #[arg(long)]
        masum: Option<PathBuf>,
        /// Evaluation channel seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Layer-count or attention-count ablation (CSV).
    Ablate {
        #[arg(long, value_enum)]
        kind: AblationKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Algorithm 1 (numerical inner solver).
    #[value(alias = "alg1")]
    Numerical,
    /// Algorithm 2 (closed form).
    #[value(alias = "cf", alias = "alg2")]
    Closedform,
}

impl From<Algorithm> for SolverChoice {
    fn from(a: Algorithm) -> Self {
        match a {
            Algorithm::Numerical => SolverChoice::Numerical,
            Algorithm::Closedform => SolverChoice::Closedform,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Shape(_) | Error::InvalidInput(_) | Error::Untrained(_) | Error::Json(_) | Error::Csv(_) => 1,
            Error::Domain { .. } | Error::Autodiff(_) | Error::Io(_) => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_input<T>(path: &Path, what: &str, parse: impl FnOnce(&str) -> crate::Result<T>) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {what} {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::invalid(format!("bad {what} {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    read_input(path, "dataset", |t| Dataset::read_jsonl(t.as_bytes()))
}

fn load_fum(path: &Path) -> CliResult<FumModel> {
    read_input(path, "FUM model", FumModel::from_json)
}

fn load_masum(path: &Path) -> CliResult<MasumModel> {
    read_input(path, "MASUM model", MasumModel::from_json)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let res = match out {
        Some(p) => std::fs::write(p, bytes),
        None => std::io::stdout().write_all(bytes),
    };
    res.map_err(|e| CliError {
        code: 2,
        message: format!("write failed: {e}"),
    })
}

fn json_line<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_vec(v).map_err(Error::from)?;
    s.push(b'\n');
    Ok(s)
}

fn log_csv(rows: &[LogRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(Error::from)?;
    }
    w.into_inner().map_err(|e| CliError {
        code: 2,
        message: e.to_string(),
    })
}

#[derive(Serialize)]
struct EvalReport {
    split: &'static str,
    instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    fum_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    masum_ratio: Option<f64>,
}

pub fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenData {
            config,
            seed,
            out,
            n,
            solver,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mut opts = cfg.dataset.options.clone();
            opts.solver_options = cfg.solver.clone();
            if let Some(s) = solver {
                opts.solver = s;
            }
            let d = gen_dataset_with(&cfg.network, n.unwrap_or(cfg.dataset.n_samples), &opts, seed)?;
            let mut buf = Vec::new();
            d.write_jsonl(&mut buf)?;
            emit(Some(&out), &buf)
        }
        Command::Solve {
            algorithm,
            config,
            seed,
            out,
            timing,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let g = generate_channels_with_seed(&cfg.network, seed)?;
            let init = crate::PowerAllocation::uniform(cfg.network.num_bs, cfg.network.users_per_bs);
            let mut rep = SolverChoice::from(algorithm).solve_from(&g, &cfg.network, &cfg.solver, &init)?;
            if !timing {
                rep.wall_time_s = 0.0;
            }
            emit(out.as_deref(), &json_line(&rep)?)
        }
        Command::Trace {
            algorithm,
            config,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let g = generate_channels_with_seed(&cfg.network, seed)?;
            let init = crate::PowerAllocation::uniform(cfg.network.num_bs, cfg.network.users_per_bs);
            let rep = SolverChoice::from(algorithm).solve_from(&g, &cfg.network, &cfg.solver, &init)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["iteration", "wsee"]).map_err(Error::from)?;
            for (i, v) in rep.objective_trace.iter().enumerate() {
                w.write_record([(i + 1).to_string(), v.to_string()]).map_err(Error::from)?;
            }
            let buf = w.into_inner().map_err(|e| CliError::invalid(e.to_string()))?;
            emit(out.as_deref(), &buf)
        }
        Command::Train {
            model,
            config,
            data,
            seed,
            out,
            log,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let d = load_dataset(&data)?;
            if d.cfg != cfg.network {
                return Err(CliError::invalid("dataset scenario differs from the config's network"));
            }
            let train = d.train();
            let (json, rows) = match model {
                ModelKind::Fum => {
                    let hyper = crate::harness::TrainConfig { seed, ..cfg.fum.train.clone() };
                    let (m, rows) = fum_train_incremental(&train, &cfg.network, cfg.fum.layers, &hyper)?;
                    (m.to_json()?, rows)
                }
                ModelKind::Masum => {
                    let hyper = crate::harness::TrainConfig { seed, ..cfg.masum.train.clone() };
                    let (m, rows) = masum_train(&train, &cfg.network, &cfg.masum_layout(), &hyper)?;
                    (m.to_json()?, rows)
                }
            };
            emit(Some(&out), json.as_bytes())?;
            if let Some(p) = log {
                emit(Some(&p), &log_csv(&rows)?)?;
            }
            Ok(())
        }
        Command::Eval {
            config,
            data,
            fum,
            masum,
            shifted,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let fum = fum.as_deref().map(load_fum).transpose()?;
            let masum = masum.as_deref().map(load_masum).transpose()?;
            if fum.is_none() && masum.is_none() {
                return Err(CliError::invalid("pass --fum and/or --masum"));
            }
            let models = Models {
                fum: fum.as_ref(),
                masum: masum.as_ref(),
            };
            let bytes = if shifted {
                let r = eval_off_training(
                    models,
                    &cfg.network,
                    cfg.bench.off_training,
                    cfg.bench.instances,
                    seed,
                    &cfg.solver,
                )?;
                json_line(&r)?
            } else {
                let path = data.ok_or_else(|| CliError::invalid("--data is required unless --shifted"))?;
                let d = load_dataset(&path)?;
                let test = d.test();
                let ratio = |s: Scheme, present: bool| -> CliResult<Option<f64>> {
                    Ok(if present { Some(accuracy_on(&test, &d.cfg, s, models)?) } else { None })
                };
                json_line(&EvalReport {
                    split: "test",
                    instances: test.len(),
                    fum_ratio: ratio(Scheme::Fum, fum.is_some())?,
                    masum_ratio: ratio(Scheme::Masum, masum.is_some())?,
                })?
            };
            emit(out.as_deref(), &bytes)
        }
        Command::Bench {
            config,
            fum,
            masum,
            seed,
            out,
            timing,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let fum = fum.as_deref().map(load_fum).transpose()?;
            let masum = masum.as_deref().map(load_masum).transpose()?;
            let models = Models {
                fum: fum.as_ref(),
                masum: masum.as_ref(),
            };
            let channels = eval_channels(&cfg.network, cfg.bench.instances, seed)?;
            let opts = SweepOptions {
                solver: cfg.solver.clone(),
                timing,
                warm_start: cfg.bench.warm_start,
            };
            let r = bench_pmax_sweep(&cfg.network, &cfg.bench.schemes, &cfg.bench.pmax_dbw, &channels, models, &opts)?;
            let mut buf = Vec::new();
            r.to_csv(&mut buf)?;
            emit(out.as_deref(), &buf)
        }
        Command::Ablate {
            kind,
            config,
            data,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let d = load_dataset(&data)?;
            let reps = cfg.bench.timing_reps.max(1);
            let mut buf = Vec::new();
            match kind {
                AblationKind::Layers => {
                    let hyper = crate::harness::TrainConfig { seed, ..cfg.fum.train.clone() };
                    let rows = ablation_layers(&d, &cfg.bench.layer_grid, &hyper, reps)?;
                    ablation_to_csv(&rows, "layers", &mut buf)?;
                }
                AblationKind::Attention => {
                    let hyper = crate::harness::TrainConfig { seed, ..cfg.masum.train.clone() };
                    let rows = ablation_attention(&d, &cfg.masum_layout(), &cfg.bench.attention_grid, &hyper, reps)?;
                    ablation_to_csv(&rows, "attention_blocks", &mut buf)?;
                }
            }
            emit(out.as_deref(), &buf)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
/// Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
