//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
//! 3 sweep finished with failed cells.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rhd_core::data::{generate, BaseFamily, Family, NoiseKind};
use rhd_core::evaluation::{evaluate, oracle_opt, OracleMethod, DEFAULT_GRID_RESOLUTION, DEFAULT_SEARCH_DIRECTIONS};
use rhd_core::trainers::{
    convex_step_size, psat_step_size, random_unit_weights, train_gd, train_psat, train_sgd, Algorithm, OnlineStream, TrainConfig,
    TrainTrace, WithReplacement,
};
use rhd_core::{AttackSpec, Dataset, Exponent, GeneratorSpec, LossSpec, NoiseSpec, WeightVector};

use crate::format::{load_dataset, save_dataset, FormatError};
use crate::sweep::{run_sweep, write_csv, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "rhd", version, about = "Adversarially robust halfspace learning under lp perturbations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train a halfspace and write the trace as JSON.
    Train(TrainArgs),
    /// Evaluate a model on a dataset.
    Eval(EvalArgs),
    /// Estimate the best achievable robust error on a dataset.
    Oracle(OracleArgs),
    /// Run a sweep described by a JSON config and write CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    UniformBall,
    HardMargin,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaseArg {
    Gaussian,
    UniformBall,
}

/// Generator flags shared by `gen` and streaming `train`.
#[derive(Debug, Clone, Args)]
pub struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// none, random:<rate> or boundary:<rate>.
    #[arg(long, default_value = "none")]
    pub noise: String,
    /// Margin for the hard-margin family.
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// e<k> (one-based basis vector) or comma-separated weights.
    #[arg(long, default_value = "e1")]
    pub teacher: String,
    /// Rescale rows so that the largest lp norm is 1.
    #[arg(long)]
    pub normalize: Option<String>,
    /// p of the uniform lp ball family.
    #[arg(long, default_value = "2")]
    pub p_ball: String,
    /// Base law for the hard-margin family.
    #[arg(long, value_enum, default_value = "gaussian")]
    pub base: BaseArg,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Gd,
    Sgd,
    Psat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Xent,
    Hinge,
    Sigmoidal,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Sigmoidal temperature, or "auto" for sigma = r.
    #[arg(long, default_value = "auto")]
    pub sigma: String,
    #[arg(long, default_value = "2")]
    pub p: String,
    #[arg(long)]
    pub r: f64,
    /// Step size; defaults to the schedule driven by --eps.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Target accuracy for the default step size.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Number of update steps.
    #[arg(long)]
    pub k: usize,
    /// Training data. sgd and psat sample from it with replacement.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Draw fresh samples from the generator flags instead of --data.
    #[arg(long)]
    pub stream: bool,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Held-out set for selecting the best snapshot.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// zero, random, e<k> or comma-separated weights. Default: zero, or
    /// random on the unit lq sphere for psat.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trace JSON whose selected snapshot is evaluated.
    #[arg(long, conflicts_with = "weights")]
    pub trace: Option<PathBuf>,
    /// Comma-separated weights or e<k>.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "2")]
    pub p: String,
    #[arg(long)]
    pub r: f64,
    #[arg(long, value_enum, default_value = "xent")]
    pub loss: LossArg,
    #[arg(long, default_value = "auto")]
    pub sigma: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Grid2d,
    Random,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "2")]
    pub p: String,
    #[arg(long)]
    pub r: f64,
    #[arg(long, value_enum, default_value = "random")]
    pub method: MethodArg,
    /// Angular step for grid2d.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Number of directions for random search.
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra candidate directions (repeatable).
    #[arg(long)]
    pub candidate: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; defaults to the config's output field.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0} sweep cell(s) failed")]
    CellFailures(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::CellFailures(_) => 3,
        }
    }
}

impl From<rhd_core::Error> for CliError {
    fn from(e: rhd_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn parse_exponent(flag: &str, s: &str) -> Result<Exponent, CliError> {
    s.parse().map_err(|e| usage(format!("--{flag}: {e}")))
}

fn parse_noise(s: &str) -> Result<NoiseSpec, CliError> {
    let (kind, rate) = match s.split_once(':') {
        None if s == "none" => return Ok(NoiseSpec::NONE),
        None => return Err(usage(format!("--noise: expected none, random:<rate> or boundary:<rate>, got {s:?}"))),
        Some((k, r)) => (k, r),
    };
    let rate: f64 = rate.parse().map_err(|_| usage(format!("--noise: {rate:?} is not a rate")))?;
    let kind = match kind {
        "random" => NoiseKind::RandomFlip,
        "boundary" => NoiseKind::BoundaryFlip,
        other => return Err(usage(format!("--noise: unknown kind {other:?}"))),
    };
    Ok(NoiseSpec::new(kind, rate)?)
}

/// `e<k>` (one-based) or comma-separated values.
fn parse_vector(flag: &str, s: &str, d: Option<usize>) -> Result<WeightVector, CliError> {
    if let Some(k) = s.strip_prefix('e') {
        let k: usize = k.parse().map_err(|_| usage(format!("--{flag}: {s:?} is not e<k>")))?;
        let d = d.ok_or_else(|| usage(format!("--{flag}: e{k} needs a known dimension")))?;
        if k == 0 || k > d {
            return Err(usage(format!("--{flag}: e{k} is out of range for d = {d}")));
        }
        return Ok(WeightVector::basis(d, k - 1)?);
    }
    let values: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let values = values.map_err(|_| usage(format!("--{flag}: {s:?} is not a comma-separated list of numbers")))?;
    if let Some(d) = d {
        if values.len() != d {
            return Err(usage(format!("--{flag}: expected {d} entries, found {}", values.len())));
        }
    }
    Ok(WeightVector::new(values)?)
}

fn generator_spec(args: &GeneratorArgs) -> Result<GeneratorSpec, CliError> {
    let d = args.d.ok_or_else(|| usage("missing required flag --d"))?;
    let family = match args.family {
        FamilyArg::Gaussian => Family::GaussianIsotropic,
        FamilyArg::UniformBall => Family::UniformLpBall { p: parse_exponent("p-ball", &args.p_ball)? },
        FamilyArg::HardMargin => Family::HardMargin {
            base: match args.base {
                BaseArg::Gaussian => BaseFamily::GaussianIsotropic,
                BaseArg::UniformBall => BaseFamily::UniformLpBall { p: parse_exponent("p-ball", &args.p_ball)? },
            },
        },
    };
    let mut spec = GeneratorSpec::new(family, d).with_teacher(parse_vector("teacher", &args.teacher, Some(d))?);
    spec.gamma0 = args.gamma0;
    spec.noise = parse_noise(&args.noise)?;
    if let Some(p) = &args.normalize {
        spec.normalize_to_lp = Some(parse_exponent("normalize", p)?);
    }
    if matches!(args.family, FamilyArg::HardMargin) && args.gamma0.is_none() {
        return Err(usage("the hard-margin family needs --gamma0"));
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let spec = generator_spec(&args.generator)?;
    let ds = generate(&spec, args.n, args.seed)?;
    save_dataset(&ds, &args.output).map_err(|e| match e {
        FormatError::Io(e) => io_error(&args.output, e),
        other => other.into(),
    })?;
    let flipped = ds.provenance().map_or(0, |p| p.flipped);
    println!(
        "wrote {}: n={} d={} noise={:?} rate={} flipped={} ({:.4})",
        args.output.display(),
        ds.n(),
        ds.d(),
        spec.noise.kind(),
        spec.noise.rate(),
        flipped,
        flipped as f64 / ds.n() as f64
    );
    Ok(())
}

fn read_data(path: &Path) -> Result<Dataset, CliError> {
    load_dataset(path).map_err(|e| match e {
        FormatError::Io(e) => io_error(path, e),
        other => usage(format!("{}: {other}", path.display())),
    })
}

fn loss_spec(loss: LossArg, sigma: &str, r: f64) -> Result<LossSpec, CliError> {
    Ok(match loss {
        LossArg::Xent => LossSpec::CrossEntropy,
        LossArg::Hinge => LossSpec::Hinge,
        LossArg::Sigmoidal => {
            let sigma = if sigma == "auto" {
                r
            } else {
                sigma.parse().map_err(|_| usage(format!("--sigma: {sigma:?} is neither auto nor a number")))?
            };
            LossSpec::sigmoidal(sigma)?
        }
    })
}

fn initial_weights(init: Option<&str>, algo: AlgoArg, d: usize, q: Exponent, seed: u64) -> Result<WeightVector, CliError> {
    let init = init.unwrap_or(if algo == AlgoArg::Psat { "random" } else { "zero" });
    match init {
        "zero" => Ok(WeightVector::zeros(d)?),
        "random" => Ok(random_unit_weights(d, q, seed)?),
        other => parse_vector("init", other, Some(d)),
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let algorithm = match args.algo {
        AlgoArg::Gd => Algorithm::Gd,
        AlgoArg::Sgd => Algorithm::Sgd,
        AlgoArg::Psat => Algorithm::Psat,
    };
    let default_loss = if args.algo == AlgoArg::Psat { LossArg::Sigmoidal } else { LossArg::Xent };
    let loss = loss_spec(args.loss.unwrap_or(default_loss), &args.sigma, args.r)?;
    let attack = AttackSpec::new(parse_exponent("p", &args.p)?, args.r)?;

    let (data, stream) = match (&args.data, args.stream) {
        (Some(_), true) => return Err(usage("--data and --stream are mutually exclusive")),
        (None, false) => return Err(usage("one of --data or --stream is required")),
        (Some(path), false) => (Some(read_data(path)?), None),
        (None, true) => (None, Some(generator_spec(&args.generator)?)),
    };
    if algorithm == Algorithm::Gd && data.is_none() {
        return Err(usage("gd needs a fixed dataset (--data)"));
    }
    let d = data.as_ref().map_or_else(|| stream.as_ref().map_or(0, |s| s.d), Dataset::d);
    let validation = args.validation.as_deref().map(read_data).transpose()?;

    let eta = match args.eta {
        Some(eta) => eta,
        None => match algorithm {
            Algorithm::Gd | Algorithm::Sgd => convex_step_size(args.eps, attack.p(), d, loss.constants().lipschitz),
            Algorithm::Psat => psat_step_size(args.eps, attack.radius(), d, attack.p()),
        },
    };
    let cfg = TrainConfig {
        algorithm,
        loss,
        attack,
        eta,
        iterations: args.k,
        w_init: initial_weights(args.init.as_deref(), args.algo, d, attack.q(), args.seed)?,
        eval_every: args.eval_every,
        seed: args.seed,
    };
    cfg.validate(d)?;

    let trace = match (algorithm, &data, stream) {
        (Algorithm::Gd, Some(ds), _) => train_gd(ds, &cfg, validation.as_ref())?,
        (Algorithm::Sgd, Some(ds), _) => train_sgd(WithReplacement::new(ds, cfg.seed), &cfg, validation.as_ref())?,
        (Algorithm::Psat, Some(ds), _) => train_psat(WithReplacement::new(ds, cfg.seed), &cfg, validation.as_ref())?,
        (Algorithm::Sgd, None, Some(spec)) => train_sgd(OnlineStream::new(spec, cfg.seed)?, &cfg, validation.as_ref())?,
        (Algorithm::Psat, None, Some(spec)) => train_psat(OnlineStream::new(spec, cfg.seed)?, &cfg, validation.as_ref())?,
        _ => unreachable!("gd without data rejected above"),
    };
    write_json(&args.output, &trace)?;

    let selected = trace.selected();
    let robust = selected
        .validation_robust_error
        .or(selected.metrics.map(|m| m.robust_error))
        .map_or_else(|| "n/a".to_string(), |e| e.to_string());
    println!(
        "{} k={} eta={} best_k={} robust_error={} wrote {}",
        algorithm.name(),
        cfg.iterations,
        cfg.eta,
        selected.iteration,
        robust,
        args.output.display()
    );
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_error(path, e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_error(path, e))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let ds = read_data(&args.data)?;
    let w = match (&args.trace, &args.weights) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let trace: TrainTrace =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            WeightVector::new(trace.selected().weights.clone())?
        }
        (None, Some(w)) => parse_vector("weights", w, Some(ds.d()))?,
        _ => return Err(usage("exactly one of --trace or --weights is required")),
    };
    if w.dim() != ds.d() {
        return Err(usage(format!("weights have dimension {} but the data has d = {}", w.dim(), ds.d())));
    }
    let attack = AttackSpec::new(parse_exponent("p", &args.p)?, args.r)?;
    let loss = loss_spec(args.loss, &args.sigma, args.r)?;
    print_json(&evaluate(&w, &ds, &attack, &loss)?)
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let ds = read_data(&args.data)?;
    let attack = AttackSpec::new(parse_exponent("p", &args.p)?, args.r)?;
    let method = match args.method {
        MethodArg::Grid2d => OracleMethod::Grid2d { resolution: args.resolution.unwrap_or(DEFAULT_GRID_RESOLUTION) },
        MethodArg::Random => OracleMethod::RandomSearch {
            directions: args.directions.unwrap_or(DEFAULT_SEARCH_DIRECTIONS),
            seed: args.seed,
        },
    };
    let candidates = args
        .candidate
        .iter()
        .map(|c| parse_vector("candidate", c, Some(ds.d())))
        .collect::<Result<Vec<_>, _>>()?;
    print_json(&oracle_opt(&ds, &attack, method, &candidates)?)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_error(&args.config, e))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    let output = args
        .output
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| usage("no output path: pass -o or set output in the config"))?;
    let rows = run_sweep(&cfg, args.jobs)?;
    let file = fs::File::create(&output).map_err(|e| io_error(&output, e))?;
    write_csv(&rows, BufWriter::new(file)).map_err(|e| io_error(&output, e))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("wrote {} rows to {}", rows.len(), output.display());
    if failed > 0 {
        return Err(CliError::CellFailures(failed));
    }
    Ok(())
}
