//! Multi-seed experiment grids over radius and noise rate.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use rhd_core::data::{generate, NoiseKind};
use rhd_core::evaluation::{angle_and_sine, clean_error, oracle_opt, robust_error, OracleMethod};
use rhd_core::trainers::{train_gd, train_psat, train_sgd, Algorithm, OnlineStream, TrainConfig};
use rhd_core::{Error, GeneratorSpec, WeightVector};
use serde::{Deserialize, Serialize};

/// A sweep: the cross product of `radii × noise_rates × seeds`.
///
/// The radius of `train.attack` and `train.seed` are replaced per cell, and
/// the noise rate of `generator.noise` likewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub train: TrainConfig,
    pub radii: Vec<f64>,
    pub noise_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Training sample size for gd.
    pub n: usize,
    #[serde(default = "default_validation_n")]
    pub validation_n: usize,
    pub eval_n: usize,
    #[serde(default)]
    pub oracle: Option<OracleMethod>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_validation_n() -> usize {
    10_000
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.radii.is_empty() || self.noise_rates.is_empty() || self.seeds.is_empty() {
            return bad("radii, noise_rates and seeds must be non-empty");
        }
        if self.eval_n < 1000 {
            return bad("eval_n must be at least 1000");
        }
        if self.n == 0 || self.validation_n == 0 {
            return bad("n and validation_n must be positive");
        }
        if self.generator.noise.kind() == NoiseKind::None && self.noise_rates.iter().any(|&r| r != 0.0) {
            return bad("a nonzero noise rate needs a noise kind in the generator");
        }
        self.generator.validate()?;
        for &r in &self.radii {
            self.train.attack.with_radius(r)?;
        }
        for &rate in &self.noise_rates {
            self.generator.noise.with_rate(rate)?;
        }
        self.train.validate(self.generator.d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub noise_rate: f64,
    pub seed: u64,
    pub algorithm: String,
    pub opt_estimate: Option<f64>,
    pub teacher_robust_error: Option<f64>,
    pub learned_robust_error: Option<f64>,
    pub learned_clean_error: Option<f64>,
    pub sin_theta: Option<f64>,
    pub iterations_to_best: Option<usize>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 12] = [
    "r",
    "noise_rate",
    "seed",
    "algorithm",
    "opt_estimate",
    "teacher_robust_error",
    "learned_robust_error",
    "learned_clean_error",
    "sin_theta",
    "iterations_to_best",
    "wall_ms",
    "error",
];

/// Independent per-purpose seeds derived from a cell seed.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs every cell on a pool of `jobs` threads; rows come back sorted by
/// `(r, noise_rate, seed)`.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepRow>, Error> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &r in &cfg.radii {
        for &rate in &cfg.noise_rates {
            for &seed in &cfg.seeds {
                cells.push((r, rate, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(|&(r, rate, seed)| run_cell(cfg, r, rate, seed)).collect());
    rows.sort_by(|a, b| {
        a.r.total_cmp(&b.r).then(a.noise_rate.total_cmp(&b.noise_rate)).then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

fn run_cell(cfg: &ExperimentConfig, r: f64, rate: f64, seed: u64) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        r,
        noise_rate: rate,
        seed,
        algorithm: cfg.train.algorithm.name().to_string(),
        opt_estimate: None,
        teacher_robust_error: None,
        learned_robust_error: None,
        learned_clean_error: None,
        sin_theta: None,
        iterations_to_best: None,
        wall_ms: 0,
        error: None,
    };
    if let Err(e) = fill_cell(cfg, r, rate, seed, &mut row) {
        row.error = Some(e.to_string());
    }
    row.wall_ms = start.elapsed().as_millis() as u64;
    row
}

fn fill_cell(cfg: &ExperimentConfig, r: f64, rate: f64, seed: u64, row: &mut SweepRow) -> Result<(), Error> {
    let mut generator = cfg.generator.clone();
    generator.noise = generator.noise.with_rate(rate)?;
    let mut train = cfg.train.clone();
    train.attack = train.attack.with_radius(r)?;
    train.seed = seed;
    let attack = train.attack;

    let validation = generate(&generator, cfg.validation_n, derive_seed(seed, 1))?;
    let eval = generate(&generator, cfg.eval_n, derive_seed(seed, 2))?;
    let trace = match train.algorithm {
        Algorithm::Gd => {
            let ds = generate(&generator, cfg.n, derive_seed(seed, 0))?;
            train_gd(&ds, &train, Some(&validation))?
        }
        Algorithm::Sgd => train_sgd(OnlineStream::new(generator.clone(), derive_seed(seed, 3))?, &train, Some(&validation))?,
        Algorithm::Psat => train_psat(OnlineStream::new(generator.clone(), derive_seed(seed, 3))?, &train, Some(&validation))?,
    };
    let selected = trace.selected();
    row.iterations_to_best = Some(selected.iteration);

    let teacher = generator.teacher_or_default()?;
    row.teacher_robust_error = Some(robust_error(&teacher, &eval, &attack)?);
    let learned = &selected.weights;
    let zero = learned.iter().all(|&v| v == 0.0);
    row.learned_clean_error = Some(clean_error(learned, &eval)?);
    row.learned_robust_error = Some(if zero { 1.0 } else { robust_error(learned, &eval, &attack)? });
    row.sin_theta = if zero { None } else { Some(angle_and_sine(learned, &teacher)?.sin_theta) };

    let method = cfg.oracle.unwrap_or(if generator.d == 2 {
        OracleMethod::grid2d()
    } else {
        OracleMethod::RandomSearch { directions: 2000, seed: derive_seed(seed, 4) }
    });
    let mut candidates = vec![teacher];
    if !zero {
        candidates.push(WeightVector::new(learned.clone())?);
    }
    row.opt_estimate = Some(oracle_opt(&eval, &attack, method, &candidates)?.opt_estimate);
    Ok(())
}

/// Writes rows as CSV with the fixed [`CSV_HEADER`].
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
