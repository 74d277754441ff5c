//! Labelled samples and the synthetic distributions used to test learners.
//!
//! Features are drawn from an isotropic law, labelled by a teacher halfspace
//! and then corrupted by label noise. Features are never touched by noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{check_dim, lp_norm, Exponent, WeightVector};
use crate::math;
use crate::{Error, Result};

/// A binary label `y ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// `sgn(s)` with zero mapped to `+1`.
    #[inline]
    pub fn from_sign(s: f64) -> Label {
        if s >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::InvalidDataset(format!("label must be +1 or -1, got {other}"))),
        }
    }
}

impl From<Label> for i8 {
    fn from(y: Label) -> i8 {
        match y {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }
}

/// Assertion that every row satisfies `‖x‖_p ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub p: Exponent,
    pub bound: f64,
}

/// Where a generated dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: GeneratorSpec,
    /// `None` when generated from a caller-supplied RNG.
    pub seed: Option<u64>,
    /// Number of labels changed by the noise process.
    pub flipped: usize,
    /// `c` such that the feature covariance is `c·I`, when known in closed form.
    pub covariance_scale: Option<f64>,
}

/// `n` labelled points in `ℝᵈ`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<Label>,
    d: usize,
    norm_bound: Option<NormBound>,
    provenance: Option<Provenance>,
}

const NORM_SLACK: f64 = 1e-12;

impl Dataset {
    pub fn new(features: Vec<f64>, d: usize, labels: Vec<Label>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDataset("dimension must be at least 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidDataset("dataset must contain at least one row".into()));
        }
        if features.len() != labels.len() * d {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not form {} rows of dimension {d}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("row {} has a non-finite feature", i / d)));
        }
        Ok(Dataset { features, labels, d, norm_bound: None, provenance: None })
    }

    /// Attaches a norm bound after checking every row against it.
    pub fn with_norm_bound(mut self, bound: NormBound) -> Result<Self> {
        if !(bound.bound.is_finite() && bound.bound >= 0.0) {
            return Err(Error::InvalidDataset(format!("norm bound must be nonnegative, got {}", bound.bound)));
        }
        for (i, row) in self.rows().enumerate() {
            let norm = lp_norm(row, bound.p);
            if norm > bound.bound + NORM_SLACK {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has l{} norm {norm}, above the recorded bound {}",
                    bound.p, bound.bound
                )));
            }
        }
        self.norm_bound = Some(bound);
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.d)
    }

    /// `(x_i, y_i)` pairs.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], Label)> + '_ {
        self.rows().zip(self.labels.iter().copied())
    }

    pub fn norm_bound(&self) -> Option<NormBound> {
        self.norm_bound
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// Marginal law of the features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseFamily {
    GaussianIsotropic,
    UniformLpBall { p: Exponent },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// Standard normal features.
    GaussianIsotropic,
    /// Uniform on the unit `lp` ball.
    UniformLpBall { p: Exponent },
    /// The base law conditioned on `|teacherᵀx| ≥ γ₀`.
    HardMargin { base: BaseFamily },
}

impl Family {
    fn base(&self) -> BaseFamily {
        match *self {
            Family::GaussianIsotropic => BaseFamily::GaussianIsotropic,
            Family::UniformLpBall { p } => BaseFamily::UniformLpBall { p },
            Family::HardMargin { base } => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// Each label flips independently.
    RandomFlip,
    /// The `⌊rate·n⌋` points closest to the teacher's boundary flip.
    BoundaryFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRepr")]
pub struct NoiseSpec {
    kind: NoiseKind,
    rate: f64,
}

#[derive(Deserialize)]
struct NoiseRepr {
    kind: NoiseKind,
    #[serde(default)]
    rate: f64,
}

impl TryFrom<NoiseRepr> for NoiseSpec {
    type Error = Error;

    fn try_from(repr: NoiseRepr) -> Result<Self> {
        NoiseSpec::new(repr.kind, repr.rate)
    }
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { kind: NoiseKind::None, rate: 0.0 };

    pub fn new(kind: NoiseKind, rate: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&rate) {
            return Err(Error::InvalidGenerator(format!("noise rate must lie in [0, 0.5), got {rate}")));
        }
        let rate = if kind == NoiseKind::None { 0.0 } else { rate };
        Ok(NoiseSpec { kind, rate })
    }

    pub fn random_flip(rate: f64) -> Result<Self> {
        NoiseSpec::new(NoiseKind::RandomFlip, rate)
    }

    pub fn boundary_flip(rate: f64) -> Result<Self> {
        NoiseSpec::new(NoiseKind::BoundaryFlip, rate)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        NoiseSpec::new(self.kind, rate)
    }
}

/// A recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub d: usize,
    /// Labelling direction; `e₁` when absent for the unconditioned families.
    #[serde(default)]
    pub teacher: Option<WeightVector>,
    #[serde(default)]
    pub gamma0: Option<f64>,
    #[serde(default = "no_noise")]
    pub noise: NoiseSpec,
    /// Rescale all rows by the largest row norm so that `‖x‖_p ≤ 1`.
    #[serde(default)]
    pub normalize_to_lp: Option<Exponent>,
}

fn no_noise() -> NoiseSpec {
    NoiseSpec::NONE
}

impl GeneratorSpec {
    pub fn new(family: Family, d: usize) -> Self {
        GeneratorSpec { family, d, teacher: None, gamma0: None, noise: NoiseSpec::NONE, normalize_to_lp: None }
    }

    pub fn gaussian(d: usize) -> Self {
        GeneratorSpec::new(Family::GaussianIsotropic, d)
    }

    pub fn with_teacher(mut self, teacher: WeightVector) -> Self {
        self.teacher = Some(teacher);
        self
    }

    pub fn with_margin(mut self, gamma0: f64) -> Self {
        self.gamma0 = Some(gamma0);
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn normalized(mut self, p: Exponent) -> Self {
        self.normalize_to_lp = Some(p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidGenerator("dimension must be at least 1".into()));
        }
        if let Some(t) = &self.teacher {
            check_dim(self.d, t.dim())?;
            if t.is_zero() {
                return Err(Error::InvalidGenerator("teacher must be nonzero".into()));
            }
        }
        if let Some(g) = self.gamma0 {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidGenerator(format!("margin must be nonnegative, got {g}")));
            }
        }
        if let Family::HardMargin { .. } = self.family {
            if self.teacher.is_none() || self.gamma0.is_none() {
                return Err(Error::InvalidGenerator("hard_margin requires a teacher and gamma0".into()));
            }
        }
        Ok(())
    }

    /// The labelling direction.
    pub fn teacher_or_default(&self) -> Result<WeightVector> {
        match &self.teacher {
            Some(t) => Ok(t.clone()),
            None => WeightVector::basis(self.d, 0),
        }
    }
}

/// The constant `c` with `Cov(x) = c·I` for `x` uniform on the unit `lp` ball
/// in `ℝᵈ`: `Γ(3/p)Γ(1+d/p) / (Γ(1/p)Γ(1+(d+2)/p))`.
pub fn uniform_ball_covariance_scale(p: Exponent, d: usize) -> f64 {
    match p {
        Exponent::Infinity => 1.0 / 3.0,
        Exponent::Finite(p) if p == 2.0 => 1.0 / (d as f64 + 2.0),
        Exponent::Finite(p) => {
            let d = d as f64;
            let lg = math::ln_gamma;
            math::exp(lg(3.0 / p) + lg(1.0 + d / p) - lg(1.0 / p) - lg(1.0 + (d + 2.0) / p))
        }
    }
}

/// Draws `n` points. Bitwise deterministic in `(spec, n, seed)`.
pub fn generate(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = generate_with_rng(spec, n, &mut rng)?;
    let mut provenance = ds.provenance.clone().expect("generated datasets carry provenance");
    provenance.seed = Some(seed);
    Ok(ds.with_provenance(provenance))
}

/// Draws `n` points from a caller-owned RNG stream.
pub fn generate_with_rng<R: Rng + ?Sized>(spec: &GeneratorSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidGenerator("n must be at least 1".into()));
    }
    let d = spec.d;
    let teacher = spec.teacher_or_default()?;
    let base = spec.family.base();
    let mut sampler = FeatureSampler::new(base, d)?;

    let mut features = vec![0.0; n * d];
    let mut scores = vec![0.0; n];
    match spec.family {
        Family::HardMargin { .. } => {
            let gamma0 = spec.gamma0.unwrap_or(0.0);
            let cap = 1000u64.saturating_mul(n as u64);
            let mut attempts = 0u64;
            for (row, score) in features.chunks_exact_mut(d).zip(scores.iter_mut()) {
                loop {
                    if attempts >= cap {
                        return Err(Error::GenerationTimeout { attempts });
                    }
                    attempts += 1;
                    sampler.draw(rng, row);
                    *score = math::dot(&teacher, row);
                    if math::abs(*score) >= gamma0 {
                        break;
                    }
                }
            }
        }
        _ => {
            for (row, score) in features.chunks_exact_mut(d).zip(scores.iter_mut()) {
                sampler.draw(rng, row);
                *score = math::dot(&teacher, row);
            }
        }
    }

    let mut labels: Vec<Label> = scores.iter().map(|&s| Label::from_sign(s)).collect();
    let flipped = apply_noise(&spec.noise, &scores, &mut labels, rng);

    let mut covariance_scale = match spec.family {
        Family::GaussianIsotropic => Some(1.0),
        Family::UniformLpBall { p } => Some(uniform_ball_covariance_scale(p, d)),
        Family::HardMargin { .. } => None,
    };
    let mut norm_bound = match base {
        BaseFamily::UniformLpBall { p } => Some(NormBound { p, bound: 1.0 }),
        BaseFamily::GaussianIsotropic => None,
    };

    if let Some(p) = spec.normalize_to_lp {
        let max_norm = features.chunks_exact(d).map(|row| lp_norm(row, p)).fold(0.0, f64::max);
        if max_norm > 0.0 {
            features.iter_mut().for_each(|v| *v /= max_norm);
            covariance_scale = covariance_scale.map(|c| c / (max_norm * max_norm));
        }
        norm_bound = Some(NormBound { p, bound: 1.0 });
    }

    let mut ds = Dataset::new(features, d, labels)?;
    if let Some(bound) = norm_bound {
        ds = ds.with_norm_bound(bound)?;
    }
    Ok(ds.with_provenance(Provenance { generator: spec.clone(), seed: None, flipped, covariance_scale }))
}

fn apply_noise<R: Rng + ?Sized>(noise: &NoiseSpec, scores: &[f64], labels: &mut [Label], rng: &mut R) -> usize {
    match noise.kind {
        NoiseKind::None => 0,
        NoiseKind::RandomFlip => {
            let mut flipped = 0;
            for y in labels.iter_mut() {
                if rng.random::<f64>() < noise.rate {
                    *y = y.flipped();
                    flipped += 1;
                }
            }
            flipped
        }
        NoiseKind::BoundaryFlip => {
            let m = math::floor(noise.rate * labels.len() as f64) as usize;
            let mut order: Vec<usize> = (0..labels.len()).collect();
            order.sort_by(|&a, &b| math::abs(scores[a]).total_cmp(&math::abs(scores[b])).then(a.cmp(&b)));
            for &i in &order[..m] {
                labels[i] = labels[i].flipped();
            }
            m
        }
    }
}

struct FeatureSampler {
    base: BaseFamily,
    gamma: Option<Gamma<f64>>,
    d: usize,
}

impl FeatureSampler {
    fn new(base: BaseFamily, d: usize) -> Result<Self> {
        let gamma = match base {
            BaseFamily::UniformLpBall { p: Exponent::Finite(p) } if p != 2.0 => Some(
                Gamma::new(1.0 / p, 1.0).map_err(|e| Error::InvalidGenerator(format!("{e}")))?,
            ),
            _ => None,
        };
        Ok(FeatureSampler { base, gamma, d })
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, row: &mut [f64]) {
        match self.base {
            BaseFamily::GaussianIsotropic => {
                for v in row.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
            BaseFamily::UniformLpBall { p: Exponent::Infinity } => {
                for v in row.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            BaseFamily::UniformLpBall { p: Exponent::Finite(p) } if p == 2.0 => {
                // Uniform direction, radius U^{1/d}.
                loop {
                    for v in row.iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    let norm = lp_norm(row, Exponent::TWO);
                    if norm > 0.0 {
                        let radius = math::powf(rng.random::<f64>(), 1.0 / self.d as f64);
                        row.iter_mut().for_each(|v| *v *= radius / norm);
                        return;
                    }
                }
            }
            BaseFamily::UniformLpBall { p: Exponent::Finite(p) } => {
                // g_j = ±G_j^{1/p} with G_j ~ Gamma(1/p), W ~ Exp(1):
                // g / (Σ|g_j|^p + W)^{1/p} is uniform on the unit lp ball.
                let gamma = self.gamma.as_ref().expect("gamma law built for finite p");
                let mut total: f64 = Exp1.sample(rng);
                for v in row.iter_mut() {
                    let g: f64 = gamma.sample(rng);
                    total += g;
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *v = sign * math::powf(g, 1.0 / p);
                }
                let scale = math::powf(total, -1.0 / p);
                row.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
}

/// Empirical soft margin `φ(γ) = (1/n)·#{i : |v̄ᵀxᵢ| ≤ γ}` for each `γ`.
pub fn empirical_soft_margin(ds: &Dataset, vbar: &[f64], q: Exponent, gammas: &[f64]) -> Result<Vec<f64>> {
    check_dim(ds.d(), vbar.len())?;
    let norm = lp_norm(vbar, q);
    if math::abs(norm - 1.0) > 1e-9 {
        return Err(Error::NotNormalized { norm });
    }
    let mut band: Vec<f64> = ds.rows().map(|x| math::abs(math::dot(vbar, x))).collect();
    band.sort_unstable_by(f64::total_cmp);
    let n = band.len() as f64;
    Ok(gammas.iter().map(|&g| band.partition_point(|&s| s <= g) as f64 / n).collect())
}
