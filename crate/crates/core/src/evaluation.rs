//! Robust error, robust surrogate risk and a brute-force robust ERM oracle.
//!
//! Every estimate here is empirical on a concrete sample. Monte Carlo
//! half-widths (`3/√n`) are attached so callers never mistake a sample
//! statistic for a population one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::geometry::{check_dim, check_weights, lp_norm, margin_with_norm, project_lq_sphere, AttackSpec};
use crate::geometry::{Exponent, WeightVector};
use crate::losses::LossSpec;
use crate::math;
use crate::{Error, Result};

/// `3/√n`.
pub fn mc_halfwidth(n: usize) -> f64 {
    3.0 / math::sqrt(n as f64)
}

/// Number of points whose robust margin is `≤ 0`, for a precomputed `‖w‖_q`.
pub(crate) fn count_robust_errors(w: &[f64], norm_q: f64, ds: &Dataset, r: f64) -> usize {
    ds.iter().filter(|(x, y)| margin_with_norm(w, x, y.sign(), r, norm_q) <= 0.0).count()
}

/// Fraction of points with `y·wᵀx − r‖w‖_q ≤ 0`. Ties count as errors.
pub fn robust_error(w: &[f64], ds: &Dataset, attack: &AttackSpec) -> Result<f64> {
    check_weights(w)?;
    check_dim(ds.d(), w.len())?;
    let count = count_robust_errors(w, lp_norm(w, attack.q()), ds, attack.radius());
    Ok(count as f64 / ds.n() as f64)
}

/// Fraction of points with `y·wᵀx ≤ 0`; the zero model misclassifies everything.
pub fn clean_error(w: &[f64], ds: &Dataset) -> Result<f64> {
    check_dim(ds.d(), w.len())?;
    Ok(count_robust_errors(w, 0.0, ds, 0.0) as f64 / ds.n() as f64)
}

/// `(1/n)·Σ ℓ(y·wᵀx − r‖w‖_q)`, the exact empirical adversarial risk.
pub fn robust_surrogate_loss(w: &[f64], ds: &Dataset, attack: &AttackSpec, loss: &LossSpec) -> Result<f64> {
    check_dim(ds.d(), w.len())?;
    if attack.radius() > 0.0 {
        check_weights(w)?;
    }
    let norm_q = lp_norm(w, attack.q());
    let r = attack.radius();
    let total: f64 = ds.iter().map(|(x, y)| loss.value(margin_with_norm(w, x, y.sign(), r, norm_q))).sum();
    Ok(total / ds.n() as f64)
}

/// `[ℓ'(0)]⁻²·mean ℓ'(robust margin)²`, an upper bound on the robust error
/// for decreasing convex losses.
pub fn markov_bound(w: &[f64], ds: &Dataset, attack: &AttackSpec, loss: &LossSpec) -> Result<f64> {
    check_weights(w)?;
    check_dim(ds.d(), w.len())?;
    let d0 = loss.constants().derivative_at_zero;
    let norm_q = lp_norm(w, attack.q());
    let r = attack.radius();
    let total: f64 = ds
        .iter()
        .map(|(x, y)| {
            let g = loss.derivative(margin_with_norm(w, x, y.sign(), r, norm_q));
            g * g
        })
        .sum();
    Ok(total / ds.n() as f64 / (d0 * d0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clean_error: f64,
    pub robust_error: f64,
    pub robust_surrogate_loss: f64,
    pub attack: AttackSpec,
    pub loss: LossSpec,
    pub n_eval: usize,
    pub mc_halfwidth: f64,
    /// Present for smooth convex losses.
    pub markov_bound: Option<f64>,
}

pub fn evaluate(w: &[f64], ds: &Dataset, attack: &AttackSpec, loss: &LossSpec) -> Result<EvalReport> {
    let robust = robust_error(w, ds, attack)?;
    let markov = if loss.is_smooth() && loss.is_convex() { Some(markov_bound(w, ds, attack, loss)?) } else { None };
    Ok(EvalReport {
        clean_error: clean_error(w, ds)?,
        robust_error: robust,
        robust_surrogate_loss: robust_surrogate_loss(w, ds, attack, loss)?,
        attack: *attack,
        loss: *loss,
        n_eval: ds.n(),
        mc_halfwidth: mc_halfwidth(ds.n()),
        markov_bound: markov,
    })
}

pub const DEFAULT_GRID_RESOLUTION: f64 = 2.0 * core::f64::consts::PI / 4096.0;
pub const DEFAULT_SEARCH_DIRECTIONS: usize = 100_000;

/// How [`oracle_opt`] searches the unit `lq` sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleMethod {
    /// Angles `θ ∈ [0, 2π)` spaced by `resolution`; `d = 2` only.
    Grid2d { resolution: f64 },
    /// Seeded Gaussian directions mapped onto the unit `lq` sphere.
    RandomSearch { directions: usize, seed: u64 },
}

impl OracleMethod {
    pub fn grid2d() -> Self {
        OracleMethod::Grid2d { resolution: DEFAULT_GRID_RESOLUTION }
    }

    pub fn random_search(seed: u64) -> Self {
        OracleMethod::RandomSearch { directions: DEFAULT_SEARCH_DIRECTIONS, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Empirical robust error of `argmin_direction`, exactly.
    pub opt_estimate: f64,
    pub argmin_direction: WeightVector,
    pub method: OracleMethod,
    /// Angular step for the grid, number of directions for random search.
    pub resolution: f64,
    pub n_eval: usize,
    pub mc_halfwidth: f64,
}

/// Minimum empirical robust error over unit-`lq` directions.
///
/// `candidates` (for example a teacher or a learned model) are rescaled to
/// unit `lq` norm and considered alongside the searched directions, so the
/// estimate never exceeds their robust error. Ties keep the first direction
/// examined.
pub fn oracle_opt(
    ds: &Dataset,
    attack: &AttackSpec,
    method: OracleMethod,
    candidates: &[WeightVector],
) -> Result<OracleResult> {
    let d = ds.d();
    let q = attack.q();
    let mut best: Option<(usize, Vec<f64>)> = None;
    let mut consider = |v: Vec<f64>| {
        let count = count_robust_errors(&v, lp_norm(&v, q), ds, attack.radius());
        if best.as_ref().map_or(true, |(c, _)| count < *c) {
            best = Some((count, v));
        }
    };

    for c in candidates {
        check_dim(d, c.dim())?;
        if c.is_zero() {
            return Err(Error::InvalidOracle("candidate directions must be nonzero".into()));
        }
        consider(unit_lq(c, q));
    }

    let resolution = match method {
        OracleMethod::Grid2d { resolution } => {
            if d != 2 {
                return Err(Error::InvalidOracle(format!("grid2d needs d = 2, got d = {d}")));
            }
            if !(resolution.is_finite() && resolution > 0.0) {
                return Err(Error::InvalidOracle(format!("grid resolution must be positive, got {resolution}")));
            }
            let steps = math::ceil(2.0 * core::f64::consts::PI / resolution) as usize;
            for k in 0..steps {
                let (s, c) = math::sin_cos(k as f64 * resolution);
                consider(unit_lq(&[c, s], q));
            }
            resolution
        }
        OracleMethod::RandomSearch { directions, seed } => {
            if directions == 0 {
                return Err(Error::InvalidOracle("random search needs at least one direction".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = vec![0.0; d];
            let mut drawn = 0;
            while drawn < directions {
                for v in g.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                if g.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let v = if q.is_one() || q.is_two() { project_lq_sphere(&g, q)? } else { unit_lq(&g, q) };
                consider(v);
                drawn += 1;
            }
            directions as f64
        }
    };

    let (count, direction) = best.expect("at least one direction examined");
    Ok(OracleResult {
        opt_estimate: count as f64 / ds.n() as f64,
        argmin_direction: WeightVector::new(direction)?,
        method,
        resolution,
        n_eval: ds.n(),
        mc_halfwidth: mc_halfwidth(ds.n()),
    })
}

fn unit_lq(v: &[f64], q: Exponent) -> Vec<f64> {
    let norm = lp_norm(v, q);
    v.iter().map(|x| x / norm).collect()
}

/// Empirical lower and upper bounds on the best robust error, evaluated at a
/// fixed unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    /// Mass of the band `|tᵀx| ≤ r‖t‖_q`.
    pub lower: f64,
    /// `lower` plus the clean error of `t`.
    pub upper: f64,
    pub robust_error: f64,
}

pub fn opt_sandwich(ds: &Dataset, teacher: &[f64], attack: &AttackSpec) -> Result<Sandwich> {
    check_dim(ds.d(), teacher.len())?;
    let norm = lp_norm(teacher, attack.q());
    if math::abs(norm - 1.0) > 1e-9 {
        return Err(Error::NotNormalized { norm });
    }
    let band = attack.radius() * norm;
    let (mut in_band, mut wrong, mut robust_wrong) = (0usize, 0usize, 0usize);
    for (x, y) in ds.iter() {
        let s = math::dot(teacher, x);
        let m = y.sign() * s;
        in_band += (math::abs(s) <= band) as usize;
        wrong += (m <= 0.0) as usize;
        robust_wrong += (m - band <= 0.0) as usize;
    }
    debug_assert!(in_band <= robust_wrong && robust_wrong <= in_band + wrong);
    let n = ds.n() as f64;
    Ok(Sandwich {
        lower: in_band as f64 / n,
        upper: (in_band + wrong) as f64 / n,
        robust_error: robust_wrong as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub theta: f64,
    pub sin_theta: f64,
}

/// Angle between two nonzero vectors. The sine comes from the pairwise
/// cross terms `u_i v_j − u_j v_i`, which stay accurate near `θ = 0` where
/// `√(1 − cos²)` cancels catastrophically.
pub fn angle_and_sine(w: &[f64], w_star: &[f64]) -> Result<Angle> {
    check_dim(w.len(), w_star.len())?;
    let nw = lp_norm(w, Exponent::TWO);
    let ns = lp_norm(w_star, Exponent::TWO);
    if nw == 0.0 || ns == 0.0 {
        return Err(Error::ZeroVector);
    }
    let u: Vec<f64> = w.iter().map(|v| v / nw).collect();
    let t: Vec<f64> = w_star.iter().map(|v| v / ns).collect();
    let cos = math::dot(&u, &t);
    let mut cross = 0.0;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let c = u[i] * t[j] - u[j] * t[i];
            cross += c * c;
        }
    }
    let sin = f64::min(math::sqrt(cross), 1.0);
    Ok(Angle { theta: math::atan2(sin, cos), sin_theta: sin })
}
