//! Norms, Hölder conjugacy and the exact `lp` attack on a halfspace.
//!
//! For a linear score `y·wᵀx` the inner maximization of adversarial training
//! has a closed form: the worst perturbation in the `lp` ball of radius `r`
//! lowers the margin by exactly `r‖w‖_q`, where `q` is the Hölder conjugate
//! of `p`. Everything in this module is a pure function of its inputs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Label;
use crate::math;
use crate::{Error, Result};

/// An exponent in `[1, ∞]`.
///
/// Infinity is a separate variant rather than `f64::INFINITY` so that the
/// endpoint cases (`p = 1 ⇔ q = ∞`) are matched exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    /// Validates `p ∈ [1, ∞]`. `f64::INFINITY` maps to [`Exponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidExponent(p))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn is_one(self) -> bool {
        self == Exponent::ONE
    }

    pub fn is_two(self) -> bool {
        self == Exponent::TWO
    }

    /// The exponent as a float, with `f64::INFINITY` for the infinite case.
    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, exactly zero at infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// The Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::ONE,
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) if p == 2.0 => Exponent::TWO,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "INF" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::InvalidExponent(f64::NAN))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<'a> {
            Number(f64),
            Text(&'a str),
        }
        let parsed = match Repr::deserialize(deserializer)? {
            Repr::Number(p) => Exponent::new(p),
            Repr::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Hölder conjugate of `p`.
pub fn holder_conjugate(p: Exponent) -> Exponent {
    p.conjugate()
}

/// Perturbation geometry: the `lp` ball of radius `r`, with `q` cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AttackRepr")]
pub struct AttackSpec {
    p: Exponent,
    r: f64,
    q: Exponent,
}

#[derive(Deserialize)]
struct AttackRepr {
    p: Exponent,
    r: f64,
}

impl TryFrom<AttackRepr> for AttackSpec {
    type Error = Error;

    fn try_from(repr: AttackRepr) -> Result<Self> {
        AttackSpec::new(repr.p, repr.r)
    }
}

impl AttackSpec {
    pub fn new(p: Exponent, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidRadius(r));
        }
        Ok(AttackSpec { p, r, q: p.conjugate() })
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn with_radius(&self, r: f64) -> Result<Self> {
        AttackSpec::new(self.p, r)
    }
}

/// A model `w ∈ ℝᵈ` with `d ≥ 1` finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights);
        }
        Ok(WeightVector(w))
    }

    pub fn zeros(d: usize) -> Result<Self> {
        WeightVector::new(vec![0.0; d])
    }

    /// The standard basis vector `e_j` (zero-based `j`).
    pub fn basis(d: usize, j: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::DimensionMismatch { expected: d, found: j + 1 });
        }
        let mut w = vec![0.0; d];
        w[j] = 1.0;
        WeightVector::new(w)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.0
    }
}

/// The `lp` norm; `p = ∞` is the max-abs norm.
pub fn lp_norm(v: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => max_abs(v),
        Exponent::Finite(p) if p == 1.0 => v.iter().map(|x| math::abs(*x)).sum(),
        Exponent::Finite(p) if p == 2.0 => math::sqrt(v.iter().map(|x| x * x).sum()),
        Exponent::Finite(p) => {
            // Rescale by the largest entry so |v_j|^p cannot overflow.
            let scale = max_abs(v);
            if scale == 0.0 {
                return 0.0;
            }
            let sum: f64 = v.iter().map(|x| math::powf(math::abs(*x) / scale, p)).sum();
            scale * math::powf(sum, 1.0 / p)
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, math::abs(*x)))
}

/// `w̄_j = |w_j|^(q-1)·sgn(w_j)`, so that `wᵀw̄ = ‖w‖_q^q`.
///
/// Undefined at `q = ∞`, where the `p = 1` attack is a vertex of the `l1` ball
/// instead; see [`optimal_perturbation`].
pub fn dual_map(w: &[f64], q: Exponent) -> Result<Vec<f64>> {
    match q {
        Exponent::Infinity => Err(Error::DualMapAtInfinity),
        Exponent::Finite(q) if q == 1.0 => Ok(w.iter().map(|&x| math::sgn(x)).collect()),
        Exponent::Finite(q) if q == 2.0 => Ok(w.to_vec()),
        Exponent::Finite(q) => Ok(w
            .iter()
            .map(|&x| math::sgn(x) * math::powf(math::abs(x), q - 1.0))
            .collect()),
    }
}

/// The worst-case perturbation `δ*` in the `lp` ball of radius `r` for the
/// score `y·wᵀ(x+δ)`.
///
/// `δ*_j = −r·y·sgn(w_j)·|w_j|^(q−1) / ‖w‖_q^(q−1)`. It does not depend on `x`
/// and is invariant to positive rescaling of `w`. For `p = 1` the whole budget
/// goes on the lowest-index coordinate of maximal `|w_j|`.
pub fn optimal_perturbation(w: &[f64], y: Label, spec: &AttackSpec) -> Result<Vec<f64>> {
    check_weights(w)?;
    let mut delta = vec![0.0; w.len()];
    fill_perturbation(w, y.sign(), spec, &mut delta);
    Ok(delta)
}

/// Writes `δ*` into `out`; a zero `w` yields a zero perturbation.
pub(crate) fn fill_perturbation(w: &[f64], y: f64, spec: &AttackSpec, out: &mut [f64]) {
    let r = spec.radius();
    match spec.q() {
        Exponent::Infinity => {
            out.iter_mut().for_each(|v| *v = 0.0);
            let mut best = 0;
            for (j, &wj) in w.iter().enumerate() {
                if math::abs(wj) > math::abs(w[best]) {
                    best = j;
                }
            }
            out[best] = -r * y * math::sgn(w[best]);
        }
        Exponent::Finite(q) if q == 1.0 => {
            for (o, &wj) in out.iter_mut().zip(w) {
                *o = -r * y * math::sgn(wj);
            }
        }
        Exponent::Finite(q) => {
            let norm = lp_norm(w, spec.q());
            if norm == 0.0 {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
            for (o, &wj) in out.iter_mut().zip(w) {
                let ratio = math::abs(wj) / norm;
                let mag = if q == 2.0 { ratio } else { math::powf(ratio, q - 1.0) };
                *o = -r * y * math::sgn(wj) * mag;
            }
        }
    }
}

/// `y·wᵀx − r‖w‖_q`, the smallest margin reachable inside the attack ball.
pub fn robust_margin(w: &[f64], x: &[f64], y: Label, spec: &AttackSpec) -> Result<f64> {
    check_weights(w)?;
    check_dim(w.len(), x.len())?;
    Ok(margin_with_norm(w, x, y.sign(), spec.radius(), lp_norm(w, spec.q())))
}

#[inline]
pub(crate) fn margin_with_norm(w: &[f64], x: &[f64], y: f64, r: f64, norm_q: f64) -> f64 {
    y * math::dot(w, x) - r * norm_q
}

/// Euclidean projection onto the unit `lq` sphere for `q ∈ {1, 2}`.
///
/// For `q = 1` and `‖v‖₁ ≥ 1` this is sign-preserving soft-thresholding with
/// the threshold found by sorting. When `‖v‖₁ < 1` the threshold would be
/// negative; the vector is rescaled radially instead.
pub fn project_lq_sphere(v: &[f64], q: Exponent) -> Result<Vec<f64>> {
    if !(q.is_one() || q.is_two()) {
        return Err(Error::UnsupportedProjection(q));
    }
    let norm = lp_norm(v, q);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if q.is_two() || norm <= 1.0 {
        return Ok(v.iter().map(|x| x / norm).collect());
    }

    let mut mags: Vec<f64> = v.iter().map(|x| math::abs(*x)).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter()
        .map(|&x| math::sgn(x) * f64::max(math::abs(x) - tau, 0.0))
        .collect())
}

/// Default number of grid points per axis for [`grid_min_margin`].
pub const DEFAULT_GRID_POINTS: usize = 41;

/// Brute-force minimum of `y·wᵀ(x+δ)` over a regular grid on `[−r, r]^d`
/// restricted to the `lp` ball.
///
/// This never evaluates the closed-form attack, so it serves as an
/// independent check on [`robust_margin`]. The last coordinate is chosen
/// by a direct scan, so the cost is `points^(d-1)` rather than `points^d`.
pub fn grid_min_margin(
    w: &[f64],
    x: &[f64],
    y: Label,
    spec: &AttackSpec,
    points_per_axis: usize,
) -> Result<f64> {
    check_dim(w.len(), x.len())?;
    if w.is_empty() {
        return Err(Error::InvalidWeights);
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidConfig("grid needs at least two points per axis".into()));
    }
    let ys = y.sign();
    let clean = ys * math::dot(w, x);
    let r = spec.radius();
    if r == 0.0 {
        return Ok(clean);
    }

    let step = 2.0 * r / (points_per_axis - 1) as f64;
    let grid: Vec<f64> = (0..points_per_axis).map(|k| -r + k as f64 * step).collect();
    // Per-coordinate cost in the ball constraint: |t|^p, or 0 for p = ∞ since
    // the box already is the ball.
    let budget_cost: Vec<f64> = match spec.p() {
        Exponent::Infinity => vec![0.0; grid.len()],
        Exponent::Finite(p) => grid.iter().map(|t| math::powf(math::abs(*t) / r, p)).collect(),
    };
    let budget = 1.0 + 1e-12;

    let d = w.len();
    let last = d - 1;
    let coef: Vec<f64> = w.iter().map(|wj| ys * wj).collect();
    // Scan order for the last coordinate: most favourable (smallest
    // objective) first, so the first feasible point is optimal.
    let order: Vec<usize> = if coef[last] > 0.0 {
        (0..grid.len()).collect()
    } else {
        (0..grid.len()).rev().collect()
    };

    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; last];
    loop {
        let mut used = 0.0;
        let mut value = 0.0;
        for (j, &k) in idx.iter().enumerate() {
            used += budget_cost[k];
            value += coef[j] * grid[k];
        }
        if used <= budget {
            if let Some(&k) = order.iter().find(|&&k| used + budget_cost[k] <= budget) {
                best = f64::min(best, value + coef[last] * grid[k]);
            }
        }

        // Odometer increment over the first d-1 coordinates.
        let mut pos = 0;
        loop {
            if pos == last {
                return Ok(clean + best);
            }
            idx[pos] += 1;
            if idx[pos] < grid.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

pub(crate) fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidWeights);
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateModel);
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
