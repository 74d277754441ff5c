//! Margin-based surrogate losses `ℓ(z)` for the robust margin `z`.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// A decreasing surrogate of the 0-1 loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "LossRepr")]
pub enum LossSpec {
    /// `log(1 + e^{-z})`.
    CrossEntropy,
    /// `max(0, 1 - z)`.
    Hinge,
    /// `e^{-z/σ}` for `z > 0` and `2 - e^{z/σ}` for `z ≤ 0`. Bounded and
    /// nonconvex; `σ` acts as a temperature.
    Sigmoidal { sigma: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LossRepr {
    CrossEntropy,
    Hinge,
    Sigmoidal { sigma: f64 },
}

impl TryFrom<LossRepr> for LossSpec {
    type Error = Error;

    fn try_from(repr: LossRepr) -> Result<Self> {
        match repr {
            LossRepr::CrossEntropy => Ok(LossSpec::CrossEntropy),
            LossRepr::Hinge => Ok(LossSpec::Hinge),
            LossRepr::Sigmoidal { sigma } => LossSpec::sigmoidal(sigma),
        }
    }
}

/// Constants consumed by step-size schedules and bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    /// `sup |ℓ'|`.
    pub lipschitz: f64,
    /// `sup ℓ''` for convex smooth losses; `None` otherwise.
    pub smoothness: Option<f64>,
    pub value_at_zero: f64,
    pub derivative_at_zero: f64,
}

impl LossSpec {
    pub fn sigmoidal(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidLoss(format!("sigmoidal temperature must be positive, got {sigma}")));
        }
        Ok(LossSpec::Sigmoidal { sigma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::CrossEntropy => "cross_entropy",
            LossSpec::Hinge => "hinge",
            LossSpec::Sigmoidal { .. } => "sigmoidal",
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, LossSpec::Sigmoidal { .. })
    }

    pub fn is_smooth(&self) -> bool {
        self.constants().smoothness.is_some()
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        self.value_and_derivative(z).0
    }

    /// `ℓ'(z)`. At the hinge kink `z = 1` this is the left derivative `-1`.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            LossSpec::CrossEntropy => {
                let e = math::exp(-math::abs(z));
                if z >= 0.0 {
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + e)
                }
            }
            LossSpec::Hinge => {
                if z <= 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossSpec::Sigmoidal { sigma } => -math::exp(-math::abs(z) / sigma) / sigma,
        }
    }

    /// Value and derivative sharing one exponential.
    #[inline]
    pub fn value_and_derivative(&self, z: f64) -> (f64, f64) {
        match *self {
            LossSpec::CrossEntropy => {
                // log(1+e^{-z}) = max(-z, 0) + log1p(e^{-|z|})
                let e = math::exp(-math::abs(z));
                let value = f64::max(-z, 0.0) + ln_1p_unit(e);
                let numerator = if z >= 0.0 { e } else { 1.0 };
                let derivative = -numerator / (1.0 + e);
                (value, derivative)
            }
            LossSpec::Hinge => (f64::max(0.0, 1.0 - z), self.derivative(z)),
            LossSpec::Sigmoidal { sigma } => {
                let e = math::exp(-math::abs(z) / sigma);
                let value = if z > 0.0 { e } else { 2.0 - e };
                (value, -e / sigma)
            }
        }
    }

    pub fn constants(&self) -> LossConstants {
        match *self {
            LossSpec::CrossEntropy => LossConstants {
                lipschitz: 1.0,
                smoothness: Some(0.25),
                value_at_zero: core::f64::consts::LN_2,
                derivative_at_zero: -0.5,
            },
            LossSpec::Hinge => LossConstants {
                lipschitz: 1.0,
                smoothness: None,
                value_at_zero: 1.0,
                derivative_at_zero: -1.0,
            },
            LossSpec::Sigmoidal { sigma } => LossConstants {
                lipschitz: 1.0 / sigma,
                smoothness: None,
                value_at_zero: 1.0,
                derivative_at_zero: -1.0 / sigma,
            },
        }
    }

    /// A `z` with `ℓ(z) = u`. For hinge at `u = 0` this is the kink `z = 1`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let out_of_range = || Error::OutsideLossRange { loss: self.name(), value: u };
        match *self {
            LossSpec::CrossEntropy => {
                if !(u.is_finite() && u > 0.0) {
                    return Err(out_of_range());
                }
                // z = -log(e^u - 1); for large u, e^u - 1 = e^u (1 - e^{-u}).
                if u > 30.0 {
                    Ok(-u - math::ln_1p(-math::exp(-u)))
                } else {
                    Ok(-math::ln(math::exp_m1(u)))
                }
            }
            LossSpec::Hinge => {
                if !(u.is_finite() && u >= 0.0) {
                    return Err(out_of_range());
                }
                Ok(1.0 - u)
            }
            LossSpec::Sigmoidal { sigma } => {
                if !(u > 0.0 && u < 2.0) {
                    return Err(out_of_range());
                }
                if u <= 1.0 {
                    Ok(-sigma * math::ln(u))
                } else {
                    Ok(sigma * math::ln(2.0 - u))
                }
            }
        }
    }
}

/// `ln(1 + e)` for `e ∈ [0, 1]`, relative error below about `1e-13`.
///
/// `ln` is much cheaper than `ln_1p` on common libms and only loses accuracy
/// for small `e`, where a short series takes over. Both branches are computed
/// so the choice compiles to a select.
#[inline]
fn ln_1p_unit(e: f64) -> f64 {
    let series = e * (1.0 - e * (0.5 - e * (1.0 / 3.0 - e * 0.25)));
    let direct = math::ln(1.0 + e);
    if e < 1e-3 {
        series
    } else {
        direct
    }
}
