//! Adversarial training of halfspaces.
//!
//! Three trainers share one configuration type and one trace format:
//!
//! - [`train_gd`]: full-batch gradient descent on the exact adversarial
//!   empirical risk with a convex loss.
//! - [`train_sgd`]: one fresh sample per step with a smooth convex loss.
//! - [`train_psat`]: stochastic steps on the `lq`-normalized score with the
//!   sigmoidal loss, projecting back onto the unit `lq` sphere each step.
//!
//! Perturbed samples are treated as constants in every update; nothing is
//! differentiated through the attack.
//!
//! Each trainer is also exposed as a stepper ([`AdversarialGd`],
//! [`AdversarialSgd`], [`Psat`]) that yields a borrowed view of every step,
//! which is how per-step invariants are checked without storing the chain.

mod gd;
mod psat;
mod sampler;
mod sgd;
mod trace;

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use serde::{Deserialize, Serialize};

use crate::geometry::{check_dim, lp_norm, project_lq_sphere, AttackSpec, Exponent, WeightVector};
use crate::losses::LossSpec;
use crate::math;
use crate::{Error, Result};

pub use gd::{train_gd, train_gd_with, AdversarialGd, GdStepView};
pub use psat::{psat_gradient, train_psat, train_psat_with, Psat, PsatStepView};
pub use sampler::{OnlineStream, Sampler, SamplerMode, WithReplacement};
pub use sgd::{train_sgd, train_sgd_with, AdversarialSgd, SgdStepView};
pub use trace::{best_snapshot_index, evaluate_snapshot_policy, Snapshot, SnapshotMetrics, StepLossSummary, TrainTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gd,
    Sgd,
    Psat,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
            Algorithm::Psat => "psat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub loss: LossSpec,
    pub attack: AttackSpec,
    pub eta: f64,
    /// Number of update steps `K`.
    pub iterations: usize,
    pub w_init: WeightVector,
    /// Snapshot cadence; see [`TrainConfig::snapshot_every`] for the default.
    #[serde(default)]
    pub eval_every: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    /// Checks the configuration against the trainer's hypotheses for data of
    /// dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        check_dim(d, self.w_init.dim())?;
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidConfig(format!("step size must be finite and nonnegative, got {}", self.eta)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("at least one iteration is required".into()));
        }
        if self.eval_every == Some(0) {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        match self.algorithm {
            Algorithm::Gd => {
                if !self.loss.is_convex() {
                    return Err(Error::InvalidConfig(format!(
                        "gd needs a convex loss, got {}",
                        self.loss.name()
                    )));
                }
            }
            Algorithm::Sgd => {
                if !(self.loss.is_convex() && self.loss.is_smooth()) {
                    return Err(Error::SmoothLossRequired("sgd"));
                }
            }
            Algorithm::Psat => {
                if !matches!(self.loss, LossSpec::Sigmoidal { .. }) {
                    return Err(Error::InvalidConfig(format!(
                        "psat needs the sigmoidal loss, got {}",
                        self.loss.name()
                    )));
                }
                let q = self.attack.q();
                if !(q.is_one() || q.is_two()) {
                    return Err(Error::UnsupportedProjection(q));
                }
                let norm = lp_norm(&self.w_init, q);
                if math::abs(norm - 1.0) > 1e-9 {
                    return Err(Error::NotNormalized { norm });
                }
            }
        }
        Ok(())
    }

    /// Snapshot cadence: the configured value, else 50 for the stochastic
    /// trainers and every step for gd up to 5000 steps (then about 5000
    /// snapshots in total).
    pub fn snapshot_every(&self) -> usize {
        if let Some(e) = self.eval_every {
            return e;
        }
        match self.algorithm {
            Algorithm::Sgd | Algorithm::Psat => 50,
            Algorithm::Gd => {
                if self.iterations <= 5000 {
                    1
                } else {
                    self.iterations.div_ceil(5000)
                }
            }
        }
    }
}

/// Bound `H` on the squared norm of a per-sample update direction when
/// `‖x‖_p ≤ 1`: `4L²` for `p ≤ 2`, `4L²d` otherwise.
pub fn gradient_norm_bound(p: Exponent, d: usize, lipschitz: f64) -> f64 {
    let base = 4.0 * lipschitz * lipschitz;
    if p.as_f64() <= 2.0 {
        base
    } else {
        base * d as f64
    }
}

/// `η = ε/(4H)` for the convex trainers.
pub fn convex_step_size(eps: f64, p: Exponent, d: usize, lipschitz: f64) -> f64 {
    eps / (4.0 * gradient_norm_bound(p, d, lipschitz))
}

/// `η = δ·r³·d^{1/(2p) − 1/4} / 32`, the schedule under which the projected
/// sigmoidal trainer provably finds a direction within angle `δ`-scale of the
/// optimum.
pub fn psat_step_size(delta: f64, r: f64, d: usize, p: Exponent) -> f64 {
    let exponent = p.reciprocal() / 2.0 - 0.25;
    delta * r * r * r * math::powf(d as f64, exponent) / 32.0
}

/// Scale `ρ = ℓ⁻¹(ε)/γ` of a reference model `ρ·v` whose adversarial risk is
/// about `ε` once the band `|vᵀx| ≤ γ` is excluded.
pub fn reference_scale(loss: &LossSpec, eps: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("margin scale must be positive, got {gamma}")));
    }
    Ok(loss.inverse(eps)? / gamma)
}

/// A seeded random point on the unit `lq` sphere: a Gaussian vector,
/// projected for `q ∈ {1, 2}` and radially rescaled otherwise.
pub fn random_unit_weights(d: usize, q: Exponent, seed: u64) -> Result<WeightVector> {
    if d == 0 {
        return Err(Error::InvalidWeights);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let unit = if q.is_one() || q.is_two() {
            project_lq_sphere(&g, q)?
        } else {
            let norm = lp_norm(&g, q);
            g.iter().map(|v| v / norm).collect()
        };
        return WeightVector::new(unit);
    }
}

/// `K = ⌈‖w₀ − w_ref‖² / (ε·η)⌉`.
pub fn iteration_budget(distance_sq: f64, eps: f64, eta: f64) -> usize {
    math::ceil(distance_sq / (eps * eta)) as usize
}
