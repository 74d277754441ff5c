use alloc::vec;
use alloc::vec::Vec;

use super::gd::check_algorithm;
use super::sampler::Sampler;
use super::trace::Recorder;
use super::{Algorithm, TrainConfig, TrainTrace};
use crate::data::{Dataset, Label};
use crate::geometry::{check_dim, check_weights, dual_map, lp_norm, project_lq_sphere, AttackSpec, Exponent};
use crate::losses::LossSpec;
use crate::math;
use crate::Result;

/// Projected stochastic adversarial training on the unit `lq` sphere.
///
/// The score is `h(w, x) = wᵀx/‖w‖_q`, so the robust score is
/// `y·h(w, x+δ) = y·wᵀx/‖w‖_q − r`. Its gradient is orthogonal to `w`.
#[derive(Debug, Clone)]
pub struct Psat<S> {
    sampler: S,
    loss: LossSpec,
    attack: AttackSpec,
    eta: f64,
    w: Vec<f64>,
    prev: Vec<f64>,
    pre: Vec<f64>,
    x: Vec<f64>,
    wbar: Vec<f64>,
    grad: Vec<f64>,
    k: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PsatStepView<'s> {
    /// One-based: the step maps `w_k` to `w_{k+1}`.
    pub iteration: usize,
    pub weights: &'s [f64],
    /// `ŵ = w_k − η·g` before projection.
    pub pre_projection: &'s [f64],
    pub next_weights: &'s [f64],
    pub gradient: &'s [f64],
    pub x: &'s [f64],
    pub label: Label,
    /// The normalized robust score `y·wᵀx/‖w‖_q − r`.
    pub score: f64,
    pub loss: f64,
}

impl<S: Sampler> Psat<S> {
    pub fn new(sampler: S, cfg: &TrainConfig) -> Result<Self> {
        check_algorithm(cfg, Algorithm::Psat)?;
        let d = sampler.dim();
        cfg.validate(d)?;
        Ok(Psat {
            sampler,
            loss: cfg.loss,
            attack: cfg.attack,
            eta: cfg.eta,
            w: cfg.w_init.to_vec(),
            prev: vec![0.0; d],
            pre: vec![0.0; d],
            x: vec![0.0; d],
            wbar: vec![0.0; d],
            grad: vec![0.0; d],
            k: 1,
        })
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn step(&mut self) -> Result<PsatStepView<'_>> {
        let label = self.sampler.draw(&mut self.x)?;
        let (score, loss) =
            normalized_gradient(&self.w, &self.x, label.sign(), &self.attack, &self.loss, &mut self.wbar, &mut self.grad);
        for ((p, &wj), &g) in self.pre.iter_mut().zip(&self.w).zip(&self.grad) {
            *p = wj - self.eta * g;
        }
        let projected = project_lq_sphere(&self.pre, self.attack.q())?;
        core::mem::swap(&mut self.w, &mut self.prev);
        self.w.copy_from_slice(&projected);
        let iteration = self.k;
        self.k += 1;
        Ok(PsatStepView {
            iteration,
            weights: &self.prev,
            pre_projection: &self.pre,
            next_weights: &self.w,
            gradient: &self.grad,
            x: &self.x,
            label,
            score,
            loss,
        })
    }
}

/// Gradient in `w` of `ℓ(y·wᵀx/‖w‖_q − r)` for finite `q`:
/// `ℓ'(z)·y·(I − w̄wᵀ/‖w‖_q^q)(x+δ)/‖w‖_q`.
pub fn psat_gradient(w: &[f64], x: &[f64], y: Label, attack: &AttackSpec, loss: &LossSpec) -> Result<Vec<f64>> {
    check_weights(w)?;
    check_dim(w.len(), x.len())?;
    if attack.q().is_infinite() {
        dual_map(w, attack.q())?;
    }
    let mut wbar = vec![0.0; w.len()];
    let mut grad = vec![0.0; w.len()];
    normalized_gradient(w, x, y.sign(), attack, loss, &mut wbar, &mut grad);
    Ok(grad)
}

/// Writes the gradient into `grad`; returns the normalized robust score and
/// its loss. Requires finite `q` and `w ≠ 0`.
fn normalized_gradient(
    w: &[f64],
    x: &[f64],
    ys: f64,
    attack: &AttackSpec,
    loss: &LossSpec,
    wbar: &mut [f64],
    grad: &mut [f64],
) -> (f64, f64) {
    let q = match attack.q() {
        Exponent::Finite(q) => q,
        Exponent::Infinity => unreachable!("validated: q is finite"),
    };
    let norm = lp_norm(w, attack.q());
    for (b, &wj) in wbar.iter_mut().zip(w) {
        *b = if q == 2.0 { wj } else { math::sgn(wj) * math::powf(math::abs(wj), q - 1.0) };
    }
    let norm_qm1 = if q == 2.0 { norm } else { math::powf(norm, q - 1.0) };
    let norm_q = norm_qm1 * norm;
    let r = attack.radius();

    let score = ys * math::dot(w, x) / norm - r;
    let (value, slope) = loss.value_and_derivative(score);

    // grad temporarily holds x + δ with δ = −r·y·w̄/‖w‖_q^{q−1}.
    for ((g, &xj), &b) in grad.iter_mut().zip(x).zip(wbar.iter()) {
        *g = xj - r * ys * b / norm_qm1;
    }
    let s = math::dot(w, grad);
    let c = slope * ys / norm;
    for (g, &b) in grad.iter_mut().zip(wbar.iter()) {
        *g = c * (*g - b * s / norm_q);
    }
    (score, value)
}

pub fn train_psat<S: Sampler>(sampler: S, cfg: &TrainConfig, validation: Option<&Dataset>) -> Result<TrainTrace> {
    train_psat_with(sampler, cfg, validation, |_| {})
}

/// [`train_psat`] with a callback on every step. Snapshots run from `k = 1`
/// to `k = K + 1`.
pub fn train_psat_with<S, F>(sampler: S, cfg: &TrainConfig, validation: Option<&Dataset>, mut observer: F) -> Result<TrainTrace>
where
    S: Sampler,
    F: FnMut(&PsatStepView<'_>),
{
    if let Some(v) = validation {
        check_dim(sampler.dim(), v.d())?;
    }
    let mode = sampler.mode();
    let mut psat = Psat::new(sampler, cfg)?;
    let mut rec = Recorder::new(cfg, validation, validation, 1, cfg.iterations + 1)?;
    rec.snapshot(1, psat.weights());
    for _ in 0..cfg.iterations {
        let view = psat.step()?;
        rec.step_loss(view.iteration, view.loss);
        observer(&view);
        rec.snapshot(view.iteration + 1, view.next_weights);
    }
    Ok(rec.finish(cfg, mode))
}
