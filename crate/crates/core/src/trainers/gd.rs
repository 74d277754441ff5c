use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::trace::Recorder;
use super::{Algorithm, SamplerMode, TrainConfig, TrainTrace};
use crate::data::Dataset;
use crate::geometry::{fill_perturbation, lp_norm, margin_with_norm, AttackSpec};
use crate::losses::LossSpec;
use crate::math;
use crate::{Error, Result};

/// Full-batch adversarial gradient descent as an explicit state machine.
#[derive(Debug, Clone)]
pub struct AdversarialGd<'a> {
    ds: &'a Dataset,
    loss: LossSpec,
    attack: AttackSpec,
    eta: f64,
    w: Vec<f64>,
    prev: Vec<f64>,
    grad: Vec<f64>,
    delta: Vec<f64>,
    k: usize,
}

/// One update `w_k → w_{k+1}`.
#[derive(Debug, Clone, Copy)]
pub struct GdStepView<'s> {
    pub iteration: usize,
    pub weights: &'s [f64],
    pub next_weights: &'s [f64],
    /// `L_S(w_k)`, the adversarial empirical risk before the step.
    pub loss: f64,
    /// Mean of `ℓ'(mᵢ)·yᵢ·(xᵢ + δᵢ)`, so that `w_{k+1} = w_k − η·gradient`.
    pub gradient: &'s [f64],
}

impl<'a> AdversarialGd<'a> {
    pub fn new(ds: &'a Dataset, cfg: &TrainConfig) -> Result<Self> {
        check_algorithm(cfg, Algorithm::Gd)?;
        cfg.validate(ds.d())?;
        let d = ds.d();
        Ok(AdversarialGd {
            ds,
            loss: cfg.loss,
            attack: cfg.attack,
            eta: cfg.eta,
            w: cfg.w_init.to_vec(),
            prev: vec![0.0; d],
            grad: vec![0.0; d],
            delta: vec![0.0; d],
            k: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `L_S(w_k)` at the current iterate.
    pub fn empirical_loss(&self) -> f64 {
        let norm_q = lp_norm(&self.w, self.attack.q());
        let r = self.attack.radius();
        let total: f64 =
            self.ds.iter().map(|(x, y)| self.loss.value(margin_with_norm(&self.w, x, y.sign(), r, norm_q))).sum();
        total / self.ds.n() as f64
    }

    pub fn step(&mut self) -> GdStepView<'_> {
        let loss = adversarial_gradient(self.ds, &self.w, &self.attack, &self.loss, &mut self.grad, &mut self.delta);
        core::mem::swap(&mut self.w, &mut self.prev);
        for ((next, &old), &g) in self.w.iter_mut().zip(&self.prev).zip(&self.grad) {
            *next = old - self.eta * g;
        }
        let iteration = self.k;
        self.k += 1;
        GdStepView { iteration, weights: &self.prev, next_weights: &self.w, loss, gradient: &self.grad }
    }
}

/// Writes the full-batch gradient into `grad` and returns `L_S(w)`.
///
/// Since `δᵢ = yᵢ·δ₊` with `δ₊` the attack on a positive label,
/// `Σ ℓ'(mᵢ)yᵢ(xᵢ+δᵢ) = Σ ℓ'(mᵢ)yᵢxᵢ + (Σ ℓ'(mᵢ))·δ₊`.
fn adversarial_gradient(
    ds: &Dataset,
    w: &[f64],
    attack: &AttackSpec,
    loss: &LossSpec,
    grad: &mut [f64],
    delta: &mut [f64],
) -> f64 {
    let norm_q = lp_norm(w, attack.q());
    let r = attack.radius();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut slope_sum = 0.0;
    let mut loss_sum = 0.0;
    if let LossSpec::CrossEntropy = loss {
        // ℓ(m) = max(−m, 0) + ln(1 + e^{−|m|}). The log terms are summed as
        // the log of a running product of factors in (1, 2], flushed well
        // before overflow, so each row costs one exp and no log.
        let mut product = 1.0;
        for (x, y) in ds.iter() {
            let ys = y.sign();
            let m = margin_with_norm(w, x, ys, r, norm_q);
            let e = math::exp(-math::abs(m));
            let numerator = if m >= 0.0 { e } else { 1.0 };
            let slope = -numerator / (1.0 + e);
            loss_sum += f64::max(-m, 0.0);
            product *= 1.0 + e;
            if product > 1e250 {
                loss_sum += math::ln(product);
                product = 1.0;
            }
            slope_sum += slope;
            axpy(grad, slope * ys, x);
        }
        loss_sum += math::ln(product);
    } else {
        for (x, y) in ds.iter() {
            let ys = y.sign();
            let (value, slope) = loss.value_and_derivative(margin_with_norm(w, x, ys, r, norm_q));
            loss_sum += value;
            slope_sum += slope;
            axpy(grad, slope * ys, x);
        }
    }
    fill_perturbation(w, 1.0, attack, delta);
    let n = ds.n() as f64;
    for (g, &dj) in grad.iter_mut().zip(delta.iter()) {
        *g = (*g + slope_sum * dj) / n;
    }
    loss_sum / n
}

#[inline]
fn axpy(acc: &mut [f64], c: f64, x: &[f64]) {
    for (a, &xj) in acc.iter_mut().zip(x) {
        *a += c * xj;
    }
}

pub(crate) fn check_algorithm(cfg: &TrainConfig, expected: Algorithm) -> Result<()> {
    if cfg.algorithm != expected {
        return Err(Error::InvalidConfig(format!(
            "configuration is for {}, not {}",
            cfg.algorithm.name(),
            expected.name()
        )));
    }
    Ok(())
}

pub fn train_gd(ds: &Dataset, cfg: &TrainConfig, validation: Option<&Dataset>) -> Result<TrainTrace> {
    train_gd_with(ds, cfg, validation, |_| {})
}

/// [`train_gd`] with a callback on every step.
///
/// Snapshots cover `k = 0..=K`; the step-loss summary covers the same
/// iterates, so its minimum is the best empirical adversarial risk reached.
pub fn train_gd_with<F>(ds: &Dataset, cfg: &TrainConfig, validation: Option<&Dataset>, mut observer: F) -> Result<TrainTrace>
where
    F: FnMut(&GdStepView<'_>),
{
    let mut gd = AdversarialGd::new(ds, cfg)?;
    let mut rec = Recorder::new(cfg, Some(ds), validation, 0, cfg.iterations)?;
    rec.snapshot(0, gd.weights());
    for _ in 0..cfg.iterations {
        let view = gd.step();
        rec.step_loss(view.iteration, view.loss);
        observer(&view);
        rec.snapshot(view.iteration + 1, view.next_weights);
    }
    rec.step_loss(cfg.iterations, gd.empirical_loss());
    Ok(rec.finish(cfg, SamplerMode::FullBatch))
}
