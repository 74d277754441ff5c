use alloc::vec;
use alloc::vec::Vec;

use super::gd::check_algorithm;
use super::sampler::Sampler;
use super::trace::Recorder;
use super::{Algorithm, TrainConfig, TrainTrace};
use crate::data::{Dataset, Label};
use crate::geometry::{check_dim, fill_perturbation, lp_norm, margin_with_norm, AttackSpec};
use crate::losses::LossSpec;
use crate::Result;

/// Online adversarial SGD: one sample and one update per step.
#[derive(Debug, Clone)]
pub struct AdversarialSgd<S> {
    sampler: S,
    loss: LossSpec,
    attack: AttackSpec,
    eta: f64,
    w: Vec<f64>,
    prev: Vec<f64>,
    x: Vec<f64>,
    delta: Vec<f64>,
    grad: Vec<f64>,
    k: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SgdStepView<'s> {
    pub iteration: usize,
    pub weights: &'s [f64],
    pub next_weights: &'s [f64],
    /// The drawn point, before perturbation.
    pub x: &'s [f64],
    pub label: Label,
    /// `ℓ(y·w_kᵀ(x+δ))` on the drawn point.
    pub loss: f64,
    pub gradient: &'s [f64],
}

impl<S: Sampler> AdversarialSgd<S> {
    pub fn new(sampler: S, cfg: &TrainConfig) -> Result<Self> {
        check_algorithm(cfg, Algorithm::Sgd)?;
        let d = sampler.dim();
        cfg.validate(d)?;
        Ok(AdversarialSgd {
            sampler,
            loss: cfg.loss,
            attack: cfg.attack,
            eta: cfg.eta,
            w: cfg.w_init.to_vec(),
            prev: vec![0.0; d],
            x: vec![0.0; d],
            delta: vec![0.0; d],
            grad: vec![0.0; d],
            k: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn sampler(&self) -> &S {
        &self.sampler
    }

    pub fn step(&mut self) -> Result<SgdStepView<'_>> {
        let label = self.sampler.draw(&mut self.x)?;
        let ys = label.sign();
        let norm_q = lp_norm(&self.w, self.attack.q());
        let (loss, slope) =
            self.loss.value_and_derivative(margin_with_norm(&self.w, &self.x, ys, self.attack.radius(), norm_q));
        fill_perturbation(&self.w, ys, &self.attack, &mut self.delta);
        for ((g, &xj), &dj) in self.grad.iter_mut().zip(&self.x).zip(&self.delta) {
            *g = slope * ys * (xj + dj);
        }
        core::mem::swap(&mut self.w, &mut self.prev);
        for ((next, &old), &g) in self.w.iter_mut().zip(&self.prev).zip(&self.grad) {
            *next = old - self.eta * g;
        }
        let iteration = self.k;
        self.k += 1;
        Ok(SgdStepView {
            iteration,
            weights: &self.prev,
            next_weights: &self.w,
            x: &self.x,
            label,
            loss,
            gradient: &self.grad,
        })
    }
}

pub fn train_sgd<S: Sampler>(sampler: S, cfg: &TrainConfig, validation: Option<&Dataset>) -> Result<TrainTrace> {
    train_sgd_with(sampler, cfg, validation, |_| {})
}

/// [`train_sgd`] with a callback on every step.
///
/// Snapshot metrics are measured on `validation` when given; the step-loss
/// summary averages the loss on each drawn sample at the iterate that drew it.
pub fn train_sgd_with<S, F>(sampler: S, cfg: &TrainConfig, validation: Option<&Dataset>, mut observer: F) -> Result<TrainTrace>
where
    S: Sampler,
    F: FnMut(&SgdStepView<'_>),
{
    if let Some(v) = validation {
        check_dim(sampler.dim(), v.d())?;
    }
    let mode = sampler.mode();
    let mut sgd = AdversarialSgd::new(sampler, cfg)?;
    let mut rec = Recorder::new(cfg, validation, validation, 0, cfg.iterations)?;
    rec.snapshot(0, sgd.weights());
    for _ in 0..cfg.iterations {
        let view = sgd.step()?;
        rec.step_loss(view.iteration, view.loss);
        observer(&view);
        rec.snapshot(view.iteration + 1, view.next_weights);
    }
    Ok(rec.finish(cfg, mode))
}
