use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{SamplerMode, TrainConfig};
use crate::data::Dataset;
use crate::evaluation::count_robust_errors;
use crate::geometry::{check_dim, lp_norm, margin_with_norm, AttackSpec, Exponent};
use crate::losses::LossSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub robust_surrogate_loss: f64,
    pub robust_error: f64,
    pub norm2: f64,
    pub norm_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub weights: Vec<f64>,
    /// Measured on the training set, or on the validation set for online runs.
    pub metrics: Option<SnapshotMetrics>,
    pub validation_robust_error: Option<f64>,
}

/// Summary of the loss incurred at each step: `L_S(w_k)` for full-batch
/// descent, the loss on the drawn sample for the stochastic trainers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLossSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    /// Iteration index of the first minimum.
    pub argmin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub config: TrainConfig,
    pub sampler: SamplerMode,
    pub snapshots: Vec<Snapshot>,
    /// Snapshot with the smallest validation robust error, when validated.
    pub best_index: Option<usize>,
    pub step_loss: StepLossSummary,
}

impl TrainTrace {
    pub fn final_weights(&self) -> &[f64] {
        &self.snapshots.last().expect("traces hold at least one snapshot").weights
    }

    /// The validated best snapshot, else the final one.
    pub fn selected(&self) -> &Snapshot {
        let i = self.best_index.unwrap_or(self.snapshots.len() - 1);
        &self.snapshots[i]
    }
}

/// Robust error and surrogate without rejecting the zero model: every
/// margin of `w = 0` is `0`, which counts as an error.
pub(crate) fn lenient_metrics(w: &[f64], ds: &Dataset, attack: &AttackSpec, loss: &LossSpec) -> SnapshotMetrics {
    let norm_q = lp_norm(w, attack.q());
    let r = attack.radius();
    let total: f64 = ds.iter().map(|(x, y)| loss.value(margin_with_norm(w, x, y.sign(), r, norm_q))).sum();
    SnapshotMetrics {
        robust_surrogate_loss: total / ds.n() as f64,
        robust_error: count_robust_errors(w, norm_q, ds, r) as f64 / ds.n() as f64,
        norm2: lp_norm(w, Exponent::TWO),
        norm_q,
    }
}

pub(crate) fn lenient_robust_error(w: &[f64], ds: &Dataset, attack: &AttackSpec) -> f64 {
    count_robust_errors(w, lp_norm(w, attack.q()), ds, attack.radius()) as f64 / ds.n() as f64
}

/// Accumulates snapshots and step losses while a trainer runs.
pub(crate) struct Recorder<'a> {
    attack: AttackSpec,
    loss: LossSpec,
    metric_set: Option<&'a Dataset>,
    validation: Option<&'a Dataset>,
    every: usize,
    first: usize,
    last: usize,
    snapshots: Vec<Snapshot>,
    loss_sum: f64,
    loss_count: usize,
    loss_min: f64,
    loss_argmin: usize,
}

impl<'a> Recorder<'a> {
    /// Snapshots iterations `first, first+every, …` and always `last`.
    pub(crate) fn new(
        cfg: &TrainConfig,
        metric_set: Option<&'a Dataset>,
        validation: Option<&'a Dataset>,
        first: usize,
        last: usize,
    ) -> Result<Self> {
        for ds in metric_set.iter().chain(validation.iter()) {
            check_dim(cfg.w_init.dim(), ds.d())?;
        }
        Ok(Recorder {
            attack: cfg.attack,
            loss: cfg.loss,
            metric_set,
            validation,
            every: cfg.snapshot_every(),
            first,
            last,
            snapshots: Vec::new(),
            loss_sum: 0.0,
            loss_count: 0,
            loss_min: f64::INFINITY,
            loss_argmin: first,
        })
    }

    pub(crate) fn wants(&self, k: usize) -> bool {
        k == self.last || (k - self.first) % self.every == 0
    }

    pub(crate) fn snapshot(&mut self, k: usize, w: &[f64]) {
        if !self.wants(k) {
            return;
        }
        self.snapshots.push(Snapshot {
            iteration: k,
            weights: w.to_vec(),
            metrics: self.metric_set.map(|ds| lenient_metrics(w, ds, &self.attack, &self.loss)),
            validation_robust_error: self.validation.map(|ds| lenient_robust_error(w, ds, &self.attack)),
        });
    }

    pub(crate) fn step_loss(&mut self, k: usize, loss: f64) {
        self.loss_sum += loss;
        self.loss_count += 1;
        if loss < self.loss_min {
            self.loss_min = loss;
            self.loss_argmin = k;
        }
    }

    pub(crate) fn finish(self, config: &TrainConfig, sampler: SamplerMode) -> TrainTrace {
        let best_index = if self.validation.is_some() {
            let errors: Vec<f64> = self.snapshots.iter().filter_map(|s| s.validation_robust_error).collect();
            best_snapshot_index(&errors)
        } else {
            None
        };
        TrainTrace {
            config: config.clone(),
            sampler,
            snapshots: self.snapshots,
            best_index,
            step_loss: StepLossSummary {
                count: self.loss_count,
                mean: if self.loss_count > 0 { self.loss_sum / self.loss_count as f64 } else { 0.0 },
                min: self.loss_min,
                argmin: self.loss_argmin,
            },
        }
    }
}

/// Index of the first minimum.
pub fn best_snapshot_index(errors: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &e) in errors.iter().enumerate() {
        if best.map_or(true, |b| e < errors[b]) {
            best = Some(i);
        }
    }
    best
}

/// The snapshot with the smallest robust error on `validation`, earliest on
/// ties. The zero model is scored as misclassifying every point.
pub fn evaluate_snapshot_policy(trace: &TrainTrace, validation: &Dataset, attack: &AttackSpec) -> Result<usize> {
    if trace.snapshots.is_empty() {
        return Err(Error::InvalidConfig("trace has no snapshots".into()));
    }
    let mut errors = Vec::with_capacity(trace.snapshots.len());
    for s in &trace.snapshots {
        check_dim(validation.d(), s.weights.len())?;
        errors.push(lenient_robust_error(&s.weights, validation, attack));
    }
    Ok(best_snapshot_index(&errors).expect("non-empty"))
}
