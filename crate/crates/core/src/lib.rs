#![cfg_attr(not(feature = "std"), no_std)]
// Float comparisons stay in guards rather than literal patterns, and
// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::redundant_guards, clippy::neg_cmp_op_on_partial_ord)]

//! Adversarially robust learning of halfspaces under `lp` perturbations.
//!
//! The crate is split along the lines of the learning pipeline:
//!
//! - [`geometry`]: norms, Hölder conjugates, the closed-form worst-case
//!   perturbation of a linear classifier and projections onto `lq` spheres.
//! - [`losses`]: the convex and sigmoidal surrogates together with the
//!   constants the step-size schedules consume.
//! - [`data`]: synthetic distributions (isotropic Gaussian, uniform `lp`
//!   balls, hard-margin conditionals) with agnostic label noise.
//! - [`trainers`]: full-batch adversarial gradient descent, online adversarial
//!   SGD and projected stochastic adversarial training on the `lq` sphere.
//! - [`evaluation`]: robust error, robust surrogate risk and a brute-force
//!   robust ERM oracle for estimating the best achievable robust error.
//!
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the companion `rhd` crate.

extern crate alloc;

mod error;
mod math;

pub mod data;
pub mod evaluation;
pub mod geometry;
pub mod losses;
pub mod trainers;

pub use error::{Error, Result};
pub use geometry::{AttackSpec, Exponent, WeightVector};
pub use losses::LossSpec;
pub use data::{Dataset, GeneratorSpec, Label, NoiseSpec};
