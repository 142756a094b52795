//! Noisy iterative training with distribution-dependent generalization bounds.
//!
//! The crate trains small models (logistic regression, ReLU MLPs) with noisy
//! iterative algorithms — noisy gradient descent, DP-SGD with Gaussian or
//! Laplace noise, stochastic gradient Langevin dynamics, federated averaging —
//! records per-iteration gradient statistics, and evaluates generalization
//! bounds that depend on those statistics through the closed-form divergence
//! kernels of additive-noise channels.
//!
//! Layout:
//!
//! * [`noise`] — additive-noise channels: closed-form KL/TV/χ² divergence
//!   kernels, exact one-dimensional forms, a quadrature oracle, tail masses
//!   for the time-decay factors, and seeded noise sampling.
//! * [`stats`] — estimators over sets of per-example gradient vectors
//!   (variance, median absolute moments, centered norm and exponential
//!   moments).
//! * [`learn`] — models, datasets, losses, gradients, synthetic blob data,
//!   label corruption, CSV IO, and gap measurement.
//! * [`optim`] — projection domains, gradient clipping, the noisy update
//!   steps, and the recording training loop.
//! * [`bounds`] — the bound engine: time-decay products, generic
//!   divergence-based bounds, mechanism-specific DP-SGD and SGLD bounds,
//!   and the ordering check.
//! * [`fed`] — federated averaging with per-client bound evaluation.
//! * [`cli`] — config-file driven experiment commands emitting CSV.
//!
//! Every random draw flows through [`seeding`], which derives independent
//! named generator streams from a single run seed; identical seeds give
//! bit-identical trajectories and byte-identical CSV output.
//!
//! The examples directory is the best starting point: each example is a
//! self-contained run of one capability (`cargo run --release --example
//! divergence_table`, `dp_sgd_bounds`, `sgld_corruption`, `width_sweep`,
//! `federated_clients`).

pub mod bounds;
pub mod cli;
pub mod error;
pub mod fed;
pub mod learn;
pub mod noise;
pub mod optim;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
