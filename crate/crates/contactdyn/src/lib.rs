//! Contact-aware neural forward dynamics for planar pushing.
//!
//! The crate is organized around a small set of subsystems:
//!
//! - [`numcore`]: dense f64 tensors, a reverse-mode differentiable op graph,
//!   and an adaptive-moment optimizer. Everything learnable is built on it.
//! - [`geometry`]: SE(3) poses, exp/log maps, pose-increment encoding and the
//!   ADD-S trajectory metric.
//! - [`simenv`]: a deterministic planar penalty-contact environment, its
//!   perturbed "real twin", scripted data collection and history windows.
//! - [`tactile`]: force calibration and threshold contact detection, the real
//!   twin's contact labeling path.
//! - [`model`]: multimodal encoders, the contact predictor and the
//!   contact-conditioned diffusion pose predictor.
//! - [`training`]: joint loss and the two-phase (pretrain / fine-tune) loop.
//! - [`eval`]: receding-horizon rollouts, metrics and the baseline ladder.
//! - [`cli`]: command surface, run configuration and all on-disk formats.

pub mod cli;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod numcore;
pub mod rng;
pub mod simenv;
pub mod tactile;
pub mod training;
