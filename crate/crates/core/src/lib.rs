//! Reward denoising under generalized confusion-matrix (GCM) perturbations.
//!
//! The crate is organised bottom-up:
//!
//! - [`perturb`]: reward discretization, confusion matrices and the noise channels.
//! - [`critic`]: distributional reward critics (tabular and network), the
//!   label-shift correction, and the regression / surrogate-reward baselines.
//! - [`gdrc`]: critic ensembles over candidate interval counts with
//!   cross-entropy voting, plus the streaming percentile sketch.
//! - [`envs`]: small environments with exactly known rewards.
//! - [`agent`]: Q-learning and policy-gradient learners behind a pluggable
//!   reward-correction pipeline.
//! - [`theory`]: exact (sampling-free) curves for cross-entropy and
//!   reconstruction error.
//! - [`harness`]: configuration, seeded run matrices and CSV output.

pub mod agent;
pub mod audit;
pub mod critic;
pub mod envs;
pub mod error;
pub mod gdrc;
pub mod harness;
pub mod nn;
pub mod perturb;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use perturb::{ConfusionMatrix, Discretization, Label, NoiseModel, PerturbedSample};
pub use rng::RunRng;
