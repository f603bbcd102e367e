//! Gaussian random fields on `[0, 1]` conditioned on a large L2 norm.
//!
//! The crate discretizes a covariance kernel with a Nyström eigensolve,
//! samples the field through its Karhunen-Loève expansion, draws exactly
//! from the conditional law given `||phi||_2^2 > r` (where the field
//! concentrates onto the top eigenspace of the covariance), and evaluates the
//! closed-form tails, bounds and asymptotes that describe that concentration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod conditioning;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod spectral;
pub mod verify;

pub use analysis::{AnalysisReport, SpectrumSummary};
pub use conditioning::{ConditionalEnsemble, Estimate, Method};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, MethodChoice, RunOutcome, Staging};
pub use kernels::{Kernel, KernelFamily, KernelSpec, Smoothness};
pub use rng::StreamFactory;
pub use sampling::{CoefficientDraw, CoupledSample, NormRecord};
pub use spectral::{QuadratureGrid, SpectralDecomposition};
pub use verify::{CriterionOutcome, VerifyReport};
