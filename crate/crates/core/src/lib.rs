//! Simulation of random fields on `Z_+^d` and numerical diagnostics for
//! strong laws of large numbers over rectangular and spherical partial sums.
//!
//! The pieces, bottom up:
//!
//! - [`lattice`]: fields on boxes, prefix-sum tables, spherical shells and
//!   maximal sums.
//! - [`scaling`]: normalizers, doubling bounds, base selection and Toeplitz
//!   weights.
//! - [`stable`]: symmetric stable sampling, model fields and the linear
//!   fractional stable sheet.
//! - [`moments`]: Monte Carlo moment estimates, condition series and the
//!   maximal-inequality recursion.
//! - [`harness`]: tail-sup decay experiments and block tail bounds.
//! - [`suite`]: the acceptance criteria.
//!
//! All randomness comes from named [`Stream`]s under one master seed, and all
//! parallel work goes through a [`ThreadBudget`], so results do not depend on
//! the number of threads.

pub mod error;
pub mod lattice;
pub mod parallel;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod scaling;
pub mod stable;
pub mod generator;
pub mod moments;
pub mod harness;
pub mod suite;

pub use error::{Error, Result};
pub use generator::GeneratorSpec;
pub use lattice::{IndexDomain, LatticeField, MultiIndex, Norm, PrefixSumTable};
pub use parallel::ThreadBudget;
pub use rng::Stream;
pub use scaling::{BasePlan, DoublingBounds, ScalingFunction, ToeplitzWeights};
pub use stable::{CovarianceModel, LfssConfig, StableParams};
