//! Epoch-based projected inexact stochastic ADMM.
//!
//! Two solvers share one set of primitives:
//!
//! * [`reason1`] estimates a sparse vector under an ℓ1 penalty from a stream of
//!   stochastic gradients, shrinking an ℓ1 ball around the running estimate
//!   after every epoch.
//! * [`reason2`] splits a stream of noisy matrix observations into a sparse
//!   part and a low-rank part, with ℓ1, nuclear and ℓ∞ constraints.
//!
//! [`datagen`] builds the synthetic instances, [`losses`] provides the gradient
//! oracles and [`harness`] runs experiments, writes trajectories and manifests,
//! and fits convergence rates.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod projections;
pub mod reason1;
pub mod reason2;
pub mod rng;

pub use error::{Error, Result};
