//! Simulation and reconstruction toolkit for phase-sensitive photodetector
//! tomography.
//!
//! A weak-field homodyne click detector is modelled in a truncated Fock
//! basis ([`detector`]), probed with coherent states ([`probe`]), and its
//! POVM is recovered diagonal by diagonal ([`recursive`]) with a
//! constrained least-squares core ([`qp`]). [`baseline`] holds the
//! phase-space and full joint methods used for comparison.

// `!(x >= 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod detector;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod fock;
pub mod jitter;
pub mod linalg;
pub mod metrics;
pub mod probe;
pub mod qp;
pub mod recursive;
pub mod tolerances;

pub use error::{QdtError, Result};
pub use exec::Execution;
pub use fock::{FockOperator, PovmSet};
