//! Numerical tolerances shared across the crate.
//!
//! Every threshold used in a validity check or a solver stopping rule lives
//! here so that tests and library code agree on what "close enough" means.

/// Hermiticity check on a [`FockOperator`](crate::fock::FockOperator).
pub const HERMITIAN_ABS: f64 = 1e-12;

/// Minimum eigenvalue allowed for a POVM element.
pub const POVM_PSD: f64 = 1e-8;

/// Element-wise completeness tolerance for `Σ Π_n = I`.
pub const POVM_COMPLETENESS: f64 = 1e-8;

/// Eigenvalue window for a physical no-click operator, `[-tol, 1 + tol]`.
pub const MODEL_EIGEN: f64 = 1e-8;

/// Default tail tolerance for the detector double series.
pub const SERIES_TOL: f64 = 1e-10;

/// Cap on the number of photons summed per port in the detector series.
pub const SERIES_CAP: usize = 4000;

/// Default KKT tolerance for the quadratic solver.
pub const QP_TOL: f64 = 1e-8;

/// Default iteration cap for the quadratic solver.
pub const QP_MAX_ITER: usize = 100_000;

/// Constraint violation allowed in a returned QP solution.
pub const QP_FEAS: f64 = 1e-8;

/// Relative singular value cutoff for least-squares subproblems.
pub const LSQ_RCOND: f64 = 1e-14;

/// Relative stopping rule for the effective-weight iteration used by the
/// norm objective.
pub const NORM_WEIGHT_RTOL: f64 = 1e-10;

/// Slack added to every Sylvester interval.
pub const EPS_POS: f64 = 1e-9;

/// Eigenvalue clamp used by matrix square roots.
pub const SQRT_CLAMP: f64 = 1e-10;

/// Accuracy target for the jitter weight quadrature.
pub const JITTER_QUAD: f64 = 1e-12;

/// Slack on the jitter decay inequality.
pub const JITTER_SLACK: f64 = 1e-10;
