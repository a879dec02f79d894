//! Central numerical tolerances.
//!
//! Every tolerance used across the library lives here so that the
//! numerical contract is auditable in one place. Values are absolute
//! unless noted otherwise.

/// Max-abs-entry bound on M - M^dag for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Max |<v_i|v_j> - delta_ij| for a vector family to count as orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;

/// Eigenpair residual bound, relative to the matrix max-abs norm:
/// ||M v - lambda v|| <= EIG_TOL * ||M||.
pub const EIG_TOL: f64 = 1e-10;

/// Eigenvalues closer than DEGENERACY_TOL_REL * ||M|| are treated as one
/// degenerate cluster (re-orthonormalized together, flagged in flow laws).
pub const DEGENERACY_TOL_REL: f64 = 1e-9;

/// Allowed |Tr rho - 1| drift during state propagation.
pub const TRACE_TOL: f64 = 1e-9;

/// Allowed negative-eigenvalue excursion for density matrices.
pub const PSD_TOL: f64 = 1e-10;

/// Allowed Hermiticity drift (pre re-symmetrization) during invariant
/// propagation before the step is declared unsound.
pub const HERM_DRIFT_TOL: f64 = 1e-9;

/// Residual bound for the common-eigenvector and block-structure checks
/// that certify an invariant subspace.
pub const DFS_TOL: f64 = 1e-9;

/// Initial states must have unit trace within this bound (stricter than
/// the propagation drift allowance).
pub const INIT_TRACE_TOL: f64 = 1e-12;

/// Eigenvector-matrix condition numbers above this mean "treat the
/// operator as non-diagonalizable".
pub const DIAGONALIZABILITY_COND_MAX: f64 = 1e8;

/// Schedules fed to the second-order solver must stay at least this far
/// from zero (its change of variables divides by the coefficient).
pub const SCHEDULE_MIN_MAGNITUDE: f64 = 1e-8;
