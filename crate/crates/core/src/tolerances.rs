//! Numerical thresholds shared by every module.

/// Entrywise tolerance for operator round trips (`A * inv(A) = I`).
pub const ROUND_TRIP: f64 = 1e-10;
/// Largest acceptable condition number of a diagonal block before inversion.
pub const MAX_CONDITION: f64 = 1e12;
/// Rows with a smaller Euclidean norm are treated as zero rows.
pub const ZERO_ROW: f64 = 1e-12;
/// Two unit normals closer than this are considered parallel duplicates.
pub const DUPLICATE_ROW: f64 = 1e-12;
/// Slack used when deciding that a halfspace is implied by the others.
pub const REDUNDANCY: f64 = 1e-9;
/// Membership slack for grid points and vertex checks.
pub const MEMBERSHIP: f64 = 1e-9;
/// Two-sided inclusion tolerance for the invariant-set fixed point.
pub const RCI_HAUSDORFF: f64 = 1e-6;
/// Default iteration cap for the invariant-set fixed point.
pub const RCI_MAX_ITER: usize = 200;
/// Epsilon of the outer approximation of the minimal RPI set.
pub const MRPI_EPS: f64 = 1e-2;
/// Cap on the number of Minkowski terms for the mRPI outer approximation.
pub const MRPI_MAX_TERMS: usize = 5000;
/// Smallest eigenvalue accepted for positive definite weights.
pub const PSD_FLOOR: f64 = 1e-10;

/// QP acceptance tolerances (absolute and relative primal/dual residual).
pub const QP_ABS: f64 = 1e-7;
pub const QP_REL: f64 = 1e-7;
/// Infeasibility certificate tolerance.
pub const QP_INFEASIBLE: f64 = 1e-8;

/// Lower floor on filter diagonals when the disturbance bound is zero.
pub const FILTER_FLOOR: f64 = 1e-9;
/// Accepted residual of the affine achievability constraint.
pub const AFFINE_RESIDUAL: f64 = 1e-6;
/// Accepted deviation of the structural identity on diagonal response blocks.
pub const STRUCTURAL: f64 = 1e-7;
/// Slack accepted by the sampled certificate validator.
pub const CERTIFICATE: f64 = 1e-6;

/// Riccati fixed point: successive iterates closer than this are converged.
pub const RICCATI: f64 = 1e-10;
pub const RICCATI_MAX_ITER: usize = 100_000;
