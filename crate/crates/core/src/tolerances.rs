//! Numeric thresholds shared across the crate.
//!
//! Everything that compares a floating-point result against an exact
//! algebraic identity reads its threshold from here.

/// Absolute tolerance for identities of the finite-dimensional exterior algebra.
pub const EXACT_ALGEBRA: f64 = 1e-12;

/// An eigenvalue whose modulus lies within this distance of 1 is not hyperbolic.
pub const HYPERBOLICITY_GAP: f64 = 1e-9;

/// Relative tolerance for grouping numerically repeated eigenvalues.
pub const EIGENVALUE_CLUSTER: f64 = 1e-8;

/// Vectors produced by the stable/unstable case split with a smaller norm are dropped.
pub const CASE_SPLIT_DROP: f64 = 1e-13;

/// Minimum support margin of a bump profile inside the unit roof interval.
pub const MIN_BUMP_MARGIN: f64 = 0.05;

/// Default step for central finite differences along the flow.
pub const FD_STEP: f64 = 1e-4;

/// Absolute floor added to 3-sigma acceptance bands; it absorbs summation
/// round-off when the replica spread itself collapses to round-off.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// A closed orbit must return to its start within this torus distance.
pub const ORBIT_CLOSURE: f64 = 1e-9;

/// Minimum coefficient of determination for an exponential-rate fit.
pub const MIN_RATE_R2: f64 = 0.99;
