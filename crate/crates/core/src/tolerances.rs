//! Numerical tolerances shared across modules.

/// Relative asymmetry allowed before a matrix is rejected as non-symmetric.
pub const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Largest condition number accepted when forming `S^{1/2}` or `S^{-1/2}`.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative Frobenius tolerance for `V diag(λ) Vᵀ` reconstruction checks.
pub const RECONSTRUCTION_REL_TOL: f64 = 1e-8;

/// Relative Frobenius tolerance for square-root identities.
pub const SQRT_REL_TOL: f64 = 1e-6;

/// Squared Mahalanobis radii below this are treated as zero in scatter sums.
pub const ZERO_RADIUS: f64 = 1e-300;

/// Admissible range of the shape parameter.
pub const BETA_MIN: f64 = 0.01;
pub const BETA_MAX: f64 = 100.0;

/// Bracket used when solving the moment-ratio equation for the shape.
pub const BETA_BRACKET: (f64, f64) = (0.05, 10.0);

/// Bisection tolerance and iteration cap for the shape solver.
pub const BETA_TOL: f64 = 1e-6;
pub const BETA_MAX_ITER: usize = 200;

/// Smallest sample size accepted by the full composite-null fit.
pub const MIN_FIT_N: usize = 10;

/// Fraction of failed bootstrap replicates that aborts a test.
pub const MAX_FAILED_REPLICATE_FRACTION: f64 = 0.05;
