//! Shared numerical thresholds.

/// Normalisation tolerance used by constructors (hyperboloid membership etc).
pub const EPS_MODEL: f64 = 1e-12;

/// Threshold for geometric predicates: ideal detection, barycentric signs,
/// light-like and unit tests on dual vectors.
pub const EPS_GEOM: f64 = 1e-9;

/// Distance kept between a free angle and the ends of `(0, pi)`.
pub const EPS_ANGLE: f64 = 1e-8;

/// Flat-face threshold on normalised tilt sums.
pub const EPS_TILT: f64 = 1e-9;

/// Tolerance on the norm of a dual vector passed to descriptor constructors.
pub const EPS_DUAL: f64 = 1e-10;
