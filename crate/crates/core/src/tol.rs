//! Numerical tolerances shared by the simulator and the validators.

/// Events closer than this in time are processed as one batch.
pub const EPS_T: f64 = 1e-9;
/// Velocity differences below this count as tangential contact.
pub const EPS_V: f64 = 1e-10;
/// Absolute tolerance on running mass integrals and prefix sums.
pub const EPS_XI: f64 = 1e-10;
/// Relative tolerance for treating two positions as equal.
pub const EPS_X_REL: f64 = 1e-12;
/// Width to which bracketed event times are refined.
pub const ROOT_TOL: f64 = 1e-12;
/// Pass threshold for Rankine-Hugoniot residuals and Oleinik margins.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Positional contact tolerance at `x`.
#[inline]
pub fn eps_x(x: f64) -> f64 {
    EPS_X_REL * (1.0 + x.abs())
}

#[inline]
pub fn same_position(a: f64, b: f64) -> bool {
    (a - b).abs() <= eps_x(a.abs().max(b.abs()))
}
