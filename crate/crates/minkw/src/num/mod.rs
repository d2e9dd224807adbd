//! Shared numerical kernels: quadrature, root bracketing, low-discrepancy
//! sampling, special functions, and small optimizers.

pub mod lowdisc;
pub mod opt;
pub mod quad;
pub mod roots;
pub mod special;

pub use quad::{integrate, integrate_triangle};
pub use roots::{bisect, bracket_roots};

/// First derivative by central differences with one Richardson step.
///
/// Evaluates `f` at four points around `t`; error is O(step^4) for smooth `f`.
pub fn deriv_central<F: FnMut(f64) -> f64>(mut f: F, t: f64, step: f64) -> f64 {
    let d = |h: f64, f: &mut F| (f(t + h) - f(t - h)) / (2.0 * h);
    let d1 = d(step, &mut f);
    let d2 = d(0.5 * step, &mut f);
    (4.0 * d2 - d1) / 3.0
}

/// Step size for difference quotients near `t`.
pub fn fd_step(t: f64) -> f64 {
    crate::tol::FD_STEP * t.abs().max(1.0)
}
