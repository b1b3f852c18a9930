//! Deterministic numerical kernel shared by every module: quadrature with
//! endpoint singularities and infinite tails, bracketing root finding,
//! reproducible random streams, and goodness-of-fit tests.

mod gof;
mod quad;
mod rng;
mod roots;
pub mod special;

pub use gof::{
    chi_square_gof, chi_square_samples, chi_square_sf, ks_one_sample, ks_two_sample, GofReport,
};
pub use quad::{
    integrate, integrate_singular, integrate_singular_split, integrate_tail,
    integrate_tail_with_hint, integrate_unit, QuadOptions, QuadResult, TailHint, TailOutcome,
};
pub use rng::{RngStream, RNG_ALGORITHM};
pub use roots::{bisect_decreasing, bisect_increasing};

/// Tolerance for exact-formula checks.
pub const EXACT_TOL: f64 = 1e-10;
/// Tolerance for improper integrals.
pub const IMPROPER_TOL: f64 = 1e-6;

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
