use super::measure::{Component, DensityComponent, LambdaMeasure};
use crate::numerics::special::exp_compensated;
use crate::numerics::{integrate_singular_split, QuadOptions};
use crate::{invalid, Result};

const PSI_QUAD: QuadOptions = QuadOptions {
    abs_tol: 0.0,
    rel_tol: 1e-12,
    max_intervals: 4000,
};

/// `∫_0^1 (e^{-qx} - 1 + qx) x^{-2} d(x)`, cut at `1/q, 2/q, 4/q, ...` so
/// that every piece sees a smooth integrand.
fn density_psi(d: &DensityComponent, q: f64) -> Result<f64> {
    let le = d.left_exponent();
    let re = d.right_exponent();
    // the complement handed over by the quadrature is exact only on the last piece
    let piece = |a: f64, b: f64, left: f64| {
        let last = b == 1.0;
        let f = |x: f64, c: f64| {
            let one_minus_x = if last { c } else { 1.0 - x };
            exp_compensated(q * x) / (x * x) * d.eval_split(x, one_minus_x)
        };
        integrate_singular_split(f, a, b, left, if last { re } else { 0.0 }, PSI_QUAD)
            .map(|r| r.value)
    };
    let mut cut = (1.0 / q).min(1.0);
    let mut total = piece(0.0, cut, le)?;
    while cut < 1.0 {
        let next = (2.0 * cut).min(1.0);
        total += piece(cut, next, 0.0)?;
        cut = next;
    }
    Ok(total)
}

/// Branching mechanism `psi(q) = ∫ (e^{-qx} - 1 + qx) x^{-2} Lambda(dx)`,
/// where the atom at 0 contributes `rho q^2 / 2`.
pub fn psi(m: &LambdaMeasure, q: f64) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(invalid(format!("psi needs a finite q >= 0, got {q}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    m.components()
        .map(|c| match c {
            Component::Kingman(rho) => Ok(rho * q * q / 2.0),
            Component::Atom(a) => {
                Ok(a.mass * exp_compensated(q * a.location) / (a.location * a.location))
            }
            Component::Density(d) => density_psi(d, q),
        })
        .sum()
}
