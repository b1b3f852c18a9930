use serde::{Deserialize, Serialize};

use super::measure::LambdaMeasure;
use super::psi::psi;
use super::rates::RateTable;
use crate::numerics::{
    bisect_decreasing, integrate_singular, integrate_tail, integrate_tail_with_hint, QuadOptions,
    TailHint, TailOutcome, IMPROPER_TOL,
};
use crate::{invalid, Error, Result};

/// Outcome of one convergence criterion, with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub converges: bool,
    /// Value of the integral or series when it was computed to convergence.
    pub value: Option<f64>,
    /// Partial sum or partial integral computed numerically.
    pub partial: f64,
    pub reason: String,
    /// True when the verdict rests on a numerical extrapolation rather than
    /// an analytic tail comparison.
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DustVerdict {
    pub dust: bool,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdiVerdict {
    pub comes_down: bool,
    /// `sum_b 1/gamma_b < infinity`.
    pub gamma_series: Certificate,
    /// `∫_1^∞ dq/psi(q) < infinity`.
    pub psi_integral: Certificate,
}

fn needs_hint(what: &str) -> Error {
    Error::NeedsHint(format!(
        "{what}: a density component has no regular-variation index; supply one"
    ))
}

/// Singletons persist (dust) iff `∫ x^{-1} Lambda(dx) < infinity`.
pub fn dust_test(m: &LambdaMeasure) -> Result<DustVerdict> {
    if m.kingman_mass() > 0.0 {
        return Ok(DustVerdict {
            dust: false,
            certificate: Certificate {
                converges: false,
                value: None,
                partial: f64::INFINITY,
                reason: "atom at 0 makes ∫ x^-1 Lambda(dx) infinite".into(),
                heuristic: false,
            },
        });
    }
    let mut value: f64 = m.atoms().iter().map(|a| a.mass / a.location).sum();
    for d in m.densities() {
        let alpha = d
            .regular_variation_index()
            .ok_or_else(|| needs_hint("dust test"))?;
        if alpha >= 1.0 {
            return Ok(DustVerdict {
                dust: false,
                certificate: Certificate {
                    converges: false,
                    value: None,
                    partial: f64::INFINITY,
                    reason: format!("density behaves like x^(1-{alpha}) at 0, so x^-1 times it is not integrable"),
                    heuristic: false,
                },
            });
        }
        value += integrate_singular(
            |x| d.eval(x) / x,
            0.0,
            1.0,
            d.left_exponent() - 1.0,
            d.right_exponent(),
            QuadOptions::new(1e-10),
        )?
        .value;
    }
    Ok(DustVerdict {
        dust: true,
        certificate: Certificate {
            converges: true,
            value: Some(value),
            partial: value,
            reason: "∫ x^-1 Lambda(dx) is finite".into(),
            heuristic: false,
        },
    })
}

fn gamma_series(m: &LambdaMeasure, b_max: usize) -> Result<Certificate> {
    let b_max = b_max.max(8);
    let table = RateTable::new(m, b_max)?;
    let partial: f64 = (2..=b_max).map(|b| 1.0 / table.gamma_b(b)).sum();
    if m.kingman_mass() > 0.0 {
        let rho = m.kingman_mass();
        return Ok(Certificate {
            converges: true,
            value: None,
            partial,
            reason: format!(
                "gamma_b >= rho C(b,2); tail beyond b_max bounded by {:.3e}",
                2.0 / (rho * b_max as f64)
            ),
            heuristic: false,
        });
    }
    let indices: Vec<Option<f64>> = m
        .densities()
        .iter()
        .map(|d| d.regular_variation_index())
        .collect();
    if indices.iter().all(Option::is_some) {
        let top = indices
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        if top > 1.0 {
            return Ok(Certificate {
                converges: true,
                value: None,
                partial,
                reason: format!("gamma_b grows like b^{top} with {top} > 1"),
                heuristic: false,
            });
        }
        let reason = if m.densities().is_empty() {
            "gamma_b grows linearly (atoms only)".to_string()
        } else {
            format!("gamma_b grows at most like b log b (index {top} <= 1)")
        };
        return Ok(Certificate {
            converges: false,
            value: None,
            partial,
            reason,
            heuristic: false,
        });
    }
    // No index: compare successive dyadic blocks of the series.
    let mut blocks = Vec::new();
    let mut lo = 2;
    while 2 * lo <= b_max {
        blocks.push((lo..2 * lo).map(|b| 1.0 / table.gamma_b(b)).sum::<f64>());
        lo *= 2;
    }
    let ratios: Vec<f64> = blocks.windows(2).map(|w| w[1] / w[0]).collect();
    let converges = ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|r| *r < 0.9);
    Ok(Certificate {
        converges,
        value: None,
        partial,
        reason: format!("dyadic block ratios {ratios:?}"),
        heuristic: true,
    })
}

fn psi_integral(m: &LambdaMeasure) -> Result<Certificate> {
    let outcome = integrate_tail(|q| 1.0 / psi(m, q).unwrap_or(f64::NAN), 1.0, IMPROPER_TOL)?;
    Ok(match outcome {
        TailOutcome::Converged(r) => Certificate {
            converges: true,
            value: Some(r.value),
            partial: r.value,
            reason: "dyadic pieces of ∫ dq/psi shrink geometrically".into(),
            heuristic: true,
        },
        TailOutcome::Diverges { partial, doublings } => Certificate {
            converges: false,
            value: None,
            partial,
            reason: format!("partial integrals still growing after {doublings} doublings"),
            heuristic: true,
        },
    })
}

/// Coming down from infinity, decided by both the `sum 1/gamma_b` series
/// and the `∫ dq/psi` integral; disagreement is reported as an error.
pub fn cdi_test(m: &LambdaMeasure, b_max: usize) -> Result<CdiVerdict> {
    if m.mass_at_one() > 0.0 {
        return Err(invalid("the criteria assume Lambda({1}) = 0"));
    }
    let gamma_series = gamma_series(m, b_max)?;
    let psi_integral = psi_integral(m)?;
    if gamma_series.converges != psi_integral.converges {
        return Err(Error::CriteriaDisagree(format!(
            "series: {} ({}); integral: {} ({})",
            gamma_series.converges,
            gamma_series.reason,
            psi_integral.converges,
            psi_integral.reason
        )));
    }
    Ok(CdiVerdict {
        comes_down: gamma_series.converges,
        gamma_series,
        psi_integral,
    })
}

/// `∫_v^∞ dq/psi(q)` for a measure that comes down from infinity.
pub fn inverse_psi_tail(m: &LambdaMeasure, v: f64, tol: f64) -> Result<f64> {
    inverse_tail_of(&|q| psi(m, q).unwrap_or(f64::NAN), v, tol)
}

/// `∫_v^∞ dq/psi(q)` for any mechanism whose reciprocal is integrable at infinity.
pub(crate) fn inverse_tail_of<F: Fn(f64) -> f64>(psi: &F, v: f64, tol: f64) -> Result<f64> {
    let out = integrate_tail_with_hint(|q| 1.0 / psi(q), v, tol, TailHint::Converges)?;
    out.value()
        .ok_or_else(|| Error::Numerical("tail integral did not converge".into()))
}

/// Speed of coming down: the `v` with `∫_v^∞ dq/psi(q) = t`.
pub fn speed_v(m: &LambdaMeasure, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t must be positive"));
    }
    let verdict = cdi_test(m, 1 << 12)?;
    if !verdict.comes_down {
        return Err(invalid(format!(
            "{} does not come down from infinity; v(t) is undefined",
            m.label()
        )));
    }
    speed_v_unchecked(m, t)
}

/// [`speed_v`] without the criteria check, for callers that have already
/// established coming down from infinity.
pub fn speed_v_unchecked(m: &LambdaMeasure, t: f64) -> Result<f64> {
    speed_of(&|q| psi(m, q).unwrap_or(f64::NAN), t)
}

/// Solves `∫_v^∞ dq/psi(q) = t` for `v`, given a `psi` with integrable reciprocal.
pub(crate) fn speed_of<F: Fn(f64) -> f64>(psi: &F, t: f64) -> Result<f64> {
    let quad_tol = 1e-13 * t.max(1e-3);
    let g = |v: f64| inverse_tail_of(psi, v, quad_tol).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (1.0, 1.0);
    while g(lo) < t {
        lo /= 4.0;
        if lo < 1e-12 {
            return Err(Error::Numerical("could not bracket v(t) from below".into()));
        }
    }
    while g(hi) > t {
        hi *= 4.0;
        if hi > 1e15 {
            return Err(Error::Numerical("could not bracket v(t) from above".into()));
        }
    }
    bisect_decreasing(g, t, lo, hi, 1e-11 * t)
}
