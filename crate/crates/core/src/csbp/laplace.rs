use serde::{Deserialize, Serialize};

use super::mechanism::{BranchingMechanism, GreyHint, MechanismKind};
use crate::lambda::{cdi_test, speed_of, speed_v_unchecked, Certificate};
use crate::numerics::{
    bisect_decreasing, bisect_increasing, integrate, integrate_tail, QuadOptions, TailOutcome,
    IMPROPER_TOL,
};
use crate::{invalid, Error, Result};

/// Default tolerance of [`u_t_lambda`], relative to `u`.
pub const U_TOL: f64 = 1e-9;

const MAX_STEPS: usize = 200_000;
/// `|log u|` beyond which `u_t(lambda)` is reported as under- or overflowing.
const LOG_RANGE: f64 = 700.0;

/// Which computation produced `u_t(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum URoute {
    Ode,
    Integral,
}

fn check_args(t: f64, lam: f64, tol: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t must be finite and >= 0"));
    }
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(invalid("lambda must be finite and >= 0"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("tol must lie in (0, 1)"));
    }
    Ok(())
}

/// Trivial cases shared by both routes: fixed points and `t = 0`.
fn trivial(psi: &BranchingMechanism, t: f64, lam: f64) -> Result<Option<f64>> {
    if lam == 0.0 || t == 0.0 || psi.eval(lam)? == 0.0 {
        return Ok(Some(lam));
    }
    Ok(None)
}

/// `u_t(lambda)`, solving `du/dt = -psi(u)`, `u_0 = lambda`.
///
/// The ODE is integrated in `w = log u`; if the adaptive scheme stalls the
/// implicit-integral route takes over.
pub fn u_t_lambda(psi: &BranchingMechanism, t: f64, lam: f64) -> Result<f64> {
    u_t_lambda_with(psi, t, lam, U_TOL).map(|(u, _)| u)
}

/// [`u_t_lambda`] with an explicit tolerance, reporting the route used.
pub fn u_t_lambda_with(
    psi: &BranchingMechanism,
    t: f64,
    lam: f64,
    tol: f64,
) -> Result<(f64, URoute)> {
    match u_t_ode(psi, t, lam, tol) {
        Ok(u) => Ok((u, URoute::Ode)),
        Err(Error::NoConvergence { .. }) => {
            u_t_integral(psi, t, lam, tol).map(|u| (u, URoute::Integral))
        }
        Err(e) => Err(e),
    }
}

// Dormand-Prince 5(4) tableau; the stage times are not needed for an autonomous ODE.
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// Fifth- minus fourth-order weights; the seventh stage is the FSAL derivative.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// ODE route: adaptive Dormand-Prince on `dw/dt = -psi(e^w) e^{-w}`.
///
/// Returns [`Error::NoConvergence`] when the step budget runs out.
pub fn u_t_ode(psi: &BranchingMechanism, t: f64, lam: f64, tol: f64) -> Result<f64> {
    check_args(t, lam, tol)?;
    if let Some(u) = trivial(psi, t, lam)? {
        return Ok(u);
    }
    let rhs = |w: f64| -> Result<f64> {
        if w.abs() > LOG_RANGE {
            return Err(Error::Numerical(format!(
                "u_t(lambda) left the representable range (log u = {w})"
            )));
        }
        let u = w.exp();
        Ok(-psi.eval(u)? / u)
    };
    // local error budget per unit time, in log u
    let step_tol = 0.05 * tol;
    let mut w = lam.ln();
    let mut s = 0.0;
    let mut k1 = rhs(w)?;
    let mut h = (0.01 * w.abs().max(1.0) / k1.abs().max(1e-300)).min(t);
    for _ in 0..MAX_STEPS {
        if s >= t {
            return Ok(w.exp());
        }
        h = h.min(t - s);
        let mut k = [k1, 0.0, 0.0, 0.0, 0.0, 0.0];
        for i in 1..6 {
            let wi = w + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
            k[i] = rhs(wi)?;
        }
        let w5 = w + h * (0..6).map(|j| B[j] * k[j]).sum::<f64>();
        let k7 = rhs(w5)?;
        let err = (h * ((0..6).map(|j| E[j] * k[j]).sum::<f64>() + E[6] * k7)).abs();
        let allowed = step_tol * h.max(1e-3 * t) / t;
        if err <= allowed {
            s += h;
            w = w5;
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * t.max(s) {
            break;
        }
    }
    Err(Error::NoConvergence {
        partial: w.exp(),
        error: f64::NAN,
    })
}

/// Implicit-integral route: the `u` with `∫_u^lambda dq/psi(q) = t`,
/// integrated in `log q`.
pub fn u_t_integral(psi: &BranchingMechanism, t: f64, lam: f64, tol: f64) -> Result<f64> {
    check_args(t, lam, tol)?;
    if let Some(u) = trivial(psi, t, lam)? {
        return Ok(u);
    }
    let top = lam.ln();
    let decreasing = psi.eval(lam)? > 0.0;
    let quad = QuadOptions {
        abs_tol: 1e-3 * tol * t,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    // time to travel from log lambda to s; infinite past a root of psi
    let travel = |s: f64| -> f64 {
        let Ok(p) = psi.eval(s.exp()) else {
            return f64::NAN;
        };
        if (decreasing && p <= 0.0) || (!decreasing && p >= 0.0) {
            return f64::INFINITY;
        }
        let f = |r: f64| {
            let q = r.exp();
            q / psi.eval(q).unwrap_or(f64::NAN)
        };
        let (a, b) = if s < top { (s, top) } else { (top, s) };
        match integrate(f, a, b, quad) {
            Ok(r) => r.value.abs(),
            Err(_) => f64::NAN,
        }
    };
    let dir = if decreasing { -1.0 } else { 1.0 };
    let mut gap = 1.0;
    let far = loop {
        let s = top + dir * gap;
        let g = travel(s);
        if g.is_nan() {
            return Err(Error::Numerical(format!(
                "travel time not computable at log u = {s}"
            )));
        }
        if g >= t {
            break s;
        }
        gap *= 2.0;
        if s.abs() > LOG_RANGE {
            return Err(Error::Numerical(format!(
                "u_t(lambda) leaves the representable range (t = {t}, lambda = {lam})"
            )));
        }
    };
    let value_tol = 0.1 * tol * t.min(1.0);
    let s = if decreasing {
        bisect_decreasing(travel, t, far, top, value_tol)?
    } else {
        bisect_increasing(travel, t, top, far, value_tol)?
    };
    Ok(s.exp())
}

/// Grey's criterion: extinction in finite time iff `∫_1^∞ dq/psi(q) < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreyVerdict {
    pub extinct: bool,
    pub certificate: Certificate,
}

fn analytic(extinct: bool, value: Option<f64>, reason: impl Into<String>) -> GreyVerdict {
    GreyVerdict {
        extinct,
        certificate: Certificate {
            converges: extinct,
            value,
            partial: value.unwrap_or(f64::NAN),
            reason: reason.into(),
            heuristic: false,
        },
    }
}

pub fn grey_test(psi: &BranchingMechanism) -> Result<GreyVerdict> {
    match psi.kind() {
        MechanismKind::Feller { scale } => Ok(analytic(
            true,
            Some(2.0 / scale),
            "∫_1^∞ 2/(scale q^2) dq = 2/scale",
        )),
        MechanismKind::Neveu => Ok(analytic(false, None, "∫ dq/(q log q) = log log q diverges")),
        MechanismKind::FromLambda(m) => {
            if m.mass_at_one() == 0.0 {
                let v = cdi_test(m, 1 << 12)?;
                return Ok(GreyVerdict {
                    extinct: v.comes_down,
                    certificate: v.psi_integral,
                });
            }
            // the series criterion needs Lambda({1}) = 0; decide on the integral alone
            let outcome =
                integrate_tail(|q| 1.0 / psi.eval(q).unwrap_or(f64::NAN), 1.0, IMPROPER_TOL)?;
            Ok(match outcome {
                TailOutcome::Converged(r) => GreyVerdict {
                    extinct: true,
                    certificate: Certificate {
                        converges: true,
                        value: Some(r.value),
                        partial: r.value,
                        reason: "dyadic pieces of ∫ dq/psi shrink geometrically".into(),
                        heuristic: true,
                    },
                },
                TailOutcome::Diverges { partial, doublings } => GreyVerdict {
                    extinct: false,
                    certificate: Certificate {
                        converges: false,
                        value: None,
                        partial,
                        reason: format!(
                            "partial integrals still growing after {doublings} doublings"
                        ),
                        heuristic: true,
                    },
                },
            })
        }
        MechanismKind::Custom { label, hint, .. } => match hint {
            Some(GreyHint::Extinct) => Ok(analytic(true, None, "caller asserts ∫^∞ dq/psi < ∞")),
            Some(GreyHint::Persists) => Ok(analytic(false, None, "caller asserts ∫^∞ dq/psi = ∞")),
            Some(GreyHint::GrowthIndex(i)) if *i > 1.0 => Ok(analytic(
                true,
                None,
                format!("psi grows like q^{i} with {i} > 1"),
            )),
            Some(GreyHint::GrowthIndex(i)) if *i < 1.0 => Ok(analytic(
                false,
                None,
                format!("psi grows like q^{i} with {i} < 1"),
            )),
            _ => Err(Error::NeedsHint(format!(
                "Grey's criterion for {label} depends on slowly varying factors at infinity"
            ))),
        },
    }
}

/// `v(t) = lim_{lambda→∞} u_t(lambda)`, the `v` with `∫_v^∞ dq/psi = t`.
pub fn csbp_speed(psi: &BranchingMechanism, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t must be positive"));
    }
    if !grey_test(psi)?.extinct {
        return Err(invalid(format!(
            "{} fails Grey's criterion; the process does not die out in finite time",
            psi.label()
        )));
    }
    match psi.kind() {
        MechanismKind::Feller { scale } => Ok(2.0 / (scale * t)),
        MechanismKind::FromLambda(m) => speed_v_unchecked(m, t),
        _ => speed_of(&|q| psi.eval(q).unwrap_or(f64::NAN), t),
    }
}

/// `P(Z_t = 0 | Z_0 = z) = exp(-z v(t))`.
pub fn extinction_prob(psi: &BranchingMechanism, z: f64, t: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid("z must be positive"));
    }
    Ok((-z * csbp_speed(psi, t)?).exp())
}

/// `P(Z_t > 0 | Z_0 = z) = 1 - exp(-z v(t))`.
pub fn survival_prob(psi: &BranchingMechanism, z: f64, t: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid("z must be positive"));
    }
    Ok(-(-z * csbp_speed(psi, t)?).exp_m1())
}
