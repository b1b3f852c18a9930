use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            max_intervals: 4000,
        }
    }
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Globally adaptive Gauss-Kronrod quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("integration bounds must be finite"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
        });
    }
    let (value, error) = qk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut intervals = 1;
    loop {
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if intervals >= opts.max_intervals {
            return Err(Error::NoConvergence {
                partial: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // segment at floating-point resolution; nothing left to refine
            heap.push(worst);
            if total_err <= 1e3 * target {
                break;
            }
            return Err(Error::NoConvergence {
                partial: total,
                error: total_err,
            });
        }
        let (v1, e1) = qk15(&f, worst.a, mid);
        let (v2, e2) = qk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        intervals += 1;
    }
    // recompute to shed accumulated cancellation in the running sums
    let (value, err) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult {
        value,
        abs_error_estimate: err,
    })
}

fn power_map(exponent: f64) -> Result<f64> {
    if exponent <= -1.0 {
        return Err(invalid(format!(
            "endpoint exponent {exponent} is not integrable"
        )));
    }
    Ok(if exponent < 0.0 {
        1.0 / (1.0 + exponent)
    } else {
        1.0
    })
}

/// Integrates `f` over `[a, b]` where `f(x)` may behave like `(x-a)^left_exp`
/// near `a` and `(b-x)^right_exp` near `b`. Singular endpoints are removed
/// with the substitution `x - a = (b - a) u^m`, `m = 1/(1 + exp)`.
pub fn integrate_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    left_exp: f64,
    right_exp: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    integrate_singular_split(|x, _| f(x), a, b, left_exp, right_exp, opts)
}

/// As [`integrate_singular`], but `f` also receives `b - x` computed without
/// cancellation, which matters when `f` is singular at `b`.
pub fn integrate_singular_split<F: Fn(f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    left_exp: f64,
    right_exp: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    let ml = power_map(left_exp)?;
    let mr = power_map(right_exp)?;
    let width = b - a;
    if ml == 1.0 && mr == 1.0 {
        return integrate(|x| f(x, b - x), a, b, opts);
    }
    let half_opts = QuadOptions {
        abs_tol: 0.5 * opts.abs_tol,
        ..opts
    };
    let left = |u: f64| {
        // x = a + (w/2) u^ml on u in (0,1)
        let off = 0.5 * width * u.powf(ml);
        let jac = 0.5 * width * ml * u.powf(ml - 1.0);
        if jac == 0.0 {
            0.0
        } else {
            f(a + off, width - off) * jac
        }
    };
    let right = |u: f64| {
        let off = 0.5 * width * u.powf(mr);
        let jac = 0.5 * width * mr * u.powf(mr - 1.0);
        if jac == 0.0 || off == 0.0 {
            0.0
        } else {
            f(b - off, off) * jac
        }
    };
    let l = integrate(left, 0.0, 1.0, half_opts)?;
    let r = integrate(right, 0.0, 1.0, half_opts)?;
    Ok(QuadResult {
        value: l.value + r.value,
        abs_error_estimate: l.abs_error_estimate + r.abs_error_estimate,
    })
}

/// Integral of `f` over `(0, 1)` with a declared power-law behaviour
/// `x^left_singularity_exponent` at the left endpoint.
pub fn integrate_unit<F: Fn(f64) -> f64>(
    f: F,
    left_singularity_exponent: f64,
    tol: f64,
) -> Result<QuadResult> {
    if tol <= 0.0 {
        return Err(invalid("tol must be positive"));
    }
    integrate_singular(
        f,
        0.0,
        1.0,
        left_singularity_exponent,
        0.0,
        QuadOptions::new(tol),
    )
}

/// Outcome of an integral over a half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailOutcome {
    Converged(QuadResult),
    Diverges { partial: f64, doublings: usize },
}

impl TailOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            TailOutcome::Converged(r) => Some(r.value),
            TailOutcome::Diverges { .. } => None,
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, TailOutcome::Converged(_))
    }
}

/// Analytic knowledge about an improper integral, supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TailHint {
    /// Decide numerically from the doubling sequence.
    #[default]
    Numeric,
    Converges,
    Diverges,
}

const MAX_DOUBLINGS: usize = 60;

/// `∫_a^∞ f`, for `f` eventually monotone decreasing, with a numerical
/// divergence verdict.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<TailOutcome> {
    integrate_tail_with_hint(f, a, tol, TailHint::Numeric)
}

/// As [`integrate_tail`], but a `Diverges` hint short-circuits and a
/// `Converges` hint keeps extrapolating past the doubling cutoff.
///
/// The half-line is cut at `a + s(2^k - 1)`, `s = max(|a|, 1)`. Pieces that
/// shrink geometrically are extrapolated (Aitken); convergence is declared
/// once the extrapolated sums agree within `tol`.
pub fn integrate_tail_with_hint<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tol: f64,
    hint: TailHint,
) -> Result<TailOutcome> {
    if tol <= 0.0 {
        return Err(invalid("tol must be positive"));
    }
    if !a.is_finite() {
        return Err(invalid("lower limit must be finite"));
    }
    let scale = a.abs().max(1.0);
    let piece_opts = QuadOptions {
        abs_tol: 0.1 * tol,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    if hint == TailHint::Diverges {
        let first = integrate(&f, a, a + scale, piece_opts)?;
        return Ok(TailOutcome::Diverges {
            partial: first.value,
            doublings: 0,
        });
    }
    let max_doublings = if hint == TailHint::Converges {
        4 * MAX_DOUBLINGS
    } else {
        MAX_DOUBLINGS
    };
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut prev_piece: Option<f64> = None;
    let mut prev_extrap: Option<f64> = None;
    let mut lo = a;
    for k in 0..max_doublings {
        let hi = a + scale * ((2.0f64).powi(k as i32 + 1) - 1.0);
        let piece = integrate(&f, lo, hi, piece_opts)?;
        sum += piece.value;
        err += piece.abs_error_estimate;
        lo = hi;
        if let Some(prev) = prev_piece {
            if piece.value.abs() <= 0.1 * tol && piece.value.abs() <= prev.abs() && k >= 3 {
                return Ok(TailOutcome::Converged(QuadResult {
                    value: sum,
                    abs_error_estimate: err + piece.value.abs(),
                }));
            }
            let r = if prev != 0.0 { piece.value / prev } else { 0.0 };
            if (0.0..0.99).contains(&r) {
                let extrap = sum + piece.value * r / (1.0 - r);
                if let Some(pe) = prev_extrap {
                    let change = (extrap - pe).abs();
                    if k >= 6 && change <= tol {
                        return Ok(TailOutcome::Converged(QuadResult {
                            value: extrap,
                            abs_error_estimate: err + change,
                        }));
                    }
                }
                prev_extrap = Some(extrap);
            } else {
                prev_extrap = None;
            }
        }
        prev_piece = Some(piece.value);
    }
    if hint == TailHint::Converges {
        return Err(Error::NoConvergence {
            partial: sum,
            error: err,
        });
    }
    Ok(TailOutcome::Diverges {
        partial: sum,
        doublings: max_doublings,
    })
}
