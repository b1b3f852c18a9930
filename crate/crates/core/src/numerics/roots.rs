use crate::{Error, Result};

const MAX_ITER: usize = 400;

/// Finds `x` in `[lo, hi]` with `g(x) = target` for a monotone decreasing `g`.
///
/// Requires `g(lo) >= target >= g(hi)`. Brackets spanning several octaves of
/// positive numbers are split geometrically.
pub fn bisect_decreasing<G: FnMut(f64) -> f64>(
    mut g: G,
    target: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let g_lo = g(lo);
    let g_hi = g(hi);
    if !(g_lo >= target && target >= g_hi) {
        return Err(Error::Bracket { g_lo, g_hi, target });
    }
    if (g_lo - target).abs() <= tol {
        return Ok(lo);
    }
    if (g_hi - target).abs() <= tol {
        return Ok(hi);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        mid = if lo > 0.0 && hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if (gm - target).abs() <= tol {
            return Ok(mid);
        }
        if gm > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Mirror of [`bisect_decreasing`] for increasing `g`.
pub fn bisect_increasing<G: FnMut(f64) -> f64>(
    mut g: G,
    target: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    bisect_decreasing(|x| -g(x), -target, lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_tail;

    #[test]
    fn reciprocal() {
        let x = bisect_decreasing(|x| 1.0 / x, 2.0, 0.1, 10.0, 1e-12).unwrap();
        assert!((x - 0.5).abs() < 1e-10);
    }

    #[test]
    fn exponential() {
        let x = bisect_decreasing(|x: f64| (-x).exp(), 0.5, 0.0, 5.0, 1e-12).unwrap();
        assert!((x - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn composed_with_tail_integral() {
        let g = |x: f64| {
            integrate_tail(|q| 2.0 / (q * q), x, 1e-10)
                .unwrap()
                .value()
                .unwrap()
        };
        let x = bisect_decreasing(g, 0.1, 1.0, 1000.0, 1e-9).unwrap();
        assert!((x - 20.0).abs() < 1e-5, "{x}");
    }

    #[test]
    fn bracket_violation() {
        assert!(matches!(
            bisect_decreasing(|x| 1.0 / x, 100.0, 0.1, 10.0, 1e-9),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn increasing_variant() {
        let x = bisect_increasing(|x| x * x, 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-10);
    }
}
