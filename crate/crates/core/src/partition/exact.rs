use super::{AlleleSpectrum, Partition};
use crate::numerics::special::{ln_factorial, ln_gamma, ln_rising};
use crate::{invalid, Result};

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("theta must be positive, got {theta}")))
    }
}

/// Ewens sampling formula:
/// `P(pi) = theta^k prod (n_i - 1)! / (theta (theta+1) ... (theta+n-1))`.
pub fn ewens_partition_prob(pi: &Partition, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let k = pi.k() as f64;
    let ln_p = k * theta.ln()
        + pi.block_sizes()
            .map(|s| ln_factorial(s as u64 - 1))
            .sum::<f64>()
        - ln_rising(theta, pi.n() as u64);
    Ok(ln_p.exp())
}

/// Probability of an allelic spectrum under `PD(0, theta)`:
/// `n!/(theta ... (theta+n-1)) prod (theta/j)^{a_j} / a_j!`.
pub fn ewens_spectrum_prob(a: &AlleleSpectrum, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let mut ln_p = ln_factorial(a.n as u64) - ln_rising(theta, a.n as u64);
    for (j0, &aj) in a.a.iter().enumerate() {
        if aj > 0 {
            let j = (j0 + 1) as f64;
            ln_p += aj as f64 * (theta / j).ln() - ln_factorial(aj);
        }
    }
    Ok(ln_p.exp())
}

/// Partition probability under `PD(alpha, 0)`:
/// `alpha^{k-1} (k-1)!/(n-1)! prod_i prod_{j=1}^{n_i-1} (j - alpha)`.
pub fn pd_alpha_partition_prob(pi: &Partition, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = pi.n() as u64;
    if n == 0 {
        return Ok(1.0);
    }
    let k = pi.k() as u64;
    let ln_p = (k - 1) as f64 * alpha.ln() + ln_factorial(k - 1) - ln_factorial(n - 1)
        + pi.block_sizes()
            .map(|s| ln_rising(1.0 - alpha, s as u64 - 1))
            .sum::<f64>();
    Ok(ln_p.exp())
}

/// `E(K_n) = sum_{i=1}^n theta/(theta + i - 1)` under `PD(0, theta)`.
pub fn ewens_expected_blocks(theta: f64, n: usize) -> f64 {
    (1..=n).map(|i| theta / (theta + i as f64 - 1.0)).sum()
}

/// `E(K_n) = Gamma(n + alpha)/(Gamma(n) Gamma(1 + alpha))` under `PD(alpha, 0)`.
pub fn pd_alpha_expected_blocks(alpha: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    (ln_gamma(n + alpha) - ln_gamma(n) - ln_gamma(1.0 + alpha)).exp()
}

/// Law of the block count `K_n` under `PD(0, theta)`; entry `k` is `P(K_n = k)`.
pub fn ewens_block_count_law(theta: f64, n: usize) -> Result<Vec<f64>> {
    check_theta(theta)?;
    let mut p = vec![0.0; n + 1];
    if n == 0 {
        p[0] = 1.0;
        return Ok(p);
    }
    p[1] = 1.0;
    for m in 2..=n {
        let denom = theta + m as f64 - 1.0;
        let stay = (m as f64 - 1.0) / denom;
        let new = theta / denom;
        for k in (1..=m).rev() {
            p[k] = p[k] * stay + p[k - 1] * new;
        }
    }
    Ok(p)
}
