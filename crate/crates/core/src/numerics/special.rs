//! Special functions and combinatorial helpers.

pub use statrs::function::beta::{beta_reg, ln_beta};
pub use statrs::function::gamma::{gamma, ln_gamma};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c
}

/// `h_n = 1 + 1/2 + ... + 1/n`.
pub fn harmonic(n: u64) -> f64 {
    (1..=n).map(|j| 1.0 / j as f64).sum()
}

/// `ln(x (x+1) ... (x+m-1))`.
pub fn ln_rising(x: f64, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    ln_gamma(x + m as f64) - ln_gamma(x)
}

/// Exponential integral `E_1(x)`, `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    statrs::function::exponential::integral(x, 1).unwrap_or(f64::NAN)
}

/// `P(Binomial(b, p) >= 2)`, accurate when `b p` is small.
pub fn binomial_tail_ge2(b: u64, p: f64) -> f64 {
    if b < 2 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let bf = b as f64;
    if bf * p < 0.05 {
        // direct series over k >= 2
        let ratio = p / (1.0 - p);
        let mut term = binomial(b, 2) * p * p * ((bf - 2.0) * (-p).ln_1p()).exp();
        let mut sum = 0.0;
        let mut k = 2u64;
        while k <= b {
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            term *= (bf - k as f64) / (k as f64 + 1.0) * ratio;
            k += 1;
        }
        sum
    } else {
        let l = (-p).ln_1p();
        let p0 = (bf * l).exp();
        let p1 = bf * p * ((bf - 1.0) * l).exp();
        (1.0 - p0 - p1).max(0.0)
    }
}

/// `e^{-y} - 1 + y` without cancellation for small `y`.
pub fn exp_compensated(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        let y2 = y * y;
        y2 * (0.5 - y / 6.0 + y2 / 24.0 - y2 * y / 120.0 + y2 * y2 / 720.0)
    } else {
        (-y).exp_m1() + y
    }
}
