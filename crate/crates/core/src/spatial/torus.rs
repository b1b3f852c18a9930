use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::numerics::special::ln_factorial;
use crate::numerics::{integrate, QuadOptions};
use crate::{invalid, Result};

/// Largest torus (in sites) the simulators will allocate.
pub const MAX_SITES: usize = 1 << 26;

/// `d`-dimensional discrete torus of side `l`, walked at rate `rho` per particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusConfig {
    d: usize,
    l: usize,
    rho: f64,
}

impl TorusConfig {
    pub fn new(d: usize, l: usize, rho: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(invalid(format!("dimension must be 1, 2 or 3, got {d}")));
        }
        if l < 2 {
            return Err(invalid("side length must be at least 2"));
        }
        if l.checked_pow(d as u32).is_none_or(|s| s > MAX_SITES) {
            return Err(invalid(format!(
                "a torus of side {l} in dimension {d} exceeds {MAX_SITES} sites"
            )));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(invalid("walk rate must be finite and >= 0"));
        }
        Ok(Self { d, l, rho })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Coordinates of a site index, least significant first.
    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut s = site;
        (0..self.d)
            .map(|_| {
                let c = s % self.l;
                s /= self.l;
                c
            })
            .collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, c| acc * self.l + c % self.l)
    }

    /// Neighbour of `site` in direction `dir`: axis `dir / 2`, sign by parity.
    pub fn neighbour(&self, site: usize, dir: usize) -> usize {
        let stride = self.l.pow((dir / 2) as u32);
        let c = (site / stride) % self.l;
        let moved = if dir.is_multiple_of(2) {
            (c + 1) % self.l
        } else {
            (c + self.l - 1) % self.l
        };
        site - c * stride + moved * stride
    }
}

/// `e^{-s} I_0(s)`.
fn scaled_bessel_i0(s: f64) -> f64 {
    if s < 30.0 {
        let ln_half = (s / 2.0).ln();
        let mut sum = 0.0;
        let mut k = 0u64;
        loop {
            let term = if k == 0 {
                (-s).exp()
            } else {
                (2.0 * k as f64 * ln_half - 2.0 * ln_factorial(k) - s).exp()
            };
            sum += term;
            if k as f64 > s / 2.0 && term < 1e-17 * sum {
                return sum;
            }
            k += 1;
        }
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..40 {
        let jf = j as f64;
        term *= (2.0 * jf - 1.0).powi(2) / (8.0 * jf * s);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * PI * s).sqrt()
}

fn green_at_origin(d: usize) -> Result<f64> {
    // G = ∫_0^∞ P(X_t = 0) dt = d ∫_0^∞ (e^{-s} I_0(s))^d ds, with an
    // asymptotic tail beyond `cut`
    let cut = 1e4;
    let opts = QuadOptions::new(1e-14);
    let f = |s: f64| scaled_bessel_i0(s).powi(d as i32);
    let mut total = integrate(f, 0.0, 1.0, opts)?.value;
    let mut a = 1.0;
    while a < cut {
        total += integrate(f, a, 2.0 * a, opts)?.value;
        a *= 2.0;
    }
    let h = d as f64 / 2.0;
    let tail =
        (2.0 * PI).powf(-h) * (a.powf(1.0 - h) / (h - 1.0) + d as f64 / 8.0 * a.powf(-h) / h);
    Ok(d as f64 * (total + tail))
}

static GAMMA_CACHE: Mutex<BTreeMap<usize, f64>> = Mutex::new(BTreeMap::new());

/// Probability that simple random walk on `Z^d` never returns to its start:
/// 0 for `d <= 2`, otherwise `1/G(0)` from the lattice Green function.
pub fn gamma_d(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if d <= 2 {
        return Ok(0.0);
    }
    let mut cache = GAMMA_CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(g) = cache.get(&d) {
        return Ok(*g);
    }
    let g = 1.0 / green_at_origin(d)?;
    cache.insert(d, g);
    Ok(g)
}

/// Asymptotic density `g_d(t)` of coalescing rate-1 random walks on `Z^d`
/// started from full occupancy.
pub fn density_asymptote(d: usize, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t must be positive"));
    }
    Ok(match d {
        1 => 1.0 / (PI * t).sqrt(),
        2 => t.ln() / (PI * t),
        _ => 1.0 / (gamma_d(d)? * t),
    })
}

/// Iterated logarithm: the number of times `ln` must be applied to `x`
/// before the result drops below 1.
pub fn log_star(x: f64) -> u32 {
    let mut x = x;
    let mut m = 0;
    loop {
        x = x.ln();
        m += 1;
        if x.is_nan() || x < 1.0 {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::ln_binomial;
    use approx::assert_relative_eq;

    #[test]
    fn log_star_examples() {
        assert_eq!(log_star(1e78), 4);
        assert_eq!(log_star(1.0), 1);
        assert_eq!(
            log_star(std::f64::consts::E.powf(std::f64::consts::E) + 1.0),
            3
        );
        assert_eq!(log_star(1e7), 4);
        assert_eq!(log_star(3e6), 3);
    }

    #[test]
    fn gamma_3_matches_return_probability_sum() {
        // independent route: sum P(S_{2n} = 0) for the discrete walk, with
        // the local-limit tail 2 (3/(4 pi n))^{3/2}
        let cap = 400usize;
        let mut g = 1.0;
        for n in 1..=cap {
            let mut s = 0.0;
            for j in 0..=n {
                for k in 0..=n - j {
                    let l = n - j - k;
                    let ln_multi = ln_factorial(n as u64)
                        - ln_factorial(j as u64)
                        - ln_factorial(k as u64)
                        - ln_factorial(l as u64);
                    s += (2.0 * ln_multi - 2.0 * n as f64 * 3f64.ln()).exp();
                }
            }
            g += s * (ln_binomial(2 * n as u64, n as u64) - 2.0 * n as f64 * 2f64.ln()).exp();
        }
        let c = 2.0 * (3.0 / (4.0 * PI)).powf(1.5);
        let m = cap as f64 + 0.5;
        g += c * 2.0 / m.sqrt();
        let gamma = gamma_d(3).unwrap();
        assert!((gamma - 1.0 / g).abs() < 2e-4, "{gamma} vs {}", 1.0 / g);
        assert!((gamma - 0.6595).abs() < 1e-4);
        assert_eq!(gamma_d(2).unwrap(), 0.0);
        assert!(gamma_d(4).unwrap() > gamma);
    }

    #[test]
    fn bessel_reference_values() {
        // e^{-s} I_0(s) to 30 digits from an arbitrary-precision library
        for (s, want) in [
            (0.5, 0.645035270449150068107996629746),
            (5.0, 0.183540812609328353073650751837),
            (30.0, 0.0731459464822372939289234180541),
            (1000.0, 0.0126172404558912565857161312899),
        ] {
            assert_relative_eq!(scaled_bessel_i0(s), want, max_relative = 1e-13);
        }
        assert_relative_eq!(scaled_bessel_i0(0.0), 1.0);
        assert_relative_eq!(
            scaled_bessel_i0(30.0 - 1e-12),
            scaled_bessel_i0(30.0),
            max_relative = 1e-13
        );
    }

    #[test]
    fn torus_geometry() {
        let cfg = TorusConfig::new(3, 5, 1.0).unwrap();
        assert_eq!(cfg.sites(), 125);
        let s = cfg.site(&[4, 0, 2]);
        assert_eq!(cfg.coords(s), vec![4, 0, 2]);
        assert_eq!(cfg.coords(cfg.neighbour(s, 0)), vec![0, 0, 2]);
        assert_eq!(cfg.coords(cfg.neighbour(s, 3)), vec![4, 4, 2]);
        assert_eq!(cfg.coords(cfg.neighbour(s, 5)), vec![4, 0, 1]);
        for dir in 0..6 {
            assert_eq!(cfg.neighbour(cfg.neighbour(s, dir), dir ^ 1), s);
        }
        let ring = TorusConfig::new(1, 2, 1.0).unwrap();
        assert_eq!(ring.neighbour(0, 0), 1);
        assert_eq!(ring.neighbour(0, 1), 1);
        assert!(TorusConfig::new(4, 3, 1.0).is_err());
        assert!(TorusConfig::new(2, 1, 1.0).is_err());
        assert!(TorusConfig::new(3, 1000, 1.0).is_err());
    }
}
