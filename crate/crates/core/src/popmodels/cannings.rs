use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};

use crate::numerics::special::gamma;
use crate::numerics::{integrate_singular, QuadOptions, RngStream};
use crate::{invalid, Error, Result};

/// `sum_{k > from} k^{-alpha}` for `alpha > 1`: a direct sum followed by an
/// Euler-Maclaurin tail.
fn zeta_tail(alpha: f64, from: u64) -> f64 {
    const DIRECT: u64 = 1000;
    let direct: f64 = (from + 1..=from + DIRECT)
        .map(|k| (k as f64).powf(-alpha))
        .sum();
    let l = (from + DIRECT + 1) as f64;
    let tail = l.powf(1.0 - alpha) / (alpha - 1.0)
        + 0.5 * l.powf(-alpha)
        + alpha * l.powf(-alpha - 1.0) / 12.0
        - alpha * (alpha + 1.0) * (alpha + 2.0) * l.powf(-alpha - 3.0) / 720.0;
    direct + tail
}

/// Offspring law of the supercritical Galton-Watson step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OffspringLaw {
    /// Every individual has exactly this many offspring.
    Constant(u64),
    /// With probability `w`, `floor(k0 U^{-1/alpha})` so that
    /// `P(X >= k) = c k^{-alpha}` for integers `k >= k0`; otherwise a
    /// two-point mass on `{lo, lo + 1}` (at most `k0`) that fixes the mean.
    HeavyTail {
        alpha: f64,
        c: f64,
        mu: f64,
        k0: u64,
        w: f64,
        lo: u64,
        p_hi: f64,
    },
}

impl OffspringLaw {
    pub fn heavy_tail(alpha: f64, c: f64, mu: f64) -> Result<Self> {
        if !(alpha > 1.0
            && c > 0.0
            && mu > 1.0
            && alpha.is_finite()
            && c.is_finite()
            && mu.is_finite())
        {
            return Err(invalid("need alpha > 1, C > 0 and mu > 1"));
        }
        for k0 in 1..=1_000_000u64 {
            let w = c * (k0 as f64).powf(-alpha);
            if w > 1.0 {
                continue;
            }
            let tail_mean = k0 as f64 + (k0 as f64).powf(alpha) * zeta_tail(alpha, k0);
            if w == 1.0 {
                if (tail_mean - mu).abs() < 1e-12 * mu {
                    return Ok(Self::HeavyTail {
                        alpha,
                        c,
                        mu,
                        k0,
                        w,
                        lo: 0,
                        p_hi: 0.0,
                    });
                }
                continue;
            }
            let r = (mu - w * tail_mean) / (1.0 - w);
            if r < 0.0 {
                continue;
            }
            let lo = r.floor() as u64;
            let p_hi = r - lo as f64;
            if lo + u64::from(p_hi > 0.0) <= k0 {
                return Ok(Self::HeavyTail {
                    alpha,
                    c,
                    mu,
                    k0,
                    w,
                    lo,
                    p_hi,
                });
            }
        }
        Err(invalid("no offspring law with this tail constant and mean"))
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Constant(x) => x as f64,
            Self::HeavyTail {
                alpha,
                k0,
                w,
                lo,
                p_hi,
                ..
            } => {
                let tail_mean = k0 as f64 + (k0 as f64).powf(alpha) * zeta_tail(alpha, k0);
                w * tail_mean + (1.0 - w) * (lo as f64 + p_hi)
            }
        }
    }

    /// `P(X >= k)`.
    pub fn tail_ge(&self, k: u64) -> f64 {
        match *self {
            Self::Constant(x) => f64::from(u8::from(x >= k)),
            Self::HeavyTail {
                alpha,
                k0,
                w,
                lo,
                p_hi,
                ..
            } => {
                let z = if k <= k0 {
                    1.0
                } else {
                    (k0 as f64 / k as f64).powf(alpha)
                };
                let point = if k <= lo {
                    1.0
                } else if k == lo + 1 {
                    p_hi
                } else {
                    0.0
                };
                w * z + (1.0 - w) * point
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            Self::Constant(x) => x,
            Self::HeavyTail {
                alpha,
                k0,
                w,
                lo,
                p_hi,
                ..
            } => {
                if rng.random::<f64>() < w {
                    let u = 1.0 - rng.random::<f64>();
                    let z = (k0 as f64 * u.powf(-1.0 / alpha)).floor();
                    if z >= 1e15 {
                        1e15 as u64
                    } else {
                        z as u64
                    }
                } else {
                    lo + u64::from(rng.random::<f64>() < p_hi)
                }
            }
        }
    }
}

/// Galton-Watson population of constant size `N`: every individual has an
/// i.i.d. number of offspring and `N` of them are kept uniformly at random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwSpec {
    n: usize,
    law: OffspringLaw,
}

/// Number of times a generation with fewer than `N` offspring is redrawn.
pub const GW_RETRY_CAP: usize = 1000;

impl GwSpec {
    pub fn new(n: usize, law: OffspringLaw) -> Result<Self> {
        if n < 2 {
            return Err(invalid("need N >= 2"));
        }
        Ok(Self { n, law })
    }

    pub fn heavy_tailed(n: usize, alpha: f64, c: f64, mu: f64) -> Result<Self> {
        Self::new(n, OffspringLaw::heavy_tail(alpha, c, mu)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    /// Asymptotic pair-coalescence probability
    /// `C alpha mu^{-alpha} B(2-alpha, alpha) N^{1-alpha}`, for `1 < alpha < 2`.
    pub fn c_n_prediction(&self) -> Option<f64> {
        match self.law {
            OffspringLaw::HeavyTail { alpha, c, mu, .. } if alpha < 2.0 => Some(
                c * alpha * mu.powf(-alpha) * beta_b(alpha) * (self.n as f64).powf(1.0 - alpha),
            ),
            _ => None,
        }
    }
}

/// `B(2 - alpha, alpha) = Gamma(alpha) Gamma(2 - alpha)`.
fn beta_b(alpha: f64) -> f64 {
    gamma(alpha) * gamma(2.0 - alpha)
}

/// Limit of `(N / c_N) P(nu_1 / N >= p)` for the heavy-tailed model:
/// `B(2-alpha, alpha)^{-1} ∫_p^1 y^{-1-alpha} (1-y)^{alpha-1} dy`.
pub fn gw_pmerger_prediction(alpha: f64, p: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0 && p > 0.0 && p < 1.0) {
        return Err(invalid("need 1 < alpha < 2 and 0 < p < 1"));
    }
    let v = integrate_singular(
        |y| y.powf(-1.0 - alpha) * (1.0 - y).powf(alpha - 1.0),
        p,
        1.0,
        0.0,
        alpha - 1.0,
        QuadOptions::new(1e-12),
    )?
    .value;
    Ok(v / beta_b(alpha))
}

/// Keeps `N` of the offspring uniformly at random and returns how many of
/// each parent's offspring survive. Small families are thinned one child at
/// a time (selection sampling); large ones take a hypergeometric draw.
fn select_survivors<R: Rng + ?Sized>(x: &[u64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    let mut remaining: u64 = x.iter().sum();
    let mut need = n;
    let mut nu = Vec::with_capacity(x.len());
    for &xi in x {
        let kept = if need == 0 {
            0
        } else if xi <= 16 {
            let mut kept = 0;
            for _ in 0..xi {
                if (rng.random::<f64>() * remaining as f64) < need as f64 {
                    kept += 1;
                    need -= 1;
                }
                remaining -= 1;
            }
            nu.push(kept);
            continue;
        } else {
            match Hypergeometric::new(remaining, xi, need) {
                Ok(h) => h.sample(rng),
                // the sampler rejects parameters where its start probability
                // underflows; draw the survivors one by one instead, in O(N)
                Err(_) => {
                    let (mut left, mut total, mut kept) = (xi, remaining, 0);
                    for _ in 0..need {
                        if (rng.random::<f64>() * total as f64) < left as f64 {
                            kept += 1;
                            left -= 1;
                        }
                        total -= 1;
                    }
                    kept
                }
            }
        };
        remaining -= xi;
        need -= kept;
        nu.push(kept);
    }
    Ok(nu)
}

/// One generation of the Galton-Watson model: an exchangeable offspring
/// vector summing to `N`. Generations with fewer than `N` offspring are
/// redrawn, at most [`GW_RETRY_CAP`] times; the retry count is returned.
pub fn gw_generation<R: Rng + ?Sized>(spec: &GwSpec, rng: &mut R) -> Result<(Vec<u64>, usize)> {
    let n = spec.n as u64;
    for retries in 0..=GW_RETRY_CAP {
        let x: Vec<u64> = (0..spec.n).map(|_| spec.law.sample(rng)).collect();
        let total = x.iter().try_fold(0u64, |acc, v| acc.checked_add(*v));
        match total {
            Some(s) if s >= n => return Ok((select_survivors(&x, n, rng)?, retries)),
            None => return Err(Error::Numerical("offspring total overflows".into())),
            _ => {}
        }
    }
    Err(invalid(format!(
        "fewer than N offspring in {} consecutive generations; the law looks subcritical",
        GW_RETRY_CAP + 1
    )))
}

pub type OffspringSampler = Arc<dyn Fn(&mut dyn RngCore) -> Vec<u64> + Send + Sync>;

/// Cannings population models by their offspring vector.
#[derive(Clone)]
pub enum CanningsSpec {
    /// Multinomial offspring: each child picks a uniform parent.
    WrightFisher {
        n: usize,
    },
    /// One uniform individual has two children, another one none.
    MoranStep {
        n: usize,
    },
    GaltonWatson(GwSpec),
    /// User-supplied offspring vectors, randomly relabelled on every draw.
    Custom {
        n: usize,
        sampler: OffspringSampler,
    },
}

impl std::fmt::Debug for CanningsSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::WrightFisher { n } => write!(f, "WrightFisher {{ n: {n} }}"),
            Self::MoranStep { n } => write!(f, "MoranStep {{ n: {n} }}"),
            Self::GaltonWatson(s) => write!(f, "GaltonWatson({s:?})"),
            Self::Custom { n, .. } => write!(f, "Custom {{ n: {n} }}"),
        }
    }
}

impl CanningsSpec {
    pub fn n(&self) -> usize {
        match self {
            Self::WrightFisher { n } | Self::MoranStep { n } | Self::Custom { n, .. } => *n,
            Self::GaltonWatson(s) => s.n,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<u64>> {
        let n = self.n();
        if n < 2 {
            return Err(invalid("need N >= 2"));
        }
        let nu = match self {
            Self::WrightFisher { .. } => {
                let mut nu = vec![0u64; n];
                for _ in 0..n {
                    nu[rng.random_range(0..n)] += 1;
                }
                nu
            }
            Self::MoranStep { .. } => {
                let mut nu = vec![1u64; n];
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                nu[a] = 2;
                nu[b] = 0;
                nu
            }
            Self::GaltonWatson(spec) => gw_generation(spec, rng)?.0,
            Self::Custom { sampler, .. } => {
                let mut nu = sampler(rng);
                nu.shuffle(rng);
                nu
            }
        };
        if nu.len() != n || nu.iter().sum::<u64>() != n as u64 {
            return Err(invalid("offspring vector must have N entries summing to N"));
        }
        Ok(nu)
    }
}

/// Monte Carlo estimates from independent generations of a Cannings model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanningsDiagnostics {
    pub n: usize,
    pub generations: usize,
    /// `c_N = E(nu_1 (nu_1 - 1)) / (N - 1)`.
    pub c_n: f64,
    pub c_n_se: f64,
    /// `E(nu_1 (nu_1 - 1)(nu_1 - 2)) / (N^2 c_N)`.
    pub mohle_ratio: f64,
    pub mohle_ratio_se: f64,
    /// Probability that three sampled lineages share a parent.
    pub triple_prob: f64,
    pub triple_prob_se: f64,
    /// `(p, P(nu_1 >= p N), standard error)` for each requested threshold.
    pub tail: Vec<(f64, f64, f64)>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

pub fn cannings_diagnostics(
    spec: &CanningsSpec,
    generations: usize,
    thresholds: &[f64],
    stream: &RngStream,
) -> Result<CanningsDiagnostics> {
    if generations < 2 {
        return Err(invalid("need at least two generations"));
    }
    if thresholds.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(invalid("thresholds must lie in (0, 1]"));
    }
    let n = spec.n();
    let nf = n as f64;
    let per_gen = stream.try_par_replicates(generations, |rng| {
        let nu = spec.sample(rng)?;
        let (mut pair, mut third) = (0.0, 0.0);
        for &v in &nu {
            let v = v as f64;
            pair += v * (v - 1.0);
            third += v * (v - 1.0) * (v - 2.0);
        }
        let tails: Vec<f64> = thresholds
            .iter()
            .map(|p| nu.iter().filter(|v| **v as f64 >= p * nf).count() as f64 / nf)
            .collect();
        Ok((pair / (nf * (nf - 1.0)), third / nf, tails))
    })?;
    let pairs: Vec<f64> = per_gen.iter().map(|g| g.0).collect();
    let thirds: Vec<f64> = per_gen.iter().map(|g| g.1).collect();
    let g = generations as f64;
    let (c_n, var_c) = mean_var(&pairs);
    let (third, var_t) = mean_var(&thirds);
    let cov = pairs
        .iter()
        .zip(&thirds)
        .map(|(a, b)| (a - c_n) * (b - third))
        .sum::<f64>()
        / (g - 1.0);
    let scale = nf * nf;
    let mohle_ratio = third / (scale * c_n);
    // delta method for the ratio of two means
    let var_ratio = (var_t / (third * third) + var_c / (c_n * c_n) - 2.0 * cov / (third * c_n))
        * mohle_ratio.powi(2);
    let triple_scale = nf / ((nf - 1.0) * (nf - 2.0)).max(1.0);
    let tail = thresholds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let xs: Vec<f64> = per_gen.iter().map(|gen| gen.2[i]).collect();
            let (m, v) = mean_var(&xs);
            (*p, m, (v / g).sqrt())
        })
        .collect();
    Ok(CanningsDiagnostics {
        n,
        generations,
        c_n,
        c_n_se: (var_c / g).sqrt(),
        mohle_ratio,
        mohle_ratio_se: (var_ratio.max(0.0) / g).sqrt(),
        triple_prob: third * triple_scale,
        triple_prob_se: (var_t / g).sqrt() * triple_scale,
        tail,
    })
}
