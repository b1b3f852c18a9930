use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::measure::{Component, DensityComponent, DensityShape, LambdaMeasure};
use crate::numerics::special::{binomial, binomial_tail_ge2, ln_beta, ln_binomial};
use crate::numerics::{integrate_singular, QuadOptions};
use crate::{invalid, Error, Result};

const RATE_QUAD: QuadOptions = QuadOptions {
    abs_tol: 0.0,
    rel_tol: 1e-11,
    max_intervals: 4000,
};

/// Largest block count for which custom densities are simulated; their
/// merger-size laws are tabulated by quadrature.
pub const CUSTOM_SIMULATION_MAX_N: usize = 200;

pub(super) fn custom_lambda_bk(d: &DensityComponent, b: usize, k: usize) -> Result<f64> {
    let (k2, bk) = ((k - 2) as i32, (b - k) as i32);
    let r = integrate_singular(
        |x| x.powi(k2) * (1.0 - x).powi(bk) * d.eval(x),
        0.0,
        1.0,
        k2 as f64 + d.left_exponent(),
        bk as f64 + d.right_exponent(),
        RATE_QUAD,
    )
    .map_err(|e| match e {
        Error::NoConvergence { .. } => e,
        other => Error::Numerical(other.to_string()),
    })?;
    Ok(r.value)
}

fn component_lambda_bk(c: Component<'_>, b: usize, k: usize) -> Result<f64> {
    Ok(match c {
        Component::Kingman(rho) => {
            if k == 2 {
                rho
            } else {
                0.0
            }
        }
        Component::Atom(a) => {
            let p = a.location;
            if p == 1.0 {
                if k == b {
                    a.mass
                } else {
                    0.0
                }
            } else {
                a.mass * ((k - 2) as f64 * p.ln() + (b - k) as f64 * (-p).ln_1p()).exp()
            }
        }
        Component::Density(d) => match d.shape() {
            DensityShape::Beta { alpha } => {
                let a = *alpha;
                d.weight() * (ln_beta(k as f64 - a, (b - k) as f64 + a) - d.ln_norm()).exp()
            }
            DensityShape::Custom { .. } => custom_lambda_bk(d, b, k)?,
        },
    })
}

/// Rate `lambda_{b,k} = ∫ x^{k-2} (1-x)^{b-k} Lambda(dx)` at which a given
/// `k`-tuple among `b` blocks merges.
pub fn lambda_bk(m: &LambdaMeasure, b: usize, k: usize) -> Result<f64> {
    if !(2 <= k && k <= b) {
        return Err(invalid(format!("need 2 <= k <= b, got b = {b}, k = {k}")));
    }
    m.components().map(|c| component_lambda_bk(c, b, k)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    /// Total merger rate `lambda_b = sum_k C(b,k) lambda_{b,k}`.
    pub lambda_b: f64,
    /// Rate of decrease of the block count `gamma_b = sum_k (k-1) C(b,k) lambda_{b,k}`.
    pub gamma_b: f64,
}

/// `lambda_b` and `gamma_b` at `b` blocks.
pub fn rate_summaries(m: &LambdaMeasure, b: usize) -> Result<RateSummary> {
    if b < 2 {
        return Err(invalid("b must be at least 2"));
    }
    let t = RateTable::new(m, b)?;
    Ok(RateSummary {
        lambda_b: t.lambda_b(b),
        gamma_b: t.gamma_b(b),
    })
}

/// `lambda_b` and `gamma_b` for every `b <= b_max`, per component, built
/// from `lambda_{b+1} = lambda_b + b lambda_{b+1,2}` and
/// `gamma_{b+1} = gamma_b + sum_{j=2}^{b+1} lambda_{j,2}`, which involve
/// only positive terms.
#[derive(Debug, Clone)]
pub struct RateTable {
    b_max: usize,
    /// `component_lambda[c][b]` for `b` in `0..=b_max` (zero below 2).
    component_lambda: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    gamma: Vec<f64>,
    samplers: Vec<MergerSizeSampler>,
}

#[derive(Debug, Clone)]
enum MergerSizeSampler {
    Pair,
    Atom {
        p: f64,
    },
    Beta {
        alpha: f64,
        ln_weight_norm: f64,
    },
    /// `pmf[b]` lists `P(K = k)` for `k = 2..=b`.
    Tabulated {
        pmf: Vec<Vec<f64>>,
    },
}

impl RateTable {
    pub fn new(m: &LambdaMeasure, b_max: usize) -> Result<Self> {
        let b_max = b_max.max(2);
        let mut component_lambda = Vec::new();
        let mut samplers = Vec::new();
        let mut l2_total = vec![0.0; b_max + 1];
        for c in m.components() {
            let mut lam = vec![0.0; b_max + 1];
            for b in 2..=b_max {
                let l2 = component_lambda_bk(c, b, 2)?;
                l2_total[b] += l2;
                lam[b] = if b == 2 {
                    l2
                } else {
                    lam[b - 1] + (b - 1) as f64 * l2
                };
            }
            // atoms: the closed form is exact and avoids long sums
            if let Component::Atom(a) = c {
                for (b, l) in lam.iter_mut().enumerate().skip(2) {
                    *l = a.mass * binomial_tail_ge2(b as u64, a.location)
                        / (a.location * a.location);
                }
            }
            let sampler = match c {
                Component::Kingman(_) => MergerSizeSampler::Pair,
                Component::Atom(a) => MergerSizeSampler::Atom { p: a.location },
                Component::Density(d) => match d.shape() {
                    DensityShape::Beta { alpha } => MergerSizeSampler::Beta {
                        alpha: *alpha,
                        ln_weight_norm: d.weight().ln() - d.ln_norm(),
                    },
                    DensityShape::Custom { .. } => {
                        if b_max > CUSTOM_SIMULATION_MAX_N {
                            MergerSizeSampler::Tabulated { pmf: vec![] }
                        } else {
                            let mut pmf = vec![vec![]; b_max + 1];
                            for b in 2..=b_max {
                                let terms: Vec<f64> = (2..=b)
                                    .map(|k| {
                                        Ok(binomial(b as u64, k as u64)
                                            * component_lambda_bk(c, b, k)?)
                                    })
                                    .collect::<Result<_>>()?;
                                let s: f64 = terms.iter().sum();
                                pmf[b] = terms.into_iter().map(|t| t / s).collect();
                            }
                            MergerSizeSampler::Tabulated { pmf }
                        }
                    }
                },
            };
            component_lambda.push(lam);
            samplers.push(sampler);
        }
        let lambda: Vec<f64> = (0..=b_max)
            .map(|b| component_lambda.iter().map(|l| l[b]).sum())
            .collect();
        // gamma from the lambda_{j,2} partial sums
        let mut gamma = vec![0.0; b_max + 1];
        let mut s2 = 0.0;
        for b in 2..=b_max {
            let l2 = l2_total[b];
            s2 += l2;
            gamma[b] = if b == 2 { l2 } else { gamma[b - 1] + s2 };
        }
        Ok(Self {
            b_max,
            component_lambda,
            lambda,
            gamma,
            samplers,
        })
    }

    pub fn b_max(&self) -> usize {
        self.b_max
    }

    pub fn lambda_b(&self, b: usize) -> f64 {
        self.lambda[b]
    }

    pub fn gamma_b(&self, b: usize) -> f64 {
        self.gamma[b]
    }

    /// Samples the number of blocks taking part in the next merger when
    /// there are `b` blocks: `P(K = k) = C(b,k) lambda_{b,k} / lambda_b`.
    pub fn sample_merger_size<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<usize> {
        debug_assert!(b >= 2 && b <= self.b_max);
        let mut u = rng.random::<f64>() * self.lambda[b];
        let mut chosen = self.samplers.len() - 1;
        for (c, lam) in self.component_lambda.iter().enumerate() {
            if u < lam[b] {
                chosen = c;
                break;
            }
            u -= lam[b];
        }
        let comp_rate = self.component_lambda[chosen][b];
        Ok(match &self.samplers[chosen] {
            MergerSizeSampler::Pair => 2,
            MergerSizeSampler::Atom { p } => sample_binomial_ge2(b, *p, rng),
            MergerSizeSampler::Beta {
                alpha,
                ln_weight_norm,
            } => {
                let a = *alpha;
                let bf = b as f64;
                // C(b,2) lambda_{b,2} / (component lambda_b)
                let mut t =
                    (ln_binomial(b as u64, 2) + ln_weight_norm + ln_beta(2.0 - a, bf - 2.0 + a))
                        .exp()
                        / comp_rate;
                let mut u: f64 = rng.random();
                let mut k = 2;
                while u > t && k < b {
                    u -= t;
                    let kf = k as f64;
                    t *= (bf - kf) / (kf + 1.0) * (kf - a) / (bf - kf - 1.0 + a);
                    k += 1;
                }
                k
            }
            MergerSizeSampler::Tabulated { pmf } => {
                if pmf.is_empty() {
                    return Err(Error::Unsupported(format!(
                        "custom densities are simulated only up to n = {CUSTOM_SIMULATION_MAX_N}"
                    )));
                }
                let mut u: f64 = rng.random();
                let row = &pmf[b];
                let mut k = 2;
                for (i, p) in row.iter().enumerate() {
                    k = i + 2;
                    if u < *p {
                        break;
                    }
                    u -= p;
                }
                k
            }
        })
    }
}

/// `Binomial(b, p)` conditioned to be at least 2.
fn sample_binomial_ge2<R: Rng + ?Sized>(b: usize, p: f64, rng: &mut R) -> usize {
    if p >= 1.0 {
        return b;
    }
    let tail = binomial_tail_ge2(b as u64, p);
    if tail > 0.25 {
        let dist = Binomial::new(b as u64, p).expect("valid binomial");
        loop {
            let x = dist.sample(rng) as usize;
            if x >= 2 {
                return x;
            }
        }
    }
    let bf = b as f64;
    let mut t = (ln_binomial(b as u64, 2) + 2.0 * p.ln() + (bf - 2.0) * (-p).ln_1p()).exp() / tail;
    let mut u: f64 = rng.random();
    let mut k = 2;
    let ratio = p / (1.0 - p);
    while u > t && k < b {
        u -= t;
        t *= (bf - k as f64) / (k as f64 + 1.0) * ratio;
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::measure::DensityComponent;
    use crate::numerics::RngStream;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    pub(crate) fn named() -> Vec<LambdaMeasure> {
        vec![
            LambdaMeasure::kingman(),
            LambdaMeasure::bolthausen_sznitman(),
            LambdaMeasure::beta(0.5).unwrap(),
            LambdaMeasure::beta(1.2).unwrap(),
            LambdaMeasure::beta(1.5).unwrap(),
            LambdaMeasure::dirac(0.3).unwrap(),
            LambdaMeasure::dirac(1.0).unwrap(),
            LambdaMeasure::custom(
                DensityComponent::custom(Arc::new(|x: f64| 2.0 * x), 1.0, 0.0, Some(0.0), "linear")
                    .unwrap(),
            ),
        ]
    }

    #[test]
    fn examples() {
        let bs = LambdaMeasure::bolthausen_sznitman();
        assert_abs_diff_eq!(lambda_bk(&bs, 3, 2).unwrap(), 0.5, epsilon = 1e-14);
        let k = LambdaMeasure::kingman();
        for b in 2..10 {
            assert_eq!(lambda_bk(&k, b, 2).unwrap(), 1.0);
            for kk in 3..=b {
                assert_eq!(lambda_bk(&k, b, kk).unwrap(), 0.0);
            }
        }
        let star = LambdaMeasure::dirac(1.0).unwrap();
        assert_eq!(lambda_bk(&star, 4, 4).unwrap(), 1.0);
        assert_eq!(lambda_bk(&star, 4, 2).unwrap(), 0.0);
        assert_eq!(lambda_bk(&star, 4, 3).unwrap(), 0.0);
    }

    #[test]
    fn bs_closed_form() {
        // (k-2)!(b-k)!/(b-1)!
        let bs = LambdaMeasure::bolthausen_sznitman();
        let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
        for b in 2..12 {
            for k in 2..=b {
                let want = fact(k - 2) * fact(b - k) / fact(b - 1);
                assert_abs_diff_eq!(lambda_bk(&bs, b, k).unwrap(), want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn summaries_examples() {
        let s = rate_summaries(&LambdaMeasure::kingman(), 4).unwrap();
        assert_abs_diff_eq!(s.lambda_b, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_b, 6.0, epsilon = 1e-12);
        let s = rate_summaries(&LambdaMeasure::bolthausen_sznitman(), 3).unwrap();
        assert_abs_diff_eq!(s.lambda_b, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_b, 2.5, epsilon = 1e-12);
        let s = rate_summaries(&LambdaMeasure::dirac(1.0).unwrap(), 5).unwrap();
        assert_abs_diff_eq!(s.lambda_b, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_b, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn consistency_recursion() {
        for m in named() {
            for b in 2..30 {
                for k in 2..=b {
                    let lhs = lambda_bk(&m, b, k).unwrap();
                    let rhs =
                        lambda_bk(&m, b + 1, k).unwrap() + lambda_bk(&m, b + 1, k + 1).unwrap();
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn table_matches_direct_sums() {
        for m in named() {
            let t = RateTable::new(&m, 40).unwrap();
            for b in 2..=40 {
                let (mut l, mut g) = (0.0, 0.0);
                for k in 2..=b {
                    let r = binomial(b as u64, k as u64) * lambda_bk(&m, b, k).unwrap();
                    l += r;
                    g += (k - 1) as f64 * r;
                }
                assert!(
                    (t.lambda_b(b) - l).abs() <= 1e-9 * l.max(1.0),
                    "{} b={b}",
                    m.label()
                );
                assert!(
                    (t.gamma_b(b) - g).abs() <= 1e-9 * g.max(1.0),
                    "{} b={b}",
                    m.label()
                );
                if b > 2 {
                    assert!(t.gamma_b(b) >= t.gamma_b(b - 1));
                }
            }
        }
    }

    #[test]
    fn merger_size_law() {
        let stream = RngStream::new(8, 0);
        for m in named() {
            let b = 12;
            let t = RateTable::new(&m, b).unwrap();
            let law: Vec<(usize, f64)> = (2..=b)
                .map(|k| {
                    (
                        k,
                        binomial(b as u64, k as u64) * lambda_bk(&m, b, k).unwrap() / t.lambda_b(b),
                    )
                })
                .filter(|(_, p)| *p > 0.0)
                .collect();
            if law.len() < 2 {
                // degenerate law, e.g. the star measure
                let ks: Vec<usize> =
                    stream.par_replicates(100, |r| t.sample_merger_size(b, r).unwrap());
                assert!(ks.iter().all(|k| *k == law[0].0));
                continue;
            }
            let ks: Vec<usize> =
                stream.par_replicates(50_000, |r| t.sample_merger_size(b, r).unwrap());
            let rep = crate::numerics::chi_square_samples(ks, &law).unwrap();
            assert!(rep.p_value > 1e-3, "{}: {rep:?}", m.label());
        }
    }

    #[test]
    fn conditioned_binomial() {
        let stream = RngStream::new(9, 0);
        for (b, p) in [(50usize, 0.001), (30, 0.4)] {
            let ks: Vec<usize> = stream.par_replicates(40_000, |r| sample_binomial_ge2(b, p, r));
            let tail = binomial_tail_ge2(b as u64, p);
            let law: Vec<(usize, f64)> = (2..=b)
                .map(|k| {
                    (
                        k,
                        (ln_binomial(b as u64, k as u64)
                            + k as f64 * p.ln()
                            + (b - k) as f64 * (-p).ln_1p())
                        .exp()
                            / tail,
                    )
                })
                .collect();
            assert!(
                crate::numerics::chi_square_samples(ks, &law)
                    .unwrap()
                    .p_value
                    > 1e-3
            );
        }
    }
}
