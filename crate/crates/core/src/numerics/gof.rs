use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom for chi-square tests, sample size for KS tests.
    pub dof_or_n: usize,
}

impl GofReport {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square test. Bins with expected count below 5 are pooled with
/// their neighbours (in the given order) before the statistic is formed.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], total: u64) -> Result<GofReport> {
    if observed.len() != expected_probs.len() {
        return Err(Error::Gof("observed and expected lengths differ".into()));
    }
    let psum: f64 = expected_probs.iter().sum();
    if (psum - 1.0).abs() > 1e-12 * expected_probs.len().max(1) as f64 {
        return Err(Error::Gof(format!("expected probabilities sum to {psum}")));
    }
    if expected_probs.iter().any(|p| *p < 0.0) {
        return Err(Error::Gof("negative expected probability".into()));
    }
    let total_f = total as f64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut acc_o, mut acc_e) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(expected_probs) {
        acc_o += *o as f64;
        acc_e += p * total_f;
        if acc_e >= MIN_EXPECTED {
            groups.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += acc_o;
                last.1 += acc_e;
            }
            None => groups.push((acc_o, acc_e)),
        }
    }
    if groups.len() < 2 || groups.iter().any(|g| g.1 < MIN_EXPECTED) {
        return Err(Error::Gof(format!(
            "fewer than two bins with expected count >= {MIN_EXPECTED} after pooling"
        )));
    }
    let statistic: f64 = groups.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = groups.len() - 1;
    let p_value = chi_square_sf(dof, statistic);
    Ok(GofReport {
        statistic,
        p_value,
        dof_or_n: dof,
    })
}

/// Upper tail of the chi-square law with `dof` degrees of freedom.
pub fn chi_square_sf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Chi-square test of categorical samples against an exact law given as
/// `(category, probability)` pairs. A sample outside the support is an error.
pub fn chi_square_samples<K, I>(samples: I, law: &[(K, f64)]) -> Result<GofReport>
where
    K: Eq + Hash,
    I: IntoIterator<Item = K>,
{
    let index: HashMap<&K, usize> = law.iter().enumerate().map(|(i, (k, _))| (k, i)).collect();
    let mut counts = vec![0u64; law.len()];
    let mut total = 0u64;
    for s in samples {
        let i = index
            .get(&s)
            .ok_or_else(|| Error::Gof("sample outside the support of the law".into()))?;
        counts[*i] += 1;
        total += 1;
    }
    // pool the smallest cells together
    let mut order: Vec<usize> = (0..law.len()).collect();
    order.sort_by(|a, b| law[*a].1.total_cmp(&law[*b].1));
    let obs: Vec<u64> = order.iter().map(|i| counts[*i]).collect();
    let probs: Vec<f64> = order.iter().map(|i| law[*i].1).collect();
    let s: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / s).collect();
    chi_square_gof(&obs, &probs, total)
}

/// Kolmogorov limiting survival function `P(K > lambda)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<GofReport> {
    if samples.is_empty() {
        return Err(Error::Gof("empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max(hi - f).max(f - lo);
    }
    Ok(GofReport {
        statistic: d,
        p_value: ks_p(d, n),
        dof_or_n: xs.len(),
    })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<GofReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Gof("empty sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    Ok(GofReport {
        statistic: d,
        p_value: ks_p(d, n_eff),
        dof_or_n: xs.len() + ys.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn pearson_examples() {
        let r = chi_square_gof(&[50, 50], &[0.5, 0.5], 100).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5], 100).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert_eq!(r.dof_or_n, 1);
        // P(chi2_1 > 4) = erfc(sqrt 2)
        assert!((r.p_value - 0.045_500_263_896_358).abs() < 1e-9);
    }

    #[test]
    fn underpopulated_bins_are_rejected() {
        assert!(chi_square_gof(&[3, 4], &[0.5, 0.5], 7).is_err());
        assert!(chi_square_gof(&[3, 4], &[0.6, 0.6], 7).is_err());
    }

    #[test]
    fn pooling_merges_small_bins() {
        let r = chi_square_gof(&[48, 49, 1, 2], &[0.48, 0.49, 0.01, 0.02], 100).unwrap();
        assert_eq!(r.dof_or_n, 1);
    }

    #[test]
    fn uniform_calibration() {
        let mut rng = RngStream::new(1, 0).rng();
        let mut counts = [0u64; 10];
        for _ in 0..100_000 {
            counts[rng.random_range(0..10)] += 1;
        }
        let r = chi_square_gof(&counts, &[0.1; 10], 100_000).unwrap();
        assert!(r.p_value > 1e-3, "{r:?}");
    }

    #[test]
    fn ks_quantile_sample() {
        let n = 500;
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.statistic <= 1.0 / (n as f64 + 1.0) + 1e-12, "{r:?}");
    }

    #[test]
    fn ks_exponential_calibration() {
        let mut rng = RngStream::new(2, 0).rng();
        let xs: Vec<f64> = (0..10_000).map(|_| Exp1.sample(&mut rng)).collect();
        let r = ks_one_sample(&xs, |x: f64| 1.0 - (-x).exp()).unwrap();
        assert!(r.p_value > 1e-3, "{r:?}");
    }

    #[test]
    fn ks_constant_sample() {
        let c: f64 = 0.3;
        let xs = vec![c; 100];
        let f = |x: f64| x.clamp(0.0, 1.0);
        let r = ks_one_sample(&xs, f).unwrap();
        assert!((r.statistic - f(c).max(1.0 - f(c))).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn ks_empty_is_error() {
        assert!(ks_one_sample(&[], |x| x).is_err());
    }

    #[test]
    fn two_sample_same_law() {
        let mut rng = RngStream::new(3, 0).rng();
        let a: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 1e-3);
        let c: Vec<f64> = b.iter().map(|x| x * x).collect();
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
    }

    #[test]
    fn chi_square_rejection_rate_is_calibrated() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let mut rejections = 0;
        for rep in 0..1000u64 {
            let mut rng = RngStream::new(11, 0).replicate(rep).rng();
            let mut counts = [0u64; 4];
            for _ in 0..2000 {
                let u: f64 = rng.random();
                let k = if u < 0.1 {
                    0
                } else if u < 0.3 {
                    1
                } else if u < 0.6 {
                    2
                } else {
                    3
                };
                counts[k] += 1;
            }
            if chi_square_gof(&counts, &probs, 2000).unwrap().p_value < 1e-3 {
                rejections += 1;
            }
        }
        // expected one rejection in a thousand
        assert!(rejections <= 5, "{rejections}");
    }
}
