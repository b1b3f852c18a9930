use std::collections::HashMap;

use super::measure::LambdaMeasure;
use super::rates::lambda_bk;
use crate::partition::{set_partitions, Partition};
use crate::{invalid, Result};

/// Largest sample size handled by [`transition_law`].
pub const TRANSITION_MAX_N: usize = 7;

/// Exact law of the partition of `[n]` at time `t`, obtained by
/// uniformizing the generator on the set partitions of `[n]`.
pub fn transition_law(m: &LambdaMeasure, n: usize, t: f64) -> Result<Vec<(Partition, f64)>> {
    if n == 0 || n > TRANSITION_MAX_N {
        return Err(invalid(format!(
            "transition law supports 1 <= n <= {TRANSITION_MAX_N}"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t must be finite and nonnegative"));
    }
    let states = set_partitions(n)?;
    let index: HashMap<&Partition, usize> =
        states.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let rates: Vec<Vec<f64>> = (0..=n)
        .map(|b| {
            (0..=b)
                .map(|k| if k >= 2 { lambda_bk(m, b, k) } else { Ok(0.0) })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    // outgoing transitions per state
    let mut out: Vec<Vec<(usize, f64)>> = Vec::with_capacity(states.len());
    let mut exit = vec![0.0; states.len()];
    for (i, p) in states.iter().enumerate() {
        let b = p.k();
        let mut trans = Vec::new();
        for mask in 1u32..(1 << b) {
            let k = mask.count_ones() as usize;
            if k < 2 {
                continue;
            }
            let r = rates[b][k];
            if r == 0.0 {
                continue;
            }
            let mut merged = Vec::new();
            let mut blocks = Vec::new();
            for (bi, blk) in p.blocks().iter().enumerate() {
                if mask & (1 << bi) != 0 {
                    merged.extend_from_slice(blk);
                } else {
                    blocks.push(blk.clone());
                }
            }
            blocks.push(merged);
            let q = Partition::new(n, blocks)?;
            trans.push((index[&q], r));
            exit[i] += r;
        }
        out.push(trans);
    }
    let q_max = exit.iter().cloned().fold(0.0, f64::max);
    let mut dist = vec![0.0; states.len()];
    dist[index[&Partition::singletons(n)]] = 1.0;
    if q_max == 0.0 || t == 0.0 {
        return Ok(states.into_iter().zip(dist).collect());
    }
    let lt = q_max * t;
    let mut result = vec![0.0; states.len()];
    let mut weight = (-lt).exp();
    let mut acc_weight = 0.0;
    let mut j = 0usize;
    // Poisson weights are accumulated until the remaining mass is negligible
    while acc_weight < 1.0 - 1e-15 && j < 100_000 {
        for (r, d) in result.iter_mut().zip(&dist) {
            *r += weight * d;
        }
        acc_weight += weight;
        let mut next = vec![0.0; states.len()];
        for (i, d) in dist.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            next[i] += d * (1.0 - exit[i] / q_max);
            for &(jdx, r) in &out[i] {
                next[jdx] += d * r / q_max;
            }
        }
        dist = next;
        j += 1;
        weight *= lt / j as f64;
        if weight == 0.0 && acc_weight > 0.5 {
            break;
        }
    }
    let s: f64 = result.iter().sum();
    Ok(states
        .into_iter()
        .zip(result.into_iter().map(|r| r / s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kingman_pair() {
        let law = transition_law(&LambdaMeasure::kingman(), 2, 0.5).unwrap();
        let p_one = law.iter().find(|(p, _)| p.k() == 1).unwrap().1;
        assert_abs_diff_eq!(p_one, 1.0 - (-0.5f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn normalised_and_exchangeable() {
        let m = LambdaMeasure::beta(1.3).unwrap();
        let law = transition_law(&m, 4, 0.8).unwrap();
        assert_abs_diff_eq!(law.iter().map(|x| x.1).sum::<f64>(), 1.0, epsilon = 1e-12);
        // equal probabilities within each spectrum class
        let mut by_spec: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
        for (p, pr) in &law {
            by_spec.entry(p.spectrum().a).or_default().push(*pr);
        }
        for v in by_spec.values() {
            for x in v {
                assert_abs_diff_eq!(*x, v[0], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn restriction_consistency() {
        let m = LambdaMeasure::bolthausen_sznitman();
        let big = transition_law(&m, 5, 0.6).unwrap();
        let small = transition_law(&m, 3, 0.6).unwrap();
        let mut proj: HashMap<Partition, f64> = HashMap::new();
        for (p, pr) in big {
            *proj.entry(p.restrict(3).unwrap()).or_default() += pr;
        }
        for (p, pr) in small {
            assert_abs_diff_eq!(proj[&p], pr, epsilon = 1e-12);
        }
    }
}
