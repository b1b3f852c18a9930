//! Kingman's coalescent: simulation, exact marginals and the uniform
//! simplex law of block frequencies.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::history::{CoalescentHistory, LiveBlocks};
use crate::numerics::special::ln_factorial;
use crate::partition::Partition;
use crate::{invalid, Result};

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    <Exp1 as Distribution<f64>>::sample(&Exp1, rng)
}

fn pair_rate(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Kingman's `n`-coalescent: at `k` blocks wait `Exp(k(k-1)/2)`, then merge
/// a uniformly chosen pair.
pub fn simulate_kingman<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CoalescentHistory {
    let mut h = CoalescentHistory::new(n, "kingman");
    let mut live = LiveBlocks::new(n);
    let mut t = 0.0;
    while live.len() > 1 {
        t += exp1(rng) / pair_rate(live.len());
        let merged = live.merge_random(2, rng);
        h.push(t, merged);
    }
    h
}

/// Block count `N_t` of the `n`-coalescent at time `t`, without recording
/// the mergers.
pub fn kingman_block_count<R: Rng + ?Sized>(n: usize, t: f64, rng: &mut R) -> usize {
    let mut k = n;
    let mut s = 0.0;
    while k > 1 {
        s += exp1(rng) / pair_rate(k);
        if s > t {
            break;
        }
        k -= 1;
    }
    k
}

/// Probability that the `n`-coalescent visits `pi` when it has `k = |pi|`
/// blocks: `(n-k)! k! (k-1)! / (n! (n-1)!) prod |B_i|!`.
pub fn kingman_marginal_prob(pi: &Partition) -> Result<f64> {
    let n = pi.n() as u64;
    let k = pi.k() as u64;
    if n == 0 {
        return Err(invalid("empty partition"));
    }
    let ln_p = ln_factorial(n - k) + ln_factorial(k) + ln_factorial(k - 1)
        - ln_factorial(n)
        - ln_factorial(n - 1)
        + pi.block_sizes()
            .map(|s| ln_factorial(s as u64))
            .sum::<f64>();
    Ok(ln_p.exp())
}

/// Spacings of `k - 1` uniforms on `(0, 1)`, ranked.
pub fn uniform_simplex_frequencies<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random()).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Ranked block frequencies of the partition with `k` blocks along `h`.
pub fn frequencies_at_blocks(h: &CoalescentHistory, k: usize) -> Option<Vec<f64>> {
    let p = h.partition_with_blocks(k)?;
    let n = h.n() as f64;
    let mut f: Vec<f64> = p.block_sizes().map(|s| s as f64 / n).collect();
    f.sort_by(|a, b| b.total_cmp(a));
    Some(f)
}
