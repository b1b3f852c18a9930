use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{MassPartition, Partition, PdParams};
use crate::{invalid, Result};

/// Paintbox partition of `[n]` driven by `s`: each element draws a uniform
/// point; elements landing in the same positive-mass tile share a block and
/// elements landing in the dust are singletons.
pub fn paintbox_sample<R: Rng + ?Sized>(s: &MassPartition, n: usize, rng: &mut R) -> Partition {
    let mut cum = Vec::with_capacity(s.masses().len());
    let mut acc = 0.0;
    for m in s.masses() {
        acc += m;
        cum.push(acc);
    }
    let tiles = cum.len();
    let labels: Vec<usize> = (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            let t = cum.partition_point(|c| *c <= u);
            if t < tiles {
                t
            } else {
                tiles + i
            }
        })
        .collect();
    Partition::from_labels(&labels)
}

/// Chinese restaurant seating for `n` customers; returns the table of each
/// customer, tables numbered by order of opening.
///
/// Customer `i+1` opens a new table with probability `(theta + k alpha)/(i + theta)`
/// and otherwise joins a table of size `m` with probability `(m - alpha)/(i + theta)`.
pub fn crp_block_labels<R: Rng + ?Sized>(p: PdParams, n: usize, rng: &mut R) -> Vec<usize> {
    let (alpha, theta) = (p.alpha(), p.theta());
    let mut labels = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..n {
        let k = sizes.len() as f64;
        let new_table = i == 0 || rng.random::<f64>() * (i as f64 + theta) < theta + k * alpha;
        if new_table {
            labels.push(sizes.len());
            sizes.push(1);
            continue;
        }
        // size-proportional pick thinned by (m - alpha)/m
        let table = loop {
            let t = labels[rng.random_range(0..i)];
            let m = sizes[t] as f64;
            if alpha == 0.0 || rng.random::<f64>() * m < m - alpha {
                break t;
            }
        };
        sizes[table] += 1;
        labels.push(table);
    }
    labels
}

pub fn crp_sample<R: Rng + ?Sized>(p: PdParams, n: usize, rng: &mut R) -> Partition {
    Partition::from_labels(&crp_block_labels(p, n, rng))
}

/// First `k_max` masses in size-biased order from stick breaking with
/// `W_i ~ Beta(1 - alpha, theta + i alpha)`.
pub fn stick_breaking_masses<R: Rng + ?Sized>(
    p: PdParams,
    k_max: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let mut residual = 1.0;
    let mut out = Vec::with_capacity(k_max);
    for i in 1..=k_max {
        let b = p.theta() + i as f64 * p.alpha();
        let w = Beta::new(1.0 - p.alpha(), b)
            .map_err(|e| invalid(e.to_string()))?
            .sample(rng);
        out.push(residual * w);
        residual *= 1.0 - w;
    }
    Ok(out)
}

/// Truncated Poisson construction of `PD(alpha, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonMasses {
    /// Largest points divided by the estimated total, ranked.
    pub masses: Vec<f64>,
    /// Estimated share of the total carried by the unreturned points.
    pub tail_mass: f64,
    /// Sum of the returned points, unnormalised.
    pub partial_sum: f64,
    /// Expected sum of the points below the smallest returned one.
    pub tail_estimate: f64,
}

/// Ranked points of a Poisson process with intensity `x^{-alpha-1} dx`,
/// normalised by their sum. Only the `truncation` largest points are drawn;
/// the remaining sum is replaced by its expectation
/// `y_m^{1-alpha}/(1-alpha)`, where `y_m` is the smallest drawn point, and
/// reported as `tail_mass`. With `m` points the tail share is of order
/// `m^{1-1/alpha}`.
pub fn pd_poisson_masses<R: Rng + ?Sized>(
    alpha: f64,
    truncation: usize,
    rng: &mut R,
) -> Result<PoissonMasses> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0, 1)"));
    }
    if truncation == 0 {
        return Err(invalid("truncation must be at least 1"));
    }
    // the tail measure of (y, inf) is y^{-alpha}/alpha
    let mut gamma = 0.0;
    let points: Vec<f64> = (0..truncation)
        .map(|_| {
            gamma += <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
            (alpha * gamma).powf(-1.0 / alpha)
        })
        .collect();
    let partial_sum: f64 = points.iter().sum();
    let y_min = *points.last().expect("truncation >= 1");
    let tail_estimate = y_min.powf(1.0 - alpha) / (1.0 - alpha);
    let total = partial_sum + tail_estimate;
    Ok(PoissonMasses {
        masses: points.iter().map(|y| y / total).collect(),
        tail_mass: tail_estimate / total,
        partial_sum,
        tail_estimate,
    })
}
