//! Mutations thrown on coalescent genealogies: infinitely-many-alleles
//! partitions, infinitely-many-sites spectra, estimators of the mutation
//! rate and the allelic predictions for Λ-coalescents.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::history::{CoalescentHistory, Genealogy};
use crate::lambda::{cdi_test, psi, Component, DensityShape, LambdaMeasure};
use crate::numerics::special::{gamma, harmonic};
use crate::numerics::{bisect_increasing, integrate, QuadOptions};
use crate::partition::Partition;
use crate::{invalid, Error, Result};

/// One mutation on the genealogy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    /// Number of merger events strictly before the mark.
    pub interval: usize,
    /// Genealogy node below the branch carrying the mark.
    pub branch: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationMarks {
    rho: f64,
    marks: Vec<Mark>,
}

impl MutationMarks {
    pub fn new(rho: f64, marks: Vec<Mark>) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(invalid("rho must be finite and nonnegative"));
        }
        Ok(Self { rho, marks })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `theta = 2 rho`.
    pub fn theta(&self) -> f64 {
        2.0 * self.rho
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Checks that every mark sits on an existing branch within its time span.
    fn check(&self, g: &Genealogy) -> Result<()> {
        for m in &self.marks {
            let node = g
                .nodes
                .get(m.branch)
                .ok_or_else(|| invalid(format!("mark on unknown branch {}", m.branch)))?;
            let top = node.parent.map(|p| g.nodes[p].time);
            if !matches!(top, Some(top) if m.time >= node.time && m.time <= top) {
                return Err(invalid(format!("mark {m:?} is not on a live branch")));
            }
        }
        Ok(())
    }
}

/// Poisson marks of intensity `rho` per unit branch length.
pub fn throw_mutations<R: Rng + ?Sized>(
    h: &CoalescentHistory,
    rho: f64,
    rng: &mut R,
) -> Result<MutationMarks> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho must be finite and nonnegative"));
    }
    if !h.is_complete() {
        return Err(invalid("mutations need a complete history"));
    }
    let g = Genealogy::from_history(h);
    let times: Vec<f64> = h.events().iter().map(|e| e.t).collect();
    let mut marks = Vec::new();
    for (node, len) in g.branches() {
        let mean = rho * len;
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .map_err(|e| invalid(e.to_string()))?
            .sample(rng) as usize;
        let bottom = g.nodes[node].time;
        for _ in 0..count {
            let time = bottom + len * rng.random::<f64>();
            marks.push(Mark {
                interval: times.partition_point(|t| *t < time),
                branch: node,
                time,
            });
        }
    }
    MutationMarks::new(rho, marks)
}

/// Infinitely-many-alleles partition: leaves share a type when the nearest
/// mark above them (or the root, if there is none) is the same.
pub fn allelic_partition(h: &CoalescentHistory, m: &MutationMarks) -> Result<Partition> {
    let g = Genealogy::from_history(h);
    m.check(&g)?;
    let mut marked = vec![false; g.nodes.len()];
    m.marks.iter().for_each(|mk| marked[mk.branch] = true);
    let mut allele = vec![usize::MAX; g.nodes.len()];
    for v in g.top_down() {
        allele[v] = match g.nodes[v].parent {
            Some(p) if !marked[v] => allele[p],
            _ => v,
        };
    }
    Ok(Partition::from_labels(&allele[..g.n]))
}

/// Site frequency spectrum: `counts[j - 1]` sites are carried by exactly `j`
/// of the `n` leaves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSpectrum {
    n: usize,
    counts: Vec<u64>,
}

impl SiteSpectrum {
    pub fn new(n: usize, counts: Vec<u64>) -> Result<Self> {
        if n == 0 || counts.len() != n {
            return Err(invalid("a spectrum on n leaves has n entries"));
        }
        Ok(Self { n, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `M_j`, zero outside `1..=n`.
    pub fn m(&self, j: usize) -> u64 {
        if j == 0 {
            return 0;
        }
        self.counts.get(j - 1).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of segregating sites `S_n`.
    pub fn segregating_sites(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with columns `j, M_j, expected_theta_over_j`.
    pub fn write_csv<W: Write>(&self, theta: f64, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["j", "M_j", "expected_theta_over_j"])?;
        for j in 1..=self.n {
            out.serialize((j, self.m(j), theta / j as f64))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn site_spectrum(h: &CoalescentHistory, m: &MutationMarks) -> Result<SiteSpectrum> {
    let g = Genealogy::from_history(h);
    m.check(&g)?;
    let mut counts = vec![0u64; g.n];
    for mk in &m.marks {
        counts[g.nodes[mk.branch].leaves - 1] += 1;
    }
    SiteSpectrum::new(g.n, counts)
}

/// Moment estimate of `theta` from the number of alleles: the root of
/// `sum_{i=1}^n theta/(theta+i-1) = k`, with `+inf` when `k = n`.
pub fn theta_hat_blocks(k: usize, n: usize) -> Result<f64> {
    if n < 2 || k == 0 || k > n {
        return Err(invalid("need n >= 2 and 1 <= k <= n"));
    }
    if k == 1 {
        return Ok(0.0);
    }
    if k == n {
        return Ok(f64::INFINITY);
    }
    // the i = 0 term is identically 1
    let expected = |theta: f64| 1.0 + (1..n).map(|i| theta / (theta + i as f64)).sum::<f64>();
    let target = k as f64;
    let mut hi = 1.0;
    while expected(hi) < target {
        hi *= 2.0;
    }
    bisect_increasing(expected, target, 0.0, hi, 1e-12 * hi)
}

/// Watterson's estimate `S_n / h_{n-1}`.
pub fn theta_hat_sites(s_n: u64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid("need n >= 2"));
    }
    Ok(s_n as f64 / harmonic(n as u64 - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimates {
    pub blocks: f64,
    pub sites: f64,
}

pub fn theta_estimators(alleles: &Partition, sites: &SiteSpectrum) -> Result<ThetaEstimates> {
    if alleles.n() != sites.n() {
        return Err(invalid(
            "partition and spectrum have different sample sizes",
        ));
    }
    Ok(ThetaEstimates {
        blocks: theta_hat_blocks(alleles.k(), alleles.n())?,
        sites: theta_hat_sites(sites.segregating_sites(), sites.n())?,
    })
}

/// Predicted number of alleles in a sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllelePrediction {
    /// `rho ∫_1^n q / psi(q) dq`.
    pub integral: f64,
    /// For `beta(alpha)`: `rho C n^{2-alpha}` with `C = alpha (alpha - 1)`.
    pub closed_form: Option<f64>,
    /// For `beta(alpha)`: the large-`n` behaviour of the integral itself,
    /// `rho alpha (alpha-1) Gamma(alpha) / (2-alpha) n^{2-alpha}`.
    pub integral_asymptote: Option<f64>,
    /// For `beta(alpha)`: limiting fraction of singleton types, `2 - alpha`.
    pub singleton_fraction: Option<f64>,
}

fn beta_alpha(m: &LambdaMeasure) -> Option<f64> {
    let mut comps = m.components();
    match (comps.next(), comps.next()) {
        (Some(Component::Density(d)), None) => match d.shape() {
            DensityShape::Beta { alpha } if (d.weight() - 1.0).abs() < 1e-15 => Some(*alpha),
            _ => None,
        },
        _ => None,
    }
}

/// Allelic prediction for a Λ-coalescent that comes down from infinity.
pub fn lambda_allele_prediction(m: &LambdaMeasure, rho: f64, n: usize) -> Result<AllelePrediction> {
    if !(rho > 0.0 && rho.is_finite()) || n < 1 {
        return Err(invalid("need rho > 0 and n >= 1"));
    }
    if !cdi_test(m, 4096)?.comes_down {
        return Err(Error::Unsupported(
            "allelic predictions need a coalescent that comes down from infinity".into(),
        ));
    }
    // q = e^u turns q/psi(q) dq into q^2/psi(q) du
    let f = |u: f64| {
        let q = u.exp();
        q * q / psi(m, q).unwrap_or(f64::NAN)
    };
    let value = integrate(
        f,
        0.0,
        (n as f64).ln(),
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-9,
            max_intervals: 2000,
        },
    )?
    .value;
    if !value.is_finite() {
        return Err(Error::Numerical(
            "psi evaluation failed inside the allelic integral".into(),
        ));
    }
    let beta = beta_alpha(m);
    let power = |a: f64| (n as f64).powf(2.0 - a);
    Ok(AllelePrediction {
        integral: rho * value,
        closed_form: beta.map(|a| rho * a * (a - 1.0) * power(a)),
        integral_asymptote: beta.map(|a| rho * a * (a - 1.0) * gamma(a) / (2.0 - a) * power(a)),
        singleton_fraction: beta.map(|a| 2.0 - a),
    })
}

/// Solves a tridiagonal system by the Thomas algorithm; `sub[0]` and
/// `sup[len-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let denom = diag[i] - if i > 0 { sub[i] * c[i - 1] } else { 0.0 };
        if denom == 0.0 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { sub[i] * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Expected time `G(1, k)` the Moran chain on `{0, ..., N}`, with up and
/// down rates `y (N - y) / N`, spends in state `k` before absorption when
/// started from 1, for `k = 1..N-1` (index `k - 1`). Each value is one
/// entry of the inverse generator, obtained by a tridiagonal solve.
pub fn moran_green_function(pop: usize) -> Result<Vec<f64>> {
    if pop < 2 {
        return Err(invalid("need N >= 2"));
    }
    let nf = pop as f64;
    let states = pop - 1;
    let rate = |y: usize| y as f64 * (nf - y as f64) / nf;
    // -Q restricted to the transient states 1..N-1; its inverse is G and,
    // being symmetric up to the diagonal rate, G(1, k) is row 1 of it
    let diag: Vec<f64> = (1..pop).map(|y| 2.0 * rate(y)).collect();
    let off: Vec<f64> = (1..pop).map(|y| -rate(y)).collect();
    (1..pop)
        .map(|k| {
            let mut rhs = vec![0.0; states];
            rhs[k - 1] = 1.0;
            // row y: 2r(y) G(y) - r(y) G(y-1) - r(y) G(y+1) = delta_{yk}
            solve_tridiagonal(&off, &diag, &off, &rhs).map(|g| g[0])
        })
        .collect()
}
