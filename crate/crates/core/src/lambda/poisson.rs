use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};

use super::measure::LambdaMeasure;
use crate::history::{CoalescentHistory, LiveBlocks};
use crate::numerics::{integrate_singular_split, QuadOptions};
use crate::{invalid, Result};

const CELLS: usize = 4096;

/// Cross-validation sampler built from the Poisson construction: p-mergers
/// arrive at rate `x^{-2} Lambda(dx)` restricted to `x >= eps`, and every
/// block joins a p-merger independently with probability `x`; the atom at 0
/// contributes pairwise mergers at its rate.
///
/// Ignoring `x < eps` drops mergers of a fixed set of `k >= 2` blocks at
/// total rate at most `C(b,2) Lambda((0, eps))`, so the law of the first
/// `n`-sample events is off by `O(eps)`. Density parts are drawn from a
/// piecewise-constant approximation on a geometric grid of 4096 cells.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    label: String,
    rho: f64,
    /// `(location, rate)` of atom p-mergers.
    atoms: Vec<(f64, f64)>,
    /// Cell edges and cumulative rates of the density part.
    edges: Vec<f64>,
    cum: Vec<f64>,
}

impl PoissonSampler {
    pub fn new(m: &LambdaMeasure, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps must lie in (0, 1)"));
        }
        let atoms = m
            .atoms()
            .iter()
            .filter(|a| a.location >= eps)
            .map(|a| (a.location, a.mass / (a.location * a.location)))
            .collect();
        let (mut edges, mut cum) = (Vec::new(), Vec::new());
        if !m.densities().is_empty() {
            let ratio = (1.0 / eps).powf(1.0 / CELLS as f64);
            edges = (0..=CELLS).map(|i| eps * ratio.powi(i as i32)).collect();
            edges[CELLS] = 1.0;
            let right = m
                .densities()
                .iter()
                .map(|d| d.right_exponent())
                .fold(0.0f64, f64::min);
            let mut acc = 0.0;
            cum.push(0.0);
            for i in 0..CELLS {
                let last = i + 1 == CELLS;
                let re = if last { right } else { 0.0 };
                acc += integrate_singular_split(
                    |x, c| m.density_at_split(x, if last { c } else { 1.0 - x }) / (x * x),
                    edges[i],
                    edges[i + 1],
                    0.0,
                    re,
                    QuadOptions::new(1e-10),
                )?
                .value;
                cum.push(acc);
            }
        }
        Ok(Self {
            label: format!("{} (poisson, eps={eps})", m.label()),
            rho: m.kingman_mass(),
            atoms,
            edges,
            cum,
        })
    }

    fn density_rate(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    fn sample_density_x<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = rng.random::<f64>() * self.density_rate();
        let i = self.cum.partition_point(|c| *c <= u).clamp(1, CELLS) - 1;
        rng.random_range(self.edges[i]..self.edges[i + 1])
    }

    pub fn history<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<CoalescentHistory> {
        let mut h = CoalescentHistory::new(n, self.label.clone());
        let mut live = LiveBlocks::new(n);
        let atom_rate: f64 = self.atoms.iter().map(|a| a.1).sum();
        let mut t = 0.0;
        while live.len() > 1 {
            let b = live.len();
            let pair_rate = self.rho * (b * (b - 1)) as f64 / 2.0;
            let total = pair_rate + atom_rate + self.density_rate();
            if total <= 0.0 {
                return Err(invalid("no mergers above eps"));
            }
            t += <Exp1 as Distribution<f64>>::sample(&Exp1, rng) / total;
            let mut u = rng.random::<f64>() * total;
            let k = if u < pair_rate {
                2
            } else {
                u -= pair_rate;
                let x = match self.atoms.iter().find(|a| {
                    let hit = u < a.1;
                    u -= a.1;
                    hit
                }) {
                    Some(a) => a.0,
                    None => self.sample_density_x(rng),
                };
                Binomial::new(b as u64, x)
                    .map_err(|e| invalid(e.to_string()))?
                    .sample(rng) as usize
            };
            if k >= 2 {
                let merged = live.merge_random(k, rng);
                h.push(t, merged);
            }
        }
        Ok(h)
    }
}
