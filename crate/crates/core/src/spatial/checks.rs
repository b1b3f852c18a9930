use rand::Rng;
use serde::{Deserialize, Serialize};

use super::system::{Initial, SpatialSystem};
use super::torus::{density_asymptote, TorusConfig};
use crate::lambda::{cdi_test, LambdaMeasure, RateTable};
use crate::numerics::special::ln_factorial;
use crate::numerics::{chi_square_gof, chi_square_sf, GofReport, RngStream};
use crate::{invalid, Error, Result};

/// Number of particles that ever leave the origin, starting from `n` there.
///
/// Particles are frozen once they jump, so only the origin's Λ-coalescent
/// and the rate-`rho` escape clocks matter. Under Kingman's coalescent this
/// count has the law of the block count of an Ewens(`2 rho`) partition of `[n]`.
pub fn origin_escape_count(
    cfg: &TorusConfig,
    n: usize,
    m: &LambdaMeasure,
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(invalid("need at least one particle"));
    }
    if cfg.rho() <= 0.0 {
        return Err(invalid("no particle escapes when rho = 0"));
    }
    let table = RateTable::new(m, n.max(2))?;
    let rho = cfg.rho();
    stream.try_par_replicates(reps, |rng| {
        let mut b = n;
        let mut escaped = 0;
        while b > 0 {
            let merge = if b >= 2 { table.lambda_b(b) } else { 0.0 };
            if rng.random::<f64>() * (merge + rho * b as f64) < merge {
                b -= table.sample_merger_size(b, rng)? - 1;
            } else {
                b -= 1;
                escaped += 1;
            }
        }
        Ok(escaped)
    })
}

/// Upper bound `sum_{b>=k} 1/gamma_b + k/gamma_k` on the mean time until at
/// most `k` particles per site remain, for a measure that comes down from
/// infinity.
pub fn limic_sturm_bound(m: &LambdaMeasure, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(invalid("k must be at least 2"));
    }
    if !cdi_test(m, 1 << 12)?.comes_down {
        return Err(invalid(format!(
            "{} does not come down from infinity",
            m.label()
        )));
    }
    let top = (1usize << 16).max(4 * k);
    let table = RateTable::new(m, top)?;
    let head: f64 = (k..=top).map(|b| 1.0 / table.gamma_b(b)).sum();
    // beyond the table gamma_b grows like a power of b, read off the last octave
    let index = (table.gamma_b(top) / table.gamma_b(top / 2)).log2();
    if index <= 1.0 {
        return Err(Error::Numerical(format!(
            "gamma_b grows too slowly (index {index}) to sum the tail"
        )));
    }
    let tail = top as f64 / (table.gamma_b(top) * (index - 1.0));
    Ok(head + tail + k as f64 / table.gamma_b(k))
}

/// Time until the origin holds at most `k` particles, starting from `n` there.
pub fn limic_sturm_time<R: Rng + ?Sized>(
    cfg: TorusConfig,
    m: &LambdaMeasure,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut sys = SpatialSystem::lambda(cfg, m, &Initial::AtOrigin(n))?;
    while sys.site_count(0) > k {
        if sys.step(f64::INFINITY, rng).is_none() {
            return Err(Error::Numerical(
                "the system froze above k particles".into(),
            ));
        }
    }
    Ok(sys.time())
}

/// Box counts of coalescing walks after rescaling space to unit density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub t: f64,
    pub particles: usize,
    /// Side of the counting boxes, in lattice units.
    pub box_side: usize,
    pub boxes: usize,
    /// Asymptotic density `g_d(t)` for comparison with the observed one.
    pub asymptotic_density: f64,
    pub mean_count: f64,
    /// Variance over mean of the box counts.
    pub dispersion_index: f64,
    /// `(D - 1) / sqrt(2 / (boxes - 1))`, approximately standard normal
    /// under a Poisson configuration.
    pub dispersion_z: f64,
    /// p-value of `(boxes - 1) D` against chi-square with `boxes - 1` dof.
    pub dispersion_p: f64,
    /// Chi-square of the box-count histogram against Poisson with the
    /// observed mean.
    pub poisson_fit: GofReport,
}

/// Minimum number of surviving particles for the dispersion statistics.
const MIN_PARTICLES: usize = 50;
const MIN_BOXES: usize = 16;

/// Runs coalescing walks from full occupancy to time `t` and tests the box
/// counts of the survivors for a Poisson configuration.
///
/// Boxes are cubes of side `round(p^{-1/d})` for the observed density `p`,
/// so that each holds one particle on average.
pub fn arratia_dispersion_test<R: Rng + ?Sized>(
    cfg: TorusConfig,
    t: f64,
    rng: &mut R,
) -> Result<DispersionReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t must be positive"));
    }
    let mut sys = SpatialSystem::coalescing_walks(cfg, &Initial::Full)?;
    sys.advance_until(t, rng);
    let particles = sys.count();
    if particles < MIN_PARTICLES {
        return Err(invalid(format!(
            "only {particles} particles survive to t = {t}; need {MIN_PARTICLES}"
        )));
    }
    let d = cfg.d();
    let side = (sys.density().powf(-1.0 / d as f64).round() as usize).max(1);
    let per_axis = cfg.l() / side;
    let boxes = per_axis.pow(d as u32);
    if boxes < MIN_BOXES {
        return Err(invalid(format!(
            "only {boxes} boxes of side {side} fit in the torus"
        )));
    }
    let mut counts = vec![0u64; boxes];
    for site in 0..cfg.sites() {
        if sys.site_count(site) == 0 {
            continue;
        }
        let coords = cfg.coords(site);
        if coords.iter().any(|c| c / side >= per_axis) {
            continue;
        }
        let b = coords
            .iter()
            .rev()
            .fold(0, |acc, c| acc * per_axis + c / side);
        counts[b] += sys.site_count(site) as u64;
    }
    let nb = boxes as f64;
    let mean = counts.iter().sum::<u64>() as f64 / nb;
    let var = counts
        .iter()
        .map(|c| (*c as f64 - mean).powi(2))
        .sum::<f64>()
        / (nb - 1.0);
    let dispersion_index = var / mean;
    let dof = boxes - 1;
    let stat = dof as f64 * dispersion_index;
    let upper = chi_square_sf(dof, stat);
    let dispersion_p = (2.0 * upper.min(1.0 - upper)).min(1.0);
    // histogram against Poisson(mean), lumping the upper tail
    let top = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut probs: Vec<f64> = (0..=top)
        .map(|j| (j as f64 * mean.ln() - mean - ln_factorial(j as u64)).exp())
        .collect();
    let tail: f64 = 1.0 - probs.iter().sum::<f64>();
    if let Some(last) = probs.last_mut() {
        *last += tail.max(0.0);
    }
    let mut hist = vec![0u64; top + 1];
    for c in &counts {
        hist[*c as usize] += 1;
    }
    let poisson_fit = chi_square_gof(&hist, &probs, boxes as u64)?;
    Ok(DispersionReport {
        t,
        particles,
        box_side: side,
        boxes,
        asymptotic_density: density_asymptote(d, t)?,
        mean_count: mean,
        dispersion_index,
        dispersion_z: (dispersion_index - 1.0) / (2.0 / dof as f64).sqrt(),
        dispersion_p,
        poisson_fit,
    })
}
