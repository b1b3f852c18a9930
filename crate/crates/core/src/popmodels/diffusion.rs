use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::RngStream;
use crate::{invalid, Result};

/// Distance to 0 or 1 at which the Euler scheme declares absorption.
pub const ABSORPTION_TOL: f64 = 1e-6;

/// Euler-Maruyama path of `dX = sqrt(X(1-X)) dW` on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DiffusionPath {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("path is never empty")
    }
}

fn check(p0: f64, dt: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(invalid("p0 must lie in [0, 1]"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    Ok(())
}

/// One Euler step, clamped to `[0, 1]` and snapped to the boundary within
/// [`ABSORPTION_TOL`].
fn euler_step<R: Rng + ?Sized>(x: f64, sqrt_dt: f64, rng: &mut R) -> f64 {
    if x == 0.0 || x == 1.0 {
        return x;
    }
    let z: f64 = StandardNormal.sample(rng);
    let y = (x + (x * (1.0 - x)).sqrt() * sqrt_dt * z).clamp(0.0, 1.0);
    if y < ABSORPTION_TOL {
        0.0
    } else if y > 1.0 - ABSORPTION_TOL {
        1.0
    } else {
        y
    }
}

/// Wright-Fisher diffusion from `p0`, recorded every `dt` up to `horizon`;
/// 0 and 1 are absorbing.
pub fn wf_diffusion<R: Rng + ?Sized>(
    p0: f64,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<DiffusionPath> {
    check(p0, dt)?;
    let steps = (horizon / dt).round().max(0.0) as usize;
    let sqrt_dt = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = p0;
    values.push(x);
    for _ in 0..steps {
        x = euler_step(x, sqrt_dt, rng);
        values.push(x);
    }
    let times = (0..=steps).map(|i| i as f64 * dt).collect();
    Ok(DiffusionPath { times, values })
}

/// Value of the diffusion at each of the sorted `times`, without storing
/// the path.
pub fn wf_diffusion_at<R: Rng + ?Sized>(
    p0: f64,
    dt: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check(p0, dt)?;
    if times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|t| *t < 0.0) {
        return Err(invalid("times must be sorted and nonnegative"));
    }
    let sqrt_dt = dt.sqrt();
    let mut x = p0;
    let mut step = 0usize;
    let mut out = Vec::with_capacity(times.len());
    for t in times {
        let target = (t / dt).round() as usize;
        while step < target {
            if x == 0.0 || x == 1.0 {
                step = target;
                break;
            }
            x = euler_step(x, sqrt_dt, rng);
            step += 1;
        }
        out.push(x);
    }
    Ok(out)
}

/// Time of absorption and whether the boundary reached was 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    pub time: f64,
    pub fixed: bool,
}

/// Runs the diffusion until absorption, or returns `None` after `max_time`.
pub fn wf_absorption<R: Rng + ?Sized>(
    p0: f64,
    dt: f64,
    max_time: f64,
    rng: &mut R,
) -> Result<Option<Absorption>> {
    check(p0, dt)?;
    let sqrt_dt = dt.sqrt();
    let max_steps = (max_time / dt).ceil() as usize;
    let mut x = p0;
    for step in 0..=max_steps {
        if x == 0.0 || x == 1.0 {
            return Ok(Some(Absorption {
                time: step as f64 * dt,
                fixed: x == 1.0,
            }));
        }
        x = euler_step(x, sqrt_dt, rng);
    }
    Ok(None)
}

/// `E(T)` for the diffusion started at `p`:
/// `-2 (p log p + (1-p) log(1-p))`.
pub fn wf_expected_absorption_time(p: f64) -> f64 {
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    -2.0 * (xlogx(p) + xlogx(1.0 - p))
}

/// Law of the Kingman block count `N_t` started from `n` blocks,
/// `law[k] = P(N_t = k)`, by uniformization of the pure-death chain.
pub fn kingman_block_count_law(n: usize, t: f64) -> Result<Vec<f64>> {
    if n == 0 || !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("need n >= 1 and finite t >= 0"));
    }
    let rate = |k: usize| (k * (k - 1)) as f64 / 2.0;
    let q = rate(n);
    let mut dist = vec![0.0; n + 1];
    dist[n] = 1.0;
    if q == 0.0 || t == 0.0 {
        return Ok(dist);
    }
    let lt = q * t;
    let mut out = vec![0.0; n + 1];
    let mut weight = (-lt).exp();
    let mut acc = 0.0;
    let mut j = 0usize;
    while acc < 1.0 - 1e-16 && j < 1_000_000 {
        for (o, d) in out.iter_mut().zip(&dist) {
            *o += weight * d;
        }
        acc += weight;
        let mut next = vec![0.0; n + 1];
        for k in 1..=n {
            let stay = 1.0 - rate(k) / q;
            next[k] += dist[k] * stay;
            if k > 1 {
                next[k - 1] += dist[k] * rate(k) / q;
            }
        }
        dist = next;
        j += 1;
        weight *= lt / j as f64;
    }
    let s: f64 = out.iter().sum();
    Ok(out.into_iter().map(|x| x / s).collect())
}

/// One row of the moment duality check `E(X_t^n) = E(p^{N_t})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub n: usize,
    /// Monte Carlo `E(X_t^n)` for the diffusion started at `p0`.
    pub diffusion_moment: f64,
    pub diffusion_se: f64,
    /// Exact `E(p0^{N_t})` for Kingman's coalescent started from `n` blocks.
    pub coalescent_moment: f64,
    pub z_score: f64,
}

pub fn duality_check(
    p0: f64,
    t: f64,
    n_max: usize,
    dt: f64,
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<DualityRow>> {
    if n_max == 0 || n_max > 6 {
        return Err(invalid("n_max must lie in 1..=6"));
    }
    if reps < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let xs: Vec<f64> =
        stream.try_par_replicates(reps, |rng| Ok(wf_diffusion_at(p0, dt, &[t], rng)?[0]))?;
    (1..=n_max)
        .map(|n| {
            let powers: Vec<f64> = xs.iter().map(|x| x.powi(n as i32)).collect();
            let (m, se) = crate::numerics::mean_se(&powers);
            let law = kingman_block_count_law(n, t)?;
            let exact: f64 = (1..=n).map(|k| law[k] * p0.powi(k as i32)).sum();
            let z = if se > 0.0 { (m - exact) / se } else { 0.0 };
            Ok(DualityRow {
                n,
                diffusion_moment: m,
                diffusion_se: se,
                coalescent_moment: exact,
                z_score: z,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kingman::kingman_block_count;
    use crate::numerics::mean_se;
    use approx::assert_relative_eq;

    #[test]
    fn boundaries_are_absorbing() {
        let mut rng = RngStream::new(51, 0).rng();
        for p in [0.0, 1.0] {
            let path = wf_diffusion(p, 0.01, 1.0, &mut rng).unwrap();
            assert!(path.values.iter().all(|v| *v == p));
        }
        assert!(wf_diffusion(1.5, 0.01, 1.0, &mut rng).is_err());
        let path = wf_diffusion(0.5, 0.01, 20.0, &mut rng).unwrap();
        assert!(path.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let first_hit = path.values.iter().position(|v| *v == 0.0 || *v == 1.0);
        if let Some(i) = first_hit {
            assert!(path.values[i..].iter().all(|v| *v == path.values[i]));
        }
    }

    #[test]
    fn fixation_probability_is_p0() {
        let runs = RngStream::new(52, 0).par_replicates(10_000, |r| {
            wf_absorption(0.3, 1e-3, 100.0, r).unwrap().unwrap()
        });
        let fixed: Vec<f64> = runs.iter().map(|a| f64::from(u8::from(a.fixed))).collect();
        let (m, se) = mean_se(&fixed);
        assert!((m - 0.3).abs() < 3.0 * se, "{m} (se {se})");
    }

    #[test]
    fn absorption_time_from_one_half() {
        assert_relative_eq!(
            wf_expected_absorption_time(0.5),
            2.0 * std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        let runs = RngStream::new(53, 0).par_replicates(10_000, |r| {
            wf_absorption(0.5, 1e-4, 100.0, r).unwrap().unwrap()
        });
        let ts: Vec<f64> = runs.iter().map(|a| a.time).collect();
        let (m, _) = mean_se(&ts);
        assert!(
            (m / (2.0 * std::f64::consts::LN_2) - 1.0).abs() < 0.05,
            "{m}"
        );
    }

    #[test]
    fn block_count_law_matches_simulation() {
        let law = kingman_block_count_law(2, 0.5).unwrap();
        assert_relative_eq!(law[1], 1.0 - (-0.5f64).exp(), max_relative = 1e-13);
        let law = kingman_block_count_law(5, 0.4).unwrap();
        let xs = RngStream::new(54, 0).par_replicates(100_000, |r| kingman_block_count(5, 0.4, r));
        let pairs: Vec<(usize, f64)> = (1..=5).map(|k| (k, law[k])).collect();
        assert!(
            crate::numerics::chi_square_samples(xs, &pairs)
                .unwrap()
                .p_value
                > 1e-3
        );
    }

    #[test]
    fn duality_examples() {
        let rows = duality_check(0.3, 0.5, 4, 1e-3, 20_000, &RngStream::new(55, 0)).unwrap();
        assert_relative_eq!(rows[0].coalescent_moment, 0.3, max_relative = 1e-12);
        assert!(
            (rows[1].coalescent_moment - 0.17263).abs() < 5e-6,
            "{}",
            rows[1].coalescent_moment
        );
        for r in &rows {
            assert!(r.z_score.abs() < 3.0, "{r:?}");
        }
        let at_zero = duality_check(0.3, 0.0, 3, 1e-3, 10, &RngStream::new(56, 0)).unwrap();
        for r in at_zero {
            assert_relative_eq!(
                r.diffusion_moment,
                0.3f64.powi(r.n as i32),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                r.coalescent_moment,
                0.3f64.powi(r.n as i32),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn heterozygosity_decays_at_rate_one() {
        let times: Vec<f64> = (0..=8).map(|i| 0.25 * i as f64).collect();
        let paths = RngStream::new(57, 0)
            .par_replicates(20_000, |r| wf_diffusion_at(0.5, 1e-3, &times, r).unwrap());
        let logs: Vec<f64> = (0..times.len())
            .map(|i| {
                let h: Vec<f64> = paths.iter().map(|p| p[i] * (1.0 - p[i])).collect();
                mean_se(&h).0.ln()
            })
            .collect();
        let tm = times.iter().sum::<f64>() / times.len() as f64;
        let lm = logs.iter().sum::<f64>() / logs.len() as f64;
        let slope = times
            .iter()
            .zip(&logs)
            .map(|(t, l)| (t - tm) * (l - lm))
            .sum::<f64>()
            / times.iter().map(|t| (t - tm).powi(2)).sum::<f64>();
        assert!((slope + 1.0).abs() < 0.1, "{slope}");
    }
}
