use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::measure::{Atom, Component, DensityShape, LambdaMeasure};
use super::rates::custom_lambda_bk;
use super::simulate::LambdaSimulator;
use crate::numerics::special::ln_beta;
use crate::numerics::{integrate_singular, QuadOptions, RngStream};
use crate::{invalid, Error, Result};

/// Time at which 1 and 2 first share a block, and the merger at that time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstCoagulation {
    pub t: f64,
    /// Blocks taking part over blocks just before, `k / b`.
    pub fraction: f64,
    /// Mark `x` of the merger in the Poisson construction, drawn from its
    /// law given `(b, k)`. Its unconditional law is `Lambda / Lambda([0,1])`
    /// for every `n_large`, while `k / b` only approaches it when `b` is large.
    pub mark: f64,
}

/// Draws the mark of a merger that took `k` of `b` blocks, with law
/// proportional to `x^{k-2} (1-x)^{b-k} Lambda(dx)`.
fn sample_mark<R: Rng + ?Sized>(m: &LambdaMeasure, b: usize, k: usize, rng: &mut R) -> Result<f64> {
    let (k2, bk) = ((k - 2) as f64, (b - k) as f64);
    // log weights, since (1-x)^{b-k} underflows for large b
    let ln_w = m
        .components()
        .map(|c| {
            Ok(match c {
                Component::Kingman(_) => f64::NEG_INFINITY,
                Component::Atom(a) if a.location == 1.0 => {
                    if k == b {
                        a.mass.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Component::Atom(a) => {
                    a.mass.ln() + k2 * a.location.ln() + bk * (-a.location).ln_1p()
                }
                Component::Density(d) => match d.shape() {
                    DensityShape::Beta { alpha } => {
                        d.weight().ln() + ln_beta(k as f64 - alpha, bk + alpha) - d.ln_norm()
                    }
                    DensityShape::Custom { .. } => custom_lambda_bk(d, b, k)?.ln(),
                },
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let top = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numerical(format!(
            "no component of {} can merge {k} of {b} blocks",
            m.label()
        )));
    }
    let w: Vec<f64> = ln_w.iter().map(|l| (l - top).exp()).collect();
    let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
    let pick = w
        .iter()
        .position(|x| {
            u -= x;
            u < 0.0
        })
        .unwrap_or(w.len() - 1);
    match m
        .components()
        .nth(pick)
        .expect("index from the same iterator")
    {
        Component::Atom(a) => Ok(a.location),
        Component::Density(d) => match d.shape() {
            DensityShape::Beta { alpha } => Ok(Beta::new(k as f64 - alpha, bk + alpha)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(rng)),
            DensityShape::Custom { .. } => {
                let opts = QuadOptions::new(1e-10);
                let f = |y: f64| y.powf(k2) * (1.0 - y).powf(bk) * d.eval(y);
                let target = rng.random::<f64>() * custom_lambda_bk(d, b, k)?;
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if integrate_singular(f, 0.0, mid, k2 + d.left_exponent(), 0.0, opts)?.value
                        < target
                    {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        },
        Component::Kingman(_) => unreachable!("the Kingman component has zero weight"),
    }
}

/// Samples of the first coagulation time of 1 and 2 and of the merger at
/// that moment, started from `n_large` singletons.
pub fn first_coagulation_observables(
    m: &LambdaMeasure,
    n_large: usize,
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<FirstCoagulation>> {
    if m.kingman_mass() > 0.0 {
        return Err(invalid("the observables need a measure without mass at 0"));
    }
    let sim = LambdaSimulator::new(m, n_large)?;
    stream.try_par_replicates(reps, |rng| {
        let (t, k, b) = sim.first_pair_merger(n_large, rng)?;
        Ok(FirstCoagulation {
            t,
            fraction: k as f64 / b as f64,
            mark: sample_mark(m, b, k, rng)?,
        })
    })
}

/// Number of merger events from `n` blocks down to one, per replicate.
pub fn collision_count(
    m: &LambdaMeasure,
    n: usize,
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<usize>> {
    let sim = LambdaSimulator::new(m, n)?;
    stream.try_par_replicates(reps, |rng| sim.collision_count(n, rng))
}

/// One point of a discrete selective-sweep intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rate: f64,
    /// Selective advantage in `(0, 1)`.
    pub s: f64,
    /// Recombination distance, `>= 0`.
    pub r: f64,
}

/// Limit measure of recurrent selective sweeps: `delta_0` plus, for every
/// point, an atom at `p = e^{-r/s}` of mass `s * rate * p^2`.
pub fn sweep_measure(points: &[SweepPoint]) -> Result<LambdaMeasure> {
    let mut m = LambdaMeasure::kingman();
    for pt in points {
        if !(pt.rate > 0.0 && pt.s > 0.0 && pt.s < 1.0 && pt.r >= 0.0) {
            return Err(invalid(format!("invalid sweep point {pt:?}")));
        }
        let p = (-pt.r / pt.s).exp();
        if p == 0.0 {
            continue;
        }
        let atom = LambdaMeasure::new(
            0.0,
            vec![Atom {
                location: p,
                mass: pt.s * pt.rate * p * p,
            }],
            vec![],
        )?;
        m = m.plus(&atom);
    }
    Ok(m)
}
