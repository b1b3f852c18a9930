use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::lambda::LambdaMeasure;
use crate::{invalid, Result};

/// Sample path of a CSBP, recorded at grid points or jump times.
///
/// Between two recorded points the mass decays from the left value at rate
/// `decay_rate` (0 for grid-based paths). Zero is absorbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbpPath {
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    pub horizon: f64,
    pub decay_rate: f64,
}

impl CsbpPath {
    /// `Z_t`, or `None` beyond the horizon.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return None;
        }
        let i = self.times.partition_point(|s| *s <= t).checked_sub(1)?;
        Some(self.masses[i] * (-self.decay_rate * (t - self.times[i])).exp())
    }

    pub fn final_mass(&self) -> f64 {
        self.value_at(self.horizon)
            .expect("horizon lies on the path")
    }

    /// First recorded time at which the mass is 0.
    pub fn extinction_time(&self) -> Option<f64> {
        self.masses
            .iter()
            .position(|z| *z == 0.0)
            .map(|i| self.times[i])
    }

    /// CSV with columns `t,Z_t`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "Z_t"])?;
        for (t, z) in self.times.iter().zip(&self.masses) {
            out.write_record([t.to_string(), z.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Euler scheme for the Feller diffusion `dZ = sqrt(Z) dW`, clamped at 0
/// and absorbed there.
pub fn feller_simulate<R: Rng + ?Sized>(
    z0: f64,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<CsbpPath> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(invalid("z0 must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be finite and >= 0"));
    }
    let steps = (horizon / dt).round() as usize;
    let sqrt_dt = dt.sqrt();
    let mut times = vec![0.0];
    let mut masses = vec![z0];
    let mut z = z0;
    for i in 1..=steps {
        let n: f64 = StandardNormal.sample(rng);
        z = (z + z.sqrt() * sqrt_dt * n).max(0.0);
        times.push((i as f64 * dt).min(horizon));
        masses.push(z);
        if z == 0.0 {
            break;
        }
    }
    Ok(CsbpPath {
        times,
        masses,
        horizon,
        decay_rate: 0.0,
    })
}

/// Lamperti transform of a compound-Poisson Lévy process: the CSBP with
/// mechanism `psi` of a purely atomic `Lambda`.
///
/// The Lévy process has jumps `+x` at rate `Lambda({x}) / x^2` and drift
/// `-sum Lambda({x}) / x`. Between jumps the time-changed mass decays
/// exponentially, and jumps arrive at rate proportional to the mass, so the
/// path is simulated event by event without discretisation.
pub fn lamperti_csbp<R: Rng + ?Sized>(
    m: &LambdaMeasure,
    z0: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<CsbpPath> {
    if m.kingman_mass() > 0.0 || !m.densities().is_empty() {
        return Err(invalid(
            "the Lamperti simulation needs a purely atomic Lambda; use feller_simulate for the diffusive part",
        ));
    }
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(invalid("z0 must be positive"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be finite and >= 0"));
    }
    let rates: Vec<f64> = m
        .atoms()
        .iter()
        .map(|a| a.mass / (a.location * a.location))
        .collect();
    let total_rate: f64 = rates.iter().sum();
    let drift: f64 = m.atoms().iter().map(|a| a.mass / a.location).sum();
    let mut times = vec![0.0];
    let mut masses = vec![z0];
    let (mut t, mut z) = (0.0, z0);
    loop {
        // Lévy-process time to the next jump, and the real time it takes
        let e: f64 = Exp1.sample(rng);
        let levy_time = e / total_rate;
        if drift * levy_time >= z {
            // the process reaches 0 only as t → ∞
            break;
        }
        let dt = -(-drift * levy_time / z).ln_1p() / drift;
        if t + dt > horizon {
            break;
        }
        let mut u = rng.random::<f64>() * total_rate;
        let jump = m
            .atoms()
            .iter()
            .zip(&rates)
            .find(|(_, r)| {
                u -= **r;
                u < 0.0
            })
            .map_or_else(
                || m.atoms()[m.atoms().len() - 1].location,
                |(a, _)| a.location,
            );
        t += dt;
        z = z * (-drift * dt).exp() + jump;
        times.push(t);
        masses.push(z);
    }
    Ok(CsbpPath {
        times,
        masses,
        horizon,
        decay_rate: drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbp::{u_t_lambda, BranchingMechanism};
    use crate::numerics::{ks_two_sample, mean_se, RngStream};
    use proptest::prelude::{any, prop_assert, proptest};

    #[test]
    fn feller_martingale_and_extinction() {
        let stream = RngStream::new(11, 0);
        let ends = stream.par_replicates(4000, |rng| {
            feller_simulate(1.0, 2e-3, 2.0, rng).unwrap().final_mass()
        });
        let (mean, se) = mean_se(&ends);
        assert!((mean - 1.0).abs() < 3.5 * se, "{mean} ± {se}");
        let zeros: Vec<f64> = ends.iter().map(|z| f64::from(*z == 0.0)).collect();
        let (p, se) = mean_se(&zeros);
        // Euler absorbs slightly early; allow a small discretisation band
        assert!((p - (-1f64).exp()).abs() < 3.5 * se + 0.02, "{p} ± {se}");
    }

    #[test]
    fn feller_laplace_transform() {
        let stream = RngStream::new(12, 0);
        let xs = stream.par_replicates(4000, |rng| {
            (-feller_simulate(1.0, 1e-3, 1.0, rng).unwrap().final_mass()).exp()
        });
        let (mean, se) = mean_se(&xs);
        let want = (-u_t_lambda(&BranchingMechanism::feller(), 1.0, 1.0).unwrap()).exp();
        assert!((mean - want).abs() < 3.5 * se, "{mean} ± {se} vs {want}");
    }

    #[test]
    fn lamperti_rejects_non_atomic() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(lamperti_csbp(&LambdaMeasure::beta(1.5).unwrap(), 1.0, 1.0, &mut rng).is_err());
        assert!(lamperti_csbp(&LambdaMeasure::kingman(), 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn lamperti_without_jumps_follows_the_drift() {
        let m = LambdaMeasure::dirac(0.5).unwrap();
        let stream = RngStream::new(3, 0);
        let paths = stream.par_replicates(200, |rng| lamperti_csbp(&m, 1.0, 0.05, rng).unwrap());
        let quiet: Vec<&CsbpPath> = paths.iter().filter(|p| p.times.len() == 1).collect();
        assert!(!quiet.is_empty());
        for p in quiet {
            for t in [0.0, 0.01, 0.05] {
                let want = (-2.0f64 * t).exp();
                assert!((p.value_at(t).unwrap() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lamperti_laplace_transform() {
        let m = LambdaMeasure::dirac(0.5)
            .unwrap()
            .plus(&LambdaMeasure::dirac(0.1).unwrap().scaled(0.3).unwrap());
        let stream = RngStream::new(4, 0);
        let xs = stream.par_replicates(20_000, |rng| {
            (-2.0 * lamperti_csbp(&m, 1.0, 1.0, rng).unwrap().final_mass()).exp()
        });
        let (mean, se) = mean_se(&xs);
        let want = (-u_t_lambda(&BranchingMechanism::from_lambda(m), 1.0, 2.0).unwrap()).exp();
        assert!((mean - want).abs() < 3.5 * se, "{mean} ± {se} vs {want}");
    }

    #[test]
    fn lamperti_branching_property() {
        let m = LambdaMeasure::dirac(0.5).unwrap();
        let a = RngStream::new(5, 0).par_replicates(4000, |rng| {
            lamperti_csbp(&m, 1.0, 1.0, rng).unwrap().final_mass()
                + lamperti_csbp(&m, 1.0, 1.0, rng).unwrap().final_mass()
        });
        let b = RngStream::new(5, 1).par_replicates(4000, |rng| {
            lamperti_csbp(&m, 2.0, 1.0, rng).unwrap().final_mass()
        });
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 1e-3);
    }

    #[test]
    fn csv_output() {
        let path = CsbpPath {
            times: vec![0.0, 0.5],
            masses: vec![1.0, 0.0],
            horizon: 1.0,
            decay_rate: 0.0,
        };
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,Z_t\n0,1\n0.5,0\n");
        assert_eq!(path.extinction_time(), Some(0.5));
        assert_eq!(path.final_mass(), 0.0);
        assert_eq!(path.value_at(1.5), None);
    }

    proptest! {
        #[test]
        fn feller_paths_are_absorbed(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 0).rng();
            let p = feller_simulate(0.2, 0.01, 3.0, &mut rng).unwrap();
            prop_assert!(p.masses.iter().all(|z| *z >= 0.0));
            if let Some(i) = p.masses.iter().position(|z| *z == 0.0) {
                prop_assert!(i == p.masses.len() - 1);
                prop_assert!(p.final_mass() == 0.0);
            }
        }

        #[test]
        fn lamperti_paths_stay_positive(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 0).rng();
            let m = LambdaMeasure::dirac(0.3).unwrap();
            let p = lamperti_csbp(&m, 0.5, 2.0, &mut rng).unwrap();
            prop_assert!(p.masses.iter().all(|z| *z > 0.0));
            prop_assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
