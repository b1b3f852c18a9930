use serde::{Deserialize, Serialize};

use super::{crp_block_labels, pd_alpha_expected_blocks, PdParams};
use crate::numerics::{mean_se, RngStream};
use crate::{invalid, Result};

/// Monte Carlo block-count statistics of `PD(alpha, 0)` at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauberianRow {
    pub n: usize,
    pub kn_over_n_alpha: f64,
    pub kn_over_n_alpha_se: f64,
    /// `E(K_n)/n^alpha` from the exact mean.
    pub exact_kn_over_n_alpha: f64,
    pub singleton_fraction: f64,
    pub singleton_fraction_se: f64,
    pub doubleton_fraction: f64,
    pub doubleton_fraction_se: f64,
}

/// Block counts `K_n` and the fractions `K_{n,1}/K_n`, `K_{n,2}/K_n` along a
/// grid of sample sizes. One seating sequence per replicate is read off at
/// every grid point, which is legitimate because the seating plan is
/// consistent under restriction.
pub fn tauberian_diagnostics(
    pd: PdParams,
    n_grid: &[usize],
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<TauberianRow>> {
    if pd.theta() != 0.0 {
        return Err(invalid("diagnostics need theta = 0"));
    }
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(invalid("grid must contain positive sizes"));
    }
    let alpha = pd.alpha();
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let n_max = *grid.last().expect("non-empty");
    let per_rep: Vec<Vec<(f64, f64, f64)>> = stream.par_replicates(reps, |rng| {
        let labels = crp_block_labels(pd, n_max, rng);
        let mut sizes: Vec<usize> = Vec::new();
        let (mut k1, mut k2) = (0i64, 0i64);
        let mut out = Vec::with_capacity(grid.len());
        let mut g = 0;
        for (i, &l) in labels.iter().enumerate() {
            if l == sizes.len() {
                sizes.push(0);
            }
            let before = sizes[l];
            match before {
                0 => k1 += 1,
                1 => {
                    k1 -= 1;
                    k2 += 1
                }
                2 => k2 -= 1,
                _ => {}
            }
            sizes[l] += 1;
            while g < grid.len() && grid[g] == i + 1 {
                let k = sizes.len() as f64;
                out.push((
                    k / ((i + 1) as f64).powf(alpha),
                    k1 as f64 / k,
                    k2 as f64 / k,
                ));
                g += 1;
            }
        }
        out
    });
    Ok(grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let col = |f: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
                per_rep.iter().map(|r| f(&r[gi])).collect()
            };
            let (m0, s0) = mean_se(&col(|x| x.0));
            let (m1, s1) = mean_se(&col(|x| x.1));
            let (m2, s2) = mean_se(&col(|x| x.2));
            TauberianRow {
                n,
                kn_over_n_alpha: m0,
                kn_over_n_alpha_se: s0,
                exact_kn_over_n_alpha: pd_alpha_expected_blocks(alpha, n) / (n as f64).powf(alpha),
                singleton_fraction: m1,
                singleton_fraction_se: s1,
                doubleton_fraction: m2,
                doubleton_fraction_se: s2,
            }
        })
        .collect())
}
