//! Exchangeable random partitions: data types, samplers, exact sampling
//! formulas and enumeration.

mod enumerate;
mod exact;
mod samplers;
mod tauberian;

use serde::{Deserialize, Serialize};

use crate::{invalid, Result};

pub use enumerate::{integer_partitions, set_partitions, MAX_ENUMERATION_N};
pub use exact::{
    ewens_block_count_law, ewens_expected_blocks, ewens_partition_prob, ewens_spectrum_prob,
    pd_alpha_expected_blocks, pd_alpha_partition_prob,
};
pub use samplers::{
    crp_block_labels, crp_sample, paintbox_sample, pd_poisson_masses, stick_breaking_masses,
    PoissonMasses,
};
pub use tauberian::{tauberian_diagnostics, TauberianRow};

/// A set partition of `{1..n}`.
///
/// Blocks are sorted internally and listed in increasing order of their
/// least elements, so equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = crate::Error;
    fn try_from(r: RawPartition) -> Result<Self> {
        Partition::new(r.n, r.blocks)
    }
}

impl Partition {
    /// Validates and canonicalises a list of blocks of 1-based labels.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n + 1];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(invalid("empty block"));
            }
            b.sort_unstable();
            for &x in b.iter() {
                if x == 0 || x > n {
                    return Err(invalid(format!("label {x} outside 1..={n}")));
                }
                if seen[x] {
                    return Err(invalid(format!("label {x} appears twice")));
                }
                seen[x] = true;
            }
        }
        if seen.iter().skip(1).any(|s| !s) {
            return Err(invalid("blocks do not cover 1..=n"));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// Builds a partition from a block identifier per element (element `i`
    /// is `labels[i-1]`). Identifiers are arbitrary.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Self {
        let mut index = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let b = *index.entry(*l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i + 1);
        }
        // first-occurrence order is least-element order and each block is sorted
        Self {
            n: labels.len(),
            blocks,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            blocks: (1..=n).map(|i| vec![i]).collect(),
        }
    }

    pub fn one_block(n: usize) -> Self {
        Self {
            n,
            blocks: if n == 0 {
                vec![]
            } else {
                vec![(1..=n).collect()]
            },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(Vec::len)
    }

    /// Block index (0-based) of each element, element order.
    pub fn labels(&self) -> Vec<usize> {
        let mut l = vec![0; self.n];
        for (bi, b) in self.blocks.iter().enumerate() {
            for &x in b {
                l[x - 1] = bi;
            }
        }
        l
    }

    /// Restriction to `{1..m}`.
    pub fn restrict(&self, m: usize) -> Result<Self> {
        if m > self.n {
            return Err(invalid(format!("cannot restrict [{}] to [{m}]", self.n)));
        }
        Ok(Self::from_labels(&self.labels()[..m]))
    }

    /// Image under the relabelling `i -> sigma[i-1]` (a permutation of `1..=n`).
    pub fn relabel(&self, sigma: &[usize]) -> Result<Self> {
        if sigma.len() != self.n {
            return Err(invalid("permutation length differs from n"));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&x| sigma[x - 1]).collect())
            .collect();
        Self::new(self.n, blocks)
    }

    /// Whether `i` and `j` (1-based) share a block.
    pub fn same_block(&self, i: usize, j: usize) -> bool {
        let l = self.labels();
        l[i - 1] == l[j - 1]
    }

    pub fn spectrum(&self) -> AlleleSpectrum {
        let mut a = vec![0u64; self.n];
        for s in self.block_sizes() {
            a[s - 1] += 1;
        }
        AlleleSpectrum { n: self.n, a }
    }

    /// Block count, spectrum, and size of the block containing 1.
    pub fn stats(&self) -> PartitionStats {
        PartitionStats {
            k: self.k(),
            spectrum: self.spectrum(),
            size_biased_block_size: self.blocks.first().map_or(0, Vec::len),
        }
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                let xs: Vec<String> = b.iter().map(usize::to_string).collect();
                format!("{{{}}}", xs.join(","))
            })
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub k: usize,
    pub spectrum: AlleleSpectrum,
    pub size_biased_block_size: usize,
}

pub fn partition_stats(pi: &Partition) -> PartitionStats {
    pi.stats()
}

/// Allelic spectrum: `a[j-1]` is the number of blocks of size `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlleleSpectrum {
    pub n: usize,
    pub a: Vec<u64>,
}

impl AlleleSpectrum {
    pub fn new(n: usize, mut a: Vec<u64>) -> Result<Self> {
        if a.len() > n {
            if a[n..].iter().any(|&x| x != 0) {
                return Err(invalid("spectrum has blocks larger than n"));
            }
            a.truncate(n);
        }
        a.resize(n, 0);
        let total: u64 = a.iter().enumerate().map(|(j, x)| (j as u64 + 1) * x).sum();
        if total != n as u64 {
            return Err(invalid(format!("sum of j*a_j is {total}, expected {n}")));
        }
        Ok(Self { n, a })
    }

    /// Number of blocks of size `j` (1-based).
    pub fn count(&self, j: usize) -> u64 {
        if j == 0 || j > self.n {
            0
        } else {
            self.a[j - 1]
        }
    }

    pub fn blocks(&self) -> u64 {
        self.a.iter().sum()
    }
}

/// Ranked mass partition with dust: `dust + sum(masses) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassPartition {
    dust: f64,
    masses: Vec<f64>,
}

impl MassPartition {
    /// Masses are ranked on construction; zero masses are dropped.
    pub fn new(dust: f64, mut masses: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&dust) || masses.iter().any(|m| !(*m >= 0.0 && *m <= 1.0)) {
            return Err(invalid("masses must lie in [0, 1]"));
        }
        let total = dust + masses.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("masses sum to {total}")));
        }
        masses.retain(|m| *m > 0.0);
        masses.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { dust, masses })
    }

    /// Ranks a list of masses and assigns the remainder to dust.
    pub fn with_remainder_as_dust(masses: Vec<f64>) -> Result<Self> {
        let s: f64 = masses.iter().sum();
        if s > 1.0 + 1e-12 {
            return Err(invalid(format!("masses sum to {s} > 1")));
        }
        Self::new((1.0 - s).max(0.0), masses)
    }

    pub fn dust(&self) -> f64 {
        self.dust
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Parameters of the two Poisson-Dirichlet families in use:
/// `PD(0, theta)` and `PD(alpha, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdParams {
    alpha: f64,
    theta: f64,
}

impl PdParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        let ewens = alpha == 0.0 && theta > 0.0 && theta.is_finite();
        let stable = theta == 0.0 && alpha > 0.0 && alpha < 1.0;
        if !(ewens || stable) {
            return Err(invalid(format!(
                "unsupported PD({alpha}, {theta}): need alpha = 0 < theta or theta = 0 < alpha < 1"
            )));
        }
        Ok(Self { alpha, theta })
    }

    pub fn ewens(theta: f64) -> Result<Self> {
        Self::new(0.0, theta)
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stats_examples() {
        let s = Partition::singletons(5).stats();
        assert_eq!((s.k, s.size_biased_block_size), (5, 1));
        assert_eq!(s.spectrum.a, vec![5, 0, 0, 0, 0]);
        let s = Partition::one_block(5).stats();
        assert_eq!((s.k, s.size_biased_block_size), (1, 5));
        assert_eq!(s.spectrum.count(5), 1);
        let p = Partition::new(3, vec![vec![3, 1], vec![2]]).unwrap();
        let s = p.stats();
        assert_eq!((s.k, s.size_biased_block_size), (2, 2));
        assert_eq!((s.spectrum.count(1), s.spectrum.count(2)), (1, 1));
    }

    #[test]
    fn validation() {
        assert!(Partition::new(3, vec![vec![1, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![1, 2], vec![2]]).is_err());
        assert!(Partition::new(2, vec![vec![1, 3]]).is_err());
        assert!(MassPartition::new(0.5, vec![0.2]).is_err());
        assert!(PdParams::new(0.5, 1.0).is_err());
        assert!(PdParams::new(0.0, 0.0).is_err());
        assert!(PdParams::stable(1.0).is_err());
        assert!(AlleleSpectrum::new(3, vec![1, 0]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let p = Partition::new(4, vec![vec![2, 4], vec![1], vec![3]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":4,"blocks":[[1],[2,4],[3]]}"#);
        let q: Partition = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Partition>(r#"{"n":2,"blocks":[[1]]}"#).is_err());
    }

    #[test]
    fn mass_partition_ranks() {
        let m = MassPartition::new(0.1, vec![0.2, 0.7, 0.0]).unwrap();
        assert_eq!(m.masses(), &[0.7, 0.2]);
    }

    proptest! {
        #[test]
        fn from_labels_is_canonical(labels in proptest::collection::vec(0u8..5, 1..12)) {
            let p = Partition::from_labels(&labels);
            let q = Partition::new(p.n(), p.blocks().to_vec()).unwrap();
            prop_assert_eq!(&p, &q);
            let sizes: usize = p.block_sizes().sum();
            prop_assert_eq!(sizes, labels.len());
            let spec = p.spectrum();
            let weighted: u64 = spec.a.iter().enumerate().map(|(j, a)| (j as u64 + 1) * a).sum();
            prop_assert_eq!(weighted as usize, labels.len());
            for w in p.blocks().windows(2) {
                prop_assert!(w[0][0] < w[1][0]);
            }
        }

        #[test]
        fn restriction_composes(labels in proptest::collection::vec(0u8..4, 2..10), a in 0usize..10, b in 0usize..10) {
            let p = Partition::from_labels(&labels);
            let (m1, m2) = (a.min(b).min(p.n()), a.max(b).min(p.n()));
            let direct = p.restrict(m1).unwrap();
            let twice = p.restrict(m2).unwrap().restrict(m1).unwrap();
            prop_assert_eq!(direct, twice);
        }

        #[test]
        fn relabel_preserves_spectrum(labels in proptest::collection::vec(0u8..4, 1..9), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let p = Partition::from_labels(&labels);
            let mut sigma: Vec<usize> = (1..=p.n()).collect();
            sigma.shuffle(&mut crate::RngStream::new(seed, 0).rng());
            let q = p.relabel(&sigma).unwrap();
            prop_assert_eq!(p.spectrum(), q.spectrum());
        }
    }
}
