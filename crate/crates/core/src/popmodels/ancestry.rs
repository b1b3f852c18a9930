use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::partition::Partition;
use crate::{invalid, Result};

/// Ancestral partition of a sample traced back in time: the partition
/// after every change, starting from singletons at time 0. Several blocks
/// may merge at one step (a Wright-Fisher generation can hold two mergers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncestryPath {
    n: usize,
    steps: Vec<(f64, Partition)>,
}

impl AncestryPath {
    fn new(n: usize) -> Self {
        Self {
            n,
            steps: vec![(0.0, Partition::singletons(n))],
        }
    }

    fn record(&mut self, t: f64, blocks: &[Vec<usize>]) -> Result<()> {
        let p = Partition::new(self.n, blocks.to_vec())?;
        self.steps.push((t, p));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(time, partition)` after each change; the first entry is `(0, singletons)`.
    pub fn steps(&self) -> &[(f64, Partition)] {
        &self.steps
    }

    pub fn partition_at(&self, t: f64) -> &Partition {
        let i = self.steps.partition_point(|(s, _)| *s <= t);
        &self.steps[i.max(1) - 1].1
    }

    pub fn blocks_at(&self, t: f64) -> usize {
        self.partition_at(t).k()
    }

    /// Time of the first merger, if any happened.
    pub fn first_merger_time(&self) -> Option<f64> {
        self.steps.get(1).map(|s| s.0)
    }

    pub fn final_partition(&self) -> &Partition {
        &self.steps.last().expect("path is never empty").1
    }
}

fn check_sample(pop: usize, k: usize) -> Result<()> {
    if pop < 2 || k == 0 || k > pop {
        return Err(invalid("need N >= 2 and 1 <= k <= N"));
    }
    Ok(())
}

/// Lineages of `k` sampled individuals in a Moran population of size `N`
/// where every individual carries a rate-1 clock; when it rings, the
/// individual is replaced by the offspring of a uniform other individual.
/// Times are reported on the scale `t' = 2t/(N-1)`, and tracing stops at
/// `horizon` (in that scale) or at the common ancestor.
pub fn moran_ancestry<R: Rng + ?Sized>(
    pop: usize,
    k: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<AncestryPath> {
    check_sample(pop, k)?;
    let scale = 2.0 / (pop - 1) as f64;
    let mut path = AncestryPath::new(k);
    let mut blocks: Vec<Vec<usize>> = (1..=k).map(|i| vec![i]).collect();
    let mut position: Vec<usize> = (0..k).collect();
    let mut occupant: HashMap<usize, usize> = (0..k).map(|i| (i, i)).collect();
    let mut t = 0.0;
    while blocks.len() > 1 {
        let e: f64 = Exp1.sample(rng);
        t += e / blocks.len() as f64;
        if t * scale > horizon {
            break;
        }
        let i = rng.random_range(0..blocks.len());
        let mut j = rng.random_range(0..pop - 1);
        if j >= position[i] {
            j += 1;
        }
        occupant.remove(&position[i]);
        match occupant.get(&j).copied() {
            Some(l) => {
                let moved = std::mem::take(&mut blocks[i]);
                blocks[l].extend(moved);
                let last = blocks.len() - 1;
                blocks.swap_remove(i);
                position.swap_remove(i);
                if i != last {
                    occupant.insert(position[i], i);
                }
                path.record(t * scale, &blocks)?;
            }
            None => {
                position[i] = j;
                occupant.insert(j, i);
            }
        }
    }
    Ok(path)
}

/// Lineages of `k` sampled individuals in a Wright-Fisher population of
/// size `N`: every generation each lineage picks a uniform parent, and
/// lineages with the same parent merge. Times are generations.
pub fn wf_ancestry<R: Rng + ?Sized>(
    pop: usize,
    k: usize,
    generations: usize,
    rng: &mut R,
) -> Result<AncestryPath> {
    check_sample(pop, k)?;
    let mut path = AncestryPath::new(k);
    let mut blocks: Vec<Vec<usize>> = (1..=k).map(|i| vec![i]).collect();
    for g in 1..=generations {
        if blocks.len() == 1 {
            break;
        }
        blocks = wf_generation_step(pop, blocks, rng);
        if blocks.len() < path.final_partition().k() {
            path.record(g as f64, &blocks)?;
        }
    }
    Ok(path)
}

/// One generation back: blocks choosing the same parent merge.
pub(crate) fn wf_generation_step<R: Rng + ?Sized>(
    pop: usize,
    blocks: Vec<Vec<usize>>,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut by_parent: Vec<(usize, Vec<usize>)> = blocks
        .into_iter()
        .map(|b| (rng.random_range(0..pop), b))
        .collect();
    by_parent.sort_by_key(|(p, _)| *p);
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut last = usize::MAX;
    for (p, b) in by_parent {
        if p == last {
            out.last_mut().expect("previous group exists").extend(b);
        } else {
            out.push(b);
            last = p;
        }
    }
    out
}
