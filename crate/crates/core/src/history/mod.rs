//! Coalescent histories: the shared output of every coalescent simulator.

mod genealogy;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::partition::Partition;
use crate::{invalid, Error, Result};

pub use genealogy::{Genealogy, GenealogyNode};

/// One merger: the blocks with least elements `merged` (1-based labels)
/// coalesce at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub t: f64,
    pub merged: Vec<usize>,
}

/// Time-ordered merger events starting from `n` singletons.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescentHistory {
    n: usize,
    model: String,
    events: Vec<MergeEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryStats {
    pub tree_length: f64,
    pub tmrca: f64,
}

impl CoalescentHistory {
    pub fn new(n: usize, model: impl Into<String>) -> Self {
        Self {
            n,
            model: model.into(),
            events: Vec::new(),
        }
    }

    /// Validating constructor; replays the events.
    pub fn from_events(
        n: usize,
        model: impl Into<String>,
        mut events: Vec<MergeEvent>,
    ) -> Result<Self> {
        for e in &mut events {
            e.merged.sort_unstable();
        }
        let h = Self {
            n,
            model: model.into(),
            events,
        };
        h.validate()?;
        Ok(h)
    }

    /// Appends an event without validation; simulators guarantee validity.
    pub(crate) fn push(&mut self, t: f64, mut merged: Vec<usize>) {
        merged.sort_unstable();
        self.events.push(MergeEvent { t, merged });
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn events(&self) -> &[MergeEvent] {
        &self.events
    }

    /// Checks time ordering and that every event merges at least two
    /// distinct live blocks.
    pub fn validate(&self) -> Result<()> {
        let mut live = vec![false; self.n + 1];
        for x in live.iter_mut().skip(1) {
            *x = true;
        }
        let mut last = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.t.is_finite() && e.t >= 0.0) || (i > 0 && e.t <= last) {
                return Err(invalid(format!(
                    "event {i}: times must be strictly increasing"
                )));
            }
            last = e.t;
            if e.merged.len() < 2 {
                return Err(invalid(format!("event {i}: fewer than two blocks merged")));
            }
            let mut sorted = e.merged.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != e.merged.len() {
                return Err(invalid(format!("event {i}: repeated block")));
            }
            for &b in &sorted {
                if b == 0 || b > self.n || !live[b] {
                    return Err(invalid(format!("event {i}: block {b} is not live")));
                }
            }
            for &b in &sorted[1..] {
                live[b] = false;
            }
        }
        Ok(())
    }

    /// Number of blocks after the last event.
    pub fn final_blocks(&self) -> usize {
        self.n
            - self
                .events
                .iter()
                .map(|e| e.merged.len() - 1)
                .sum::<usize>()
    }

    pub fn is_complete(&self) -> bool {
        self.n >= 1 && self.final_blocks() == 1
    }

    /// Right-continuous block-count step function as `(time, count)` pairs,
    /// starting with `(0, n)`.
    pub fn block_count_steps(&self) -> Vec<(f64, usize)> {
        let mut k = self.n;
        let mut out = vec![(0.0, k)];
        for e in &self.events {
            k -= e.merged.len() - 1;
            out.push((e.t, k));
        }
        out
    }

    /// `N_t`, the number of blocks at time `t`.
    pub fn blocks_at(&self, t: f64) -> usize {
        let idx = self.events.partition_point(|e| e.t <= t);
        self.n
            - self.events[..idx]
                .iter()
                .map(|e| e.merged.len() - 1)
                .sum::<usize>()
    }

    fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "history ends with {} blocks; length and MRCA time need a complete history",
                self.final_blocks()
            )))
        }
    }

    /// Time of the most recent common ancestor.
    pub fn tmrca(&self) -> Result<f64> {
        self.require_complete()?;
        Ok(self.events.last().map_or(0.0, |e| e.t))
    }

    /// Total branch length `L_n = sum_k k * (holding time at k blocks)`.
    pub fn tree_length(&self) -> Result<f64> {
        self.require_complete()?;
        let mut k = self.n as f64;
        let mut prev = 0.0;
        let mut len = 0.0;
        for e in &self.events {
            len += k * (e.t - prev);
            prev = e.t;
            k -= (e.merged.len() - 1) as f64;
        }
        Ok(len)
    }

    pub fn stats(&self) -> Result<HistoryStats> {
        Ok(HistoryStats {
            tree_length: self.tree_length()?,
            tmrca: self.tmrca()?,
        })
    }

    /// Holding times at successive states, paired with the block count
    /// during the holding period.
    pub fn holding_times(&self) -> Vec<(usize, f64)> {
        let mut k = self.n;
        let mut prev = 0.0;
        self.events
            .iter()
            .map(|e| {
                let out = (k, e.t - prev);
                prev = e.t;
                k -= e.merged.len() - 1;
                out
            })
            .collect()
    }

    /// Replays the first `upto` events and returns the partition of `[n]`.
    pub fn partition_after(&self, upto: usize) -> Partition {
        let mut parent: Vec<usize> = (0..=self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.events[..upto.min(self.events.len())] {
            let root = *e.merged.iter().min().expect("non-empty event");
            for &b in &e.merged {
                let r = find(&mut parent, b);
                parent[r] = root;
            }
        }
        let labels: Vec<usize> = (1..=self.n).map(|i| find(&mut parent, i)).collect();
        Partition::from_labels(&labels)
    }

    /// Partition at time `t` (right-continuous).
    pub fn partition_at(&self, t: f64) -> Partition {
        self.partition_after(self.events.partition_point(|e| e.t <= t))
    }

    /// The partition visited when the chain had exactly `k` blocks, if it did.
    pub fn partition_with_blocks(&self, k: usize) -> Option<Partition> {
        let mut blocks = self.n;
        if blocks == k {
            return Some(self.partition_after(0));
        }
        for (i, e) in self.events.iter().enumerate() {
            blocks -= e.merged.len() - 1;
            if blocks == k {
                return Some(self.partition_after(i + 1));
            }
            if blocks < k {
                return None;
            }
        }
        None
    }

    /// Export in the interchange schema: merged blocks are given as 0-based
    /// indices among the live blocks ordered by least element.
    pub fn to_json(&self, seed_info: serde_json::Value) -> HistoryJson {
        let mut live: Vec<usize> = (1..=self.n).collect();
        let events = self
            .events
            .iter()
            .map(|e| {
                let mut idx: Vec<usize> = e
                    .merged
                    .iter()
                    .map(|b| live.binary_search(b).expect("live block"))
                    .collect();
                idx.sort_unstable();
                let keep = idx[0];
                for &i in idx[1..].iter().rev() {
                    live.remove(i);
                }
                debug_assert!(live[keep] == *e.merged.iter().min().unwrap());
                JsonEvent { t: e.t, merge: idx }
            })
            .collect();
        HistoryJson {
            n: self.n,
            model: self.model.clone(),
            seed_info,
            events,
        }
    }

    pub fn from_json(j: &HistoryJson) -> Result<Self> {
        let mut live: Vec<usize> = (1..=j.n).collect();
        let mut events = Vec::with_capacity(j.events.len());
        for (ei, e) in j.events.iter().enumerate() {
            let mut idx = e.merge.clone();
            idx.sort_unstable();
            idx.dedup();
            if idx.len() < 2 || idx.len() != e.merge.len() || *idx.last().unwrap() >= live.len() {
                return Err(invalid(format!("event {ei}: invalid block indices")));
            }
            let merged: Vec<usize> = idx.iter().map(|&i| live[i]).collect();
            for &i in idx[1..].iter().rev() {
                live.remove(i);
            }
            events.push(MergeEvent { t: e.t, merged });
        }
        Self::from_events(j.n, j.model.clone(), events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonEvent {
    pub t: f64,
    pub merge: Vec<usize>,
}

/// Interchange form of a [`CoalescentHistory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryJson {
    pub n: usize,
    pub model: String,
    pub seed_info: serde_json::Value,
    pub events: Vec<JsonEvent>,
}

/// Live blocks of a coalescent, identified by their least elements.
#[derive(Debug, Clone)]
pub(crate) struct LiveBlocks {
    least: Vec<usize>,
}

impl LiveBlocks {
    pub fn new(n: usize) -> Self {
        Self {
            least: (1..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.least.len()
    }

    /// Merges a uniformly chosen `k`-subset of live blocks and returns the
    /// least elements of the merged blocks.
    pub fn merge_random<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Vec<usize> {
        let b = self.least.len();
        debug_assert!(2 <= k && k <= b);
        // partial Fisher-Yates: the chosen blocks end up at the tail
        for i in 0..k {
            let j = rng.random_range(0..b - i);
            self.least.swap(j, b - 1 - i);
        }
        let merged: Vec<usize> = self.least.split_off(b - k);
        let keep = *merged.iter().min().expect("k >= 2");
        self.least.push(keep);
        merged
    }
}
