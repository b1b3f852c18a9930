//! The Bolthausen-Sznitman coalescent built from random recursive trees:
//! every edge carries an Exp(1) clock, and when it rings the subtree below
//! the edge is merged into the vertex above it.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::history::CoalescentHistory;
use crate::numerics::RngStream;
use crate::{invalid, Result};

/// A recursive tree whose vertices are labelled by the blocks of a
/// partition. Vertices are stored in order of least element, so the root is
/// vertex 0 and every parent index is smaller than its child's.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecursiveTree {
    labels: Vec<Vec<usize>>,
    /// `parent[i]` is `None` for the root only.
    parent: Vec<Option<usize>>,
}

impl RecursiveTree {
    pub fn new(labels: Vec<Vec<usize>>, parent: Vec<Option<usize>>) -> Result<Self> {
        if labels.is_empty() || labels.len() != parent.len() {
            return Err(invalid("a tree needs one parent entry per label"));
        }
        let mut labels = labels;
        for l in &mut labels {
            if l.is_empty() {
                return Err(invalid("empty vertex label"));
            }
            l.sort_unstable();
        }
        let mins: Vec<usize> = labels.iter().map(|l| l[0]).collect();
        if mins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "vertices must be listed by increasing least element",
            ));
        }
        let mut all: Vec<usize> = labels.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(i, x)| *x != i + 1) {
            return Err(invalid("labels must partition 1..=n"));
        }
        if parent[0].is_some() {
            return Err(invalid("vertex 0 must be the root"));
        }
        if parent
            .iter()
            .enumerate()
            .skip(1)
            .any(|(i, p)| !matches!(p, Some(q) if *q < i))
        {
            return Err(invalid("parents must precede their children"));
        }
        Ok(Self { labels, parent })
    }

    /// The only tree with a single vertex labelled `[n]`.
    pub fn trivial(n: usize) -> Self {
        Self {
            labels: vec![(1..=n).collect()],
            parent: vec![None],
        }
    }

    pub fn n(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn parent(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    /// Vertices of the subtree rooted at `v`, `v` included, in index order.
    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut inside = vec![false; self.labels.len()];
        inside[v] = true;
        // parents precede children, so one forward pass suffices
        for i in v + 1..self.labels.len() {
            if let Some(p) = self.parent[i] {
                inside[i] = inside[p];
            }
        }
        (0..self.labels.len()).filter(|i| inside[*i]).collect()
    }
}

/// Uniform random recursive tree on the singletons of `[n]`: vertex `j + 1`
/// attaches to a uniform vertex among `1..=j`.
pub fn rrt_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RecursiveTree> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let parent = (0..n)
        .map(|j| (j > 0).then(|| rng.random_range(0..j)))
        .collect();
    Ok(RecursiveTree {
        labels: (1..=n).map(|i| vec![i]).collect(),
        parent,
    })
}

/// Every recursive tree whose vertex labels are the given blocks (listed by
/// least element); there are `(b-1)!` of them.
pub fn recursive_trees(labels: &[Vec<usize>]) -> Result<Vec<RecursiveTree>> {
    let b = labels.len();
    if b == 0 || b > 9 {
        return Err(invalid("enumeration supports 1 to 9 vertices"));
    }
    let path = (0..b).map(|i| i.checked_sub(1)).collect();
    RecursiveTree::new(labels.to_vec(), path)?;
    let mut out = Vec::new();
    let mut parent = vec![None; b];
    fn rec(
        i: usize,
        parent: &mut Vec<Option<usize>>,
        labels: &[Vec<usize>],
        out: &mut Vec<RecursiveTree>,
    ) {
        if i == parent.len() {
            out.push(RecursiveTree {
                labels: labels.to_vec(),
                parent: parent.clone(),
            });
            return;
        }
        for p in 0..i {
            parent[i] = Some(p);
            rec(i + 1, parent, labels, out);
        }
    }
    rec(1, &mut parent, labels, &mut out);
    Ok(out)
}

/// Cuts the edge above vertex `edge`: the subtree rooted there is removed
/// and all its labels join the label of its parent.
pub fn lift_edge(t: &RecursiveTree, edge: usize) -> Result<RecursiveTree> {
    let Some(Some(up)) = t.parent.get(edge).copied() else {
        return Err(invalid(format!("vertex {edge} has no edge above it")));
    };
    let removed = t.subtree(edge);
    let mut gone = vec![false; t.labels.len()];
    removed.iter().for_each(|v| gone[*v] = true);
    let mut new_index = vec![usize::MAX; t.labels.len()];
    let mut labels = Vec::new();
    let mut parent = Vec::new();
    for v in 0..t.labels.len() {
        if gone[v] {
            continue;
        }
        new_index[v] = labels.len();
        labels.push(t.labels[v].clone());
        parent.push(t.parent[v].map(|p| new_index[p]));
    }
    let target = &mut labels[new_index[up]];
    for v in removed {
        target.extend_from_slice(&t.labels[v]);
    }
    target.sort_unstable();
    Ok(RecursiveTree { labels, parent })
}

/// One cut of the lifting process.
struct Lift {
    t: f64,
    /// Least elements of the blocks that merged.
    merged: Vec<usize>,
}

/// The lifting process on a uniform recursive tree over singletons. Only the
/// minimum of the surviving edge clocks matters, and by memorylessness it is
/// Exp(#edges) with the ringing edge uniform, so clocks are drawn lazily.
struct LiftingProcess {
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    /// Surviving non-root vertices and their positions in that list.
    edges: Vec<usize>,
    pos: Vec<usize>,
    size: Vec<usize>,
    t: f64,
}

impl LiftingProcess {
    fn new<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut parent = vec![0; n];
        let mut children = vec![Vec::new(); n];
        for j in 1..n {
            let p = rng.random_range(0..j);
            parent[j] = p;
            children[p].push(j);
        }
        Self {
            parent,
            children,
            edges: (1..n).collect(),
            pos: (0..n).map(|v| v.saturating_sub(1)).collect(),
            size: vec![1; n],
            t: 0.0,
        }
    }

    fn root_size(&self) -> usize {
        self.size[0]
    }

    fn remove_edge(&mut self, v: usize) {
        let i = self.pos[v];
        let last = *self.edges.last().expect("edge list is non-empty");
        self.edges.swap_remove(i);
        if last != v {
            self.pos[last] = i;
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Lift> {
        if self.edges.is_empty() {
            return None;
        }
        let e: f64 = Exp1.sample(rng);
        self.t += e / self.edges.len() as f64;
        let v = self.edges[rng.random_range(0..self.edges.len())];
        let up = self.parent[v];
        if let Some(i) = self.children[up].iter().position(|c| *c == v) {
            self.children[up].swap_remove(i);
        }
        let mut merged = vec![up + 1];
        let mut absorbed = 0;
        let mut stack = vec![v];
        while let Some(w) = stack.pop() {
            merged.push(w + 1);
            absorbed += self.size[w];
            self.remove_edge(w);
            stack.append(&mut self.children[w]);
        }
        self.size[up] += absorbed;
        merged.sort_unstable();
        Some(Lift { t: self.t, merged })
    }
}

/// Bolthausen-Sznitman coalescent on `[n]` by lifting the edges of a uniform
/// recursive tree at independent Exp(1) times.
pub fn simulate_bs_rrt<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CoalescentHistory> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut h = CoalescentHistory::new(n, "bs (recursive tree)");
    let mut proc = LiftingProcess::new(n, rng);
    while let Some(l) = proc.step(rng) {
        h.push(l.t, l.merged);
    }
    Ok(h)
}

/// Per-replicate output of [`bs_statistics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsReplicate {
    /// `|block containing 1| / n` at each requested time.
    pub frequency_of_one: Vec<f64>,
    /// Time of the last merger.
    pub last_collision: f64,
}

/// Frequency of the block of 1 at the given times and the time of the last
/// collision, over `reps` independent runs from `n` singletons.
pub fn bs_statistics(
    n: usize,
    times: &[f64],
    reps: usize,
    stream: &RngStream,
) -> Result<Vec<BsReplicate>> {
    if n < 2 {
        return Err(invalid("n must be at least 2"));
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("times must be nonnegative and sorted"));
    }
    Ok(stream.par_replicates(reps, |rng| {
        let mut proc = LiftingProcess::new(n, rng);
        let mut freq = Vec::with_capacity(times.len());
        let mut next = 0;
        let mut last = 0.0;
        while let Some(l) = proc.step(rng) {
            while next < times.len() && times[next] < l.t {
                freq.push(proc.root_size() as f64 / n as f64);
                next += 1;
            }
            last = l.t;
        }
        freq.resize(times.len(), 1.0);
        BsReplicate {
            frequency_of_one: freq,
            last_collision: last,
        }
    }))
}
