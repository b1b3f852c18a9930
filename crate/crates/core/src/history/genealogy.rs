use serde::{Deserialize, Serialize};

use super::CoalescentHistory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenealogyNode {
    /// Time at which the node's block was formed (0 for leaves).
    pub time: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Number of leaves below the node.
    pub leaves: usize,
}

/// The coalescent tree of a history. Nodes `0..n` are the leaves `1..=n`;
/// node `n + i` is created by event `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genealogy {
    pub n: usize,
    pub nodes: Vec<GenealogyNode>,
}

impl Genealogy {
    pub fn from_history(h: &CoalescentHistory) -> Self {
        let n = h.n();
        let mut nodes: Vec<GenealogyNode> = (0..n)
            .map(|_| GenealogyNode {
                time: 0.0,
                parent: None,
                children: Vec::new(),
                leaves: 1,
            })
            .collect();
        // node currently carrying the block with a given least element
        let mut current: Vec<usize> = (0..=n).map(|i| i.saturating_sub(1)).collect();
        for e in h.events() {
            let id = nodes.len();
            let children: Vec<usize> = e.merged.iter().map(|&b| current[b]).collect();
            let mut leaves = 0;
            for &c in &children {
                nodes[c].parent = Some(id);
                leaves += nodes[c].leaves;
            }
            nodes.push(GenealogyNode {
                time: e.t,
                parent: None,
                children,
                leaves,
            });
            current[*e.merged.iter().min().expect("non-empty")] = id;
        }
        Self { n, nodes }
    }

    /// Length of the branch above `node`; zero for a root.
    pub fn branch_length(&self, node: usize) -> f64 {
        self.nodes[node]
            .parent
            .map_or(0.0, |p| self.nodes[p].time - self.nodes[node].time)
    }

    /// Nodes with a branch above them, with the branch length.
    pub fn branches(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent.is_some())
            .map(|i| (i, self.branch_length(i)))
    }

    pub fn total_length(&self) -> f64 {
        self.branches().map(|(_, l)| l).sum()
    }

    /// Nodes in an order where parents precede children.
    pub fn top_down(&self) -> impl Iterator<Item = usize> {
        (0..self.nodes.len()).rev()
    }

    /// Leaf labels (1-based) below a node.
    pub fn leaves_below(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x + 1);
            } else {
                stack.extend(&self.nodes[x].children);
            }
        }
        out.sort_unstable();
        out
    }
}
