//! Fork tree over live states, for random-path selection.

use rand::Rng;

#[derive(Debug, Clone)]
struct Node {
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Binary tree of forks; leaves hold live states, dead subtrees are pruned.
#[derive(Debug, Clone)]
pub struct ForkTree {
    nodes: Vec<Node>,
}

impl Default for ForkTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ForkTree {
    pub fn new() -> Self {
        ForkTree { nodes: vec![Node { parent: None, children: Vec::new() }] }
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Turns leaf `n` into an inner node with two fresh leaves.
    pub fn fork(&mut self, n: usize) -> (usize, usize) {
        debug_assert!(self.nodes[n].children.is_empty(), "only leaves fork");
        let a = self.nodes.len();
        let b = a + 1;
        self.nodes.push(Node { parent: Some(n), children: Vec::new() });
        self.nodes.push(Node { parent: Some(n), children: Vec::new() });
        self.nodes[n].children = vec![a, b];
        (a, b)
    }

    /// Removes leaf `n` and every ancestor left without children.
    pub fn remove(&mut self, mut n: usize) {
        while let Some(parent) = self.nodes[n].parent {
            let siblings = &mut self.nodes[parent].children;
            siblings.retain(|c| *c != n);
            if !siblings.is_empty() {
                return;
            }
            n = parent;
        }
    }

    pub fn is_leaf(&self, n: usize) -> bool {
        self.nodes[n].children.is_empty()
    }

    /// Walks from the root, picking a live child uniformly at each inner node.
    pub fn random_leaf(&self, rng: &mut impl Rng) -> usize {
        let mut n = self.root();
        while !self.nodes[n].children.is_empty() {
            let c = &self.nodes[n].children;
            n = c[rng.gen_range(0..c.len())];
        }
        n
    }

    /// Live leaves under `n`.
    pub fn leaves_under(&self, n: usize) -> usize {
        if self.nodes[n].children.is_empty() {
            1
        } else {
            self.nodes[n].children.iter().map(|c| self.leaves_under(*c)).sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pruning_collapses_dead_branches() {
        let mut t = ForkTree::new();
        let (a, b) = t.fork(0);
        let (c, d) = t.fork(a);
        t.remove(c);
        t.remove(d);
        assert_eq!(t.leaves_under(0), 1);
        let mut rng = rand::thread_rng();
        assert_eq!(t.random_leaf(&mut rng), b);
    }
}
