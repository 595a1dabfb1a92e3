//! Interprocedural control-flow graph over basic blocks and branch-to-branch distances.

use std::collections::VecDeque;

use super::ir::{BlockId, FuncId, Instr, Terminator};
use super::{BranchId, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Unconditional fall-through or jump.
    Flow,
    /// One arm of a conditional.
    Branch(BranchId),
    /// Call site block to callee entry.
    Call,
    /// Callee return block back to the calling block.
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfgEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    /// Node `n` is block `nodes[n].1` of function `nodes[n].0`.
    pub nodes: Vec<(FuncId, BlockId)>,
    pub edges: Vec<CfgEdge>,
    node_index: Vec<Vec<usize>>,
    /// Edge index labelled by each branch arm.
    site_edge: Vec<usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl Cfg {
    pub fn node(&self, func: FuncId, block: BlockId) -> usize {
        self.node_index[func][block]
    }

    pub fn entry(&self, func: FuncId) -> usize {
        self.node_index[func][0]
    }

    pub fn edge_of(&self, site: BranchId) -> &CfgEdge {
        &self.edges[self.site_edge[site.index()]]
    }

    pub fn blocks_in(&self, func: FuncId) -> usize {
        self.node_index[func].len()
    }

    pub fn labelled_edges(&self) -> impl Iterator<Item = (&CfgEdge, BranchId)> {
        self.edges.iter().filter_map(|e| match e.kind {
            EdgeKind::Branch(b) => Some((e, b)),
            _ => None,
        })
    }

    /// Edges leaving `node`.
    pub fn successors(&self, node: usize) -> impl Iterator<Item = &CfgEdge> {
        self.succ[node].iter().map(|e| &self.edges[*e])
    }

    fn cost(kind: EdgeKind) -> u32 {
        u32::from(matches!(kind, EdgeKind::Branch(_)))
    }

    /// Minimum labelled-edge count from every node to the tail of any target edge.
    fn reverse_distances(&self, targets: &[BranchId]) -> Vec<Option<u32>> {
        let mut dist: Vec<Option<u32>> = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        for t in targets {
            let tail = self.edge_of(*t).from;
            if dist[tail] != Some(0) {
                dist[tail] = Some(0);
                queue.push_front(tail);
            }
        }
        while let Some(n) = queue.pop_front() {
            let d = dist[n].expect("queued nodes have a distance");
            for &ei in &self.pred[n] {
                let e = &self.edges[ei];
                let nd = d + Self::cost(e.kind);
                if dist[e.from].is_none_or(|old| nd < old) {
                    dist[e.from] = Some(nd);
                    if nd == d {
                        queue.push_front(e.from);
                    } else {
                        queue.push_back(e.from);
                    }
                }
            }
        }
        dist
    }

    /// Edge-count distance from every node to the nearest node in `targets`.
    pub fn node_distances(&self, targets: &[usize]) -> Vec<Option<u32>> {
        let mut dist: Vec<Option<u32>> = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        for &t in targets {
            if dist[t].is_none() {
                dist[t] = Some(0);
                queue.push_back(t);
            }
        }
        while let Some(n) = queue.pop_front() {
            let d = dist[n].expect("queued nodes have a distance");
            for &ei in &self.pred[n] {
                let from = self.edges[ei].from;
                if dist[from].is_none() {
                    dist[from] = Some(d + 1);
                    queue.push_back(from);
                }
            }
        }
        dist
    }

    /// `branch_distance(self, a, targets)` for every arm `a` at once.
    pub fn distances_to(&self, targets: &[BranchId]) -> Vec<Option<u32>> {
        let node_dist = self.reverse_distances(targets);
        let mut is_target = vec![false; self.site_edge.len()];
        for t in targets {
            is_target[t.index()] = true;
        }
        (0..self.site_edge.len())
            .map(|a| if is_target[a] { Some(0) } else { node_dist[self.edges[self.site_edge[a]].to] })
            .collect()
    }
}

pub fn build_cfg(p: &Program) -> Cfg {
    let mut nodes = Vec::new();
    let mut node_index = Vec::new();
    for (fi, f) in p.functions.iter().enumerate() {
        let mut ix = Vec::new();
        for bi in 0..f.blocks.len() {
            ix.push(nodes.len());
            nodes.push((fi, bi));
        }
        node_index.push(ix);
    }
    let mut edges = Vec::new();
    let mut site_edge = vec![usize::MAX; p.sites.len()];
    for (fi, f) in p.functions.iter().enumerate() {
        for (bi, b) in f.blocks.iter().enumerate() {
            let from = node_index[fi][bi];
            for instr in &b.instrs {
                if let Instr::Call { func, .. } = instr {
                    edges.push(CfgEdge { from, to: node_index[*func][0], kind: EdgeKind::Call });
                    for (ci, cb) in p.functions[*func].blocks.iter().enumerate() {
                        if matches!(cb.term, Terminator::Return(_)) {
                            edges.push(CfgEdge { from: node_index[*func][ci], to: from, kind: EdgeKind::Return });
                        }
                    }
                }
            }
            for (to, site) in b.term.successors() {
                let to = node_index[fi][to];
                match site {
                    Some(s) => {
                        site_edge[s.index()] = edges.len();
                        edges.push(CfgEdge { from, to, kind: EdgeKind::Branch(s) });
                    }
                    None => edges.push(CfgEdge { from, to, kind: EdgeKind::Flow }),
                }
            }
        }
    }
    debug_assert!(site_edge.iter().all(|e| *e != usize::MAX));
    let mut succ = vec![Vec::new(); nodes.len()];
    let mut pred = vec![Vec::new(); nodes.len()];
    for (i, e) in edges.iter().enumerate() {
        succ[e.from].push(i);
        pred[e.to].push(i);
    }
    Cfg { nodes, edges, node_index, site_edge, succ, pred }
}

/// Fewest labelled edges crossed between the head of `from`'s edge and any target edge.
/// Returns `Some(0)` when `from` is itself a target and `None` when no target is reachable.
pub fn branch_distance(cfg: &Cfg, from: BranchId, targets: &[BranchId]) -> Option<u32> {
    if targets.contains(&from) {
        return Some(0);
    }
    let n = cfg.nodes.len();
    let mut dist: Vec<Option<u32>> = vec![None; n];
    let start = cfg.edge_of(from).to;
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        let d = dist[node].expect("queued nodes have a distance");
        for &ei in &cfg.succ[node] {
            let e = &cfg.edges[ei];
            let nd = d + Cfg::cost(e.kind);
            if dist[e.to].is_none_or(|old| nd < old) {
                dist[e.to] = Some(nd);
                if nd == d {
                    queue.push_front(e.to);
                } else {
                    queue.push_back(e.to);
                }
            }
        }
    }
    targets.iter().filter_map(|t| dist[cfg.edge_of(*t).from]).min()
}
