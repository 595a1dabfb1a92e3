//! Boolean feature vectors: 40 branch features for concolic testing, 26 state features for EGT.
//! Features are numbered from 1 as in the catalogs; bit `j-1` holds feature `j`.

mod catalog;

use serde::{Deserialize, Serialize, Serializer};

use crate::concolic::ExecutionTree;
use crate::egt::{EgtGlobals, SymState};
use crate::lang::{BranchId, BranchKind, Program};

pub use catalog::{BRANCH_CATALOG, STATE_CATALOG};

pub const BRANCH_FEATURES: usize = 40;
pub const STATE_FEATURES: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Branch,
    State,
}

impl Mode {
    pub fn len(self) -> usize {
        match self {
            Mode::Branch => BRANCH_FEATURES,
            Mode::State => STATE_FEATURES,
        }
    }
}

/// `π(·)`: up to 64 boolean features packed into a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    bits: u64,
    len: u8,
}

impl FeatureVector {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= 64);
        FeatureVector { bits: 0, len: len as u8 }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut fv = Self::zeros(values.len());
        for (j, v) in values.iter().enumerate() {
            fv.set(j + 1, *v);
        }
        fv
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Feature `j` (1-based).
    pub fn get(&self, j: usize) -> bool {
        debug_assert!((1..=self.len()).contains(&j));
        self.bits >> (j - 1) & 1 == 1
    }

    pub fn set(&mut self, j: usize, v: bool) {
        assert!((1..=self.len()).contains(&j), "feature {j} out of range");
        if v {
            self.bits |= 1 << (j - 1);
        } else {
            self.bits &= !(1 << (j - 1));
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.len()).filter(|j| self.get(*j))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (1..=self.len()).map(|j| self.get(j)).collect()
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<u8> = self.to_bools().into_iter().map(u8::from).collect();
        v.serialize(s)
    }
}

fn front(i: usize, n: usize) -> bool {
    i <= n.div_ceil(10)
}

fn back(i: usize, n: usize) -> bool {
    i > n - n.div_ceil(10)
}

/// Per-selection view for branch features of the latest path.
pub struct BranchContext<'a> {
    p: &'a Program,
    tree: &'a ExecutionTree,
    m: usize,
    max_occ: u64,
    min_occ: u64,
    max_uncovered: usize,
    last_site: Option<BranchId>,
}

impl<'a> BranchContext<'a> {
    /// Context for candidates of path `m` (normally the latest).
    pub fn new(p: &'a Program, tree: &'a ExecutionTree, m: usize) -> Self {
        let occ = tree.paths[m].pc.sites().map(|s| tree.sites[s.index()].occurrences);
        let (min_occ, max_occ) = occ.fold((u64::MAX, 0), |(lo, hi), o| (lo.min(o), hi.max(o)));
        let max_uncovered = tree.uncovered_by_function.iter().copied().max().unwrap_or(0);
        let last_site = tree.last_negation.map(|(lm, li)| tree.site_of(lm, li));
        BranchContext { p, tree, m, max_occ, min_occ, max_uncovered, last_site }
    }

    /// `π(φᵢ)` for a 1-based position `i` of path `m`.
    pub fn extract(&self, i: usize) -> FeatureVector {
        let (p, tree) = (self.p, self.tree);
        let path = &tree.paths[self.m];
        let n = path.pc.len();
        let cond = &path.pc.conditions[i - 1];
        let site = p.site(cond.site);
        let st = &tree.sites[site.id.index()];
        let opp = site.opposite;
        let ost = &tree.sites[opp.index()];
        let func = &p.functions[site.function];
        let execs = tree.paths.len();
        let recent = |w: usize| ost.last_seen.is_some_and(|e| e + w >= execs);
        let dist = tree.dist_to_uncovered[opp.index()];
        let mut f = FeatureVector::zeros(BRANCH_FEATURES);
        f.set(1, site.function == p.entry);
        f.set(2, site.kind == BranchKind::WhileHeader && site.polarity);
        f.set(3, site.kind == BranchKind::WhileHeader && !site.polarity);
        f.set(4, site.in_loop_body);
        f.set(5, site.kind == BranchKind::SwitchCase && site.polarity);
        f.set(6, site.kind == BranchKind::SwitchCase && !site.polarity);
        f.set(7, site.shape.uses_constant);
        f.set(8, site.shape.uses_array);
        f.set(9, site.shape.is_equality);
        f.set(10, site.shape.comparisons >= 2);
        f.set(11, site.kind == BranchKind::SwitchCase);
        f.set(12, p.arms_in_function(site.function) >= 10);
        f.set(13, front(i, n));
        f.set(14, back(i, n));
        f.set(15, st.occurrences == self.max_occ);
        f.set(16, st.occurrences == self.min_occ);
        f.set(17, path.parent.is_some_and(|(_, b)| i == b + 1));
        f.set(18, self.last_site.is_some_and(|l| p.site(l).function == site.function));
        for k in 1..=5 {
            f.set(18 + k, !tree.context_seen(&tree.context(self.m, i, k)));
        }
        f.set(24, st.negated > 10);
        f.set(25, st.negated > 20);
        f.set(26, st.negated > 30);
        f.set(27, !tree.covered[opp.index()]);
        f.set(28, st.last_failed);
        f.set(29, st.failures > 5);
        f.set(30, dist.is_some_and(|d| d <= 10));
        f.set(31, dist.is_some_and(|d| d <= 20));
        f.set(32, recent(10));
        f.set(33, recent(20));
        f.set(34, recent(30));
        f.set(35, self.max_uncovered > 0 && tree.uncovered_by_function[site.function] == self.max_uncovered);
        f.set(36, path.last_entered == site.function);
        f.set(37, 2 * i > n);
        f.set(38, st.negated == 0);
        f.set(39, func.has_loop);
        f.set(40, cond.expr.symbols().len() >= 2);
        f
    }
}

/// Percentile thresholds for the pool-relative state features, recomputed per selection.
#[derive(Debug, Clone, Default)]
pub struct PoolStats {
    deepest: u64,
    shallowest: u64,
    fewest_instrs: u64,
    fewest_covered_in_func: u64,
    cheapest_query: u64,
    closest: u64,
    since_new: u64,
    max_traversals: u64,
    min_traversals: u64,
}

/// Value at 1-based rank `ceil(0.1·n)` in ascending order (at least rank 1).
fn low_threshold(mut vals: Vec<u64>) -> u64 {
    vals.sort_unstable();
    let rank = vals.len().div_ceil(10).max(1);
    vals[rank - 1]
}

/// Per-state statistics the pool features are computed from.
fn state_stats(g: &EgtGlobals, s: &SymState) -> [u64; 6] {
    [
        s.depth() as u64,
        s.instructions,
        g.covered_in_function(s.function()) as u64,
        s.query_cost,
        g.distance_to_uncovered(s).map_or(u64::MAX, u64::from),
        s.since_new_coverage,
    ]
}

impl PoolStats {
    pub fn compute(g: &EgtGlobals, pool: &[SymState]) -> Self {
        assert!(!pool.is_empty(), "pool statistics need at least one state");
        let stats: Vec<[u64; 6]> = pool.iter().map(|s| state_stats(g, s)).collect();
        let col = |k: usize| stats.iter().map(|r| r[k]).collect::<Vec<_>>();
        let depth_desc: Vec<u64> = col(0).into_iter().map(|d| u64::MAX - d).collect();
        let trav: Vec<u64> = pool.iter().filter_map(|s| s.last_site()).map(|b| g.traversals[b.index()]).collect();
        PoolStats {
            deepest: u64::MAX - low_threshold(depth_desc),
            shallowest: low_threshold(col(0)),
            fewest_instrs: low_threshold(col(1)),
            fewest_covered_in_func: low_threshold(col(2)),
            cheapest_query: low_threshold(col(3)),
            closest: low_threshold(col(4)),
            since_new: low_threshold(col(5)),
            max_traversals: trav.iter().copied().max().unwrap_or(0),
            min_traversals: trav.iter().copied().min().unwrap_or(0),
        }
    }
}

/// `π(s)` over the state catalog.
pub fn extract_state_features(p: &Program, g: &EgtGlobals, s: &SymState, pool: &PoolStats) -> FeatureVector {
    let mut f = FeatureVector::zeros(STATE_FEATURES);
    if let Some(b) = s.last_site() {
        let site = p.site(b);
        let trav = g.traversals[b.index()];
        let just = g.just_selected;
        let recent = |w: u64| g.last_seen[b.index()].is_some_and(|t| t + w >= g.iteration);
        let max_uncovered = g.uncovered_by_function.iter().copied().max().unwrap_or(0);
        f.set(1, site.function == p.entry);
        f.set(2, site.kind == BranchKind::WhileHeader && site.polarity);
        f.set(3, site.kind == BranchKind::WhileHeader && !site.polarity);
        f.set(4, site.in_loop_body);
        f.set(5, site.kind == BranchKind::SwitchCase && site.polarity);
        f.set(6, site.kind == BranchKind::SwitchCase && !site.polarity);
        f.set(7, trav == pool.max_traversals);
        f.set(8, trav == pool.min_traversals);
        f.set(9, just.is_some() && s.phi.len() >= 2 && Some(s.phi.conditions[s.phi.len() - 2].site) == just);
        f.set(10, trav > 10);
        f.set(11, trav > 20);
        f.set(12, trav > 30);
        f.set(13, just.is_some_and(|j| p.site(j).function == site.function));
        f.set(14, s.last_branch_new);
        f.set(15, recent(10));
        f.set(16, recent(20));
        f.set(17, recent(30));
        f.set(18, max_uncovered > 0 && g.uncovered_by_function[site.function] == max_uncovered);
        f.set(19, g.last_entered == Some(site.function));
    }
    let [depth, instrs, covered, cost, dist, since] = state_stats(g, s);
    f.set(20, depth >= pool.deepest);
    f.set(21, depth <= pool.shallowest);
    f.set(22, instrs <= pool.fewest_instrs);
    f.set(23, covered <= pool.fewest_covered_in_func);
    f.set(24, cost <= pool.cheapest_query);
    f.set(25, dist <= pool.closest);
    f.set(26, since <= pool.since_new);
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_follow_ceiling_rank() {
        assert_eq!(low_threshold(vec![3, 1, 2]), 1);
        assert_eq!(low_threshold((1..=20).collect()), 2);
        assert_eq!(low_threshold((1..=21).collect()), 3);
        assert_eq!(low_threshold(vec![5]), 5);
    }

    #[test]
    fn vector_bits_roundtrip() {
        let mut f = FeatureVector::zeros(40);
        f.set(1, true);
        f.set(40, true);
        assert_eq!(f.ones().collect::<Vec<_>>(), vec![1, 40]);
        assert_eq!(FeatureVector::from_bools(&f.to_bools()), f);
    }

    #[test]
    fn path_position_windows() {
        // n = 25: ceil(2.5) = 3 positions at each end.
        assert!(front(3, 25) && !front(4, 25));
        assert!(back(23, 25) && !back(22, 25));
        assert!(front(1, 1) && back(1, 1));
    }
}
