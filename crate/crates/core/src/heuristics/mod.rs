//! Search heuristics: the parametric chooser `Choose_θ` and the baselines for both engines.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concolic::ExecutionTree;
use crate::egt::{EgtGlobals, ForkTree, SymState};
use crate::features::{extract_state_features, BranchContext, FeatureVector, Mode, PoolStats};
use crate::lang::{BranchId, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeuristicError {
    #[error("parameter has {found} weights but the feature vector has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unknown heuristic `{0}`")]
    Unknown(String),
    #[error("invalid heuristic `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("weight {0} is not finite")]
    NotFinite(usize),
}

/// `θ`: one real weight per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, mode: Mode) -> Result<(), HeuristicError> {
        if self.len() != mode.len() {
            return Err(HeuristicError::LengthMismatch { expected: mode.len(), found: self.len() });
        }
        match self.0.iter().position(|w| !w.is_finite()) {
            Some(i) => Err(HeuristicError::NotFinite(i)),
            None => Ok(()),
        }
    }
}

/// `π·θ`, summed in feature order.
pub fn score(theta: &ParamVector, fv: &FeatureVector) -> Result<f64, HeuristicError> {
    if theta.len() != fv.len() {
        return Err(HeuristicError::LengthMismatch { expected: fv.len(), found: theta.len() });
    }
    Ok(fv.ones().map(|j| theta.0[j - 1]).sum())
}

/// Indices of every candidate attaining the maximum score.
pub fn argmax_set(theta: &ParamVector, fvs: &[FeatureVector]) -> Vec<usize> {
    let scores: Vec<f64> = fvs.iter().map(|f| score(theta, f).expect("feature length matches θ")).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..scores.len()).filter(|k| scores[*k] == best).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "arg", rename_all = "kebab-case")]
pub enum ConcolicHeuristic {
    Parametric(ParamVector),
    Dfs,
    Random,
    Cfds,
    Cgs(usize),
    Gen,
}

impl ConcolicHeuristic {
    pub fn name(&self) -> String {
        match self {
            ConcolicHeuristic::Parametric(_) => "parametric".into(),
            ConcolicHeuristic::Dfs => "dfs".into(),
            ConcolicHeuristic::Random => "random".into(),
            ConcolicHeuristic::Cfds => "cfds".into(),
            ConcolicHeuristic::Cgs(k) => format!("cgs:{k}"),
            ConcolicHeuristic::Gen => "gen".into(),
        }
    }
}

impl fmt::Display for ConcolicHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "arg", rename_all = "kebab-case")]
pub enum EgtHeuristic {
    Parametric(ParamVector),
    Dfs,
    Bfs,
    RandomState,
    RandomPath,
    CovNew,
    Depth,
    QueryCost,
    MinDistance,
    InstrCount,
    CallPathInstrCount,
    RoundRobin(Vec<EgtHeuristic>),
}

impl EgtHeuristic {
    pub fn name(&self) -> String {
        match self {
            EgtHeuristic::Parametric(_) => "parametric".into(),
            EgtHeuristic::Dfs => "dfs".into(),
            EgtHeuristic::Bfs => "bfs".into(),
            EgtHeuristic::RandomState => "random-state".into(),
            EgtHeuristic::RandomPath => "random-path".into(),
            EgtHeuristic::CovNew => "covnew".into(),
            EgtHeuristic::Depth => "depth".into(),
            EgtHeuristic::QueryCost => "query-cost".into(),
            EgtHeuristic::MinDistance => "min-distance".into(),
            EgtHeuristic::InstrCount => "instr-count".into(),
            EgtHeuristic::CallPathInstrCount => "callpath-instr-count".into(),
            EgtHeuristic::RoundRobin(hs) => {
                format!("round-robin:{}", hs.iter().map(|h| h.name()).collect::<Vec<_>>().join(","))
            }
        }
    }
}

impl fmt::Display for EgtHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A heuristic named on the command line, for either engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Heuristic {
    Concolic(ConcolicHeuristic),
    Egt(EgtHeuristic),
}

impl Heuristic {
    pub fn name(&self) -> String {
        match self {
            Heuristic::Concolic(h) => h.name(),
            Heuristic::Egt(h) => h.name(),
        }
    }
}

/// Parses a heuristic name for `mode`; `load` resolves the file of `parametric:<file>`.
pub fn parse_heuristic(
    name: &str,
    mode: Mode,
    load: &dyn Fn(&str) -> Result<ParamVector, String>,
) -> Result<Heuristic, HeuristicError> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let invalid = |reason: String| HeuristicError::Invalid { name: name.to_string(), reason };
    if head == "parametric" {
        let file = arg.ok_or_else(|| invalid("expected parametric:<theta-file>".into()))?;
        let theta = load(file).map_err(invalid)?;
        theta.validate(mode)?;
        return Ok(match mode {
            Mode::Branch => Heuristic::Concolic(ConcolicHeuristic::Parametric(theta)),
            Mode::State => Heuristic::Egt(EgtHeuristic::Parametric(theta)),
        });
    }
    match mode {
        Mode::Branch => {
            let h = match (head, arg) {
                ("dfs", None) => ConcolicHeuristic::Dfs,
                ("random", None) => ConcolicHeuristic::Random,
                ("cfds", None) => ConcolicHeuristic::Cfds,
                ("gen", None) => ConcolicHeuristic::Gen,
                ("cgs", None) => ConcolicHeuristic::Cgs(2),
                ("cgs", Some(k)) => {
                    let k: usize = k.parse().map_err(|_| invalid(format!("context length `{k}` is not a number")))?;
                    if !(1..=5).contains(&k) {
                        return Err(invalid("context length must be 1..=5".into()));
                    }
                    ConcolicHeuristic::Cgs(k)
                }
                _ => return Err(HeuristicError::Unknown(name.to_string())),
            };
            Ok(Heuristic::Concolic(h))
        }
        Mode::State => {
            let h = match (head, arg) {
                ("dfs", None) => EgtHeuristic::Dfs,
                ("bfs", None) => EgtHeuristic::Bfs,
                ("random-state", None) => EgtHeuristic::RandomState,
                ("random-path", None) => EgtHeuristic::RandomPath,
                ("covnew", None) => EgtHeuristic::CovNew,
                ("depth", None) => EgtHeuristic::Depth,
                ("query-cost", None) => EgtHeuristic::QueryCost,
                ("min-distance", None) => EgtHeuristic::MinDistance,
                ("instr-count", None) => EgtHeuristic::InstrCount,
                ("callpath-instr-count", None) => EgtHeuristic::CallPathInstrCount,
                ("round-robin", Some(list)) => {
                    let mut subs = Vec::new();
                    for part in list.split(',') {
                        match parse_heuristic(part, mode, load)? {
                            Heuristic::Egt(EgtHeuristic::RoundRobin(_)) => {
                                return Err(invalid("round-robin cannot nest".into()))
                            }
                            Heuristic::Egt(h) => subs.push(h),
                            Heuristic::Concolic(_) => unreachable!("state mode yields EGT heuristics"),
                        }
                    }
                    if subs.len() < 2 {
                        return Err(invalid("round-robin needs at least two heuristics".into()));
                    }
                    EgtHeuristic::RoundRobin(subs)
                }
                _ => return Err(HeuristicError::Unknown(name.to_string())),
            };
            Ok(Heuristic::Egt(h))
        }
    }
}

/// Outcome of asking a concolic heuristic for the next branch to negate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// Negate `φᵢ` (1-based) of path `m`.
    Negate(usize, usize),
    /// No candidate left. `complete` means the whole execution tree has been explored.
    Exhausted { complete: bool },
}

/// A concolic heuristic with its per-run state.
pub struct ConcolicChooser {
    h: ConcolicHeuristic,
    cgs_seen: HashSet<Vec<BranchId>>,
    /// Gen: coverage gained by the latest negation at each arm (`+∞` until observed).
    gain: Vec<f64>,
}

impl ConcolicChooser {
    pub fn new(h: ConcolicHeuristic, p: &Program) -> Self {
        ConcolicChooser { h, cgs_seen: HashSet::new(), gain: vec![f64::INFINITY; p.branch_count()] }
    }

    /// Feeds back the latest execution.
    pub fn observe(&mut self, tree: &ExecutionTree) {
        if let ConcolicHeuristic::Gen = self.h {
            let latest = tree.latest().expect("observe follows an execution");
            if let Some((m, i)) = latest.parent {
                self.gain[tree.site_of(m, i).index()] = latest.new_branches as f64;
            }
        }
    }

    pub fn choose(
        &mut self,
        p: &Program,
        tree: &ExecutionTree,
        tried: &HashSet<(usize, usize)>,
        rng: &mut impl Rng,
    ) -> Choice {
        let Some(last) = tree.paths.len().checked_sub(1) else {
            return Choice::Exhausted { complete: false };
        };
        let n = tree.paths[last].pc.len();
        let open: Vec<usize> = (1..=n).filter(|i| tree.is_symbolic(last, *i) && !tried.contains(&(last, *i))).collect();
        let none = Choice::Exhausted { complete: false };
        match &self.h {
            ConcolicHeuristic::Parametric(theta) => {
                if open.is_empty() {
                    return none;
                }
                let ctx = BranchContext::new(p, tree, last);
                let fvs: Vec<FeatureVector> = open.iter().map(|i| ctx.extract(*i)).collect();
                Choice::Negate(last, open[argmax_set(theta, &fvs)[0]])
            }
            ConcolicHeuristic::Random => {
                if open.is_empty() {
                    return none;
                }
                Choice::Negate(last, open[rng.gen_range(0..open.len())])
            }
            ConcolicHeuristic::Dfs => {
                for m in (0..tree.paths.len()).rev() {
                    let path = &tree.paths[m];
                    for i in (path.bound() + 1..=path.pc.len()).rev() {
                        if tree.is_symbolic(m, i) && !tree.is_attempted(m, i) && !tried.contains(&(m, i)) {
                            return Choice::Negate(m, i);
                        }
                    }
                }
                Choice::Exhausted { complete: !tree.had_unknown }
            }
            ConcolicHeuristic::Cfds => {
                let best = open
                    .iter()
                    .filter_map(|i| {
                        // An uncovered opposite arm beats one that merely leads to uncovered code.
                        let opp = p.site(tree.site_of(last, *i)).opposite;
                        let d = if tree.covered[opp.index()] { tree.dist_to_uncovered[opp.index()]?.saturating_add(1) } else { 0 };
                        Some((d, *i))
                    })
                    .min();
                match best {
                    Some((_, i)) => Choice::Negate(last, i),
                    None => none,
                }
            }
            ConcolicHeuristic::Cgs(k) => {
                let k = *k;
                let depth = tree.paths.iter().map(|r| r.pc.len()).max().unwrap_or(0);
                for i in 1..=depth {
                    for m in (0..tree.paths.len()).rev() {
                        let path = &tree.paths[m];
                        if i <= path.bound() || i > path.pc.len() || !tree.is_symbolic(m, i) || tree.is_attempted(m, i) || tried.contains(&(m, i)) {
                            continue;
                        }
                        let ctx = tree.context(m, i, k);
                        if self.cgs_seen.insert(ctx) {
                            return Choice::Negate(m, i);
                        }
                    }
                }
                none
            }
            ConcolicHeuristic::Gen => {
                let mut best: Option<(f64, usize, usize)> = None;
                for m in (0..tree.paths.len()).rev() {
                    let path = &tree.paths[m];
                    for i in path.bound() + 1..=path.pc.len() {
                        if !tree.is_symbolic(m, i) || tree.is_attempted(m, i) || tried.contains(&(m, i)) {
                            continue;
                        }
                        let g = self.gain[tree.site_of(m, i).index()];
                        if best.is_none_or(|(bg, _, _)| g > bg) {
                            best = Some((g, m, i));
                        }
                    }
                }
                match best {
                    Some((_, m, i)) => Choice::Negate(m, i),
                    None => Choice::Exhausted { complete: !tree.had_unknown },
                }
            }
        }
    }
}

/// An EGT heuristic with its per-run state.
pub struct EgtChooser {
    h: EgtHeuristic,
    cursor: usize,
}

fn min_by_key_then_creation(pool: &[SymState], key: impl Fn(&SymState) -> u64) -> usize {
    (0..pool.len()).min_by_key(|k| (key(&pool[*k]), pool[*k].creation)).expect("non-empty pool")
}

impl EgtChooser {
    pub fn new(h: EgtHeuristic) -> Self {
        EgtChooser { h, cursor: 0 }
    }

    /// Index into `pool` of the state to run next.
    pub fn choose(&mut self, p: &Program, g: &EgtGlobals, pool: &[SymState], forks: &ForkTree, rng: &mut impl Rng) -> usize {
        assert!(!pool.is_empty(), "choose needs a non-empty pool");
        if let EgtHeuristic::RoundRobin(hs) = &self.h {
            let sub = hs[self.cursor % hs.len()].clone();
            self.cursor += 1;
            return choose_one(&sub, p, g, pool, forks, rng);
        }
        choose_one(&self.h, p, g, pool, forks, rng)
    }
}

/// Sampling weight of CovNew: `1/(1+minDist) + 1/(1+sinceNew)`.
pub fn covnew_weight(min_dist: Option<u32>, since_new: u64) -> f64 {
    let d = min_dist.map_or(0.0, |d| 1.0 / (1.0 + f64::from(d)));
    d + 1.0 / (1.0 + since_new as f64)
}

fn choose_one(h: &EgtHeuristic, p: &Program, g: &EgtGlobals, pool: &[SymState], forks: &ForkTree, rng: &mut impl Rng) -> usize {
    match h {
        EgtHeuristic::Parametric(theta) => {
            let stats = PoolStats::compute(g, pool);
            let fvs: Vec<FeatureVector> = pool.iter().map(|s| extract_state_features(p, g, s, &stats)).collect();
            argmax_set(theta, &fvs).into_iter().min_by_key(|k| pool[*k].creation).expect("non-empty pool")
        }
        EgtHeuristic::Dfs => (0..pool.len()).max_by_key(|k| pool[*k].creation).expect("non-empty pool"),
        EgtHeuristic::Bfs => min_by_key_then_creation(pool, |_| 0),
        EgtHeuristic::RandomState => rng.gen_range(0..pool.len()),
        EgtHeuristic::RandomPath => {
            let leaf = forks.random_leaf(rng);
            pool.iter().position(|s| s.node == leaf).expect("every live leaf holds a state")
        }
        EgtHeuristic::CovNew => {
            let weights: Vec<f64> =
                pool.iter().map(|s| covnew_weight(g.distance_to_uncovered(s), s.since_new_coverage)).collect();
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen_range(0.0..total);
            for (k, w) in weights.iter().enumerate() {
                if x < *w {
                    return k;
                }
                x -= w;
            }
            pool.len() - 1
        }
        EgtHeuristic::Depth => min_by_key_then_creation(pool, |s| s.depth() as u64),
        EgtHeuristic::QueryCost => min_by_key_then_creation(pool, |s| s.query_cost),
        EgtHeuristic::MinDistance => {
            min_by_key_then_creation(pool, |s| g.distance_to_uncovered(s).map_or(u64::MAX, u64::from))
        }
        EgtHeuristic::InstrCount => min_by_key_then_creation(pool, |s| s.instructions),
        EgtHeuristic::CallPathInstrCount => min_by_key_then_creation(pool, |s| s.callpath_instructions()),
        EgtHeuristic::RoundRobin(hs) => choose_one(&hs[0], p, g, pool, forks, rng),
    }
}
