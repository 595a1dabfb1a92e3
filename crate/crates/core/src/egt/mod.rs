//! Execution-generated testing (Algorithm 2): a pool of forking symbolic states.

mod state;
mod tree;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concolic::{run_concrete_limited, DEFAULT_STEP_LIMIT};
use crate::heuristics::{EgtChooser, EgtHeuristic};
use crate::lang::ir::FuncId;
use crate::lang::{BranchId, Cfg, Program};
use crate::solver::{Solver, SolverConfig};

pub use state::{step_state, Fault, StepOutcome, SymFrame, SymState, TestCase, TestOrigin};
pub use tree::ForkTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EgtBudget {
    /// Wall-clock seconds.
    Seconds(f64),
    /// Selection-loop iterations; test timestamps are iteration numbers.
    Iterations(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgtConfig {
    pub budget: EgtBudget,
    /// Instructions one state may execute before it is retired as a test.
    pub step_limit: u64,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for EgtConfig {
    fn default() -> Self {
        EgtConfig { budget: EgtBudget::Iterations(1_000), step_limit: DEFAULT_STEP_LIMIT, solver: SolverConfig::default(), seed: 0 }
    }
}

/// Run-wide counters shared by every state of one run.
#[derive(Debug, Clone)]
pub struct EgtGlobals {
    /// Times each arm was traversed by any state.
    pub traversals: Vec<u64>,
    /// Iteration of the latest traversal of each arm.
    pub last_seen: Vec<Option<u64>>,
    pub iteration: u64,
    /// Last branch of the previously selected state.
    pub just_selected: Option<BranchId>,
    /// Never-traversed arms per function.
    pub uncovered_by_function: Vec<usize>,
    /// Function most recently entered by any state.
    pub last_entered: Option<FuncId>,
    covered_instr: Vec<bool>,
    covered_per_function: Vec<usize>,
    /// CFG node of every (function, block).
    node_of: Vec<Vec<usize>>,
    /// Edge distance from each CFG node to the nearest block with an uncovered instruction.
    node_dist: Vec<Option<u32>>,
    dist_dirty: bool,
    creations: u64,
    started: Instant,
    timed: bool,
}

impl EgtGlobals {
    pub fn new(p: &Program, cfg: &Cfg, timed: bool) -> Self {
        let mut uncovered_by_function = vec![0; p.functions.len()];
        for s in &p.sites {
            uncovered_by_function[s.function] += 1;
        }
        let node_of = (0..p.functions.len()).map(|f| (0..cfg.blocks_in(f)).map(|b| cfg.node(f, b)).collect()).collect();
        let mut g = EgtGlobals {
            traversals: vec![0; p.branch_count()],
            last_seen: vec![None; p.branch_count()],
            iteration: 0,
            just_selected: None,
            uncovered_by_function,
            last_entered: None,
            covered_instr: vec![false; p.instruction_count()],
            covered_per_function: vec![0; p.functions.len()],
            node_of,
            node_dist: Vec::new(),
            dist_dirty: true,
            creations: 0,
            started: Instant::now(),
            timed,
        };
        g.refresh_distances(p, cfg);
        g
    }

    pub fn clock(&self) -> f64 {
        if self.timed {
            self.started.elapsed().as_secs_f64()
        } else {
            self.iteration as f64
        }
    }

    pub fn next_creation(&mut self) -> u64 {
        self.creations += 1;
        self.creations - 1
    }

    /// Marks a global instruction index covered; `true` if it was new.
    pub fn cover_instruction(&mut self, ix: usize) -> bool {
        if self.covered_instr[ix] {
            return false;
        }
        self.covered_instr[ix] = true;
        self.dist_dirty = true;
        true
    }

    /// Records a traversal of `site`; `true` if it was the first.
    pub fn traverse(&mut self, site: BranchId) -> bool {
        let t = &mut self.traversals[site.index()];
        *t += 1;
        self.last_seen[site.index()] = Some(self.iteration);
        *t == 1
    }

    pub fn covered_in_function(&self, f: FuncId) -> usize {
        self.covered_per_function[f]
    }

    pub fn distance_to_uncovered(&self, s: &SymState) -> Option<u32> {
        self.node_dist[self.node_of[s.function()][s.block()]]
    }

    pub fn refresh_distances(&mut self, p: &Program, cfg: &Cfg) {
        if !self.dist_dirty {
            return;
        }
        self.dist_dirty = false;
        let mut targets = Vec::new();
        for (fi, f) in p.functions.iter().enumerate() {
            let mut count = 0;
            for (bi, base) in f.block_base.iter().enumerate() {
                let n = f.blocks[bi].len();
                let covered = (0..n).filter(|k| self.covered_instr[base + k]).count();
                count += covered;
                if covered < n {
                    targets.push(self.node_of[fi][bi]);
                }
            }
            self.covered_per_function[fi] = count;
        }
        self.node_dist = cfg.node_distances(&targets);
        for (f, u) in self.uncovered_by_function.iter_mut().enumerate() {
            *u = p.sites.iter().filter(|s| s.function == f && self.traversals[s.id.index()] == 0).count();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgtReport {
    pub heuristic: String,
    pub seed: u64,
    pub total_branches: usize,
    pub iterations: u64,
    pub tests: Vec<TestCase>,
    pub covered: Vec<BranchId>,
    pub coverage_curve: Vec<CurvePoint>,
    pub faults: Vec<Fault>,
    pub dropped_states: usize,
    pub solver_queries: u64,
}

impl EgtReport {
    pub fn coverage(&self) -> usize {
        self.covered.len()
    }
}

/// Everything a run observed, for tests and audits.
#[derive(Debug, Default)]
pub struct EgtTrace {
    /// `(parent Φ, child Φ true-arm, child Φ false-arm)` of every fork.
    pub forks: Vec<(crate::symcore::Constraint, crate::symcore::Constraint, crate::symcore::Constraint)>,
}

/// Replays tests in order and accumulates branch coverage.
pub fn replay_coverage(p: &Program, tests: &[TestCase]) -> (Vec<CurvePoint>, BTreeSet<BranchId>) {
    let mut covered = BTreeSet::new();
    let mut curve = Vec::with_capacity(tests.len());
    for t in tests {
        let trace = run_concrete_limited(p, &t.input, DEFAULT_STEP_LIMIT);
        covered.extend(trace.path.sites());
        curve.push(CurvePoint { t: t.created_at, covered: covered.len() });
    }
    (curve, covered)
}

pub fn run_egt(p: &Program, cfg: &Cfg, h: &EgtHeuristic, config: &EgtConfig) -> EgtReport {
    run_egt_traced(p, cfg, h, config, None)
}

/// `run_egt`, optionally recording every fork into `trace`.
pub fn run_egt_traced(p: &Program, cfg: &Cfg, h: &EgtHeuristic, config: &EgtConfig, mut trace: Option<&mut EgtTrace>) -> EgtReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut solver = Solver::new(config.solver.clone());
    let timed = matches!(config.budget, EgtBudget::Seconds(_));
    let mut g = EgtGlobals::new(p, cfg, timed);
    let mut forks = ForkTree::new();
    let mut chooser = EgtChooser::new(h.clone());
    let root = forks.root();
    let first = g.next_creation();
    let mut pool = vec![SymState::initial(p, first, root)];
    let mut tests: Vec<TestCase> = Vec::new();
    let mut faults = Vec::new();
    let mut dropped = 0;
    let expired = |g: &EgtGlobals| match config.budget {
        EgtBudget::Seconds(s) => g.started.elapsed().as_secs_f64() >= s,
        EgtBudget::Iterations(n) => g.iteration >= n,
    };
    while !pool.is_empty() && !expired(&g) {
        g.refresh_distances(p, cfg);
        let k = chooser.choose(p, &g, &pool, &forks, &mut rng);
        let mut s = pool.swap_remove(k);
        g.iteration += 1;
        g.just_selected = s.last_site();
        let parent_phi = trace.is_some().then(|| s.phi.constraint());
        let node = s.node;
        let mut ended = true;
        loop {
            if s.instructions >= config.step_limit {
                tests.push(TestCase { input: s.test_input(p), created_at: g.clock(), origin: TestOrigin::StepLimit, fault: None, source: s.phi.constraint() });
                break;
            }
            match step_state(p, s, &mut solver, &mut g) {
                StepOutcome::Continue(next) => s = next,
                StepOutcome::OneArm(next) => {
                    pool.push(next);
                    ended = false;
                    break;
                }
                StepOutcome::Forked(mut a, mut b) => {
                    if let (Some(t), Some(parent)) = (trace.as_deref_mut(), parent_phi.clone()) {
                        t.forks.push((parent, a.phi.constraint(), b.phi.constraint()));
                    }
                    let (na, nb) = forks.fork(a.node);
                    a.node = na;
                    b.node = nb;
                    pool.push(a);
                    pool.push(b);
                    ended = false;
                    break;
                }
                StepOutcome::Halted(t) => {
                    tests.push(t);
                    break;
                }
                StepOutcome::Errored(t, f) => {
                    faults.push(f);
                    tests.push(t);
                    break;
                }
                StepOutcome::Guarded { faults: fs, next } => {
                    for (t, f) in fs {
                        faults.push(f);
                        tests.push(t);
                    }
                    match next {
                        Some(n) => s = n,
                        None => break,
                    }
                }
                StepOutcome::Dropped(why) => {
                    log::debug!("dropping state: {why}");
                    dropped += 1;
                    break;
                }
            }
        }
        if ended {
            forks.remove(node);
        }
    }
    for s in pool.drain(..) {
        tests.push(TestCase { input: s.test_input(p), created_at: g.clock(), origin: TestOrigin::Flushed, fault: None, source: s.phi.constraint() });
    }
    let (curve, covered) = replay_coverage(p, &tests);
    EgtReport {
        heuristic: h.name(),
        seed: config.seed,
        total_branches: p.branch_count(),
        iterations: g.iteration,
        tests,
        covered: covered.into_iter().collect(),
        coverage_curve: curve,
        faults,
        dropped_states: dropped,
        solver_queries: solver.queries,
    }
}
