//! Concolic testing (Algorithm 1): run, record the path, negate a chosen branch, repeat.

mod interp;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::heuristics::{Choice, ConcolicChooser, ConcolicHeuristic};
use crate::lang::ir::FuncId;
use crate::lang::{BranchId, Cfg, FailKind, Program};
use crate::solver::{domain_range, Solver, SolverConfig, SolverVerdict};
use crate::symcore::{negated_prefix, PathCondition, SymbolId};

pub use interp::{run_concrete, run_concrete_limited, Termination, Trace, DEFAULT_STEP_LIMIT};

/// Concrete value of every declared input symbol.
pub type InputVector = BTreeMap<SymbolId, i32>;

/// Every input symbol the program declares, arrays expanded element-wise.
pub fn input_symbols(p: &Program) -> Vec<SymbolId> {
    let mut out = Vec::new();
    for decl in &p.inputs {
        match decl.len {
            None => out.push(SymbolId::scalar(&decl.name)),
            Some(n) => out.extend((0..n).map(|k| SymbolId::element(&decl.name, k))),
        }
    }
    out
}

pub fn zero_input(p: &Program) -> InputVector {
    input_symbols(p).into_iter().map(|s| (s, 0)).collect()
}

/// Uniform input over the signed `bits`-wide domain.
pub fn random_input(p: &Program, rng: &mut impl Rng, bits: u8) -> InputVector {
    let (lo, hi) = domain_range(bits);
    input_symbols(p).into_iter().map(|s| (s, rng.gen_range(lo..=hi))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialInput {
    Zero,
    Random,
    Given(InputVector),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcolicConfig {
    /// Program executions allowed (`N`).
    pub budget: usize,
    pub step_limit: u64,
    pub solver: SolverConfig,
    pub seed: u64,
    pub initial: InitialInput,
}

impl Default for ConcolicConfig {
    fn default() -> Self {
        ConcolicConfig {
            budget: 100,
            step_limit: DEFAULT_STEP_LIMIT,
            solver: SolverConfig::default(),
            seed: 0,
            initial: InitialInput::Zero,
        }
    }
}

/// One execution recorded in the tree.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub pc: PathCondition,
    pub input: InputVector,
    /// `(m, i)` when this input came from negating `φᵢ` of path `m`.
    pub parent: Option<(usize, usize)>,
    pub end: Termination,
    /// Branch arms first covered by this execution.
    pub new_branches: usize,
    pub last_entered: FuncId,
}

impl PathRecord {
    /// Positions `1..=bound` are shared with the parent path and belong to it.
    pub fn bound(&self) -> usize {
        self.parent.map_or(0, |(_, i)| i)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SiteStats {
    /// Executions that traversed the arm.
    pub covered: u64,
    /// Occurrences of the arm across all recorded paths.
    pub occurrences: u64,
    /// Times a condition at this arm was chosen for negation.
    pub negated: u64,
    pub failures: u64,
    pub last_failed: bool,
    /// Index of the latest execution that traversed the arm.
    pub last_seen: Option<usize>,
}

/// `T`: every explored path plus per-arm bookkeeping.
#[derive(Debug, Clone)]
pub struct ExecutionTree {
    pub paths: Vec<PathRecord>,
    pub sites: Vec<SiteStats>,
    pub covered: Vec<bool>,
    pub covered_count: usize,
    /// Labelled-edge distance from each arm to the nearest uncovered arm.
    pub dist_to_uncovered: Vec<Option<u32>>,
    /// Uncovered arms per function.
    pub uncovered_by_function: Vec<usize>,
    /// Latest negation attempt `(m, i)`.
    pub last_negation: Option<(usize, usize)>,
    /// Some solver query returned Unknown.
    pub had_unknown: bool,
    attempted: HashSet<(usize, usize)>,
    /// Contexts (up to 5 preceding arms, then the arm) of every negation attempt.
    contexts: HashSet<Vec<BranchId>>,
}

impl ExecutionTree {
    pub fn new(p: &Program, cfg: &Cfg) -> Self {
        let all: Vec<BranchId> = p.sites.iter().map(|s| s.id).collect();
        let mut uncovered_by_function = vec![0; p.functions.len()];
        for s in &p.sites {
            uncovered_by_function[s.function] += 1;
        }
        ExecutionTree {
            paths: Vec::new(),
            sites: vec![SiteStats::default(); p.branch_count()],
            covered: vec![false; p.branch_count()],
            covered_count: 0,
            dist_to_uncovered: cfg.distances_to(&all),
            uncovered_by_function,
            last_negation: None,
            had_unknown: false,
            attempted: HashSet::new(),
            contexts: HashSet::new(),
        }
    }

    pub fn latest(&self) -> Option<&PathRecord> {
        self.paths.last()
    }

    pub fn covered_set(&self) -> BTreeSet<BranchId> {
        (0..self.covered.len()).filter(|b| self.covered[*b]).map(|b| BranchId(b as u32)).collect()
    }

    /// Appends one execution and returns the number of newly covered arms.
    pub fn record(&mut self, p: &Program, cfg: &Cfg, trace: Trace, input: InputVector, parent: Option<(usize, usize)>) -> usize {
        let exec = self.paths.len();
        let mut fresh = 0;
        let mut seen = HashSet::new();
        for site in trace.path.sites() {
            let st = &mut self.sites[site.index()];
            st.occurrences += 1;
            if seen.insert(site) {
                st.covered += 1;
                st.last_seen = Some(exec);
            }
            if !self.covered[site.index()] {
                self.covered[site.index()] = true;
                self.covered_count += 1;
                self.uncovered_by_function[p.site(site).function] -= 1;
                fresh += 1;
            }
        }
        if fresh > 0 {
            let uncovered: Vec<BranchId> = p.sites.iter().map(|s| s.id).filter(|b| !self.covered[b.index()]).collect();
            self.dist_to_uncovered = cfg.distances_to(&uncovered);
        }
        self.paths.push(PathRecord {
            pc: trace.path,
            input,
            parent,
            end: trace.end,
            new_branches: fresh,
            last_entered: trace.last_entered,
        });
        fresh
    }

    pub fn site_of(&self, m: usize, i: usize) -> BranchId {
        self.paths[m].pc.conditions[i - 1].site
    }

    /// Whether `φᵢ` of path `m` mentions an input; constant conditions cannot be negated.
    pub fn is_symbolic(&self, m: usize, i: usize) -> bool {
        self.paths[m].pc.get(i).is_some_and(|c| !c.expr.is_const())
    }

    pub fn is_attempted(&self, m: usize, i: usize) -> bool {
        self.attempted.contains(&(m, i))
    }

    /// Arms at positions `i-k..=i` of path `m` (fewer near the start of the path).
    pub fn context(&self, m: usize, i: usize, k: usize) -> Vec<BranchId> {
        let conds = &self.paths[m].pc.conditions;
        conds[i.saturating_sub(k + 1)..i].iter().map(|c| c.site).collect()
    }

    pub fn context_seen(&self, ctx: &[BranchId]) -> bool {
        self.contexts.contains(ctx)
    }

    pub fn note_attempt(&mut self, m: usize, i: usize) {
        self.attempted.insert((m, i));
        self.last_negation = Some((m, i));
        let site = self.site_of(m, i);
        self.sites[site.index()].negated += 1;
        for k in 1..=5 {
            let ctx = self.context(m, i, k);
            self.contexts.insert(ctx);
        }
    }

    pub fn note_result(&mut self, m: usize, i: usize, verdict: &SolverVerdict) {
        let site = self.site_of(m, i);
        let st = &mut self.sites[site.index()];
        st.last_failed = !verdict.is_sat();
        if !verdict.is_sat() {
            st.failures += 1;
        }
        if matches!(verdict, SolverVerdict::Unknown(_)) {
            self.had_unknown = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub kind: FailKind,
    pub function: String,
    pub line: u32,
    /// 0-based execution that first hit it.
    pub execution: usize,
    pub input: InputVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub heuristic: String,
    pub seed: u64,
    pub total_branches: usize,
    pub executions_used: usize,
    pub covered: Vec<BranchId>,
    /// Covered-arm count after each execution.
    pub coverage_curve: Vec<usize>,
    pub bugs: Vec<BugReport>,
    pub restarts: usize,
    pub solver_queries: u64,
    pub failed_negations: u64,
}

impl RunReport {
    pub fn coverage(&self) -> usize {
        self.covered.len()
    }

    pub fn found(&self, kind: FailKind) -> bool {
        self.bugs.iter().any(|b| b.kind == kind)
    }
}

/// Runs Algorithm 1 for at most `config.budget` executions.
pub fn run_concolic(p: &Program, cfg: &Cfg, h: &ConcolicHeuristic, config: &ConcolicConfig) -> (RunReport, ExecutionTree) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut solver = Solver::new(config.solver.clone());
    let bits = solver.domain_bits();
    let mut chooser = ConcolicChooser::new(h.clone(), p);
    let mut tree = ExecutionTree::new(p, cfg);
    let mut input = match &config.initial {
        InitialInput::Zero => zero_input(p),
        InitialInput::Random => random_input(p, &mut rng, bits),
        InitialInput::Given(v) => {
            let mut full = zero_input(p);
            full.extend(v.iter().map(|(k, v)| (k.clone(), *v)));
            full
        }
    };
    let mut parent = None;
    let mut curve = Vec::new();
    let mut bugs: Vec<BugReport> = Vec::new();
    let mut restarts = 0;
    let mut failed = 0;
    let mut reported = HashSet::new();
    'run: for exec in 0..config.budget.max(1) {
        let trace = run_concrete_limited(p, &input, config.step_limit);
        if let Termination::Fault { fault, function, line } = &trace.end {
            if reported.insert((*fault, function.clone(), *line)) {
                bugs.push(BugReport { kind: *fault, function: function.clone(), line: *line, execution: exec, input: input.clone() });
            }
        }
        tree.record(p, cfg, trace, input.clone(), parent);
        curve.push(tree.covered_count);
        chooser.observe(&tree);
        if exec + 1 >= config.budget {
            break;
        }
        let mut tried = HashSet::new();
        loop {
            match chooser.choose(p, &tree, &tried, &mut rng) {
                Choice::Negate(m, i) => {
                    tried.insert((m, i));
                    tree.note_attempt(m, i);
                    let query = negated_prefix(&tree.paths[m].pc, i).expect("chooser returns valid indices");
                    let verdict = solver.check_sat(&query);
                    tree.note_result(m, i, &verdict);
                    if let SolverVerdict::Sat(model) = verdict {
                        let mut next = tree.paths[m].input.clone();
                        next.extend(model);
                        input = next;
                        parent = Some((m, i));
                        break;
                    }
                    failed += 1;
                }
                Choice::Exhausted { complete: true } => break 'run,
                Choice::Exhausted { complete: false } => {
                    input = random_input(p, &mut rng, bits);
                    parent = None;
                    restarts += 1;
                    break;
                }
            }
        }
    }
    let report = RunReport {
        heuristic: h.name(),
        seed: config.seed,
        total_branches: p.branch_count(),
        executions_used: tree.paths.len(),
        covered: tree.covered_set().into_iter().collect(),
        coverage_curve: curve,
        bugs,
        restarts,
        solver_queries: solver.queries,
        failed_negations: failed,
    };
    (report, tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{build_cfg, parse};

    fn input(pairs: &[(&str, i32)]) -> InputVector {
        pairs.iter().map(|(k, v)| (k.parse().unwrap(), *v)).collect()
    }

    const EQ20: &str = "void main(){ int x = input(); if (x == 20) { error(); } }";

    #[test]
    fn error_arm_is_a_bug_event() {
        let p = parse(EQ20).unwrap();
        let t = run_concrete(&p, &input(&[("x", 20)]));
        assert_eq!(t.path.len(), 1);
        assert_eq!(t.path.conditions[0].expr.to_string(), "(x == 20)");
        assert!(matches!(t.end, Termination::Fault { fault: FailKind::ErrorCall, .. }));
        let t = run_concrete(&p, &input(&[("x", 0)]));
        assert_eq!(t.path.conditions[0].expr.to_string(), "!(x == 20)");
        assert_eq!(t.end, Termination::Halted);
    }

    #[test]
    fn loop_header_is_evaluated_per_iteration() {
        let p = parse("void main(){ int x = input(); while (x < 2) { x = x + 1; } }").unwrap();
        let t = run_concrete(&p, &input(&[("x", 0)]));
        let shown: Vec<String> = t.path.conditions.iter().map(|c| c.expr.to_string()).collect();
        assert_eq!(shown, ["(x < 2)", "((x + 1) < 2)", "!(((x + 1) + 1) < 2)"]);
    }

    #[test]
    fn faults_stop_execution() {
        let p = parse("void main(){ int a[2]; int i = input(); int d = input(); a[i] = 1; d = 10 / d; }").unwrap();
        let t = run_concrete(&p, &input(&[("i", 2), ("d", 1)]));
        assert!(matches!(t.end, Termination::Fault { fault: FailKind::IndexOutOfBounds, .. }));
        let t = run_concrete(&p, &input(&[("i", 1), ("d", 0)]));
        assert!(matches!(t.end, Termination::Fault { fault: FailKind::DivisionByZero, .. }));
        assert_eq!(t.path.assumptions.len(), 1, "symbolic index pinned to its concrete value");
    }

    #[test]
    fn step_limit_is_recorded() {
        let p = parse("void main(){ int x = 0; while (1) { x = x + 1; } }").unwrap();
        let t = run_concrete_limited(&p, &InputVector::new(), 500);
        assert_eq!(t.end, Termination::StepLimit);
        assert_eq!(t.steps, 500);
    }

    #[test]
    fn second_execution_negates_into_the_error() {
        let p = parse(EQ20).unwrap();
        let cfg = build_cfg(&p);
        let config = ConcolicConfig { budget: 2, ..ConcolicConfig::default() };
        for h in [ConcolicHeuristic::Dfs, ConcolicHeuristic::Random, ConcolicHeuristic::Cfds, ConcolicHeuristic::Gen, ConcolicHeuristic::Cgs(2)] {
            let (report, tree) = run_concolic(&p, &cfg, &h, &config);
            assert_eq!(report.executions_used, 2);
            assert_eq!(tree.paths[1].input[&SymbolId::scalar("x")], 20);
            assert_eq!(report.coverage(), 2);
            assert!(report.found(FailKind::ErrorCall));
            assert_eq!(report.coverage_curve, vec![1, 2]);
        }
    }

    #[test]
    fn budget_of_one_runs_v0_only() {
        let p = parse(EQ20).unwrap();
        let cfg = build_cfg(&p);
        let config = ConcolicConfig { budget: 1, ..ConcolicConfig::default() };
        let (report, _) = run_concolic(&p, &cfg, &ConcolicHeuristic::Dfs, &config);
        assert_eq!(report.executions_used, 1);
        assert_eq!(report.coverage(), 1);
    }
}
