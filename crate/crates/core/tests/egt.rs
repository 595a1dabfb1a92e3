use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dse_core::concolic::{run_concrete, InputVector};
use dse_core::egt::{
    replay_coverage, run_egt, step_state, EgtBudget, EgtConfig, EgtGlobals, ForkTree, StepOutcome, SymState, TestCase,
    TestOrigin,
};
use dse_core::heuristics::{EgtChooser, EgtHeuristic, ParamVector};
use dse_core::lang::{build_cfg, parse, BranchId, Cfg, FailKind, Program};
use dse_core::solver::{Solver, SolverConfig};
use dse_core::symcore::{CmpOp, Constraint, SymExpr, SymbolId};

fn corpus(name: &str) -> (Program, Cfg) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    let p = parse(&std::fs::read_to_string(path).unwrap()).unwrap();
    let cfg = build_cfg(&p);
    (p, cfg)
}

fn program(src: &str) -> (Program, Cfg) {
    let p = parse(src).unwrap();
    let cfg = build_cfg(&p);
    (p, cfg)
}

/// Steps `s` until it does something other than continue.
fn advance(p: &Program, mut s: SymState, solver: &mut Solver, g: &mut EgtGlobals) -> StepOutcome {
    loop {
        match step_state(p, s, solver, g) {
            StepOutcome::Continue(next) => s = next,
            other => return other,
        }
    }
}

fn iterations(n: u64) -> EgtConfig {
    EgtConfig { budget: EgtBudget::Iterations(n), solver: SolverConfig::builtin(8), ..Default::default() }
}

#[test]
fn symbolic_branch_forks_into_both_arms() {
    let (p, cfg) = corpus("fixtures/eq20.mc");
    let mut g = EgtGlobals::new(&p, &cfg, false);
    let mut solver = Solver::new(SolverConfig::builtin(8));
    let StepOutcome::Forked(a, b) = advance(&p, SymState::initial(&p, 0, 0), &mut solver, &mut g) else {
        panic!("expected a fork at x == 20");
    };
    let x = SymbolId::scalar("x");
    for s in [&a, &b] {
        assert_eq!(s.phi.len(), 1);
        assert!(s.phi.constraint().holds(&s.model), "each side carries a model of its own path");
    }
    let arms: BTreeSet<bool> = [&a, &b].iter().map(|s| p.site(s.last_site().unwrap()).polarity).collect();
    assert_eq!(arms.len(), 2);
    let taken = if p.site(a.last_site().unwrap()).polarity { &a } else { &b };
    assert_eq!(taken.model[&x], 20);
}

#[test]
fn constant_condition_continues_on_one_arm() {
    let (p, cfg) = program("void main(){ int x = input(); int y = 3; if (y > 1) { x = 1; } }");
    let mut g = EgtGlobals::new(&p, &cfg, false);
    let mut solver = Solver::new(SolverConfig::builtin(8));
    match advance(&p, SymState::initial(&p, 0, 0), &mut solver, &mut g) {
        StepOutcome::OneArm(s) => {
            assert!(s.phi.is_empty(), "a constant guard adds nothing to the path condition");
            assert_eq!(g.traversals[0], 1);
        }
        other => panic!("expected one arm, got {other:?}"),
    }
    assert_eq!(solver.queries, 0);
}

#[test]
fn halting_state_yields_a_test_satisfying_its_path() {
    let (p, cfg) = program("void main(){ int x = input(); if (x > 3) { halt; } x = 0; }");
    let mut g = EgtGlobals::new(&p, &cfg, false);
    let mut solver = Solver::new(SolverConfig::builtin(8));
    let StepOutcome::Forked(a, b) = advance(&p, SymState::initial(&p, 0, 0), &mut solver, &mut g) else {
        panic!("expected a fork");
    };
    let taken = if p.site(a.last_site().unwrap()).polarity { a } else { b };
    let StepOutcome::Halted(t) = advance(&p, taken, &mut solver, &mut g) else {
        panic!("expected the true arm to halt");
    };
    let x = t.input[&SymbolId::scalar("x")];
    assert!((4..=127).contains(&x), "x = {x}");
    assert_eq!(t.origin, TestOrigin::Halted);
    assert_eq!(t.source, Constraint::new(vec![SymExpr::cmp(CmpOp::Gt, SymExpr::var("x"), SymExpr::int(3))]));
}

#[test]
fn straight_line_program_yields_one_test() {
    let (p, cfg) = program("void main(){ int x = input(); x = x * 2 + 1; }");
    let report = run_egt(&p, &cfg, &EgtHeuristic::Dfs, &iterations(50));
    assert_eq!(report.tests.len(), 1);
    assert_eq!(report.iterations, 1);
    assert_eq!(report.coverage(), 0);
}

#[test]
fn equality_program_yields_two_tests_and_the_fault() {
    let (p, cfg) = corpus("fixtures/eq20.mc");
    for h in [EgtHeuristic::Dfs, EgtHeuristic::Bfs, EgtHeuristic::RandomPath, EgtHeuristic::CovNew, EgtHeuristic::Depth] {
        let report = run_egt(&p, &cfg, &h, &iterations(50));
        assert_eq!(report.tests.len(), 2, "{}", h.name());
        assert_eq!(report.coverage(), 2);
        assert_eq!(report.faults.len(), 1);
        assert_eq!(report.faults[0].kind, FailKind::ErrorCall);
        let faulty: Vec<&TestCase> = report.tests.iter().filter(|t| t.fault.is_some()).collect();
        assert_eq!(faulty[0].input[&SymbolId::scalar("x")], 20);
    }
}

#[test]
fn timed_run_of_an_endless_loop_stops_and_flushes() {
    let (p, cfg) = program("void main(){ int x = input(); int i = 0; while (i < 1) { x = x + 1; } }");
    let config = EgtConfig { budget: EgtBudget::Seconds(2.0), step_limit: u64::MAX, ..Default::default() };
    let start = Instant::now();
    let report = run_egt(&p, &cfg, &EgtHeuristic::Dfs, &config);
    let took = start.elapsed().as_secs_f64();
    assert!((2.0..10.0).contains(&took), "took {took}s");
    assert_eq!(report.tests.len(), 1);
    assert_eq!(report.tests[0].origin, TestOrigin::Flushed);
    assert!(report.tests[0].created_at >= 2.0);
}

fn test_with(x: i32, at: f64) -> TestCase {
    TestCase {
        input: [(SymbolId::scalar("x"), x)].into_iter().collect(),
        created_at: at,
        origin: TestOrigin::Halted,
        fault: None,
        source: Constraint::default(),
    }
}

#[test]
fn replay_accumulates_branch_coverage() {
    let (p, _) = program("void main(){ int x = input(); if (x > 0) { x = 1; } else { x = 2; } }");
    let (curve, covered) = replay_coverage(&p, &[]);
    assert!(curve.is_empty() && covered.is_empty());

    let (curve, covered) = replay_coverage(&p, &[test_with(5, 1.0), test_with(-5, 2.0)]);
    assert_eq!(curve.iter().map(|c| (c.t, c.covered)).collect::<Vec<_>>(), [(1.0, 1), (2.0, 2)]);
    assert_eq!(covered, BTreeSet::from([BranchId(0), BranchId(1)]));

    let (curve, covered) = replay_coverage(&p, &[test_with(5, 1.0), test_with(7, 2.0), test_with(5, 3.0)]);
    assert_eq!(curve.iter().map(|c| c.covered).collect::<Vec<_>>(), [1, 1, 1]);
    assert_eq!(covered.len(), 1);
}

#[test]
fn replayed_tests_reproduce_report_coverage() {
    for name in ["tri.mc", "loopsum.mc", "wide.mc", "deep.mc"] {
        let (p, cfg) = corpus(name);
        let report = run_egt(&p, &cfg, &EgtHeuristic::CovNew, &iterations(200));
        let mut union = BTreeSet::new();
        for t in &report.tests {
            let v: &InputVector = &t.input;
            union.extend(run_concrete(&p, v).path.sites());
        }
        assert_eq!(union.into_iter().collect::<Vec<_>>(), report.covered, "{name}");
    }
}

fn pool_of(p: &Program, depths: &[usize]) -> Vec<SymState> {
    depths
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut s = SymState::initial(p, k as u64, 0);
            for _ in 0..*d {
                s.phi.push_branch(SymExpr::boolean(true), BranchId(0));
            }
            s
        })
        .collect()
}

#[test]
fn every_heuristic_picks_the_only_state() {
    let (p, cfg) = corpus("tri.mc");
    let g = EgtGlobals::new(&p, &cfg, false);
    let pool = pool_of(&p, &[1]);
    let forks = ForkTree::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for h in [
        EgtHeuristic::Parametric(ParamVector::zeros(26)),
        EgtHeuristic::Dfs,
        EgtHeuristic::Bfs,
        EgtHeuristic::RandomState,
        EgtHeuristic::RandomPath,
        EgtHeuristic::CovNew,
        EgtHeuristic::Depth,
        EgtHeuristic::QueryCost,
        EgtHeuristic::MinDistance,
        EgtHeuristic::InstrCount,
        EgtHeuristic::CallPathInstrCount,
        EgtHeuristic::RoundRobin(vec![EgtHeuristic::Depth, EgtHeuristic::Bfs]),
    ] {
        assert_eq!(EgtChooser::new(h.clone()).choose(&p, &g, &pool, &forks, &mut rng), 0, "{}", h.name());
    }
}

#[test]
fn depth_prefers_the_shallower_state() {
    let (p, cfg) = corpus("tri.mc");
    let g = EgtGlobals::new(&p, &cfg, false);
    let pool = pool_of(&p, &[5, 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(EgtChooser::new(EgtHeuristic::Depth).choose(&p, &g, &pool, &ForkTree::new(), &mut rng), 1);
    // Dfs takes the newest state, Bfs the oldest.
    assert_eq!(EgtChooser::new(EgtHeuristic::Dfs).choose(&p, &g, &pool, &ForkTree::new(), &mut rng), 1);
    assert_eq!(EgtChooser::new(EgtHeuristic::Bfs).choose(&p, &g, &pool, &ForkTree::new(), &mut rng), 0);
}

/// Root forks into a lone leaf and a subtree of two: the lone leaf is drawn half the time.
#[test]
fn random_path_weights_states_by_tree_position() {
    let (p, cfg) = corpus("tri.mc");
    let g = EgtGlobals::new(&p, &cfg, false);
    let mut forks = ForkTree::new();
    let (lone, inner) = forks.fork(forks.root());
    let (l, r) = forks.fork(inner);
    let mut pool = pool_of(&p, &[0, 0, 0]);
    for (s, node) in pool.iter_mut().zip([l, lone, r]) {
        s.node = node;
    }
    let mut chooser = EgtChooser::new(EgtHeuristic::RandomPath);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 20_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[chooser.choose(&p, &g, &pool, &forks, &mut rng)] += 1;
    }
    let share = |k: usize| counts[k] as f64 / draws as f64;
    assert!((share(1) - 0.5).abs() < 0.02, "{counts:?}");
    assert!((share(0) - 0.25).abs() < 0.02, "{counts:?}");
    assert!((share(2) - 0.25).abs() < 0.02, "{counts:?}");
}

#[test]
fn deep_terms_are_pinned_to_the_model() {
    let (p, cfg) = program(
        "void main(){ int n = input(); int s = 0; int i = 0;
           while (i < 3000) { s = s + n; i = i + 1; }
           if (s > 5) { s = 0; } }",
    );
    let report = run_egt(&p, &cfg, &EgtHeuristic::Dfs, &iterations(10_000));
    assert!(!report.tests.is_empty());
    for t in &report.tests {
        assert!(t.source.holds(&t.input), "every test satisfies its path condition");
    }
}
