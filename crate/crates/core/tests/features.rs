use dse_core::concolic::{run_concrete, ExecutionTree, InputVector};
use dse_core::egt::{EgtGlobals, SymState};
use dse_core::features::{extract_state_features, BranchContext, PoolStats, BRANCH_CATALOG, STATE_CATALOG};
use dse_core::lang::{build_cfg, parse, BranchId, Cfg, Program};
use dse_core::symcore::{SymExpr, SymbolId};

fn program(src: &str) -> (Program, Cfg) {
    let p = parse(src).unwrap();
    let cfg = build_cfg(&p);
    (p, cfg)
}

fn tree_of(p: &Program, cfg: &Cfg, v: InputVector) -> ExecutionTree {
    let mut tree = ExecutionTree::new(p, cfg);
    tree.record(p, cfg, run_concrete(p, &v), v, None);
    tree
}

fn x(v: i32) -> InputVector {
    [(SymbolId::scalar("x"), v)].into_iter().collect()
}

#[test]
fn catalogs_have_the_documented_sizes() {
    assert_eq!(BRANCH_CATALOG.len(), 40);
    assert_eq!(STATE_CATALOG.len(), 26);
}

#[test]
fn loop_arms_set_their_own_bits() {
    let (p, cfg) = program("void main(){ int x = input(); while (x < 3) { x = x + 1; } }");
    let tree = tree_of(&p, &cfg, x(1));
    let ctx = BranchContext::new(&p, &tree, 0);
    let t = ctx.extract(1);
    assert!(t.get(2) && !t.get(3));
    let f = ctx.extract(3);
    assert!(!f.get(2) && f.get(3));
    assert!(t.get(1) && t.get(39), "main holds a loop");
    assert!(t.get(7), "compares against a constant");
    assert!(!t.get(8) && !t.get(9) && !t.get(11));
}

#[test]
fn array_and_multi_input_conditions() {
    let (p, cfg) = program("void main(){ int a[2] = input_array(2); if (a[0] == a[1]) { a[0] = 1; } }");
    let v: InputVector = [(SymbolId::element("a", 0), 1), (SymbolId::element("a", 1), 2)].into_iter().collect();
    let tree = tree_of(&p, &cfg, v);
    let f = BranchContext::new(&p, &tree, 0).extract(1);
    assert!(f.get(8) && f.get(9) && f.get(40));
    assert!(f.get(7), "any integer literal in the condition counts, array indices included");
}

#[test]
fn negation_counters() {
    let (p, cfg) = program("void main(){ int x = input(); if (x > 0) { x = 1; } }");
    let mut tree = tree_of(&p, &cfg, x(0));
    let fresh = BranchContext::new(&p, &tree, 0).extract(1);
    assert!(fresh.get(38) && !fresh.get(24));
    assert!(fresh.get(27), "the true arm is still uncovered");
    assert!((19..=23).all(|j| fresh.get(j)), "no context negated yet");
    for _ in 0..11 {
        tree.note_attempt(0, 1);
    }
    let f = BranchContext::new(&p, &tree, 0).extract(1);
    assert!(f.get(24) && !f.get(25) && !f.get(26) && !f.get(38));
    assert!(!f.get(19));
}

fn state(p: &Program, creation: u64, depth: usize, cost: u64) -> SymState {
    let mut s = SymState::initial(p, creation, 0);
    for _ in 0..depth {
        s.phi.push_branch(SymExpr::var("x"), BranchId(0));
    }
    s.query_cost = cost;
    s
}

#[test]
fn empty_path_condition_clears_branch_rows() {
    let (p, cfg) = program("void main(){ int x = input(); if (x > 0) { x = 1; } }");
    let g = EgtGlobals::new(&p, &cfg, false);
    let pool = vec![state(&p, 0, 0, 0)];
    let f = extract_state_features(&p, &g, &pool[0], &PoolStats::compute(&g, &pool));
    assert!((1..=19).all(|j| !f.get(j)));
    // A lone state is in every 10% band.
    assert!((20..=26).all(|j| f.get(j)));
}

#[test]
fn deepest_state_alone_gets_the_depth_bit() {
    let (p, cfg) = program("void main(){ int x = input(); if (x > 0) { x = 1; } }");
    let g = EgtGlobals::new(&p, &cfg, false);
    let pool: Vec<SymState> = [1, 4, 2, 3].iter().enumerate().map(|(k, d)| state(&p, k as u64, *d, 0)).collect();
    let stats = PoolStats::compute(&g, &pool);
    let bits: Vec<bool> = pool.iter().map(|s| extract_state_features(&p, &g, s, &stats).get(20)).collect();
    assert_eq!(bits, [false, true, false, false]);
    let shallow: Vec<bool> = pool.iter().map(|s| extract_state_features(&p, &g, s, &stats).get(21)).collect();
    assert_eq!(shallow, [true, false, false, false]);
}

#[test]
fn cheapest_query_state_gets_the_cost_bit() {
    let (p, cfg) = program("void main(){ int x = input(); if (x > 0) { x = 1; } }");
    let g = EgtGlobals::new(&p, &cfg, false);
    let pool: Vec<SymState> = [1, 2, 3].iter().enumerate().map(|(k, c)| state(&p, k as u64, 1, *c)).collect();
    let stats = PoolStats::compute(&g, &pool);
    let bits: Vec<bool> = pool.iter().map(|s| extract_state_features(&p, &g, s, &stats).get(24)).collect();
    assert_eq!(bits, [true, false, false]);
}
