use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dse_core::concolic::{run_concrete, ExecutionTree, InputVector};
use dse_core::features::{FeatureVector, Mode};
use dse_core::heuristics::{
    argmax_set, parse_heuristic, score, Choice, ConcolicChooser, ConcolicHeuristic, EgtHeuristic, Heuristic,
    HeuristicError, ParamVector,
};
use dse_core::lang::{build_cfg, parse, Cfg, Program};
use dse_core::symcore::SymbolId;

fn tree_of(p: &Program, cfg: &Cfg, inputs: &[&[(&str, i32)]]) -> ExecutionTree {
    let mut tree = ExecutionTree::new(p, cfg);
    for vals in inputs {
        let v: InputVector = vals.iter().map(|(n, x)| (SymbolId::scalar(n), *x)).collect();
        tree.record(p, cfg, run_concrete(p, &v), v, None);
    }
    tree
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[test]
fn score_sums_weights_of_set_features() {
    let theta = ParamVector(vec![0.5, -2.0, 1.0]);
    assert_eq!(score(&theta, &FeatureVector::from_bools(&[true, false, true])).unwrap(), 1.5);
    assert_eq!(score(&theta, &FeatureVector::from_bools(&[false, true, false])).unwrap(), -2.0);
    assert_eq!(
        score(&theta, &FeatureVector::from_bools(&[true, true])),
        Err(HeuristicError::LengthMismatch { expected: 2, found: 3 })
    );
}

#[test]
fn argmax_keeps_every_tie() {
    let theta = ParamVector(vec![1.0, 1.0, -1.0]);
    let fvs = [
        FeatureVector::from_bools(&[true, false, false]),
        FeatureVector::from_bools(&[false, true, false]),
        FeatureVector::from_bools(&[true, false, true]),
    ];
    assert_eq!(argmax_set(&theta, &fvs), vec![0, 1]);
}

#[test]
fn zero_parameters_pick_the_first_branch() {
    let p = parse("void main(){ int x = input(); if (x > 0) {} if (x > 5) {} if (x > 9) {} }").unwrap();
    let cfg = build_cfg(&p);
    let tree = tree_of(&p, &cfg, &[&[("x", 0)]]);
    let mut c = ConcolicChooser::new(ConcolicHeuristic::Parametric(ParamVector::zeros(40)), &p);
    assert_eq!(c.choose(&p, &tree, &HashSet::new(), &mut rng()), Choice::Negate(0, 1));
    assert_eq!(c.choose(&p, &tree, &HashSet::from([(0, 1)]), &mut rng()), Choice::Negate(0, 2));
}

/// Only the third branch of the latest path has an opposite arm whose head is the tail of an
/// uncovered arm; the earlier opposites are covered and further away.
#[test]
fn cfds_negates_the_branch_closest_to_uncovered_code() {
    let p = parse(
        "void main(){ int x = input(); int y = input(); int z = input();
           if (x > 0) { x = 1; }
           if (y > 0) { y = 1; }
           if (z > 0) { if (z == 50) { z = 2; } }
           x = 0; }",
    )
    .unwrap();
    let cfg = build_cfg(&p);
    let tree = tree_of(&p, &cfg, &[&[("x", 1), ("y", 1), ("z", 1)], &[("x", -1), ("y", -1), ("z", -1)]]);
    assert_eq!(tree.covered.iter().filter(|c| !**c).count(), 1);
    let mut c = ConcolicChooser::new(ConcolicHeuristic::Cfds, &p);
    assert_eq!(c.choose(&p, &tree, &HashSet::new(), &mut rng()), Choice::Negate(1, 3));
    // With the third branch taken, the next closest is the second.
    assert_eq!(c.choose(&p, &tree, &HashSet::from([(1, 3)]), &mut rng()), Choice::Negate(1, 2));
}

/// A loop path T,T,T,T,T,F has 1-contexts [T], [T,T] (x4) and [T,F]; repeats are skipped.
#[test]
fn cgs_skips_contexts_it_already_chose() {
    let p = parse("void main(){ int x = input(); while (x < 5) { x = x + 1; } }").unwrap();
    let cfg = build_cfg(&p);
    let tree = tree_of(&p, &cfg, &[&[("x", 0)]]);
    assert_eq!(tree.paths[0].pc.len(), 6);
    let mut c = ConcolicChooser::new(ConcolicHeuristic::Cgs(1), &p);
    let mut tried = HashSet::new();
    let mut picks = Vec::new();
    loop {
        match c.choose(&p, &tree, &tried, &mut rng()) {
            Choice::Negate(m, i) => {
                tried.insert((m, i));
                picks.push(i);
            }
            Choice::Exhausted { .. } => break,
        }
    }
    assert_eq!(picks, [1, 2, 6]);
}

#[test]
fn dfs_negates_the_deepest_untried_branch() {
    let p = parse("void main(){ int x = input(); if (x > 0) {} if (x > 5) {} if (x > 9) {} }").unwrap();
    let cfg = build_cfg(&p);
    let tree = tree_of(&p, &cfg, &[&[("x", 0)]]);
    let mut c = ConcolicChooser::new(ConcolicHeuristic::Dfs, &p);
    assert_eq!(c.choose(&p, &tree, &HashSet::new(), &mut rng()), Choice::Negate(0, 3));
    let all = HashSet::from([(0, 1), (0, 2), (0, 3)]);
    assert_eq!(c.choose(&p, &tree, &all, &mut rng()), Choice::Exhausted { complete: true });
}

#[test]
fn heuristic_names_parse_per_mode() {
    let no_file = |_: &str| -> Result<ParamVector, String> { Err("no files here".into()) };
    assert_eq!(parse_heuristic("cgs:3", Mode::Branch, &no_file).unwrap(), Heuristic::Concolic(ConcolicHeuristic::Cgs(3)));
    assert_eq!(parse_heuristic("covnew", Mode::State, &no_file).unwrap(), Heuristic::Egt(EgtHeuristic::CovNew));
    assert_eq!(
        parse_heuristic("round-robin:depth,covnew", Mode::State, &no_file).unwrap(),
        Heuristic::Egt(EgtHeuristic::RoundRobin(vec![EgtHeuristic::Depth, EgtHeuristic::CovNew]))
    );
    assert!(matches!(parse_heuristic("covnew", Mode::Branch, &no_file), Err(HeuristicError::Unknown(_))));
    assert!(matches!(parse_heuristic("cgs:9", Mode::Branch, &no_file), Err(HeuristicError::Invalid { .. })));
    assert!(matches!(parse_heuristic("parametric:t.json", Mode::Branch, &no_file), Err(HeuristicError::Invalid { .. })));
    let short = |_: &str| Ok(ParamVector::zeros(26));
    assert!(matches!(
        parse_heuristic("parametric:t.json", Mode::Branch, &short),
        Err(HeuristicError::LengthMismatch { expected: 40, found: 26 })
    ));
    assert!(parse_heuristic("parametric:t.json", Mode::State, &short).is_ok());
}
