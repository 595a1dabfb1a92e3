use std::collections::VecDeque;
use std::path::Path;

use dse_core::lang::{branch_distance, build_cfg, parse, BranchId, BranchKind, Cfg, EdgeKind, LangError, Program};

fn corpus(name: &str) -> Program {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const CORPUS: [&str; 9] = [
    "tri.mc",
    "loopsum.mc",
    "switchy.mc",
    "maze.mc",
    "wide.mc",
    "deep.mc",
    "fixtures/loop_if.mc",
    "fixtures/three_ifs.mc",
    "fixtures/eq20.mc",
];

#[test]
fn one_conditional_yields_two_arms() {
    let p = parse("void main(){int x=input(); if(x>0){} }").unwrap();
    assert_eq!(p.branch_count(), 2);
    assert_eq!(p.sites[0].id, BranchId(0));
    assert!(p.sites[0].polarity);
    assert!(!p.sites[1].polarity);
    assert_eq!(p.sites[0].opposite, BranchId(1));
    assert_eq!(p.sites[1].opposite, BranchId(0));
}

#[test]
fn loop_header_arms() {
    let p = parse("void main(){int x=input(); while(x<3){x=x+1;} }").unwrap();
    assert_eq!(p.branch_count(), 2);
    assert!(p.sites.iter().all(|s| s.kind == BranchKind::WhileHeader));
    assert!(p.functions[p.entry].has_loop);
}

#[test]
fn malformed_if_reports_position() {
    match parse("void main(){ if(") {
        Err(LangError::Syntax { pos, .. }) => assert_eq!((pos.line, pos.col), (1, 17)),
        other => panic!("expected a syntax error, got {other:?}"),
    }
    match parse("void main() {\n  int x = input();\n  x = x + ;\n}") {
        Err(LangError::Syntax { pos, .. }) => assert_eq!((pos.line, pos.col), (3, 11)),
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn semantic_errors() {
    let bad = [
        "void main(){ int x = 1; int x = 2; }",
        "void main(){ y = 1; }",
        "int f(int a){ return f(a); } void main(){ int x = f(1); }",
        "int f(int a){ return g(a); } int g(int a){ return f(a); } void main(){ int x = f(1); }",
        "void main(){ int x = 1 + input(); }",
        "void main(){ int a[3] = input_array(4); }",
        "void f(){ } void main(){ int x = f(); }",
        "int f(){ return 1; }",
        "void main(){ switch (1) { case 1: break; case 1: break; } }",
    ];
    for src in bad {
        assert!(matches!(parse(src), Err(LangError::Semantic { .. })), "{src} should be rejected");
    }
}

#[test]
fn switch_becomes_an_equality_cascade() {
    let p = parse("void main(){ int x = input(); switch (x) { case 1: x = 2; break; case 4: x = 3; break; default: x = 0; } }")
        .unwrap();
    assert_eq!(p.branch_count(), 4);
    assert!(p.sites.iter().all(|s| s.kind == BranchKind::SwitchCase && s.shape.is_equality));
}

#[test]
fn assert_is_a_conditional_with_a_failing_arm() {
    let p = parse("void main(){ int x = input(); assert(x != 3); }").unwrap();
    assert_eq!(p.branch_count(), 2);
}

#[test]
fn condition_shapes() {
    let p = parse("void main(){ int a[2] = input_array(2); int x = input(); if (a[0] > 1 && x == a[1]) {} if (x < x) {} }").unwrap();
    let s = &p.sites[0].shape;
    assert!(s.uses_array && s.uses_constant && s.comparisons == 2);
    let t = &p.sites[2].shape;
    assert!(!t.uses_array && !t.uses_constant && !t.is_equality && t.comparisons == 1);
}

#[test]
fn pretty_printing_round_trips() {
    for name in CORPUS {
        let p = corpus(name);
        let again = parse(&p.pretty()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again.pretty(), p.pretty(), "{name}");
        assert_eq!(again.branch_count(), p.branch_count(), "{name}");
    }
}

#[test]
fn branch_ids_are_dense_and_paired() {
    for name in CORPUS {
        let p = corpus(name);
        for (i, s) in p.sites.iter().enumerate() {
            assert_eq!(s.id.index(), i);
            let o = p.site(s.opposite);
            assert_eq!(o.opposite, s.id);
            assert_ne!(o.polarity, s.polarity);
            assert_eq!(o.kind, s.kind);
        }
        assert_eq!(p.branch_count() % 2, 0);
    }
}

#[test]
fn straight_line_cfg() {
    let p = parse("void main(){ int x = input(); x = x + 1; }").unwrap();
    let cfg = build_cfg(&p);
    assert_eq!(cfg.nodes.len(), 1);
    assert_eq!(cfg.labelled_edges().count(), 0);
}

#[test]
fn if_else_is_a_diamond() {
    let p = parse("void main(){ int x = input(); if (x > 0) { x = 1; } else { x = 2; } }").unwrap();
    let cfg = build_cfg(&p);
    assert_eq!(cfg.nodes.len(), 4);
    assert_eq!(cfg.labelled_edges().count(), 2);
    let (t, f) = (cfg.edge_of(BranchId(0)), cfg.edge_of(BranchId(1)));
    assert_eq!(t.from, f.from);
    assert_ne!(t.to, f.to);
}

/// Hand-drawn CFG of fixtures/loop_if.mc: entry -> header; header -b0-> body, -b1-> exit;
/// body -b2-> then, -b3-> join; then -> join; join -> header (back edge).
#[test]
fn nested_if_in_while() {
    let p = corpus("fixtures/loop_if.mc");
    let cfg = build_cfg(&p);
    let header = cfg.edge_of(BranchId(0)).from;
    assert_eq!(cfg.edge_of(BranchId(1)).from, header);
    let body = cfg.edge_of(BranchId(0)).to;
    assert_eq!(cfg.edge_of(BranchId(2)).from, body);
    assert_eq!(cfg.edge_of(BranchId(3)).from, body);
    // A back edge: the header is reachable again from the loop body.
    let mut seen = vec![false; cfg.nodes.len()];
    let mut queue = VecDeque::from([body]);
    let mut back = false;
    while let Some(n) = queue.pop_front() {
        for e in cfg.successors(n) {
            if e.to == header {
                back = true;
            }
            if !seen[e.to] {
                seen[e.to] = true;
                queue.push_back(e.to);
            }
        }
    }
    assert!(back);
    assert!(!p.sites[0].in_loop_body && !p.sites[1].in_loop_body);
    assert!(p.sites[2].in_loop_body && p.sites[3].in_loop_body);
    assert_eq!(p.sites[2].kind, BranchKind::If);
}

#[test]
fn calls_add_call_and_return_edges() {
    let p = corpus("wide.mc");
    let cfg = build_cfg(&p);
    assert!(cfg.edges.iter().any(|e| e.kind == EdgeKind::Call));
    assert!(cfg.edges.iter().any(|e| e.kind == EdgeKind::Return));
}

#[test]
fn distance_examples() {
    let three = corpus("fixtures/three_ifs.mc");
    let cfg = build_cfg(&three);
    assert_eq!(branch_distance(&cfg, BranchId(0), &[BranchId(0)]), Some(0));
    assert_eq!(branch_distance(&cfg, BranchId(0), &[BranchId(4)]), Some(1));
    assert_eq!(branch_distance(&cfg, BranchId(0), &[BranchId(2)]), Some(0));
    let diamond = parse("void main(){ int x = input(); if (x > 0) { x = 1; } else { x = 2; } }").unwrap();
    assert_eq!(branch_distance(&build_cfg(&diamond), BranchId(0), &[BranchId(1)]), None);
}

/// Independent oracle: Dijkstra from the head of `from`, cost 1 per labelled edge crossed
/// before reaching a target edge.
fn oracle_distance(cfg: &Cfg, from: BranchId, target: BranchId) -> Option<u32> {
    if from == target {
        return Some(0);
    }
    let n = cfg.nodes.len();
    let mut best = vec![u32::MAX; n];
    let start = cfg.edge_of(from).to;
    best[start] = 0;
    let mut done = vec![false; n];
    loop {
        let Some(u) = (0..n).filter(|&u| !done[u] && best[u] != u32::MAX).min_by_key(|&u| best[u]) else { break };
        done[u] = true;
        for e in cfg.successors(u) {
            let w = match e.kind {
                EdgeKind::Branch(_) => 1,
                _ => 0,
            };
            if best[u] + w < best[e.to] {
                best[e.to] = best[u] + w;
            }
        }
    }
    let tail = cfg.edge_of(target).from;
    (best[tail] != u32::MAX).then_some(best[tail])
}

#[test]
fn distances_match_the_oracle_on_the_corpus() {
    for name in CORPUS {
        let p = corpus(name);
        let cfg = build_cfg(&p);
        for a in 0..p.branch_count() as u32 {
            for b in 0..p.branch_count() as u32 {
                assert_eq!(
                    branch_distance(&cfg, BranchId(a), &[BranchId(b)]),
                    oracle_distance(&cfg, BranchId(a), BranchId(b)),
                    "{name}: b{a} -> b{b}"
                );
            }
        }
    }
}

#[test]
fn batch_distances_agree_with_single_queries() {
    for name in CORPUS {
        let p = corpus(name);
        let cfg = build_cfg(&p);
        let targets: Vec<BranchId> = (0..p.branch_count() as u32).step_by(3).map(BranchId).collect();
        let all = cfg.distances_to(&targets);
        for a in 0..p.branch_count() as u32 {
            assert_eq!(all[a as usize], branch_distance(&cfg, BranchId(a), &targets), "{name}: b{a}");
        }
    }
}

/// Counting intermediate labelled edges, a path through `b` crosses `b` itself once.
#[test]
fn triangle_inequality_through_intermediate_arms() {
    for name in CORPUS {
        let p = corpus(name);
        let cfg = build_cfg(&p);
        let n = p.branch_count() as u32;
        let d = |a: u32, b: u32| branch_distance(&cfg, BranchId(a), &[BranchId(b)]);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if let (Some(ab), Some(bc)) = (d(a, b), d(b, c)) {
                        let ac = d(a, c).expect("reachable through b");
                        let via = if a == b || b == c { ab + bc } else { ab + bc + 1 };
                        assert!(ac <= via, "{name}: d(b{a},b{c})={ac} > {via}");
                    }
                }
            }
        }
    }
}
