use proptest::prelude::*;

use dse_core::solver::{brute_force_models, check_sat, Backend, Solver, SolverConfig, SolverVerdict, UnknownReason};
use dse_core::symcore::{ArithOp, CmpOp, Constraint, SymExpr};

fn x() -> SymExpr {
    SymExpr::var("x")
}

fn y() -> SymExpr {
    SymExpr::var("y")
}

fn builtin(bits: u8) -> Backend {
    Backend::Builtin { domain_bits: bits }
}

fn term() -> impl Strategy<Value = SymExpr> {
    let leaf = prop_oneof![Just(x()), Just(y()), (-9..10i32).prop_map(SymExpr::int)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Rem]), inner.clone(), inner)
            .prop_map(|(op, a, b)| SymExpr::arith(op, a, b))
    })
}

fn atom() -> impl Strategy<Value = SymExpr> {
    let ops = vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];
    (prop::sample::select(ops), term(), term()).prop_map(|(op, a, b)| SymExpr::cmp(op, a, b))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn verdicts_match_enumeration_on_small_domains(atoms in prop::collection::vec(atom(), 1..4)) {
        let c = Constraint::new(atoms);
        let models = brute_force_models(&c, 6, 4).unwrap();
        match check_sat(&c, &builtin(6)) {
            SolverVerdict::Sat(m) => {
                prop_assert!(c.holds(&m), "model {m:?} violates {c}");
                prop_assert!(!models.is_empty());
            }
            SolverVerdict::Unsat => prop_assert!(models.is_empty(), "unsat but {} models", models.len()),
            SolverVerdict::Unknown(r) => prop_assert!(false, "small domains are decided, got {r:?}"),
        }
    }
}

#[test]
fn arithmetic_wraps_at_32_bits() {
    let overflow = Constraint::new(vec![SymExpr::cmp(CmpOp::Lt, SymExpr::arith(ArithOp::Add, x(), SymExpr::int(1)), x())]);
    let v = check_sat(&overflow, &builtin(32));
    let m = v.clone().model().unwrap_or_else(|| panic!("x = i32::MAX overflows, got {v:?}"));
    assert!(overflow.holds(&m));
    assert!(matches!(check_sat(&overflow, &builtin(8)), SolverVerdict::Unsat), "no overflow inside 8 bits");
}

#[test]
fn any_unsatisfiable_part_decides_the_query() {
    let c = Constraint::new(vec![
        SymExpr::cmp(CmpOp::Eq, x(), SymExpr::int(3)),
        SymExpr::cmp(CmpOp::Lt, y(), SymExpr::int(0)),
        SymExpr::cmp(CmpOp::Gt, y(), SymExpr::int(0)),
    ]);
    assert_eq!(check_sat(&c, &builtin(32)), SolverVerdict::Unsat);
}

#[test]
fn empty_constraint_is_satisfiable() {
    assert!(check_sat(&Constraint::new(vec![]), &builtin(32)).is_sat());
}

#[test]
fn missing_external_solver_is_unknown() {
    let backend = Backend::External { command: "/nonexistent/solver -in".into() };
    let mut solver = Solver::new(SolverConfig { backend, ..SolverConfig::default() });
    let c = Constraint::new(vec![SymExpr::cmp(CmpOp::Eq, x(), SymExpr::int(1))]);
    assert!(matches!(solver.check_sat(&c), SolverVerdict::Unknown(UnknownReason::ExternalProcessFailure(_))));
}
