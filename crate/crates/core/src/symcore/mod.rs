//! Symbolic expressions, symbolic memory and path conditions shared by both engines.

mod expr;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

pub use expr::{ArithOp, CmpOp, Node, Sort, SymExpr, SymbolId, Value};

use crate::lang::ast::{BinaryOp, Expr, ExprKind, UnaryOp};
use crate::lang::BranchId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("branch index {index} out of range for a path of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unsupported expression: {0}")]
    Unsupported(String),
}

/// Deepest term the engines keep symbolic; deeper values are pinned to a concrete value.
pub const MAX_TERM_DEPTH: u32 = 256;

/// Applies a MiniC binary operator to symbolic operands, folding constants.
pub fn apply_binary(op: BinaryOp, a: SymExpr, b: SymExpr) -> SymExpr {
    match op {
        BinaryOp::Add => SymExpr::arith(ArithOp::Add, a, b),
        BinaryOp::Sub => SymExpr::arith(ArithOp::Sub, a, b),
        BinaryOp::Mul => SymExpr::arith(ArithOp::Mul, a, b),
        BinaryOp::Div => SymExpr::arith(ArithOp::Div, a, b),
        BinaryOp::Rem => SymExpr::arith(ArithOp::Rem, a, b),
        BinaryOp::Lt => SymExpr::cmp(CmpOp::Lt, a, b),
        BinaryOp::Le => SymExpr::cmp(CmpOp::Le, a, b),
        BinaryOp::Gt => SymExpr::cmp(CmpOp::Gt, a, b),
        BinaryOp::Ge => SymExpr::cmp(CmpOp::Ge, a, b),
        BinaryOp::Eq => SymExpr::cmp(CmpOp::Eq, a, b),
        BinaryOp::Ne => SymExpr::cmp(CmpOp::Ne, a, b),
        BinaryOp::And => SymExpr::and(a, b),
        BinaryOp::Or => SymExpr::or(a, b),
    }
}

pub fn apply_unary(op: UnaryOp, a: SymExpr) -> SymExpr {
    match op {
        UnaryOp::Neg => SymExpr::neg(a),
        UnaryOp::Not => SymExpr::not(a),
    }
}

/// Named-variable view of symbolic state: `S`, plus the concrete shadow in concolic mode.
/// Array elements are keyed `a[i]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolicMemory {
    pub values: BTreeMap<String, SymExpr>,
    pub shadow: Option<BTreeMap<String, i32>>,
}

impl SymbolicMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn concolic() -> Self {
        Self { values: BTreeMap::new(), shadow: Some(BTreeMap::new()) }
    }

    pub fn bind(&mut self, name: &str, value: SymExpr) -> &mut Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn bind_concolic(&mut self, name: &str, value: SymExpr, concrete: i32) -> &mut Self {
        self.values.insert(name.to_string(), value);
        self.shadow.get_or_insert_with(BTreeMap::new).insert(name.to_string(), concrete);
        self
    }

    pub fn get(&self, name: &str) -> Option<&SymExpr> {
        self.values.get(name)
    }
}

/// Evaluates a source expression over `mem`. Symbolic array indices are resolved through
/// the concrete shadow when one exists.
pub fn eval_symbolic(mem: &SymbolicMemory, e: &Expr) -> Result<SymExpr, SymError> {
    Ok(match &e.kind {
        ExprKind::Int(v) => SymExpr::int(*v as i32),
        ExprKind::Var(v) => mem.get(v).cloned().ok_or_else(|| SymError::Unbound(v.clone()))?,
        ExprKind::Index(a, idx) => {
            let i = eval_symbolic(mem, idx)?;
            let i = match i.as_const() {
                Some(v) => v.as_int(),
                None => concrete_of(mem, idx)?,
            };
            let key = format!("{a}[{i}]");
            mem.get(&key).cloned().ok_or(SymError::Unbound(key))?
        }
        ExprKind::Unary(op, a) => apply_unary(*op, eval_symbolic(mem, a)?),
        ExprKind::Binary(op, a, b) => apply_binary(*op, eval_symbolic(mem, a)?, eval_symbolic(mem, b)?),
        ExprKind::Call(f, _) => return Err(SymError::Unsupported(format!("call to `{f}`"))),
    })
}

fn concrete_of(mem: &SymbolicMemory, e: &Expr) -> Result<i32, SymError> {
    let shadow = mem
        .shadow
        .as_ref()
        .ok_or_else(|| SymError::Unsupported("symbolic index without a concrete shadow".into()))?;
    let sym = eval_symbolic(mem, e)?;
    let lookup = |_: &SymbolId| None;
    if let Some(v) = sym.eval(&lookup) {
        return Ok(v.as_int());
    }
    match &e.kind {
        ExprKind::Var(v) => shadow.get(v).copied().ok_or_else(|| SymError::Unbound(v.clone())),
        _ => Err(SymError::Unsupported("compound symbolic index".into())),
    }
}

/// One conjunct `φᵢ` of a path condition, already negated when the false arm was taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchCondition {
    pub expr: SymExpr,
    pub site: BranchId,
    /// 1-based position in the path.
    pub index: usize,
}

/// A side constraint that is not a negatable branch (index concretisation, fault guards).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assumption {
    pub expr: SymExpr,
    /// Number of branch conditions recorded before this assumption.
    pub after: usize,
}

/// `Φ = φ₁ ∧ … ∧ φₙ` together with the side constraints collected along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PathCondition {
    pub conditions: Vec<BranchCondition>,
    pub assumptions: Vec<Assumption>,
}

/// A conjunction of boolean terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Constraint(pub Vec<SymExpr>);

impl Constraint {
    pub fn new(conjuncts: Vec<SymExpr>) -> Self {
        Constraint(conjuncts.into_iter().map(|c| c.to_bool()).collect())
    }

    pub fn conjuncts(&self) -> &[SymExpr] {
        &self.0
    }

    pub fn and(mut self, e: SymExpr) -> Self {
        self.0.push(e.to_bool());
        self
    }

    pub fn symbols(&self) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        for c in &self.0 {
            c.collect_symbols(&mut out);
        }
        out
    }

    /// Truth value under an assignment; `None` if a symbol is unbound.
    pub fn eval(&self, lookup: &dyn Fn(&SymbolId) -> Option<i32>) -> Option<bool> {
        let mut all = true;
        for c in &self.0 {
            all &= c.eval(lookup)?.as_bool();
        }
        Some(all)
    }

    pub fn holds(&self, model: &BTreeMap<SymbolId, i32>) -> bool {
        self.eval(&|s| model.get(s).copied()) == Some(true)
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" /\\ "))
    }
}

impl PathCondition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn push_branch(&mut self, expr: SymExpr, site: BranchId) {
        let index = self.conditions.len() + 1;
        self.conditions.push(BranchCondition { expr: expr.to_bool(), site, index });
    }

    pub fn assume(&mut self, expr: SymExpr) {
        self.assumptions.push(Assumption { expr: expr.to_bool(), after: self.conditions.len() });
    }

    pub fn last(&self) -> Option<&BranchCondition> {
        self.conditions.last()
    }

    /// `φᵢ` for a 1-based `i`.
    pub fn get(&self, i: usize) -> Option<&BranchCondition> {
        i.checked_sub(1).and_then(|k| self.conditions.get(k))
    }

    /// `⋀_{j<i} φⱼ` plus the side constraints recorded before `φᵢ`.
    pub fn prefix(&self, i: usize) -> Constraint {
        let mut c: Vec<SymExpr> = self.conditions[..i.saturating_sub(1).min(self.len())]
            .iter()
            .map(|b| b.expr.clone())
            .collect();
        c.extend(self.assumptions.iter().filter(|a| a.after < i).map(|a| a.expr.clone()));
        Constraint(c)
    }

    /// The full conjunction including every side constraint.
    pub fn constraint(&self) -> Constraint {
        let mut c: Vec<SymExpr> = self.conditions.iter().map(|b| b.expr.clone()).collect();
        c.extend(self.assumptions.iter().map(|a| a.expr.clone()));
        Constraint(c)
    }

    /// Taken arm at every position.
    pub fn sites(&self) -> impl Iterator<Item = BranchId> + '_ {
        self.conditions.iter().map(|c| c.site)
    }
}

/// `⋀_{j<i} φⱼ ∧ ¬φᵢ`, the query whose models drive execution down the opposite arm of `φᵢ`.
pub fn negated_prefix(pc: &PathCondition, i: usize) -> Result<Constraint, SymError> {
    let phi = pc.get(i).ok_or(SymError::IndexOutOfRange { index: i, len: pc.len() })?;
    Ok(pc.prefix(i).and(SymExpr::not(phi.expr.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn cond_expr(src: &str) -> Expr {
        let p = parse(&format!("void main() {{ int x = 0; int y = 0; if ({src}) {{}} }}")).unwrap();
        match &p.unit.functions[0].body[2].kind {
            crate::lang::ast::StmtKind::If { cond, .. } => cond.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sum_of_symbolic_bindings() {
        let mut mem = SymbolicMemory::new();
        let beta_plus_one = SymExpr::arith(ArithOp::Add, SymExpr::var("β"), SymExpr::int(1));
        mem.bind("x", SymExpr::var("α")).bind("y", beta_plus_one.clone());
        let got = eval_symbolic(&mem, &cond_expr("x + y")).unwrap();
        assert_eq!(got, SymExpr::arith(ArithOp::Add, SymExpr::var("α"), beta_plus_one));
        assert_eq!(got.to_string(), "(α + (β + 1))");
    }

    #[test]
    fn comparison_against_constant() {
        let mut mem = SymbolicMemory::new();
        mem.bind("x", SymExpr::var("α"));
        let got = eval_symbolic(&mem, &cond_expr("x < 1")).unwrap();
        assert_eq!(got, SymExpr::cmp(CmpOp::Lt, SymExpr::var("α"), SymExpr::int(1)));
    }

    #[test]
    fn constants_fold() {
        let mut mem = SymbolicMemory::new();
        mem.bind("x", SymExpr::int(4));
        assert_eq!(eval_symbolic(&mem, &cond_expr("x * 2")).unwrap(), SymExpr::int(8));
        assert_eq!(eval_symbolic(&mem, &cond_expr("x * 2 > 7")).unwrap(), SymExpr::boolean(true));
    }

    #[test]
    fn unbound_variable_is_reported() {
        let mem = SymbolicMemory::new();
        assert_eq!(eval_symbolic(&mem, &cond_expr("y")), Err(SymError::Unbound("y".into())));
    }

    #[test]
    fn symbolic_index_uses_shadow() {
        let mut mem = SymbolicMemory::concolic();
        mem.bind_concolic("i", SymExpr::var("i"), 1)
            .bind_concolic("a[1]", SymExpr::var("q"), 9)
            .bind_concolic("x", SymExpr::int(0), 0);
        let p = parse("void main() { int a[2]; int i = 0; if (a[i] > 0) {} }").unwrap();
        let crate::lang::ast::StmtKind::If { cond, .. } = &p.unit.functions[0].body[2].kind else { unreachable!() };
        let got = eval_symbolic(&mem, cond).unwrap();
        assert_eq!(got, SymExpr::cmp(CmpOp::Gt, SymExpr::var("q"), SymExpr::int(0)));
    }

    fn pc_of(conds: &[SymExpr]) -> PathCondition {
        let mut pc = PathCondition::new();
        for (k, c) in conds.iter().enumerate() {
            pc.push_branch(c.clone(), BranchId(k as u32));
        }
        pc
    }

    fn a() -> SymExpr {
        SymExpr::var("α")
    }

    #[test]
    fn negated_prefix_shapes() {
        let lt1 = SymExpr::cmp(CmpOp::Lt, a(), SymExpr::int(1));
        let gt2 = SymExpr::cmp(CmpOp::Gt, SymExpr::var("β"), SymExpr::int(2));
        let pc = pc_of(&[lt1.clone(), gt2.clone()]);
        assert_eq!(negated_prefix(&pc, 2).unwrap(), Constraint(vec![lt1.clone(), SymExpr::not(gt2)]));
        assert_eq!(negated_prefix(&pc_of(&[lt1.clone()]), 1).unwrap(), Constraint(vec![SymExpr::not(lt1)]));

        let g = |k| SymExpr::cmp(CmpOp::Gt, a(), SymExpr::int(k));
        let pc = pc_of(&[g(0), g(1), g(2)]);
        assert_eq!(negated_prefix(&pc, 3).unwrap(), Constraint(vec![g(0), g(1), SymExpr::not(g(2))]));
    }

    #[test]
    fn negated_prefix_rejects_bad_index() {
        let pc = pc_of(&[a().to_bool()]);
        assert_eq!(negated_prefix(&pc, 0), Err(SymError::IndexOutOfRange { index: 0, len: 1 }));
        assert_eq!(negated_prefix(&pc, 2), Err(SymError::IndexOutOfRange { index: 2, len: 1 }));
    }

    #[test]
    fn assumptions_join_the_prefix_they_precede() {
        let mut pc = PathCondition::new();
        pc.push_branch(SymExpr::cmp(CmpOp::Gt, a(), SymExpr::int(0)), BranchId(0));
        pc.assume(SymExpr::cmp(CmpOp::Eq, SymExpr::var("i"), SymExpr::int(1)));
        pc.push_branch(SymExpr::cmp(CmpOp::Lt, a(), SymExpr::int(9)), BranchId(2));
        assert_eq!(negated_prefix(&pc, 1).unwrap().conjuncts().len(), 1);
        assert_eq!(negated_prefix(&pc, 2).unwrap().conjuncts().len(), 3);
        assert_eq!(pc.constraint().conjuncts().len(), 3);
    }

    #[test]
    fn smtlib_terms() {
        let e = SymExpr::cmp(CmpOp::Lt, SymExpr::arith(ArithOp::Add, a(), SymExpr::int(-1)), SymExpr::int(3));
        assert_eq!(e.to_smtlib(), "(bvslt (bvadd |α| (_ bv4294967295 32)) (_ bv3 32))");
        let e = SymExpr::element_for_test();
        assert_eq!(e.to_smtlib(), "(not (= |a[2]| (_ bv0 32)))");
    }

    impl SymExpr {
        fn element_for_test() -> SymExpr {
            SymExpr::symbol(SymbolId::element("a", 2)).to_bool()
        }
    }

    #[test]
    fn symbol_ids_round_trip_through_text() {
        for s in ["x", "a[3]", "long_name[12]"] {
            assert_eq!(s.parse::<SymbolId>().unwrap().to_string(), s);
        }
        assert!("a[x]".parse::<SymbolId>().is_err());
    }
}
