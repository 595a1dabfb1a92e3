//! Branch-and-prune search over integer boxes with interval propagation.
//!
//! Terms are evaluated with sound interval over-approximations of 32-bit wrapping arithmetic.
//! Each node narrows the box with backward projection through comparisons and non-wrapping
//! `+`, `-`, negation and constant multiplication, then either decides every conjunct,
//! enumerates a small box outright, or probes three corner points and then bisects one
//! variable (halves nearer zero first).

use std::time::Instant;

use crate::symcore::{ArithOp, CmpOp, Node, SymExpr, SymbolId};

const MIN: i64 = i32::MIN as i64;
const MAX: i64 = i32::MAX as i64;
/// Boxes with at most this many points are enumerated instead of bisected.
const ENUMERATE_BELOW: u128 = 256;
const NARROW_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Iv {
    pub lo: i64,
    pub hi: i64,
}

impl Iv {
    pub const FULL: Iv = Iv { lo: MIN, hi: MAX };

    pub fn new(lo: i64, hi: i64) -> Self {
        Iv { lo, hi }
    }

    pub fn point(v: i64) -> Self {
        Iv { lo: v, hi: v }
    }

    fn is_point(self) -> bool {
        self.lo == self.hi
    }

    fn contains(self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn meet(self, o: Iv) -> Option<Iv> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        (lo <= hi).then_some(Iv { lo, hi })
    }

    fn hull(self, o: Iv) -> Iv {
        Iv { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    fn width(self) -> u128 {
        (self.hi - self.lo) as u128 + 1
    }

    /// `Some` if the i64 range fits in 32 bits (no wrap possible), else the full range.
    fn checked(lo: i64, hi: i64) -> Option<Iv> {
        (lo >= MIN && hi <= MAX).then_some(Iv { lo, hi })
    }

    /// Value of the interval closest to zero.
    fn nearest_zero(self) -> i64 {
        if self.contains(0) {
            0
        } else if self.lo > 0 {
            self.lo
        } else {
            self.hi
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum B3 {
    True,
    False,
    Unknown,
}

impl B3 {
    fn not(self) -> B3 {
        match self {
            B3::True => B3::False,
            B3::False => B3::True,
            B3::Unknown => B3::Unknown,
        }
    }
}

#[derive(Debug, Clone)]
enum Term {
    Const(i64),
    Var(usize),
    Neg(Box<Term>),
    Arith(ArithOp, Box<Term>, Box<Term>),
    Ite(Box<Formula>, Box<Term>, Box<Term>),
}

#[derive(Debug, Clone)]
enum Formula {
    Const(bool),
    Not(Box<Formula>),
    Cmp(CmpOp, Term, Term),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

fn compile_term(e: &SymExpr, vars: &[SymbolId]) -> Term {
    match e.node() {
        Node::Int(v) => Term::Const(*v as i64),
        Node::Symbol(s) => Term::Var(vars.binary_search(s).expect("symbol collected")),
        Node::Neg(a) => Term::Neg(Box::new(compile_term(a, vars))),
        Node::Arith(op, a, b) => Term::Arith(*op, Box::new(compile_term(a, vars)), Box::new(compile_term(b, vars))),
        Node::Ite(c, t, f) => Term::Ite(
            Box::new(compile_formula(c, vars)),
            Box::new(compile_term(t, vars)),
            Box::new(compile_term(f, vars)),
        ),
        Node::Bool(_) | Node::Not(_) | Node::Cmp(..) | Node::And(..) | Node::Or(..) => {
            compile_term(&e.to_int(), vars)
        }
    }
}

fn compile_formula(e: &SymExpr, vars: &[SymbolId]) -> Formula {
    match e.node() {
        Node::Bool(b) => Formula::Const(*b),
        Node::Not(a) => Formula::Not(Box::new(compile_formula(a, vars))),
        Node::Cmp(op, a, b) => Formula::Cmp(*op, compile_term(a, vars), compile_term(b, vars)),
        Node::And(a, b) => Formula::And(Box::new(compile_formula(a, vars)), Box::new(compile_formula(b, vars))),
        Node::Or(a, b) => Formula::Or(Box::new(compile_formula(a, vars)), Box::new(compile_formula(b, vars))),
        Node::Int(_) | Node::Symbol(_) | Node::Neg(_) | Node::Arith(..) | Node::Ite(..) => {
            compile_formula(&e.to_bool(), vars)
        }
    }
}

fn eval_term(t: &Term, bx: &[Iv]) -> Iv {
    match t {
        Term::Const(c) => Iv::point(*c),
        Term::Var(i) => bx[*i],
        Term::Neg(a) => {
            let a = eval_term(a, bx);
            if a.is_point() {
                Iv::point((a.lo as i32).wrapping_neg() as i64)
            } else if a.lo == MIN {
                Iv::FULL
            } else {
                Iv::new(-a.hi, -a.lo)
            }
        }
        Term::Arith(op, a, b) => arith(*op, eval_term(a, bx), eval_term(b, bx)),
        Term::Ite(c, t, e) => match eval_formula(c, bx) {
            B3::True => eval_term(t, bx),
            B3::False => eval_term(e, bx),
            B3::Unknown => eval_term(t, bx).hull(eval_term(e, bx)),
        },
    }
}

fn corners(a: Iv, b: Iv, f: impl Fn(i64, i64) -> i64) -> (i64, i64) {
    let vals = [f(a.lo, b.lo), f(a.lo, b.hi), f(a.hi, b.lo), f(a.hi, b.hi)];
    (*vals.iter().min().unwrap(), *vals.iter().max().unwrap())
}

fn arith(op: ArithOp, a: Iv, b: Iv) -> Iv {
    if a.is_point() && b.is_point() {
        return Iv::point(op.apply(a.lo as i32, b.lo as i32) as i64);
    }
    match op {
        ArithOp::Add => Iv::checked(a.lo + b.lo, a.hi + b.hi).unwrap_or(Iv::FULL),
        ArithOp::Sub => Iv::checked(a.lo - b.hi, a.hi - b.lo).unwrap_or(Iv::FULL),
        ArithOp::Mul => {
            let (lo, hi) = corners(a, b, |x, y| x * y);
            Iv::checked(lo, hi).unwrap_or(Iv::FULL)
        }
        ArithOp::Div => {
            if b.contains(0) || (a.lo == MIN && b.contains(-1)) {
                return Iv::FULL;
            }
            let (lo, hi) = corners(a, b, |x, y| x / y);
            Iv::new(lo, hi)
        }
        ArithOp::Rem => {
            let m = b.lo.abs().max(b.hi.abs());
            let bound = m - 1;
            let r = if a.lo >= 0 {
                Iv::new(0, a.hi.min(bound))
            } else if a.hi <= 0 {
                Iv::new(a.lo.max(-bound), 0)
            } else {
                Iv::new(a.lo.max(-bound), a.hi.min(bound))
            };
            if b.contains(0) {
                r.hull(a)
            } else {
                r
            }
        }
    }
}

fn eval_formula(f: &Formula, bx: &[Iv]) -> B3 {
    match f {
        Formula::Const(true) => B3::True,
        Formula::Const(false) => B3::False,
        Formula::Not(a) => eval_formula(a, bx).not(),
        Formula::And(a, b) => match (eval_formula(a, bx), eval_formula(b, bx)) {
            (B3::False, _) | (_, B3::False) => B3::False,
            (B3::True, B3::True) => B3::True,
            _ => B3::Unknown,
        },
        Formula::Or(a, b) => match (eval_formula(a, bx), eval_formula(b, bx)) {
            (B3::True, _) | (_, B3::True) => B3::True,
            (B3::False, B3::False) => B3::False,
            _ => B3::Unknown,
        },
        Formula::Cmp(op, a, b) => compare(*op, eval_term(a, bx), eval_term(b, bx)),
    }
}

fn compare(op: CmpOp, a: Iv, b: Iv) -> B3 {
    let lt = if a.hi < b.lo {
        B3::True
    } else if a.lo >= b.hi {
        B3::False
    } else {
        B3::Unknown
    };
    let eq = if a.is_point() && b.is_point() && a.lo == b.lo {
        B3::True
    } else if a.meet(b).is_none() {
        B3::False
    } else {
        B3::Unknown
    };
    match op {
        CmpOp::Lt => lt,
        CmpOp::Ge => lt.not(),
        CmpOp::Gt => compare(CmpOp::Lt, b, a),
        CmpOp::Le => compare(CmpOp::Lt, b, a).not(),
        CmpOp::Eq => eq,
        CmpOp::Ne => eq.not(),
    }
}

struct Empty;

fn narrow_var(bx: &mut [Iv], i: usize, target: Iv, changed: &mut bool) -> Result<(), Empty> {
    let next = bx[i].meet(target).ok_or(Empty)?;
    if next != bx[i] {
        bx[i] = next;
        *changed = true;
    }
    Ok(())
}

/// Restricts the box so that `t` may still evaluate inside `target`.
fn project(t: &Term, target: Iv, bx: &mut [Iv], changed: &mut bool) -> Result<(), Empty> {
    let target = target.meet(Iv::FULL).ok_or(Empty)?;
    match t {
        Term::Const(c) => {
            if target.contains(*c) {
                Ok(())
            } else {
                Err(Empty)
            }
        }
        Term::Var(i) => narrow_var(bx, *i, target, changed),
        Term::Neg(a) => {
            let ai = eval_term(a, bx);
            if ai.lo > MIN {
                project(a, Iv::new(-target.hi, -target.lo), bx, changed)
            } else {
                eval_term(t, bx).meet(target).map(|_| ()).ok_or(Empty)
            }
        }
        Term::Arith(op, a, b) => {
            let (ai, bi) = (eval_term(a, bx), eval_term(b, bx));
            match op {
                // Adding or subtracting a constant is a bijection on i32: shift the target.
                ArithOp::Add if bi.is_point() && Iv::checked(target.lo - bi.lo, target.hi - bi.lo).is_some() => {
                    project(a, Iv::new(target.lo - bi.lo, target.hi - bi.lo), bx, changed)
                }
                ArithOp::Add if ai.is_point() && Iv::checked(target.lo - ai.lo, target.hi - ai.lo).is_some() => {
                    project(b, Iv::new(target.lo - ai.lo, target.hi - ai.lo), bx, changed)
                }
                ArithOp::Sub if bi.is_point() && Iv::checked(target.lo + bi.lo, target.hi + bi.lo).is_some() => {
                    project(a, Iv::new(target.lo + bi.lo, target.hi + bi.lo), bx, changed)
                }
                ArithOp::Sub if ai.is_point() && Iv::checked(ai.lo - target.hi, ai.lo - target.lo).is_some() => {
                    project(b, Iv::new(ai.lo - target.hi, ai.lo - target.lo), bx, changed)
                }
                ArithOp::Add if Iv::checked(ai.lo + bi.lo, ai.hi + bi.hi).is_some() => {
                    project(a, Iv::new(target.lo - bi.hi, target.hi - bi.lo), bx, changed)?;
                    let ai = eval_term(a, bx);
                    project(b, Iv::new(target.lo - ai.hi, target.hi - ai.lo), bx, changed)
                }
                ArithOp::Sub if Iv::checked(ai.lo - bi.hi, ai.hi - bi.lo).is_some() => {
                    project(a, Iv::new(target.lo + bi.lo, target.hi + bi.hi), bx, changed)?;
                    let ai = eval_term(a, bx);
                    project(b, Iv::new(ai.lo - target.hi, ai.hi - target.lo), bx, changed)
                }
                ArithOp::Mul if bi.is_point() && bi.lo != 0 && !ai.is_point() => {
                    let (lo, hi) = corners(ai, bi, |x, y| x * y);
                    if Iv::checked(lo, hi).is_none() {
                        return eval_term(t, bx).meet(target).map(|_| ()).ok_or(Empty);
                    }
                    let k = bi.lo;
                    // Negative factors swap the bounds.
                    let (lo, hi) = if k > 0 {
                        (div_ceil(target.lo, k), div_floor(target.hi, k))
                    } else {
                        (div_ceil(target.hi, k), div_floor(target.lo, k))
                    };
                    if lo > hi {
                        return Err(Empty);
                    }
                    project(a, Iv::new(lo, hi), bx, changed)
                }
                _ => eval_term(t, bx).meet(target).map(|_| ()).ok_or(Empty),
            }
        }
        Term::Ite(..) => eval_term(t, bx).meet(target).map(|_| ()).ok_or(Empty),
    }
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

/// Narrows the box so that `f` can still take the value `want`.
fn revise(f: &Formula, want: bool, bx: &mut [Iv], changed: &mut bool) -> Result<(), Empty> {
    match f {
        Formula::Const(b) => {
            if *b == want {
                Ok(())
            } else {
                Err(Empty)
            }
        }
        Formula::Not(a) => revise(a, !want, bx, changed),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let conj = matches!(f, Formula::And(..));
            if conj == want {
                // And→true / Or→false: both sides are forced.
                revise(a, want, bx, changed)?;
                revise(b, want, bx, changed)
            } else {
                let decided = if conj { B3::True } else { B3::False };
                let (ea, eb) = (eval_formula(a, bx), eval_formula(b, bx));
                if ea == decided {
                    revise(b, want, bx, changed)
                } else if eb == decided {
                    revise(a, want, bx, changed)
                } else {
                    Ok(())
                }
            }
        }
        Formula::Cmp(op, a, b) => {
            let op = if want { *op } else { negate(*op) };
            let (ai, bi) = (eval_term(a, bx), eval_term(b, bx));
            match op {
                CmpOp::Lt => {
                    project(a, Iv::new(MIN, bi.hi - 1), bx, changed)?;
                    let ai = eval_term(a, bx);
                    project(b, Iv::new(ai.lo + 1, MAX), bx, changed)
                }
                CmpOp::Le => {
                    project(a, Iv::new(MIN, bi.hi), bx, changed)?;
                    let ai = eval_term(a, bx);
                    project(b, Iv::new(ai.lo, MAX), bx, changed)
                }
                CmpOp::Gt => {
                    project(a, Iv::new(bi.lo + 1, MAX), bx, changed)?;
                    let ai = eval_term(a, bx);
                    project(b, Iv::new(MIN, ai.hi - 1), bx, changed)
                }
                CmpOp::Ge => {
                    project(a, Iv::new(bi.lo, MAX), bx, changed)?;
                    let ai = eval_term(a, bx);
                    project(b, Iv::new(MIN, ai.hi), bx, changed)
                }
                CmpOp::Eq => {
                    let m = ai.meet(bi).ok_or(Empty)?;
                    project(a, m, bx, changed)?;
                    project(b, m, bx, changed)
                }
                CmpOp::Ne => {
                    if bi.is_point() {
                        shave(a, ai, bi.lo, bx, changed)?;
                    }
                    let ai = eval_term(a, bx);
                    if ai.is_point() {
                        shave(b, bi, ai.lo, bx, changed)?;
                    }
                    Ok(())
                }
            }
        }
    }
}

fn shave(t: &Term, cur: Iv, v: i64, bx: &mut [Iv], changed: &mut bool) -> Result<(), Empty> {
    if cur.is_point() && cur.lo == v {
        Err(Empty)
    } else if cur.lo == v {
        project(t, Iv::new(v + 1, cur.hi), bx, changed)
    } else if cur.hi == v {
        project(t, Iv::new(cur.lo, v - 1), bx, changed)
    } else {
        Ok(())
    }
}

fn negate(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Ge => CmpOp::Lt,
        CmpOp::Eq => CmpOp::Ne,
        CmpOp::Ne => CmpOp::Eq,
    }
}

pub enum Outcome {
    Sat(Vec<i64>),
    Unsat,
    Timeout,
}

pub struct Search {
    formulas: Vec<Formula>,
    pub nodes: u64,
    node_limit: u64,
    deadline: Option<Instant>,
}

struct Abort;

impl Search {
    pub fn new(conjuncts: &[SymExpr], vars: &[SymbolId], node_limit: u64, deadline: Option<Instant>) -> Self {
        let formulas = conjuncts.iter().map(|c| compile_formula(c, vars)).collect();
        Search { formulas, nodes: 0, node_limit, deadline }
    }

    pub fn run(&mut self, domain: Iv, vars: usize) -> Outcome {
        let bx = vec![domain; vars];
        match self.node(bx) {
            Ok(Some(m)) => Outcome::Sat(m),
            Ok(None) => Outcome::Unsat,
            Err(Abort) => Outcome::Timeout,
        }
    }

    fn tick(&mut self, n: u64) -> Result<(), Abort> {
        let before = self.nodes;
        self.nodes += n;
        if self.nodes > self.node_limit {
            return Err(Abort);
        }
        if let Some(d) = self.deadline {
            if before / 1024 != self.nodes / 1024 && Instant::now() > d {
                return Err(Abort);
            }
        }
        Ok(())
    }

    fn node(&mut self, mut bx: Vec<Iv>) -> Result<Option<Vec<i64>>, Abort> {
        self.tick(1)?;
        for _ in 0..NARROW_ROUNDS {
            let mut changed = false;
            for f in &self.formulas {
                if revise(f, true, &mut bx, &mut changed).is_err() {
                    return Ok(None);
                }
            }
            if !changed {
                break;
            }
        }
        let mut all_true = true;
        for f in &self.formulas {
            match eval_formula(f, &bx) {
                B3::False => return Ok(None),
                B3::Unknown => all_true = false,
                B3::True => {}
            }
        }
        if all_true {
            return Ok(Some(bx.iter().map(|iv| iv.nearest_zero()).collect()));
        }
        let size: u128 = bx.iter().map(|iv| iv.width()).try_fold(1u128, |acc, w| acc.checked_mul(w)).unwrap_or(u128::MAX);
        if size <= ENUMERATE_BELOW {
            return self.enumerate(&bx);
        }
        if let Some(m) = self.probe_corners(&bx)? {
            return Ok(Some(m));
        }
        let var = bx.iter().position(|iv| !iv.is_point()).expect("an unknown verdict implies a free variable");
        for half in split(bx[var]) {
            let mut child = bx.clone();
            child[var] = half;
            if let Some(m) = self.node(child)? {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }

    /// Tries the points with every variable at its value nearest zero, its lower bound, or its upper bound.
    fn probe_corners(&mut self, bx: &[Iv]) -> Result<Option<Vec<i64>>, Abort> {
        let picks: [fn(Iv) -> i64; 3] = [Iv::nearest_zero, |iv| iv.lo, |iv| iv.hi];
        for pick in picks {
            self.tick(1)?;
            let probe: Vec<Iv> = bx.iter().map(|&iv| Iv::point(pick(iv))).collect();
            if self.formulas.iter().all(|f| eval_formula(f, &probe) == B3::True) {
                return Ok(Some(probe.iter().map(|p| p.lo).collect()));
            }
        }
        Ok(None)
    }

    /// Tries every point of a small box, values nearer zero first.
    fn enumerate(&mut self, bx: &[Iv]) -> Result<Option<Vec<i64>>, Abort> {
        let orders: Vec<Vec<i64>> = bx
            .iter()
            .map(|iv| {
                let mut vals: Vec<i64> = (iv.lo..=iv.hi).collect();
                vals.sort_by_key(|v| (v.abs(), *v < 0));
                vals
            })
            .collect();
        let mut at = vec![0usize; bx.len()];
        let mut probe: Vec<Iv> = bx.to_vec();
        loop {
            self.tick(1)?;
            for (k, p) in probe.iter_mut().enumerate() {
                *p = Iv::point(orders[k][at[k]]);
            }
            if self.formulas.iter().all(|f| eval_formula(f, &probe) == B3::True) {
                return Ok(Some(probe.iter().map(|p| p.lo).collect()));
            }
            // Odometer increment, last variable fastest.
            let mut k = at.len();
            loop {
                if k == 0 {
                    return Ok(None);
                }
                k -= 1;
                if at[k] + 1 < orders[k].len() {
                    at[k] += 1;
                    break;
                }
                at[k] = 0;
            }
        }
    }
}

/// Bisects an interval, ordering the halves so the one nearer zero comes first.
fn split(iv: Iv) -> [Iv; 2] {
    if iv.lo < 0 && iv.hi >= 0 {
        return [Iv::new(0, iv.hi), Iv::new(iv.lo, -1)];
    }
    let mid = iv.lo + (iv.hi - iv.lo) / 2;
    let (low, high) = (Iv::new(iv.lo, mid), Iv::new(mid + 1, iv.hi));
    if iv.lo >= 0 {
        [low, high]
    } else {
        [high, low]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_arithmetic_is_sound_on_samples() {
        let ivs = [Iv::new(-5, 3), Iv::new(2, 9), Iv::new(-7, -1), Iv::point(0), Iv::new(MAX - 2, MAX)];
        for op in [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Rem] {
            for a in ivs {
                for b in ivs {
                    let r = arith(op, a, b);
                    for x in a.lo..=a.hi.min(a.lo + 12) {
                        for y in b.lo..=b.hi.min(b.lo + 12) {
                            let v = op.apply(x as i32, y as i32) as i64;
                            assert!(r.contains(v), "{op:?} {a:?} {b:?}: {x},{y} -> {v} not in {r:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn split_prefers_zero() {
        assert_eq!(split(Iv::new(-4, 3))[0], Iv::new(0, 3));
        assert_eq!(split(Iv::new(0, 3))[0], Iv::new(0, 1));
        assert_eq!(split(Iv::new(-8, -1))[0], Iv::new(-4, -1));
    }

    #[test]
    fn floor_and_ceil_division() {
        assert_eq!(div_floor(-7, 2), -4);
        assert_eq!(div_ceil(-7, 2), -3);
        assert_eq!(div_floor(7, -2), -4);
        assert_eq!(div_ceil(7, -2), -3);
        assert_eq!(div_ceil(6, 3), 2);
    }
}
