use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An input symbol: a scalar input, or one element of an input array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId {
    pub name: Arc<str>,
    pub index: Option<u32>,
}

impl SymbolId {
    pub fn scalar(name: &str) -> Self {
        Self { name: Arc::from(name), index: None }
    }

    pub fn element(name: &str, index: u32) -> Self {
        Self { name: Arc::from(name), index: Some(index) }
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{i}]", self.name),
            None => write!(f, "{}", self.name),
        }
    }
}

impl FromStr for SymbolId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.find('[') {
            Some(open) if s.ends_with(']') => {
                let index = s[open + 1..s.len() - 1]
                    .parse()
                    .map_err(|_| format!("bad element index in `{s}`"))?;
                Ok(Self::element(&s[..open], index))
            }
            Some(_) => Err(format!("bad symbol `{s}`")),
            None if !s.is_empty() => Ok(Self::scalar(s)),
            None => Err("empty symbol name".to_string()),
        }
    }
}

impl Serialize for SymbolId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SymbolId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl ArithOp {
    /// 32-bit two's complement semantics. Division by zero follows SMT-LIB `bvsdiv`/`bvsrem`:
    /// `x / 0` is `-1` for `x >= 0` and `1` otherwise, `x % 0` is `x`.
    pub fn apply(self, a: i32, b: i32) -> i32 {
        match self {
            ArithOp::Add => a.wrapping_add(b),
            ArithOp::Sub => a.wrapping_sub(b),
            ArithOp::Mul => a.wrapping_mul(b),
            ArithOp::Div if b == 0 => {
                if a >= 0 {
                    -1
                } else {
                    1
                }
            }
            ArithOp::Div => a.wrapping_div(b),
            ArithOp::Rem if b == 0 => a,
            ArithOp::Rem => a.wrapping_rem(b),
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
        }
    }

    fn smtlib(self) -> &'static str {
        match self {
            ArithOp::Add => "bvadd",
            ArithOp::Sub => "bvsub",
            ArithOp::Mul => "bvmul",
            ArithOp::Div => "bvsdiv",
            ArithOp::Rem => "bvsrem",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn apply(self, a: i32, b: i32) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Int,
    Bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Int(i32),
    Bool(bool),
    Symbol(SymbolId),
    Neg(SymExpr),
    Not(SymExpr),
    Arith(ArithOp, SymExpr, SymExpr),
    Cmp(CmpOp, SymExpr, SymExpr),
    And(SymExpr, SymExpr),
    Or(SymExpr, SymExpr),
    /// Integer-valued conditional.
    Ite(SymExpr, SymExpr, SymExpr),
}

/// Immutable, cheaply clonable symbolic term. Constructors fold constant subtrees only.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymExpr(Arc<Node>, u32);

static PLACEHOLDER: LazyLock<SymExpr> = LazyLock::new(|| SymExpr::int(0));

/// Moves every uniquely owned child of `n` onto `out`.
fn take_unique_children(n: &mut Node, out: &mut Vec<Arc<Node>>) {
    let children: [Option<&mut SymExpr>; 3] = match n {
        Node::Int(_) | Node::Bool(_) | Node::Symbol(_) => return,
        Node::Neg(a) | Node::Not(a) => [Some(a), None, None],
        Node::Arith(_, a, b) | Node::Cmp(_, a, b) | Node::And(a, b) | Node::Or(a, b) => [Some(a), Some(b), None],
        Node::Ite(c, t, e) => [Some(c), Some(t), Some(e)],
    };
    for c in children.into_iter().flatten() {
        if Arc::strong_count(&c.0) == 1 {
            out.push(std::mem::replace(c, PLACEHOLDER.clone()).0);
        }
    }
}

// Long loops build terms millions of nodes deep; dropping them must not recurse.
impl Drop for Node {
    fn drop(&mut self) {
        let mut stack = Vec::new();
        take_unique_children(self, &mut stack);
        while let Some(a) = stack.pop() {
            if let Some(mut n) = Arc::into_inner(a) {
                take_unique_children(&mut n, &mut stack);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(i32),
    Bool(bool),
}

impl Value {
    pub fn as_int(self) -> i32 {
        match self {
            Value::Int(v) => v,
            Value::Bool(b) => i32::from(b),
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Int(v) => v != 0,
            Value::Bool(b) => b,
        }
    }
}

impl SymExpr {
    fn wrap(n: Node) -> Self {
        let depth = match &n {
            Node::Int(_) | Node::Bool(_) | Node::Symbol(_) => 1,
            Node::Neg(a) | Node::Not(a) => a.1 + 1,
            Node::Arith(_, a, b) | Node::Cmp(_, a, b) | Node::And(a, b) | Node::Or(a, b) => a.1.max(b.1) + 1,
            Node::Ite(c, t, e) => c.1.max(t.1).max(e.1) + 1,
        };
        SymExpr(Arc::new(n), depth)
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Height of the term tree; a constant or symbol has depth 1.
    pub fn depth(&self) -> u32 {
        self.1
    }

    pub fn int(v: i32) -> Self {
        SymExpr::wrap(Node::Int(v))
    }

    pub fn boolean(b: bool) -> Self {
        SymExpr::wrap(Node::Bool(b))
    }

    pub fn symbol(id: SymbolId) -> Self {
        SymExpr::wrap(Node::Symbol(id))
    }

    pub fn var(name: &str) -> Self {
        Self::symbol(SymbolId::scalar(name))
    }

    pub fn sort(&self) -> Sort {
        match self.node() {
            Node::Int(_) | Node::Symbol(_) | Node::Neg(_) | Node::Arith(..) | Node::Ite(..) => Sort::Int,
            Node::Bool(_) | Node::Not(_) | Node::Cmp(..) | Node::And(..) | Node::Or(..) => Sort::Bool,
        }
    }

    pub fn as_const(&self) -> Option<Value> {
        match self.node() {
            Node::Int(v) => Some(Value::Int(*v)),
            Node::Bool(b) => Some(Value::Bool(*b)),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    /// Integer view: booleans become `ite(b, 1, 0)`.
    pub fn to_int(&self) -> SymExpr {
        match self.sort() {
            Sort::Int => self.clone(),
            Sort::Bool => SymExpr::ite(self.clone(), SymExpr::int(1), SymExpr::int(0)),
        }
    }

    /// Truth view: integers become `e != 0`.
    pub fn to_bool(&self) -> SymExpr {
        match self.sort() {
            Sort::Bool => self.clone(),
            Sort::Int => SymExpr::cmp(CmpOp::Ne, self.clone(), SymExpr::int(0)),
        }
    }

    pub fn neg(a: SymExpr) -> SymExpr {
        let a = a.to_int();
        match a.node() {
            Node::Int(v) => SymExpr::int(v.wrapping_neg()),
            _ => SymExpr::wrap(Node::Neg(a)),
        }
    }

    pub fn not(a: SymExpr) -> SymExpr {
        let a = a.to_bool();
        match a.node() {
            Node::Bool(b) => SymExpr::boolean(!b),
            _ => SymExpr::wrap(Node::Not(a)),
        }
    }

    pub fn arith(op: ArithOp, a: SymExpr, b: SymExpr) -> SymExpr {
        let (a, b) = (a.to_int(), b.to_int());
        match (a.node(), b.node()) {
            (Node::Int(x), Node::Int(y)) => SymExpr::int(op.apply(*x, *y)),
            _ => SymExpr::wrap(Node::Arith(op, a, b)),
        }
    }

    pub fn cmp(op: CmpOp, a: SymExpr, b: SymExpr) -> SymExpr {
        let (a, b) = (a.to_int(), b.to_int());
        match (a.node(), b.node()) {
            (Node::Int(x), Node::Int(y)) => SymExpr::boolean(op.apply(*x, *y)),
            _ => SymExpr::wrap(Node::Cmp(op, a, b)),
        }
    }

    pub fn and(a: SymExpr, b: SymExpr) -> SymExpr {
        let (a, b) = (a.to_bool(), b.to_bool());
        match (a.node(), b.node()) {
            (Node::Bool(x), Node::Bool(y)) => SymExpr::boolean(*x && *y),
            _ => SymExpr::wrap(Node::And(a, b)),
        }
    }

    pub fn or(a: SymExpr, b: SymExpr) -> SymExpr {
        let (a, b) = (a.to_bool(), b.to_bool());
        match (a.node(), b.node()) {
            (Node::Bool(x), Node::Bool(y)) => SymExpr::boolean(*x || *y),
            _ => SymExpr::wrap(Node::Or(a, b)),
        }
    }

    pub fn ite(c: SymExpr, t: SymExpr, e: SymExpr) -> SymExpr {
        let (c, t, e) = (c.to_bool(), t.to_int(), e.to_int());
        match c.node() {
            Node::Bool(true) => t,
            Node::Bool(false) => e,
            _ => SymExpr::wrap(Node::Ite(c, t, e)),
        }
    }

    /// Evaluates under an assignment; `None` if a symbol is unbound.
    pub fn eval(&self, lookup: &dyn Fn(&SymbolId) -> Option<i32>) -> Option<Value> {
        Some(match self.node() {
            Node::Int(v) => Value::Int(*v),
            Node::Bool(b) => Value::Bool(*b),
            Node::Symbol(s) => Value::Int(lookup(s)?),
            Node::Neg(a) => Value::Int(a.eval(lookup)?.as_int().wrapping_neg()),
            Node::Not(a) => Value::Bool(!a.eval(lookup)?.as_bool()),
            Node::Arith(op, a, b) => Value::Int(op.apply(a.eval(lookup)?.as_int(), b.eval(lookup)?.as_int())),
            Node::Cmp(op, a, b) => Value::Bool(op.apply(a.eval(lookup)?.as_int(), b.eval(lookup)?.as_int())),
            Node::And(a, b) => {
                let (x, y) = (a.eval(lookup)?.as_bool(), b.eval(lookup)?.as_bool());
                Value::Bool(x && y)
            }
            Node::Or(a, b) => {
                let (x, y) = (a.eval(lookup)?.as_bool(), b.eval(lookup)?.as_bool());
                Value::Bool(x || y)
            }
            Node::Ite(c, t, e) => {
                if c.eval(lookup)?.as_bool() {
                    t.eval(lookup)?
                } else {
                    e.eval(lookup)?
                }
            }
        })
    }

    pub fn collect_symbols(&self, out: &mut BTreeSet<SymbolId>) {
        match self.node() {
            Node::Int(_) | Node::Bool(_) => {}
            Node::Symbol(s) => {
                out.insert(s.clone());
            }
            Node::Neg(a) | Node::Not(a) => a.collect_symbols(out),
            Node::Arith(_, a, b) | Node::Cmp(_, a, b) | Node::And(a, b) | Node::Or(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            Node::Ite(c, t, e) => {
                c.collect_symbols(out);
                t.collect_symbols(out);
                e.collect_symbols(out);
            }
        }
    }

    pub fn symbols(&self) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Int(_) | Node::Bool(_) | Node::Symbol(_) => 1,
            Node::Neg(a) | Node::Not(a) => 1 + a.size(),
            Node::Arith(_, a, b) | Node::Cmp(_, a, b) | Node::And(a, b) | Node::Or(a, b) => 1 + a.size() + b.size(),
            Node::Ite(c, t, e) => 1 + c.size() + t.size() + e.size(),
        }
    }

    /// SMT-LIB2 term over 32-bit bitvectors.
    pub fn to_smtlib(&self) -> String {
        match self.node() {
            Node::Int(v) => format!("(_ bv{} 32)", *v as u32),
            Node::Bool(b) => b.to_string(),
            Node::Symbol(s) => format!("|{s}|"),
            Node::Neg(a) => format!("(bvneg {})", a.to_smtlib()),
            Node::Not(a) => format!("(not {})", a.to_smtlib()),
            Node::Arith(op, a, b) => format!("({} {} {})", op.smtlib(), a.to_smtlib(), b.to_smtlib()),
            Node::Cmp(op, a, b) => {
                let (a, b) = (a.to_smtlib(), b.to_smtlib());
                match op {
                    CmpOp::Lt => format!("(bvslt {a} {b})"),
                    CmpOp::Le => format!("(bvsle {a} {b})"),
                    CmpOp::Gt => format!("(bvsgt {a} {b})"),
                    CmpOp::Ge => format!("(bvsge {a} {b})"),
                    CmpOp::Eq => format!("(= {a} {b})"),
                    CmpOp::Ne => format!("(not (= {a} {b}))"),
                }
            }
            Node::And(a, b) => format!("(and {} {})", a.to_smtlib(), b.to_smtlib()),
            Node::Or(a, b) => format!("(or {} {})", a.to_smtlib(), b.to_smtlib()),
            Node::Ite(c, t, e) => format!("(ite {} {} {})", c.to_smtlib(), t.to_smtlib(), e.to_smtlib()),
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Int(v) => write!(f, "{v}"),
            Node::Bool(b) => write!(f, "{b}"),
            Node::Symbol(s) => write!(f, "{s}"),
            Node::Neg(a) if matches!(a.node(), Node::Int(_) | Node::Symbol(_)) => write!(f, "-({a})"),
            Node::Neg(a) => write!(f, "-{a}"),
            Node::Not(a) if matches!(a.node(), Node::Bool(_) | Node::Symbol(_)) => write!(f, "!({a})"),
            Node::Not(a) => write!(f, "!{a}"),
            Node::Arith(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::And(a, b) => write!(f, "({a} && {b})"),
            Node::Or(a, b) => write!(f, "({a} || {b})"),
            Node::Ite(c, t, e) => write!(f, "ite({c}, {t}, {e})"),
        }
    }
}

impl fmt::Debug for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for SymExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
