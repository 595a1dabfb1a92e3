//! Instrumented concrete execution: every value carries its symbolic expression.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::lang::ast::{BinaryOp, UnaryOp};
use crate::lang::ir::{FuncId, Instr, IrExpr, Slot, Terminator};
use crate::lang::{BranchId, FailKind, Program};
use crate::symcore::{apply_binary, apply_unary, CmpOp, PathCondition, SymExpr, SymbolId, MAX_TERM_DEPTH};

use super::InputVector;

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Halted,
    Fault { fault: FailKind, function: String, line: u32 },
    StepLimit,
}

/// Result of one instrumented run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub path: PathCondition,
    pub end: Termination,
    pub steps: u64,
    /// Function entered by the most recent call, or the entry function.
    pub last_entered: FuncId,
}

impl Trace {
    pub fn covered(&self) -> BTreeSet<BranchId> {
        self.path.sites().collect()
    }
}

#[derive(Clone)]
struct Val {
    sym: SymExpr,
    conc: i32,
}

impl Val {
    fn int(v: i32) -> Self {
        Val { sym: SymExpr::int(v), conc: v }
    }
}

struct Frame {
    func: FuncId,
    block: usize,
    ip: usize,
    slots: Vec<Val>,
    ret: Option<Slot>,
}

struct Machine<'p> {
    input: &'p InputVector,
    path: PathCondition,
}

impl Machine<'_> {
    fn eval(&mut self, e: &IrExpr, slots: &[Val]) -> Result<Val, FailKind> {
        Ok(match e {
            IrExpr::Const(c) => Val::int(*c),
            IrExpr::Local(s) => slots[*s as usize].clone(),
            IrExpr::Elem { base, len, index } => {
                let i = self.index(index, *len, slots)?;
                slots[(*base + i) as usize].clone()
            }
            IrExpr::Unary(op, a) => {
                let a = self.eval(a, slots)?;
                let conc = match op {
                    UnaryOp::Neg => a.conc.wrapping_neg(),
                    UnaryOp::Not => i32::from(a.conc == 0),
                };
                self.bounded(Val { sym: apply_unary(*op, a.sym), conc })
            }
            IrExpr::Binary(op, a, b) => {
                let a = self.eval(a, slots)?;
                let b = self.eval(b, slots)?;
                if matches!(op, BinaryOp::Div | BinaryOp::Rem) {
                    if b.conc == 0 {
                        return Err(FailKind::DivisionByZero);
                    }
                    if !b.sym.is_const() {
                        self.path.assume(SymExpr::cmp(CmpOp::Ne, b.sym.clone(), SymExpr::int(0)));
                    }
                }
                let conc = concrete_binary(*op, a.conc, b.conc);
                self.bounded(Val { sym: apply_binary(*op, a.sym, b.sym), conc })
            }
        })
    }

    /// Pins an over-deep term to its concrete value.
    fn bounded(&mut self, v: Val) -> Val {
        if v.sym.depth() <= MAX_TERM_DEPTH {
            return v;
        }
        self.path.assume(SymExpr::cmp(CmpOp::Eq, v.sym, SymExpr::int(v.conc)));
        Val::int(v.conc)
    }

    /// Evaluates an array index, pinning a symbolic index to its concrete value.
    fn index(&mut self, index: &IrExpr, len: u32, slots: &[Val]) -> Result<u32, FailKind> {
        let i = self.eval(index, slots)?;
        if i.conc < 0 || i.conc as u32 >= len {
            return Err(FailKind::IndexOutOfBounds);
        }
        if !i.sym.is_const() {
            self.path.assume(SymExpr::cmp(CmpOp::Eq, i.sym, SymExpr::int(i.conc)));
        }
        Ok(i.conc as u32)
    }

    fn input_value(&self, id: &SymbolId) -> Val {
        Val { sym: SymExpr::symbol(id.clone()), conc: self.input.get(id).copied().unwrap_or(0) }
    }
}

pub(crate) fn concrete_binary(op: BinaryOp, a: i32, b: i32) -> i32 {
    use crate::symcore::ArithOp;
    match op {
        BinaryOp::Add => ArithOp::Add.apply(a, b),
        BinaryOp::Sub => ArithOp::Sub.apply(a, b),
        BinaryOp::Mul => ArithOp::Mul.apply(a, b),
        BinaryOp::Div => ArithOp::Div.apply(a, b),
        BinaryOp::Rem => ArithOp::Rem.apply(a, b),
        BinaryOp::Lt => i32::from(a < b),
        BinaryOp::Le => i32::from(a <= b),
        BinaryOp::Gt => i32::from(a > b),
        BinaryOp::Ge => i32::from(a >= b),
        BinaryOp::Eq => i32::from(a == b),
        BinaryOp::Ne => i32::from(a != b),
        BinaryOp::And => i32::from(a != 0 && b != 0),
        BinaryOp::Or => i32::from(a != 0 || b != 0),
    }
}

fn new_frame(p: &Program, func: FuncId, args: Vec<Val>, ret: Option<Slot>) -> Frame {
    let mut slots = vec![Val::int(0); p.functions[func].frame_size as usize];
    for (slot, a) in slots.iter_mut().zip(args) {
        *slot = a;
    }
    Frame { func, block: 0, ip: 0, slots, ret }
}

/// Runs `p` on `v` with the default step limit.
pub fn run_concrete(p: &Program, v: &InputVector) -> Trace {
    run_concrete_limited(p, v, DEFAULT_STEP_LIMIT)
}

pub fn run_concrete_limited(p: &Program, v: &InputVector, step_limit: u64) -> Trace {
    let mut m = Machine { input: v, path: PathCondition::new() };
    let mut stack = vec![new_frame(p, p.entry, Vec::new(), None)];
    let mut steps = 0u64;
    let mut last_entered = p.entry;
    let end = loop {
        if steps >= step_limit {
            break Termination::StepLimit;
        }
        steps += 1;
        let top = stack.last_mut().expect("non-empty call stack");
        let func = &p.functions[top.func];
        let block = &func.blocks[top.block];
        let line = block.lines[top.ip];
        let fault = |kind| Termination::Fault { fault: kind, function: func.name.clone(), line };
        if top.ip < block.instrs.len() {
            let instr = &block.instrs[top.ip];
            top.ip += 1;
            let mut call = None;
            let done = match instr {
                Instr::Assign { dst, value } => m.eval(value, &top.slots).map(|v| top.slots[*dst as usize] = v),
                Instr::Store { base, len, index, value } => (|| {
                    let i = m.index(index, *len, &top.slots)?;
                    let v = m.eval(value, &top.slots)?;
                    top.slots[(*base + i) as usize] = v;
                    Ok(())
                })(),
                Instr::Clear { base, len } => {
                    for s in &mut top.slots[*base as usize..(*base + *len) as usize] {
                        *s = Val::int(0);
                    }
                    Ok(())
                }
                Instr::Input { dst, input } => {
                    top.slots[*dst as usize] = m.input_value(&SymbolId::scalar(&p.inputs[*input].name));
                    Ok(())
                }
                Instr::InputArray { base, len, input } => {
                    let name = &p.inputs[*input].name;
                    for k in 0..*len {
                        top.slots[(*base + k) as usize] = m.input_value(&SymbolId::element(name, k));
                    }
                    Ok(())
                }
                Instr::Call { dst, func: callee, args } => {
                    let args: Result<Vec<Val>, FailKind> = args.iter().map(|a| m.eval(a, &top.slots)).collect();
                    args.map(|args| call = Some(new_frame(p, *callee, args, *dst)))
                }
            };
            if let Err(kind) = done {
                break fault(kind);
            }
            if let Some(frame) = call {
                last_entered = frame.func;
                stack.push(frame);
            }
            continue;
        }
        match &block.term {
            Terminator::Goto(b) => {
                top.block = *b;
                top.ip = 0;
            }
            Terminator::Branch { cond, arms } => match m.eval(cond, &top.slots) {
                Ok(c) => {
                    let taken = c.conc != 0;
                    let arm = arms[usize::from(!taken)];
                    let expr = if taken { c.sym.to_bool() } else { SymExpr::not(c.sym) };
                    m.path.push_branch(expr, arm.site);
                    top.block = arm.target;
                    top.ip = 0;
                }
                Err(kind) => break fault(kind),
            },
            Terminator::Return(value) => {
                let v = match value {
                    Some(e) => match m.eval(e, &top.slots) {
                        Ok(v) => Some(v),
                        Err(kind) => break fault(kind),
                    },
                    None => None,
                };
                let done = stack.pop().expect("non-empty call stack");
                let Some(caller) = stack.last_mut() else { break Termination::Halted };
                if let (Some(dst), Some(v)) = (done.ret, v) {
                    caller.slots[dst as usize] = v;
                }
            }
            Terminator::Halt => break Termination::Halted,
            Terminator::Fail(kind) => break fault(*kind),
        }
    };
    Trace { path: m.path, end, steps, last_entered }
}
