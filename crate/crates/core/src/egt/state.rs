//! Symbolic states and the single-instruction transition of Algorithm 2.

use serde::{Deserialize, Serialize};

use crate::concolic::{input_symbols, InputVector};
use crate::lang::ast::BinaryOp;
use crate::lang::ir::{FuncId, Instr, IrExpr, Slot, Terminator};
use crate::lang::{BranchId, FailKind, Program};
use crate::solver::{Model, Solver, SolverVerdict};
use crate::symcore::{apply_binary, apply_unary, CmpOp, Constraint, PathCondition, SymExpr, SymbolId, MAX_TERM_DEPTH};

use super::EgtGlobals;

#[derive(Debug, Clone)]
pub struct SymFrame {
    pub func: FuncId,
    pub block: usize,
    pub ip: usize,
    pub slots: Vec<SymExpr>,
    pub ret: Option<Slot>,
    /// Instructions executed since this frame was entered.
    pub instructions: u64,
}

/// `(instr, S, Φ)` plus search statistics.
#[derive(Debug, Clone)]
pub struct SymState {
    pub frames: Vec<SymFrame>,
    pub phi: PathCondition,
    /// A model of `phi`, kept current by the fork gate.
    pub model: Model,
    pub instructions: u64,
    pub since_new_coverage: u64,
    pub query_cost: u64,
    pub creation: u64,
    /// The last branch of `phi` had never been traversed before this state took it.
    pub last_branch_new: bool,
    /// Leaf of the fork tree holding this state.
    pub node: usize,
}

impl SymState {
    pub fn initial(p: &Program, creation: u64, node: usize) -> Self {
        let frame = SymFrame {
            func: p.entry,
            block: 0,
            ip: 0,
            slots: vec![SymExpr::int(0); p.functions[p.entry].frame_size as usize],
            ret: None,
            instructions: 0,
        };
        SymState {
            frames: vec![frame],
            phi: PathCondition::new(),
            model: Model::new(),
            instructions: 0,
            since_new_coverage: 0,
            query_cost: 0,
            creation,
            last_branch_new: false,
            node,
        }
    }

    pub fn depth(&self) -> usize {
        self.phi.len()
    }

    pub fn function(&self) -> FuncId {
        self.frames.last().expect("live state has a frame").func
    }

    pub fn block(&self) -> usize {
        self.frames.last().expect("live state has a frame").block
    }

    pub fn callpath_instructions(&self) -> u64 {
        self.frames.last().map_or(0, |f| f.instructions)
    }

    pub fn last_site(&self) -> Option<BranchId> {
        self.phi.last().map(|c| c.site)
    }

    /// The state's model completed with zeros for inputs `phi` does not mention.
    pub fn test_input(&self, p: &Program) -> InputVector {
        input_symbols(p).into_iter().map(|s| {
            let v = self.model.get(&s).copied().unwrap_or(0);
            (s, v)
        }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestOrigin {
    Halted,
    Fault,
    StepLimit,
    /// Emitted for a state still pending when the budget ran out.
    Flushed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: InputVector,
    /// Seconds since the run started, or the loop iteration in iteration-budget mode.
    pub created_at: f64,
    pub origin: TestOrigin,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fault: Option<Fault>,
    /// The path condition the input was derived from.
    #[serde(skip)]
    pub source: Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub kind: FailKind,
    pub function: String,
    pub line: u32,
}

#[derive(Debug)]
pub enum StepOutcome {
    Continue(SymState),
    Forked(SymState, SymState),
    OneArm(SymState),
    Halted(TestCase),
    Errored(TestCase, Fault),
    /// A fault guard split the state: failing sides became tests, the safe side (if any) continues.
    Guarded { faults: Vec<(TestCase, Fault)>, next: Option<SymState> },
    Dropped(String),
}

/// A condition that must hold for an expression to evaluate without faulting.
struct Guard {
    safe: SymExpr,
    kind: FailKind,
}

fn eval(e: &IrExpr, slots: &[SymExpr], guards: &mut Vec<Guard>) -> SymExpr {
    match e {
        IrExpr::Const(c) => SymExpr::int(*c),
        IrExpr::Local(s) => slots[*s as usize].clone(),
        IrExpr::Elem { base, len, index } => {
            let i = eval(index, slots, guards);
            guards.push(Guard { safe: in_bounds(&i, *len), kind: FailKind::IndexOutOfBounds });
            select(&i, &slots[*base as usize..(*base + *len) as usize])
        }
        IrExpr::Unary(op, a) => apply_unary(*op, eval(a, slots, guards)),
        IrExpr::Binary(op, a, b) => {
            let a = eval(a, slots, guards);
            let b = eval(b, slots, guards);
            if matches!(op, BinaryOp::Div | BinaryOp::Rem) {
                guards.push(Guard { safe: SymExpr::cmp(CmpOp::Ne, b.clone(), SymExpr::int(0)), kind: FailKind::DivisionByZero });
            }
            apply_binary(*op, a, b)
        }
    }
}

fn in_bounds(i: &SymExpr, len: u32) -> SymExpr {
    SymExpr::and(
        SymExpr::cmp(CmpOp::Ge, i.clone(), SymExpr::int(0)),
        SymExpr::cmp(CmpOp::Lt, i.clone(), SymExpr::int(len as i32)),
    )
}

/// Element `i` of `elems` as an if-then-else chain (a plain read for a constant index).
fn select(i: &SymExpr, elems: &[SymExpr]) -> SymExpr {
    if let Some(v) = i.as_const() {
        let k = v.as_int();
        return elems.get(k as usize).cloned().filter(|_| k >= 0).unwrap_or_else(|| SymExpr::int(0));
    }
    let mut out = elems.last().cloned().unwrap_or_else(|| SymExpr::int(0));
    for (k, e) in elems.iter().enumerate().rev().skip(1) {
        out = SymExpr::ite(SymExpr::cmp(CmpOp::Eq, i.clone(), SymExpr::int(k as i32)), e.clone(), out);
    }
    out
}

fn store(slots: &mut [SymExpr], base: Slot, len: u32, i: &SymExpr, v: SymExpr) {
    if let Some(k) = i.as_const() {
        let k = k.as_int();
        if k >= 0 && (k as u32) < len {
            slots[(base + k as u32) as usize] = v;
        }
        return;
    }
    for k in 0..len {
        let slot = &mut slots[(base + k) as usize];
        *slot = SymExpr::ite(SymExpr::cmp(CmpOp::Eq, i.clone(), SymExpr::int(k as i32)), v.clone(), slot.clone());
    }
}

fn check(solver: &mut Solver, s: &mut SymState, extra: &SymExpr) -> SolverVerdict {
    let c = s.phi.constraint().and(extra.clone());
    let v = solver.check_sat(&c);
    s.query_cost += solver.last_cost;
    v
}

fn test_of(p: &Program, s: &SymState, g: &EgtGlobals, origin: TestOrigin, fault: Option<Fault>) -> TestCase {
    TestCase { input: s.test_input(p), created_at: g.clock(), origin, fault, source: s.phi.constraint() }
}

/// Executes exactly one instruction or terminator of `s`.
pub fn step_state(p: &Program, mut s: SymState, solver: &mut Solver, g: &mut EgtGlobals) -> StepOutcome {
    let (func, block_id, ip) = {
        let f = s.frames.last().expect("live state has a frame");
        (f.func, f.block, f.ip)
    };
    let block = &p.functions[func].blocks[block_id];
    let line = block.lines[ip];
    let fresh = g.cover_instruction(p.functions[func].block_base[block_id] + ip);
    s.instructions += 1;
    s.since_new_coverage = if fresh { 0 } else { s.since_new_coverage + 1 };
    s.frames.last_mut().expect("frame").instructions += 1;
    let fault_of = |kind| Fault { kind, function: p.functions[func].name.clone(), line };

    let mut guards = Vec::new();
    if ip < block.instrs.len() {
        let frame = s.frames.last_mut().expect("frame");
        frame.ip += 1;
        let mut call = None;
        match &block.instrs[ip] {
            Instr::Assign { dst, value } => {
                let v = eval(value, &frame.slots, &mut guards);
                frame.slots[*dst as usize] = v;
            }
            Instr::Store { base, len, index, value } => {
                let i = eval(index, &frame.slots, &mut guards);
                guards.push(Guard { safe: in_bounds(&i, *len), kind: FailKind::IndexOutOfBounds });
                let v = eval(value, &frame.slots, &mut guards);
                store(&mut frame.slots, *base, *len, &i, v);
            }
            Instr::Clear { base, len } => {
                for k in 0..*len {
                    frame.slots[(*base + k) as usize] = SymExpr::int(0);
                }
            }
            Instr::Input { dst, input } => {
                frame.slots[*dst as usize] = SymExpr::symbol(SymbolId::scalar(&p.inputs[*input].name));
            }
            Instr::InputArray { base, len, input } => {
                let name = &p.inputs[*input].name;
                for k in 0..*len {
                    frame.slots[(*base + k) as usize] = SymExpr::symbol(SymbolId::element(name, k));
                }
            }
            Instr::Call { dst, func: callee, args } => {
                let args: Vec<SymExpr> = args.iter().map(|a| eval(a, &frame.slots, &mut guards)).collect();
                let mut slots = vec![SymExpr::int(0); p.functions[*callee].frame_size as usize];
                for (slot, a) in slots.iter_mut().zip(args) {
                    *slot = a;
                }
                call = Some(SymFrame { func: *callee, block: 0, ip: 0, slots, ret: *dst, instructions: 0 });
            }
        }
        if let Some(frame) = call {
            g.last_entered = Some(frame.func);
            s.frames.push(frame);
        }
        concretize_deep(&mut s);
        return resolve_guards(p, s, solver, g, guards, &fault_of, StepOutcome::Continue);
    }

    match &block.term {
        Terminator::Goto(b) => {
            let frame = s.frames.last_mut().expect("frame");
            frame.block = *b;
            frame.ip = 0;
            StepOutcome::Continue(s)
        }
        Terminator::Branch { cond, arms } => {
            let c = eval(cond, &s.frames.last().expect("frame").slots, &mut guards).to_bool();
            let outcome = resolve_guards(p, s, solver, g, guards, &fault_of, StepOutcome::Continue);
            let (faults, s) = match outcome {
                StepOutcome::Continue(s) => (Vec::new(), s),
                StepOutcome::Guarded { faults, next: Some(s) } => (faults, s),
                other => return other,
            };
            let branched = branch(s, solver, g, c, arms.map(|a| (a.site, a.target)));
            if faults.is_empty() {
                return branched;
            }
            // Rare: a fault guard inside a branch condition. Keep the faults and one successor.
            match branched {
                StepOutcome::OneArm(n) => StepOutcome::Guarded { faults, next: Some(n) },
                StepOutcome::Forked(a, _) => StepOutcome::Guarded { faults, next: Some(a) },
                _ => StepOutcome::Guarded { faults, next: None },
            }
        }
        Terminator::Return(value) => {
            let v = value.as_ref().map(|e| eval(e, &s.frames.last().expect("frame").slots, &mut guards));
            let done = s.frames.pop().expect("frame");
            match s.frames.last_mut() {
                None => {
                    let t = test_of(p, &s, g, TestOrigin::Halted, None);
                    return StepOutcome::Halted(t);
                }
                Some(caller) => {
                    if let (Some(dst), Some(v)) = (done.ret, v) {
                        caller.slots[dst as usize] = v;
                    }
                }
            }
            concretize_deep(&mut s);
            resolve_guards(p, s, solver, g, guards, &fault_of, StepOutcome::Continue)
        }
        Terminator::Halt => StepOutcome::Halted(test_of(p, &s, g, TestOrigin::Halted, None)),
        Terminator::Fail(kind) => {
            let f = fault_of(*kind);
            StepOutcome::Errored(test_of(p, &s, g, TestOrigin::Fault, Some(f.clone())), f)
        }
    }
}

/// Pins over-deep slots of the top frame to their value under the state's model.
fn concretize_deep(s: &mut SymState) {
    let Some(frame) = s.frames.last_mut() else { return };
    for slot in frame.slots.iter_mut().filter(|v| v.depth() > MAX_TERM_DEPTH) {
        for sym in slot.symbols() {
            s.model.entry(sym).or_insert(0);
        }
        let c = slot.eval(&|id| s.model.get(id).copied()).expect("model binds every symbol").as_int();
        let v = std::mem::replace(slot, SymExpr::int(c));
        s.phi.assume(SymExpr::cmp(CmpOp::Eq, v, SymExpr::int(c)));
    }
}

/// Splits off faulting continuations for every guard that may fail.
fn resolve_guards(
    p: &Program,
    mut s: SymState,
    solver: &mut Solver,
    g: &mut EgtGlobals,
    guards: Vec<Guard>,
    fault_of: &dyn Fn(FailKind) -> Fault,
    ok: fn(SymState) -> StepOutcome,
) -> StepOutcome {
    let mut faults = Vec::new();
    for guard in guards {
        if guard.safe.as_const().is_some_and(|v| v.as_bool()) {
            continue;
        }
        let unsafe_side = SymExpr::not(guard.safe.clone());
        let fail_verdict = if guard.safe.is_const() { SolverVerdict::Sat(s.model.clone()) } else { check(solver, &mut s, &unsafe_side) };
        if let SolverVerdict::Sat(model) = fail_verdict {
            let mut failing = s.clone();
            failing.phi.assume(unsafe_side);
            failing.model = model;
            let f = fault_of(guard.kind);
            faults.push((test_of(p, &failing, g, TestOrigin::Fault, Some(f.clone())), f));
        }
        if guard.safe.is_const() {
            return StepOutcome::Guarded { faults, next: None };
        }
        match check(solver, &mut s, &guard.safe) {
            SolverVerdict::Sat(model) => {
                s.phi.assume(guard.safe);
                s.model = model;
            }
            _ => return StepOutcome::Guarded { faults, next: None },
        }
    }
    if faults.is_empty() {
        ok(s)
    } else {
        StepOutcome::Guarded { faults, next: Some(s) }
    }
}

fn take_arm(g: &mut EgtGlobals, s: &mut SymState, site: BranchId, target: usize) {
    let frame = s.frames.last_mut().expect("frame");
    frame.block = target;
    frame.ip = 0;
    s.last_branch_new = g.traverse(site);
}

/// The fork gate: consults the solver only when the guard is symbolic.
fn branch(mut s: SymState, solver: &mut Solver, g: &mut EgtGlobals, c: SymExpr, arms: [(BranchId, usize); 2]) -> StepOutcome {
    if let Some(v) = c.as_const() {
        let (site, target) = arms[usize::from(!v.as_bool())];
        let last_new = s.last_branch_new;
        take_arm(g, &mut s, site, target);
        // Φ is unchanged, so the "last branch" is still the previous symbolic one.
        s.last_branch_new = last_new;
        return StepOutcome::OneArm(s);
    }
    let not_c = SymExpr::not(c.clone());
    let t = check(solver, &mut s, &c);
    let f = check(solver, &mut s, &not_c);
    let child = |model: Model, cond: SymExpr, (site, target): (BranchId, usize), st: &SymState, g: &mut EgtGlobals| {
        let mut n = st.clone();
        n.phi.push_branch(cond, site);
        n.model = model;
        take_arm(g, &mut n, site, target);
        n
    };
    match (t, f) {
        (SolverVerdict::Sat(mt), SolverVerdict::Sat(mf)) => {
            let mut a = child(mt, c, arms[0], &s, g);
            let mut b = child(mf, not_c, arms[1], &s, g);
            a.creation = g.next_creation();
            b.creation = g.next_creation();
            StepOutcome::Forked(a, b)
        }
        (SolverVerdict::Sat(m), _) => StepOutcome::OneArm(child(m, c, arms[0], &s, g)),
        (_, SolverVerdict::Sat(m)) => StepOutcome::OneArm(child(m, not_c, arms[1], &s, g)),
        (a, b) => StepOutcome::Dropped(format!("neither arm of {} is feasible ({a:?}, {b:?})", arms[0].0)),
    }
}
