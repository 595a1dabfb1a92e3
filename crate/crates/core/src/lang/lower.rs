//! Semantic checks, branch numbering and lowering from the surface tree to basic blocks.

use std::collections::HashMap;

use super::ast::*;
use super::ir::*;
use super::{BranchId, BranchKind, BranchSite, ConditionShape, InputDecl, LangError, Program};

#[derive(Clone, Copy)]
enum Local {
    Scalar(Slot),
    Array(Slot, u32),
}

struct Signature {
    ret: ReturnType,
    arity: usize,
}

/// Instructions, their source lines, and the terminator with its line.
type PendingBlock = (Vec<Instr>, Vec<u32>, Option<(Terminator, u32)>);

struct Lowerer<'a> {
    sigs: &'a HashMap<String, (FuncId, Signature)>,
    sites: &'a mut Vec<BranchSite>,
    inputs: &'a mut Vec<InputDecl>,
    input_names: &'a mut HashMap<String, Pos>,
    calls: Vec<FuncId>,
    func: FuncId,
    is_entry: bool,
    ret: ReturnType,
    locals: HashMap<String, Local>,
    slot_names: Vec<String>,
    blocks: Vec<PendingBlock>,
    cur: Option<BlockId>,
    loop_depth: u32,
    has_loop: bool,
}

pub(super) fn lower(unit: SourceUnit) -> Result<Program, LangError> {
    let mut sigs = HashMap::new();
    for (i, f) in unit.functions.iter().enumerate() {
        let sig = Signature { ret: f.ret, arity: f.params.len() };
        if sigs.insert(f.name.clone(), (i, sig)).is_some() {
            return Err(LangError::semantic(f.pos, format!("duplicate function `{}`", f.name)));
        }
    }
    let entry = match sigs.get("main") {
        Some((i, _)) => *i,
        None => return Err(LangError::semantic(Pos { line: 1, col: 1 }, "missing entry function `main`".into())),
    };
    let main = &unit.functions[entry];
    if !main.params.is_empty() {
        return Err(LangError::semantic(main.pos, "`main` takes no parameters".into()));
    }

    let mut sites = Vec::new();
    let mut inputs = Vec::new();
    let mut input_names = HashMap::new();
    let mut functions = Vec::new();
    let mut call_graph = Vec::new();
    for (i, f) in unit.functions.iter().enumerate() {
        let mut lw = Lowerer {
            sigs: &sigs,
            sites: &mut sites,
            inputs: &mut inputs,
            input_names: &mut input_names,
            calls: Vec::new(),
            func: i,
            is_entry: i == entry,
            ret: f.ret,
            locals: HashMap::new(),
            slot_names: Vec::new(),
            blocks: Vec::new(),
            cur: None,
            loop_depth: 0,
            has_loop: false,
        };
        functions.push(lw.function(f)?);
        call_graph.push(lw.calls);
    }
    check_acyclic(&unit, &call_graph)?;

    let mut base = 0;
    for f in &mut functions {
        f.block_base = f
            .blocks
            .iter()
            .map(|b| {
                let at = base;
                base += b.len();
                at
            })
            .collect();
    }
    Ok(Program { unit, functions, inputs, entry, sites })
}

fn check_acyclic(unit: &SourceUnit, graph: &[Vec<FuncId>]) -> Result<(), LangError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(f: FuncId, graph: &[Vec<FuncId>], mark: &mut [u8]) -> Option<FuncId> {
        mark[f] = 1;
        for &g in &graph[f] {
            match mark[g] {
                1 => return Some(g),
                0 => {
                    if let Some(c) = visit(g, graph, mark) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        mark[f] = 2;
        None
    }
    let mut mark = vec![0u8; graph.len()];
    for f in 0..graph.len() {
        if mark[f] == 0 {
            if let Some(c) = visit(f, graph, &mut mark) {
                let def = &unit.functions[c];
                return Err(LangError::semantic(def.pos, format!("recursive call cycle through `{}`", def.name)));
            }
        }
    }
    Ok(())
}

fn shape_of(cond: &Expr) -> ConditionShape {
    let mut shape = ConditionShape {
        is_equality: matches!(cond.kind, ExprKind::Binary(BinaryOp::Eq | BinaryOp::Ne, ..)),
        ..ConditionShape::default()
    };
    cond.walk(&mut |e| match &e.kind {
        ExprKind::Int(_) => shape.uses_constant = true,
        ExprKind::Index(..) => shape.uses_array = true,
        ExprKind::Binary(op, ..) if op.is_comparison() => shape.comparisons += 1,
        _ => {}
    });
    shape
}

impl Lowerer<'_> {
    fn function(&mut self, f: &FunctionDef) -> Result<IrFunction, LangError> {
        for p in &f.params {
            self.declare_scalar(p, f.pos)?;
        }
        let param_count = self.slot_names.len() as u32;
        let entry = self.new_block();
        self.cur = Some(entry);
        self.stmts(&f.body)?;
        if self.cur.is_some() {
            let end_line = f.body.last().map_or(f.pos.line, |s| s.pos.line);
            let term = if self.is_entry {
                Terminator::Halt
            } else if f.ret == ReturnType::Int {
                Terminator::Return(Some(IrExpr::Const(0)))
            } else {
                Terminator::Return(None)
            };
            self.terminate(term, end_line);
        }
        let blocks = std::mem::take(&mut self.blocks)
            .into_iter()
            .map(|(instrs, mut lines, term)| {
                let (term, line) = term.expect("every block is terminated");
                lines.push(line);
                Block { instrs, term, lines }
            })
            .collect();
        Ok(IrFunction {
            name: f.name.clone(),
            param_count,
            frame_size: self.slot_names.len() as u32,
            returns_int: f.ret == ReturnType::Int,
            blocks,
            block_base: Vec::new(),
            has_loop: self.has_loop,
            slot_names: std::mem::take(&mut self.slot_names),
        })
    }

    fn new_block(&mut self) -> BlockId {
        self.blocks.push((Vec::new(), Vec::new(), None));
        self.blocks.len() - 1
    }

    /// Current block, opening a fresh (unreachable) one after a terminator.
    fn block(&mut self) -> BlockId {
        match self.cur {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.cur = Some(b);
                b
            }
        }
    }

    fn emit(&mut self, instr: Instr, line: u32) {
        let b = self.block();
        self.blocks[b].0.push(instr);
        self.blocks[b].1.push(line);
    }

    fn terminate(&mut self, term: Terminator, line: u32) {
        let b = self.block();
        self.blocks[b].2 = Some((term, line));
        self.cur = None;
    }

    fn alloc(&mut self, name: &str, width: u32) -> Slot {
        let slot = self.slot_names.len() as Slot;
        for i in 0..width {
            self.slot_names.push(if width == 1 { name.to_string() } else { format!("{name}[{i}]") });
        }
        slot
    }

    fn temp(&mut self) -> Slot {
        let n = self.slot_names.len();
        self.alloc(&format!("$t{n}"), 1)
    }

    fn check_fresh(&self, name: &str, pos: Pos) -> Result<(), LangError> {
        if self.locals.contains_key(name) {
            return Err(LangError::semantic(pos, format!("`{name}` is already declared")));
        }
        if self.sigs.contains_key(name) {
            return Err(LangError::semantic(pos, format!("`{name}` shadows a function")));
        }
        Ok(())
    }

    fn declare_scalar(&mut self, name: &str, pos: Pos) -> Result<Slot, LangError> {
        self.check_fresh(name, pos)?;
        let slot = self.alloc(name, 1);
        self.locals.insert(name.to_string(), Local::Scalar(slot));
        Ok(slot)
    }

    fn declare_array(&mut self, name: &str, len: u32, pos: Pos) -> Result<Slot, LangError> {
        self.check_fresh(name, pos)?;
        let slot = self.alloc(name, len);
        self.locals.insert(name.to_string(), Local::Array(slot, len));
        Ok(slot)
    }

    fn declare_input(&mut self, name: &str, len: Option<u32>, pos: Pos) -> Result<usize, LangError> {
        if let Some(prev) = self.input_names.insert(name.to_string(), pos) {
            return Err(LangError::semantic(
                pos,
                format!("input `{name}` already declared at {prev}"),
            ));
        }
        self.inputs.push(InputDecl { name: name.to_string(), len });
        Ok(self.inputs.len() - 1)
    }

    fn new_site(&mut self, polarity: bool, kind: BranchKind, shape: ConditionShape, line: u32) -> BranchId {
        let id = BranchId(self.sites.len() as u32);
        self.sites.push(BranchSite {
            id,
            polarity,
            kind,
            function: self.func,
            in_loop_body: self.loop_depth > 0,
            shape,
            opposite: id,
            line,
        });
        id
    }

    fn site_pair(&mut self, kind: BranchKind, shape: ConditionShape, line: u32) -> (BranchId, BranchId) {
        let t = self.new_site(true, kind, shape, line);
        let f = self.new_site(false, kind, shape, line);
        self.sites[t.index()].opposite = f;
        self.sites[f.index()].opposite = t;
        (t, f)
    }

    fn stmts(&mut self, body: &[Stmt]) -> Result<(), LangError> {
        body.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LangError> {
        let line = s.pos.line;
        match &s.kind {
            StmtKind::DeclInt { name, init } => {
                // Initialiser is evaluated before the name comes into scope.
                let value = match init {
                    Some(e) => self.expr(e, line)?,
                    None => IrExpr::Const(0),
                };
                let dst = self.declare_scalar(name, s.pos)?;
                self.emit(Instr::Assign { dst, value }, line);
            }
            StmtKind::DeclArray { name, len } => {
                let base = self.declare_array(name, *len, s.pos)?;
                self.emit(Instr::Clear { base, len: *len }, line);
            }
            StmtKind::DeclInput { name } => {
                let input = self.declare_input(name, None, s.pos)?;
                let dst = self.declare_scalar(name, s.pos)?;
                self.emit(Instr::Input { dst, input }, line);
            }
            StmtKind::DeclInputArray { name, len } => {
                let input = self.declare_input(name, Some(*len), s.pos)?;
                let base = self.declare_array(name, *len, s.pos)?;
                self.emit(Instr::InputArray { base, len: *len, input }, line);
            }
            StmtKind::Assign { target, value } => match target {
                LValue::Var(v) => {
                    let value = self.expr(value, line)?;
                    match self.locals.get(v) {
                        Some(Local::Scalar(dst)) => {
                            let dst = *dst;
                            self.emit(Instr::Assign { dst, value }, line);
                        }
                        Some(Local::Array(..)) => {
                            return Err(LangError::semantic(s.pos, format!("cannot assign to array `{v}`")))
                        }
                        None => return Err(LangError::semantic(s.pos, format!("undeclared identifier `{v}`"))),
                    }
                }
                LValue::Index(a, idx) => {
                    let index = self.expr(idx, line)?;
                    let value = self.expr(value, line)?;
                    let (base, len) = self.array(a, s.pos)?;
                    self.emit(Instr::Store { base, len, index, value }, line);
                }
            },
            StmtKind::If { cond, then_branch, else_branch } => {
                let shape = shape_of(cond);
                let (t, f) = self.site_pair(BranchKind::If, shape, line);
                let c = self.expr(cond, line)?;
                let then_b = self.new_block();
                let else_b = else_branch.as_ref().map(|_| self.new_block());
                let join = self.new_block();
                let arms = [Arm { site: t, target: then_b }, Arm { site: f, target: else_b.unwrap_or(join) }];
                self.terminate(Terminator::Branch { cond: c, arms }, line);
                self.cur = Some(then_b);
                self.stmts(then_branch)?;
                self.close_into(join, line);
                if let (Some(eb), Some(body)) = (else_b, else_branch) {
                    self.cur = Some(eb);
                    self.stmts(body)?;
                    self.close_into(join, line);
                }
                self.cur = Some(join);
            }
            StmtKind::While { cond, body } => {
                let shape = shape_of(cond);
                let (t, f) = self.site_pair(BranchKind::WhileHeader, shape, line);
                let header = self.new_block();
                self.terminate(Terminator::Goto(header), line);
                self.cur = Some(header);
                let c = self.expr(cond, line)?;
                let body_b = self.new_block();
                let exit = self.new_block();
                let arms = [Arm { site: t, target: body_b }, Arm { site: f, target: exit }];
                self.terminate(Terminator::Branch { cond: c, arms }, line);
                self.cur = Some(body_b);
                self.loop_depth += 1;
                self.has_loop = true;
                self.stmts(body)?;
                self.loop_depth -= 1;
                self.close_into(header, line);
                self.cur = Some(exit);
            }
            StmtKind::Switch { scrutinee, cases, default } => {
                let scr = self.expr(scrutinee, line)?;
                let tmp = self.temp();
                self.emit(Instr::Assign { dst: tmp, value: scr }, line);
                let mut shape = shape_of(scrutinee);
                shape.uses_constant = true;
                shape.is_equality = true;
                shape.comparisons += 1;
                let join = self.new_block();
                for case in cases {
                    let (t, f) = self.site_pair(BranchKind::SwitchCase, shape, case.pos.line);
                    let body_b = self.new_block();
                    let next = self.new_block();
                    let cond = IrExpr::Binary(
                        BinaryOp::Eq,
                        Box::new(IrExpr::Local(tmp)),
                        Box::new(IrExpr::Const(case.value)),
                    );
                    let arms = [Arm { site: t, target: body_b }, Arm { site: f, target: next }];
                    self.terminate(Terminator::Branch { cond, arms }, case.pos.line);
                    self.cur = Some(body_b);
                    self.stmts(&case.body)?;
                    self.close_into(join, case.pos.line);
                    self.cur = Some(next);
                }
                if let Some(d) = default {
                    self.stmts(d)?;
                }
                self.close_into(join, line);
                self.cur = Some(join);
            }
            StmtKind::ExprStmt(e) => match &e.kind {
                ExprKind::Call(name, args) => {
                    self.call(name, args, e.pos, line, false)?;
                }
                _ => return Err(LangError::semantic(s.pos, "expression statement must be a call".into())),
            },
            StmtKind::Return(value) => {
                let term = match (value, self.ret) {
                    (Some(e), ReturnType::Int) => {
                        let v = self.expr(e, line)?;
                        if self.is_entry {
                            Terminator::Halt
                        } else {
                            Terminator::Return(Some(v))
                        }
                    }
                    (None, ReturnType::Void) => {
                        if self.is_entry {
                            Terminator::Halt
                        } else {
                            Terminator::Return(None)
                        }
                    }
                    (Some(_), ReturnType::Void) => {
                        return Err(LangError::semantic(s.pos, "void function returns a value".into()))
                    }
                    (None, ReturnType::Int) => {
                        return Err(LangError::semantic(s.pos, "int function must return a value".into()))
                    }
                };
                self.terminate(term, line);
            }
            StmtKind::Assert(cond) => {
                let shape = shape_of(cond);
                let (t, f) = self.site_pair(BranchKind::If, shape, line);
                let c = self.expr(cond, line)?;
                let ok = self.new_block();
                let fail = self.new_block();
                let arms = [Arm { site: t, target: ok }, Arm { site: f, target: fail }];
                self.terminate(Terminator::Branch { cond: c, arms }, line);
                self.cur = Some(fail);
                self.terminate(Terminator::Fail(FailKind::AssertionFailure), line);
                self.cur = Some(ok);
            }
            StmtKind::Error => self.terminate(Terminator::Fail(FailKind::ErrorCall), line),
            StmtKind::Halt => self.terminate(Terminator::Halt, line),
            StmtKind::Block(b) => self.stmts(b)?,
        }
        Ok(())
    }

    fn close_into(&mut self, target: BlockId, line: u32) {
        if self.cur.is_some() {
            self.terminate(Terminator::Goto(target), line);
        }
    }

    fn array(&self, name: &str, pos: Pos) -> Result<(Slot, u32), LangError> {
        match self.locals.get(name) {
            Some(Local::Array(b, l)) => Ok((*b, *l)),
            Some(Local::Scalar(_)) => Err(LangError::semantic(pos, format!("`{name}` is not an array"))),
            None => Err(LangError::semantic(pos, format!("undeclared identifier `{name}`"))),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], pos: Pos, line: u32, want_value: bool) -> Result<Option<Slot>, LangError> {
        let (func, sig) = match self.sigs.get(name) {
            Some(s) => s,
            None => return Err(LangError::semantic(pos, format!("undeclared function `{name}`"))),
        };
        let func = *func;
        if sig.arity != args.len() {
            return Err(LangError::semantic(
                pos,
                format!("`{name}` expects {} argument(s), got {}", sig.arity, args.len()),
            ));
        }
        if want_value && sig.ret == ReturnType::Void {
            return Err(LangError::semantic(pos, format!("void function `{name}` used as a value")));
        }
        let ret = sig.ret;
        let args = args.iter().map(|a| self.expr(a, line)).collect::<Result<Vec<_>, _>>()?;
        let dst = if ret == ReturnType::Int && want_value { Some(self.temp()) } else { None };
        self.calls.push(func);
        self.emit(Instr::Call { dst, func, args }, line);
        Ok(dst)
    }

    fn expr(&mut self, e: &Expr, line: u32) -> Result<IrExpr, LangError> {
        Ok(match &e.kind {
            ExprKind::Int(v) => match i32::try_from(*v) {
                Ok(v) => IrExpr::Const(v),
                Err(_) => return Err(LangError::semantic(e.pos, format!("integer literal {v} out of range"))),
            },
            ExprKind::Var(v) => match self.locals.get(v) {
                Some(Local::Scalar(s)) => IrExpr::Local(*s),
                Some(Local::Array(..)) => {
                    return Err(LangError::semantic(e.pos, format!("array `{v}` used as a scalar")))
                }
                None => return Err(LangError::semantic(e.pos, format!("undeclared identifier `{v}`"))),
            },
            ExprKind::Index(a, idx) => {
                let index = self.expr(idx, line)?;
                let (base, len) = self.array(a, e.pos)?;
                IrExpr::Elem { base, len, index: Box::new(index) }
            }
            ExprKind::Unary(UnaryOp::Neg, inner) if matches!(inner.kind, ExprKind::Int(_)) => {
                let ExprKind::Int(v) = inner.kind else { unreachable!() };
                match i32::try_from(-v) {
                    Ok(v) => IrExpr::Const(v),
                    Err(_) => return Err(LangError::semantic(e.pos, format!("integer literal -{v} out of range"))),
                }
            }
            ExprKind::Unary(op, inner) => IrExpr::Unary(*op, Box::new(self.expr(inner, line)?)),
            ExprKind::Binary(op, a, b) => {
                let a = self.expr(a, line)?;
                let b = self.expr(b, line)?;
                IrExpr::Binary(*op, Box::new(a), Box::new(b))
            }
            ExprKind::Call(name, args) => {
                let slot = self.call(name, args, e.pos, line, true)?.expect("int call yields a slot");
                IrExpr::Local(slot)
            }
        })
    }
}
