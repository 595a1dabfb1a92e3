//! Lowered form executed by both engines: per-function basic blocks over slot-addressed locals.

use super::ast::{BinaryOp, UnaryOp};
use super::BranchId;

pub type FuncId = usize;
pub type BlockId = usize;
pub type Slot = u32;

/// A call-free expression over frame slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrExpr {
    Const(i32),
    Local(Slot),
    Elem { base: Slot, len: u32, index: Box<IrExpr> },
    Unary(UnaryOp, Box<IrExpr>),
    Binary(BinaryOp, Box<IrExpr>, Box<IrExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Assign { dst: Slot, value: IrExpr },
    Store { base: Slot, len: u32, index: IrExpr, value: IrExpr },
    /// Zero-fills an array on (re-)declaration.
    Clear { base: Slot, len: u32 },
    Input { dst: Slot, input: usize },
    InputArray { base: Slot, len: u32, input: usize },
    Call { dst: Option<Slot>, func: FuncId, args: Vec<IrExpr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    pub site: BranchId,
    pub target: BlockId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailKind {
    ErrorCall,
    AssertionFailure,
    DivisionByZero,
    IndexOutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Goto(BlockId),
    /// `arms[0]` is taken when the condition is non-zero, `arms[1]` otherwise.
    Branch { cond: IrExpr, arms: [Arm; 2] },
    Return(Option<IrExpr>),
    Halt,
    Fail(FailKind),
}

impl Terminator {
    pub fn successors(&self) -> Vec<(BlockId, Option<BranchId>)> {
        match self {
            Terminator::Goto(b) => vec![(*b, None)],
            Terminator::Branch { arms, .. } => arms.iter().map(|a| (a.target, Some(a.site))).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub instrs: Vec<Instr>,
    pub term: Terminator,
    /// Source line of each instruction, then of the terminator.
    pub lines: Vec<u32>,
}

impl Block {
    /// Instructions plus the terminator.
    pub fn len(&self) -> usize {
        self.instrs.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    pub param_count: u32,
    pub frame_size: u32,
    pub returns_int: bool,
    pub blocks: Vec<Block>,
    /// Global index of the first instruction of each block.
    pub block_base: Vec<usize>,
    pub has_loop: bool,
    pub slot_names: Vec<String>,
}

impl IrFunction {
    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }
}
