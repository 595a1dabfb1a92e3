//! MiniC front end: parsing, semantic checks, branch numbering, lowering and the CFG.

pub mod ast;
pub mod cfg;
pub mod ir;
mod lower;
mod parser;
pub mod pretty;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::Pos;
pub use cfg::{branch_distance, build_cfg, Cfg, CfgEdge, EdgeKind};
pub use ir::{FailKind, FuncId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("semantic error at {pos}: {message}")]
    Semantic { pos: Pos, message: String },
}

impl LangError {
    pub(crate) fn syntax(pos: Pos, message: String) -> Self {
        LangError::Syntax { pos, message }
    }

    pub(crate) fn semantic(pos: Pos, message: String) -> Self {
        LangError::Semantic { pos, message }
    }

    pub fn pos(&self) -> Pos {
        match self {
            LangError::Syntax { pos, .. } | LangError::Semantic { pos, .. } => *pos,
        }
    }
}

/// Dense index of one arm of a conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchId(pub u32);

impl BranchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    If,
    WhileHeader,
    SwitchCase,
}

/// Syntactic properties of the condition guarding a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConditionShape {
    pub uses_array: bool,
    pub uses_constant: bool,
    pub is_equality: bool,
    pub comparisons: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSite {
    pub id: BranchId,
    /// `true` for the arm taken when the condition holds.
    pub polarity: bool,
    pub kind: BranchKind,
    pub function: FuncId,
    pub in_loop_body: bool,
    pub shape: ConditionShape,
    /// The other arm of the same conditional.
    pub opposite: BranchId,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDecl {
    pub name: String,
    /// `None` for scalars, the element count for `input_array`.
    pub len: Option<u32>,
}

/// A parsed, checked and lowered MiniC program.
#[derive(Debug, Clone)]
pub struct Program {
    pub unit: ast::SourceUnit,
    pub functions: Vec<ir::IrFunction>,
    pub inputs: Vec<InputDecl>,
    pub entry: FuncId,
    pub sites: Vec<BranchSite>,
}

impl Program {
    pub fn site(&self, id: BranchId) -> &BranchSite {
        &self.sites[id.index()]
    }

    pub fn branch_count(&self) -> usize {
        self.sites.len()
    }

    pub fn function_name(&self, f: FuncId) -> &str {
        &self.functions[f].name
    }

    /// Number of branch arms whose enclosing function is `f`.
    pub fn arms_in_function(&self, f: FuncId) -> usize {
        self.sites.iter().filter(|s| s.function == f).count()
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(|f| f.instruction_count()).sum()
    }

    /// Function owning the global instruction index `ix`.
    pub fn function_of_instruction(&self, ix: usize) -> FuncId {
        self.functions
            .iter()
            .rposition(|f| f.block_base.first().is_some_and(|b| *b <= ix))
            .unwrap_or(0)
    }

    pub fn pretty(&self) -> String {
        pretty::pretty(&self.unit)
    }
}

/// Parses, checks and lowers MiniC source text.
pub fn parse(source: &str) -> Result<Program, LangError> {
    let unit = parser::parse_unit(source)?;
    lower::lower(unit)
}
