//! Satisfiability checking and model extraction for path-condition queries.
//!
//! The builtin backend decides queries over a signed domain of configurable width by
//! branch-and-prune search; it is complete up to its node and time limits. The external
//! backend drives an SMT-LIB2 process over stdin/stdout.

mod interval;
pub mod smtlib;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symcore::{Constraint, SymExpr, SymbolId};

pub use smtlib::ExternalSolver;

/// Satisfying assignment of input symbols.
pub type Model = BTreeMap<SymbolId, i32>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownReason {
    Timeout,
    ExternalProcessFailure(String),
    UnsupportedTerm(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(Model),
    Unsat,
    Unknown(UnknownReason),
}

impl SolverVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolverVerdict::Sat(_))
    }

    pub fn model(self) -> Option<Model> {
        match self {
            SolverVerdict::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Builtin { domain_bits: u8 },
    /// Shell command line of an SMT-LIB2 solver reading from stdin, e.g. `z3 -in`.
    External { command: String },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Builtin { domain_bits: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: Backend,
    /// Search nodes per builtin query before giving up.
    pub node_limit: u64,
    /// Wall-clock limit per query.
    pub time_limit_ms: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { backend: Backend::default(), node_limit: 20_000, time_limit_ms: 1_000 }
    }
}

impl SolverConfig {
    pub fn builtin(domain_bits: u8) -> Self {
        SolverConfig { backend: Backend::Builtin { domain_bits }, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("{found} variables exceed the enumeration limit of {limit}")]
    TooManyVariables { found: usize, limit: usize },
    #[error("domain width {0} is outside the supported range")]
    BadDomain(u8),
}

/// Inclusive signed range of a `bits`-wide two's complement domain.
pub fn domain_range(bits: u8) -> (i32, i32) {
    assert!((1..=32).contains(&bits), "domain width must be 1..=32");
    let lo = -(1i64 << (bits - 1));
    let hi = (1i64 << (bits - 1)) - 1;
    (lo as i32, hi as i32)
}

/// One solver instance per engine run.
pub struct Solver {
    config: SolverConfig,
    external: Option<ExternalSolver>,
    /// Search nodes (builtin) or 1 per query (external) spent on the most recent query.
    pub last_cost: u64,
    pub queries: u64,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        Solver { config, external: None, last_cost: 0, queries: 0 }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn domain_bits(&self) -> u8 {
        match self.config.backend {
            Backend::Builtin { domain_bits } => domain_bits,
            Backend::External { .. } => 32,
        }
    }

    pub fn check_sat(&mut self, c: &Constraint) -> SolverVerdict {
        self.queries += 1;
        match &self.config.backend {
            Backend::Builtin { domain_bits } => {
                let (verdict, nodes) = builtin_check(c, *domain_bits, self.config.node_limit, self.config.time_limit_ms);
                self.last_cost = nodes;
                verdict
            }
            Backend::External { command } => {
                self.last_cost = 1;
                if self.external.is_none() {
                    match ExternalSolver::spawn(command) {
                        Ok(s) => self.external = Some(s),
                        Err(e) => return SolverVerdict::Unknown(UnknownReason::ExternalProcessFailure(e.to_string())),
                    }
                }
                let verdict = self.external.as_mut().expect("spawned above").check_sat(c);
                if matches!(verdict, SolverVerdict::Unknown(UnknownReason::ExternalProcessFailure(_))) {
                    self.external = None;
                }
                verdict
            }
        }
    }
}

/// One-shot satisfiability check with default limits.
pub fn check_sat(c: &Constraint, backend: &Backend) -> SolverVerdict {
    Solver::new(SolverConfig { backend: backend.clone(), ..SolverConfig::default() }).check_sat(c)
}

/// Groups conjuncts into classes connected by shared symbols.
fn independent_parts(c: &Constraint) -> Vec<(Vec<SymExpr>, Vec<SymbolId>)> {
    let mut parts: Vec<(Vec<SymExpr>, BTreeSet<SymbolId>)> = Vec::new();
    for e in c.conjuncts() {
        let mut syms = e.symbols();
        let mut exprs = vec![e.clone()];
        let mut k = 0;
        while k < parts.len() {
            if parts[k].1.iter().any(|s| syms.contains(s)) {
                let (es, ss) = parts.swap_remove(k);
                exprs.extend(es);
                syms.extend(ss);
            } else {
                k += 1;
            }
        }
        parts.push((exprs, syms));
    }
    parts.into_iter().map(|(es, ss)| (es, ss.into_iter().collect())).collect()
}

/// Solves each independent part on its own, sharing the node budget.
fn builtin_check(c: &Constraint, bits: u8, node_limit: u64, time_limit_ms: u64) -> (SolverVerdict, u64) {
    let (lo, hi) = domain_range(bits);
    let deadline = Instant::now() + Duration::from_millis(time_limit_ms);
    let mut model = Model::new();
    let mut nodes = 0;
    let mut timed_out = false;
    for (exprs, vars) in independent_parts(c) {
        let mut search = interval::Search::new(&exprs, &vars, node_limit.saturating_sub(nodes), Some(deadline));
        let outcome = search.run(interval::Iv::new(lo as i64, hi as i64), vars.len());
        nodes += search.nodes;
        match outcome {
            interval::Outcome::Sat(values) => model.extend(vars.into_iter().zip(values).map(|(s, v)| (s, v as i32))),
            interval::Outcome::Unsat => return (SolverVerdict::Unsat, nodes),
            // Another part may still be unsatisfiable.
            interval::Outcome::Timeout => timed_out = true,
        }
    }
    if timed_out {
        return (SolverVerdict::Unknown(UnknownReason::Timeout), nodes);
    }
    debug_assert!(c.holds(&model), "builtin model must satisfy {c}");
    (SolverVerdict::Sat(model), nodes)
}

/// Every model of `c` over the `bits`-wide domain, by exhaustive enumeration.
/// Models are ordered lexicographically by the values of the symbols taken in name order.
pub fn brute_force_models(c: &Constraint, bits: u8, max_vars: usize) -> Result<Vec<Model>, SolverError> {
    if !(1..=12).contains(&bits) {
        return Err(SolverError::BadDomain(bits));
    }
    let vars: Vec<SymbolId> = c.symbols().into_iter().collect();
    if vars.len() > max_vars.min(4) {
        return Err(SolverError::TooManyVariables { found: vars.len(), limit: max_vars.min(4) });
    }
    let (lo, hi) = domain_range(bits);
    let mut values = vec![lo; vars.len()];
    let mut out = Vec::new();
    loop {
        let lookup = |s: &SymbolId| vars.iter().position(|v| v == s).map(|i| values[i]);
        if c.eval(&lookup) == Some(true) {
            out.push(vars.iter().cloned().zip(values.iter().copied()).collect());
        }
        let mut k = vars.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if values[k] < hi {
                values[k] += 1;
                break;
            }
            values[k] = lo;
        }
    }
}
