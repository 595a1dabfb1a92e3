//! Dynamic symbolic execution workbench for MiniC: concolic testing, execution-generated
//! testing, a linear parametric search heuristic with baseline heuristics, and a
//! sample-space-refinement learner for the heuristic's weights.

pub mod concolic;
pub mod egt;
pub mod features;
pub mod heuristics;
pub mod lang;
pub mod learn;
pub mod report;
pub mod solver;
pub mod symcore;
