//! Python bindings: every function takes MiniC source text and returns JSON text,
//! which the `dse_py` package decodes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use dse_core::concolic::{input_symbols, run_concolic, DEFAULT_STEP_LIMIT};
use dse_core::egt::run_egt;
use dse_core::heuristics::{parse_heuristic, Heuristic, ParamVector};
use dse_core::lang::{build_cfg, parse, Cfg, Program};
use dse_core::learn::{optimize, EngineMode, EvalSettings, LearnConfig};
use dse_core::report::feature_report;
use dse_core::solver::SolverConfig;

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json(v: &impl Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(invalid)
}

fn program(source: &str) -> PyResult<(Program, Cfg)> {
    let p = parse(source).map_err(invalid)?;
    let cfg = build_cfg(&p);
    Ok((p, cfg))
}

fn engine(mode: &str) -> PyResult<EngineMode> {
    match mode {
        "concolic" => Ok(EngineMode::Concolic),
        "egt" => Ok(EngineMode::Egt),
        m => Err(invalid(format!("unknown mode `{m}`; expected concolic or egt"))),
    }
}

#[derive(Serialize)]
struct Summary {
    branch_count: usize,
    inputs: Vec<String>,
    listing: String,
}

/// Parses a program and lists its branch arms and input symbols.
#[pyfunction]
fn parse_program(source: &str) -> PyResult<String> {
    let (p, _) = program(source)?;
    json(&Summary {
        branch_count: p.branch_count(),
        inputs: input_symbols(&p).iter().map(ToString::to_string).collect(),
        listing: p.pretty(),
    })
}

/// Runs one heuristic once. `theta` supplies the weights when `heuristic` is `parametric`.
#[pyfunction]
#[pyo3(signature = (source, heuristic="dfs", mode="concolic", budget=100, seed=0, theta=None))]
fn run(source: &str, heuristic: &str, mode: &str, budget: u64, seed: u64, theta: Option<Vec<f64>>) -> PyResult<String> {
    let (p, cfg) = program(source)?;
    let mode = engine(mode)?;
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let name = match (heuristic, &theta) {
        ("parametric", Some(_)) => "parametric:theta",
        (h, _) => h,
    };
    let load = |_: &str| theta.clone().map(ParamVector).ok_or_else(|| "pass the weights as `theta`".to_string());
    let h = parse_heuristic(name, mode.features(), &load).map_err(invalid)?;
    let settings = EvalSettings {
        mode,
        budget,
        solver: SolverConfig::default(),
        step_limit: DEFAULT_STEP_LIMIT,
        random_initial: true,
    };
    match h {
        Heuristic::Concolic(h) => json(&run_concolic(&p, &cfg, &h, &settings.concolic_config(seed)).0),
        Heuristic::Egt(h) => json(&run_egt(&p, &cfg, &h, &settings.egt_config(seed))),
    }
}

#[derive(Serialize)]
struct Learned {
    theta: ParamVector,
    max: f64,
    converged: bool,
    converged_at: usize,
}

/// Learns parametric weights for one program.
#[pyfunction]
#[pyo3(signature = (source, mode="concolic", n=30, k=4, trials=3, budget=300, seed=0, max_iterations=20))]
#[allow(clippy::too_many_arguments)]
fn learn(
    source: &str,
    mode: &str,
    n: usize,
    k: usize,
    trials: usize,
    budget: u64,
    seed: u64,
    max_iterations: usize,
) -> PyResult<String> {
    let (p, cfg) = program(source)?;
    let config = LearnConfig { n, k, trials, mode: engine(mode)?, budget, seed, max_iterations, ..LearnConfig::default() };
    config.validate().map_err(invalid)?;
    let r = optimize(&p, &cfg, &config).map_err(invalid)?;
    json(&Learned { theta: r.theta_max, max: r.max, converged: r.converged, converged_at: r.converged_at })
}

/// Top-`top_k` positive and negative weights with their feature descriptions.
#[pyfunction]
#[pyo3(signature = (theta, top_k=5))]
fn report_features(theta: Vec<f64>, top_k: usize) -> PyResult<String> {
    json(&feature_report(&ParamVector(theta), top_k).map_err(invalid)?)
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_program, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(report_features, m)?)?;
    Ok(())
}
