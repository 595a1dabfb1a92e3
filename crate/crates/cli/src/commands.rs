use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use dse_core::concolic::{run_concolic, RunReport, DEFAULT_STEP_LIMIT};
use dse_core::egt::{run_egt, EgtBudget, EgtReport};
use dse_core::heuristics::{parse_heuristic, Heuristic, ParamVector};
use dse_core::lang::{build_cfg, parse, Cfg, Program};
use dse_core::learn::{derive_seed, optimize, EngineMode, EvalSettings, LearnConfig};
use dse_core::report::{compare, feature_report, CompareReport, TrialSummary};

use crate::config::{solver_config, FileConfig};
use crate::{CliError, Command, Common, CompareArgs, LearnArgs, ReportArgs, RunArgs};

pub fn dispatch(cli: crate::Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Compare(a) => cmd_compare(a),
        Command::ReportFeatures(a) => cmd_report_features(a),
    }
}

/// Flags merged over the config file, with defaults filled in.
struct Resolved {
    file: FileConfig,
    settings: EvalSettings,
    seconds: Option<f64>,
    seed: u64,
    parallelism: usize,
    output: Option<PathBuf>,
}

fn resolve(c: Common, default_budget: u64) -> Result<Resolved, CliError> {
    let file = FileConfig::load(c.config.as_deref())?;
    let mode = c.mode.map(EngineMode::from).or(file.mode).unwrap_or(EngineMode::Concolic);
    let solver = solver_config(
        c.solver.as_deref().or(file.solver.as_deref()).unwrap_or("builtin"),
        c.domain_bits.or(file.domain_bits).unwrap_or(32),
    )?;
    let seconds = c.seconds.or(file.seconds);
    if seconds.is_some_and(|s| !s.is_finite() || s <= 0.0) {
        return Err(CliError::Usage("--seconds must be positive".into()));
    }
    if seconds.is_some() && mode == EngineMode::Concolic {
        return Err(CliError::Usage("--seconds applies to egt mode only".into()));
    }
    let budget = c.budget.or(file.budget).unwrap_or(default_budget);
    if budget == 0 {
        return Err(CliError::Usage("--budget must be at least 1".into()));
    }
    let parallelism = c.parallelism.or(file.parallelism).unwrap_or(1);
    if parallelism == 0 {
        return Err(CliError::Usage("--parallelism must be at least 1".into()));
    }
    let settings = EvalSettings {
        mode,
        budget,
        solver,
        step_limit: c.step_limit.or(file.step_limit).unwrap_or(DEFAULT_STEP_LIMIT),
        random_initial: c.random_initial.or(file.random_initial).unwrap_or(true),
    };
    Ok(Resolved {
        seed: c.seed.or(file.seed).unwrap_or(0),
        output: c.output.or_else(|| file.output.clone()),
        file,
        settings,
        seconds,
        parallelism,
    })
}

fn load_program(path: &Path) -> Result<(Program, Cfg), CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read program `{}`: {e}", path.display())))?;
    let p = parse(&src).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg = build_cfg(&p);
    Ok((p, cfg))
}

fn load_theta(path: &str) -> Result<ParamVector, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read `{path}`: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("`{path}` is not a JSON array of numbers: {e}"))
}

fn heuristic(name: &str, mode: EngineMode) -> Result<Heuristic, CliError> {
    parse_heuristic(name, mode.features(), &load_theta).map_err(|e| CliError::Usage(e.to_string()))
}

fn trials_arg(t: Option<usize>) -> Result<usize, CliError> {
    match t {
        Some(0) => Err(CliError::Usage("--trials must be at least 1".into())),
        t => Ok(t.unwrap_or(1)),
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum AnyReport {
    Concolic(RunReport),
    Egt(EgtReport),
}

impl AnyReport {
    fn summary(&self) -> TrialSummary {
        match self {
            AnyReport::Concolic(r) => TrialSummary::from_concolic(r),
            AnyReport::Egt(r) => TrialSummary::from_egt(r),
        }
    }
}

fn run_one(p: &Program, cfg: &Cfg, h: &Heuristic, r: &Resolved, seed: u64) -> AnyReport {
    match h {
        Heuristic::Concolic(h) => AnyReport::Concolic(run_concolic(p, cfg, h, &r.settings.concolic_config(seed)).0),
        Heuristic::Egt(h) => {
            let mut config = r.settings.egt_config(seed);
            if let Some(s) = r.seconds {
                config.budget = EgtBudget::Seconds(s);
            }
            AnyReport::Egt(run_egt(p, cfg, h, &config))
        }
    }
}

/// Trial `t` of a run uses seed `derive_seed(seed, [t])`; results come back in trial order.
fn run_trials(p: &Program, cfg: &Cfg, h: &Heuristic, r: &Resolved, trials: usize) -> Result<Vec<AnyReport>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(r.parallelism)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(pool.install(|| {
        (0..trials).into_par_iter().map(|t| run_one(p, cfg, h, r, derive_seed(r.seed, &[t as u64]))).collect()
    }))
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write `{}`: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn write_curves(path: &Path, rows: &[(String, String, usize, &TrialSummary)]) -> Result<(), CliError> {
    let fail = |e: csv::Error| CliError::Usage(format!("cannot write `{}`: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(["program", "heuristic", "trial", "x", "covered"]).map_err(fail)?;
    for (program, h, trial, s) in rows {
        for (x, c) in &s.curve {
            w.write_record([program.as_str(), h.as_str(), &trial.to_string(), &x.to_string(), &c.to_string()]).map_err(fail)?;
        }
    }
    w.flush().map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let r = resolve(a.common, 100)?;
    let (p, cfg) = load_program(&a.program)?;
    let name = a.heuristic.or_else(|| r.file.heuristic.clone()).unwrap_or_else(|| "dfs".into());
    let h = heuristic(&name, r.settings.mode)?;
    let trials = trials_arg(a.trials.or(r.file.trials))?;
    let reports = run_trials(&p, &cfg, &h, &r, trials)?;
    write_json(r.output.as_deref(), &reports)?;
    if let Some(csv) = a.csv.or_else(|| r.file.csv.clone()) {
        let program = a.program.display().to_string();
        let summaries: Vec<TrialSummary> = reports.iter().map(AnyReport::summary).collect();
        let rows: Vec<_> = summaries.iter().enumerate().map(|(t, s)| (program.clone(), h.name(), t, s)).collect();
        write_curves(&csv, &rows)?;
    }
    Ok(())
}

fn cmd_learn(a: LearnArgs) -> Result<(), CliError> {
    let r = resolve(a.common, 300)?;
    let (p, cfg) = load_program(&a.program)?;
    if r.seconds.is_some() {
        return Err(CliError::Usage("learning uses iteration budgets; drop --seconds".into()));
    }
    let defaults = LearnConfig::default();
    let config = LearnConfig {
        n: a.n.or(r.file.n).unwrap_or(defaults.n),
        k: a.k.or(r.file.k).unwrap_or(defaults.k),
        trials: a.check_trials.or(r.file.check_trials).unwrap_or(defaults.trials),
        mode: r.settings.mode,
        budget: r.settings.budget,
        seed: r.seed,
        parallelism: r.parallelism,
        max_iterations: a.max_iterations.or(r.file.max_iterations).unwrap_or(defaults.max_iterations),
        solver: r.settings.solver.clone(),
        step_limit: r.settings.step_limit,
        random_initial: r.settings.random_initial,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = optimize(&p, &cfg, &config).map_err(|e| CliError::Internal(e.to_string()))?;
    let output = r.output.clone().unwrap_or_else(|| PathBuf::from("theta.json"));
    let log = a.log.or_else(|| r.file.log.clone()).unwrap_or_else(|| output.with_extension("log.jsonl"));
    write_json(Some(&output), &result.theta_max)?;
    write_text(Some(&log), &result.log_json_lines())?;
    eprintln!(
        "learned {} weights: best mean coverage {:.3} after {} iteration(s){}",
        result.theta_max.len(),
        result.max,
        result.converged_at,
        if result.converged { "" } else { " (iteration cap)" }
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let r = resolve(a.common, 100)?;
    let names = if a.heuristics.is_empty() { r.file.heuristics.clone().unwrap_or_default() } else { a.heuristics };
    if names.is_empty() {
        return Err(CliError::Usage("compare needs at least one --heuristic".into()));
    }
    let hs = names.iter().map(|n| heuristic(n, r.settings.mode)).collect::<Result<Vec<_>, _>>()?;
    let trials = trials_arg(a.trials.or(r.file.trials))?;
    let mut reports: Vec<CompareReport> = Vec::new();
    for path in &a.programs {
        let (p, cfg) = load_program(path)?;
        let mut runs = Vec::new();
        for h in &hs {
            let summaries = run_trials(&p, &cfg, h, &r, trials)?.iter().map(AnyReport::summary).collect();
            runs.push((h.name(), summaries));
        }
        reports.push(compare(&path.display().to_string(), p.branch_count(), runs));
    }
    for rep in &reports {
        for h in &rep.heuristics {
            eprintln!(
                "{}: {:<24} mean {:>8.2}  max {:>4}  std {:>7.3}  bugs {}/{}  exclusive {}",
                rep.program,
                h.heuristic,
                h.mean,
                h.max,
                h.std,
                h.bugs_found,
                h.trials.len(),
                h.exclusive.len()
            );
        }
    }
    write_json(r.output.as_deref(), &reports)?;
    if let Some(csv) = a.csv.or_else(|| r.file.csv.clone()) {
        let rows: Vec<_> = reports
            .iter()
            .flat_map(|rep| {
                rep.heuristics.iter().flat_map(move |h| {
                    h.trials.iter().enumerate().map(move |(t, s)| (rep.program.clone(), h.heuristic.clone(), t, s))
                })
            })
            .collect();
        write_curves(&csv, &rows)?;
    }
    Ok(())
}

fn cmd_report_features(a: ReportArgs) -> Result<(), CliError> {
    let theta = load_theta(&a.theta.display().to_string()).map_err(CliError::Usage)?;
    let report = feature_report(&theta, a.top_k).map_err(|e| CliError::Usage(e.to_string()))?;
    if a.json {
        write_json(None, &report)
    } else {
        write_text(None, &report.render())
    }
}
