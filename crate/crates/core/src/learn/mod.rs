//! Find/Check/Refine optimization of the parametric heuristic's weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concolic::{run_concolic, ConcolicConfig, InitialInput, DEFAULT_STEP_LIMIT};
use crate::egt::{run_egt, EgtBudget, EgtConfig};
use crate::features::Mode;
use crate::heuristics::{ConcolicHeuristic, EgtHeuristic, HeuristicError, ParamVector};
use crate::lang::{Cfg, Program};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineMode {
    Concolic,
    Egt,
}

impl EngineMode {
    pub fn features(self) -> Mode {
        match self {
            EngineMode::Concolic => Mode::Branch,
            EngineMode::Egt => Mode::State,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("invalid learner configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleSpaces {
    pub intervals: Vec<(f64, f64)>,
}

impl SampleSpaces {
    pub fn new(k: usize) -> Self {
        SampleSpaces { intervals: vec![(-1.0, 1.0); k] }
    }

    pub fn is_valid(&self) -> bool {
        self.intervals.iter().all(|&(lo, hi)| -1.0 <= lo && lo <= hi && hi <= 1.0)
    }
}

pub fn sample_params(spaces: &SampleSpaces, n: usize, rng: &mut impl Rng) -> Vec<ParamVector> {
    (0..n)
        .map(|_| {
            ParamVector(spaces.intervals.iter().map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) }).collect())
        })
        .collect()
}

/// Narrows each interval toward the sign the two best parameters agree on.
pub fn refine(spaces: &SampleSpaces, t1: &ParamVector, t2: &ParamVector) -> SampleSpaces {
    let intervals = spaces
        .intervals
        .iter()
        .zip(t1.0.iter().zip(&t2.0))
        .map(|(&iv, (&a, &b))| {
            if a > 0.0 && b > 0.0 {
                (a.min(b), 1.0)
            } else if a < 0.0 && b < 0.0 {
                (-1.0, a.max(b))
            } else {
                iv
            }
        })
        .collect();
    SampleSpaces { intervals }
}

/// Mixes `parts` into `master` (splitmix64 finalizer per step).
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// How one engine run is set up when scoring a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub mode: EngineMode,
    /// Executions (concolic) or selection iterations (egt).
    pub budget: u64,
    pub solver: SolverConfig,
    pub step_limit: u64,
    /// Start concolic runs from a seeded random input instead of all zeros.
    pub random_initial: bool,
}

impl EvalSettings {
    pub fn concolic_config(&self, seed: u64) -> ConcolicConfig {
        ConcolicConfig {
            budget: self.budget as usize,
            step_limit: self.step_limit,
            solver: self.solver.clone(),
            seed,
            initial: if self.random_initial { InitialInput::Random } else { InitialInput::Zero },
        }
    }

    pub fn egt_config(&self, seed: u64) -> EgtConfig {
        EgtConfig { budget: EgtBudget::Iterations(self.budget), step_limit: self.step_limit, solver: self.solver.clone(), seed }
    }
}

/// Branch coverage of one run of the parametric heuristic with `theta`.
pub fn evaluate(p: &Program, cfg: &Cfg, theta: &ParamVector, settings: &EvalSettings, seed: u64) -> Result<usize, LearnError> {
    theta.validate(settings.mode.features())?;
    Ok(match settings.mode {
        EngineMode::Concolic => {
            run_concolic(p, cfg, &ConcolicHeuristic::Parametric(theta.clone()), &settings.concolic_config(seed)).0.coverage()
        }
        EngineMode::Egt => run_egt(p, cfg, &EgtHeuristic::Parametric(theta.clone()), &settings.egt_config(seed)).coverage(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Samples per Find phase.
    pub n: usize,
    /// Shortlist size.
    pub k: usize,
    /// Runs averaged per shortlisted parameter.
    pub trials: usize,
    pub mode: EngineMode,
    pub budget: u64,
    pub seed: u64,
    pub parallelism: usize,
    pub max_iterations: usize,
    pub solver: SolverConfig,
    pub step_limit: u64,
    pub random_initial: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            n: 30,
            k: 4,
            trials: 3,
            mode: EngineMode::Concolic,
            budget: 300,
            seed: 0,
            parallelism: 1,
            max_iterations: 20,
            solver: SolverConfig::default(),
            step_limit: DEFAULT_STEP_LIMIT,
            random_initial: true,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Config(m.into()));
        if self.k < 2 || self.n < self.k {
            return bad("need n >= K >= 2");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.max_iterations == 0 {
            return bad("max-iterations must be at least 1");
        }
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        Ok(())
    }

    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            mode: self.mode,
            budget: self.budget,
            solver: self.solver.clone(),
            step_limit: self.step_limit,
            random_initial: self.random_initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Index of the parameter in its Find sample.
    pub index: usize,
    pub theta: ParamVector,
    /// Single-run coverage (Find) or mean coverage (Check).
    pub coverage: f64,
    pub trials: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub spaces: SampleSpaces,
    pub find: Vec<usize>,
    pub shortlist: Vec<usize>,
    pub check: Vec<EvalRecord>,
    /// Sample indices of the two best checked parameters.
    pub top2: (usize, usize),
    pub best: f64,
    /// `max` after this iteration's convergence test.
    pub max: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub theta_max: ParamVector,
    pub max: f64,
    pub log: Vec<IterationLog>,
    /// Iteration at which the loop stopped (1-based).
    pub converged_at: usize,
    /// `false` when the iteration cap ended the loop.
    pub converged: bool,
}

impl OptResult {
    pub fn log_json_lines(&self) -> String {
        self.log.iter().map(|l| serde_json::to_string(l).expect("log serializes") + "\n").collect()
    }
}

const FIND: u64 = 1;
const CHECK: u64 = 2;
const SAMPLE: u64 = 3;

/// Indices of the `k` largest values, ties to the lower index.
fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut ix: Vec<usize> = (0..values.len()).collect();
    ix.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    ix.truncate(k);
    ix
}

pub fn optimize(p: &Program, cfg: &Cfg, config: &LearnConfig) -> Result<OptResult, LearnError> {
    config.validate()?;
    let settings = config.settings();
    let dim = settings.mode.features().len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| LearnError::Config(e.to_string()))?;

    let mut spaces = SampleSpaces::new(dim);
    let mut max = 0.0;
    let mut theta_max = ParamVector::zeros(dim);
    let mut log = Vec::new();
    for it in 1..=config.max_iterations {
        let round = it as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[round, SAMPLE]));
        let thetas = sample_params(&spaces, config.n, &mut rng);

        let find: Vec<usize> = pool.install(|| {
            thetas
                .par_iter()
                .enumerate()
                .map(|(i, t)| evaluate(p, cfg, t, &settings, derive_seed(config.seed, &[round, FIND, i as u64])))
                .collect::<Result<_, _>>()
        })?;
        let find_f: Vec<f64> = find.iter().map(|&b| b as f64).collect();
        let shortlist = top_indices(&find_f, config.k);

        let jobs: Vec<(usize, usize)> = shortlist.iter().flat_map(|&i| (0..config.trials).map(move |j| (i, j))).collect();
        let runs: Vec<usize> = pool.install(|| {
            jobs.par_iter()
                .map(|&(i, j)| evaluate(p, cfg, &thetas[i], &settings, derive_seed(config.seed, &[round, CHECK, i as u64, j as u64])))
                .collect::<Result<_, _>>()
        })?;
        let check: Vec<EvalRecord> = shortlist
            .iter()
            .zip(runs.chunks(config.trials))
            .map(|(&i, trials)| EvalRecord {
                index: i,
                theta: thetas[i].clone(),
                coverage: trials.iter().sum::<usize>() as f64 / trials.len() as f64,
                trials: trials.to_vec(),
            })
            .collect();

        // Shortlist order already puts lower indices first among equal Find scores; rank by
        // (mean desc, sample index asc).
        let mut order: Vec<usize> = (0..check.len()).collect();
        order.sort_by(|&a, &b| check[b].coverage.total_cmp(&check[a].coverage).then(check[a].index.cmp(&check[b].index)));
        let (t1, t2) = (&check[order[0]], &check[order[1]]);
        spaces = refine(&spaces, &t1.theta, &t2.theta);
        debug_assert!(spaces.is_valid());

        let best = t1.coverage;
        let converged = it > 1 && best <= max;
        if !converged {
            max = best;
            theta_max = t1.theta.clone();
        }
        log::info!("iteration {it}: best {best:.3}, max {max:.3}");
        log.push(IterationLog {
            iteration: it,
            spaces: spaces.clone(),
            find,
            shortlist,
            top2: (t1.index, t2.index),
            check,
            best,
            max,
            converged,
        });
        if converged {
            return Ok(OptResult { theta_max, max, log, converged_at: it, converged: true });
        }
    }
    Ok(OptResult { theta_max, max, log, converged_at: config.max_iterations, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refine_rules() {
        let s = SampleSpaces::new(3);
        let r = refine(&s, &ParamVector(vec![0.3, -0.7, -0.1]), &ParamVector(vec![0.5, -0.2, 0.4]));
        assert_eq!(r.intervals, vec![(0.3, 1.0), (-1.0, -0.2), (-1.0, 1.0)]);
        let z = refine(&s, &ParamVector(vec![0.0, 0.0, 0.2]), &ParamVector(vec![0.5, -0.5, 0.0]));
        assert_eq!(z.intervals, s.intervals);
    }

    #[test]
    fn top_indices_break_ties_low() {
        assert_eq!(top_indices(&[1.0, 3.0, 3.0, 2.0, 3.0], 2), vec![1, 2]);
    }

    #[test]
    fn derived_seeds_differ_by_part() {
        let a = derive_seed(7, &[1, 1, 0]);
        assert_ne!(a, derive_seed(7, &[1, 1, 1]));
        assert_ne!(a, derive_seed(8, &[1, 1, 0]));
        assert_eq!(a, derive_seed(7, &[1, 1, 0]));
    }
}
