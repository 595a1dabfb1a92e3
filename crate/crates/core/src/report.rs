//! Aggregation over repeated runs and learned-weight listings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::concolic::RunReport;
use crate::egt::EgtReport;
use crate::features::{Mode, BRANCH_CATALOG, STATE_CATALOG};
use crate::heuristics::{HeuristicError, ParamVector};
use crate::lang::BranchId;

/// One engine run reduced to what comparisons need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub covered: Vec<BranchId>,
    /// `(execution or time, cumulative coverage)`.
    pub curve: Vec<(f64, usize)>,
    pub bug_found: bool,
}

impl TrialSummary {
    pub fn from_concolic(r: &RunReport) -> Self {
        TrialSummary {
            seed: r.seed,
            covered: r.covered.clone(),
            curve: r.coverage_curve.iter().enumerate().map(|(i, &c)| ((i + 1) as f64, c)).collect(),
            bug_found: !r.bugs.is_empty(),
        }
    }

    pub fn from_egt(r: &EgtReport) -> Self {
        TrialSummary {
            seed: r.seed,
            covered: r.covered.clone(),
            curve: r.coverage_curve.iter().map(|c| (c.t, c.covered)).collect(),
            bug_found: !r.faults.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicStats {
    pub heuristic: String,
    pub mean: f64,
    pub max: usize,
    pub min: usize,
    /// Population standard deviation.
    pub std: f64,
    pub bugs_found: usize,
    pub trials: Vec<TrialSummary>,
    /// Arms covered by this heuristic's union and by no other heuristic.
    pub exclusive: Vec<BranchId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub program: String,
    pub total_branches: usize,
    pub heuristics: Vec<HeuristicStats>,
}

/// `(mean, population std)`; `(0, 0)` for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn compare(program: &str, total_branches: usize, runs: Vec<(String, Vec<TrialSummary>)>) -> CompareReport {
    let unions: Vec<BTreeSet<BranchId>> =
        runs.iter().map(|(_, ts)| ts.iter().flat_map(|t| t.covered.iter().copied()).collect()).collect();
    let mut owners: BTreeMap<BranchId, usize> = BTreeMap::new();
    for u in &unions {
        for b in u {
            *owners.entry(*b).or_default() += 1;
        }
    }
    let heuristics = runs
        .into_iter()
        .zip(&unions)
        .map(|((heuristic, trials), union)| {
            let counts: Vec<f64> = trials.iter().map(|t| t.covered.len() as f64).collect();
            let (mean, std) = mean_std(&counts);
            HeuristicStats {
                heuristic,
                mean,
                max: trials.iter().map(|t| t.covered.len()).max().unwrap_or(0),
                min: trials.iter().map(|t| t.covered.len()).min().unwrap_or(0),
                std,
                bugs_found: trials.iter().filter(|t| t.bug_found).count(),
                exclusive: union.iter().copied().filter(|b| owners[b] == 1).collect(),
                trials,
            }
        })
        .collect();
    CompareReport { program: program.to_string(), total_branches, heuristics }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    /// 1-based feature number.
    pub index: usize,
    pub weight: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub mode: Mode,
    pub positive: Vec<RankedFeature>,
    pub negative: Vec<RankedFeature>,
}

/// Top-`k` most positive and most negative weights; zero weights are never listed.
pub fn feature_report(theta: &ParamVector, k: usize) -> Result<FeatureReport, HeuristicError> {
    let mode = match theta.len() {
        n if n == Mode::Branch.len() => Mode::Branch,
        n if n == Mode::State.len() => Mode::State,
        n => return Err(HeuristicError::LengthMismatch { expected: Mode::Branch.len(), found: n }),
    };
    let catalog: &[&str] = match mode {
        Mode::Branch => &BRANCH_CATALOG,
        Mode::State => &STATE_CATALOG,
    };
    let ranked = |sign: f64| {
        let mut v: Vec<RankedFeature> = theta
            .0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w * sign > 0.0)
            .map(|(i, &w)| RankedFeature { index: i + 1, weight: w, description: catalog[i].to_string() })
            .collect();
        v.sort_by(|a, b| (b.weight * sign).total_cmp(&(a.weight * sign)).then(a.index.cmp(&b.index)));
        v.truncate(k);
        v
    };
    Ok(FeatureReport { mode, positive: ranked(1.0), negative: ranked(-1.0) })
}

impl FeatureReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (title, rows) in [("Top positive features", &self.positive), ("Top negative features", &self.negative)] {
            out.push_str(title);
            out.push('\n');
            if rows.is_empty() {
                out.push_str("  (none)\n");
            }
            for r in rows {
                out.push_str(&format!("  #{:<3} {:>8.4}  {}\n", r.index, r.weight, r.description));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(n: u32) -> TrialSummary {
        TrialSummary { seed: 0, covered: (0..n).map(BranchId).collect(), curve: vec![], bug_found: false }
    }

    #[test]
    fn single_trial_stats() {
        let r = compare("p", 10, vec![("dfs".into(), vec![trial(4)])]);
        let h = &r.heuristics[0];
        assert_eq!((h.mean, h.max, h.std), (4.0, 4, 0.0));
    }

    #[test]
    fn identical_sets_have_no_exclusives() {
        let r = compare("p", 10, vec![("a".into(), vec![trial(3)]), ("b".into(), vec![trial(3)])]);
        assert!(r.heuristics.iter().all(|h| h.exclusive.is_empty()));
        let r = compare("p", 10, vec![("a".into(), vec![trial(5)]), ("b".into(), vec![trial(3)])]);
        assert_eq!(r.heuristics[0].exclusive, vec![BranchId(3), BranchId(4)]);
    }

    #[test]
    fn one_hot_weights() {
        let mut t = ParamVector::zeros(40);
        t.0[2] = 1.0;
        let r = feature_report(&t, 5).unwrap();
        assert_eq!(r.positive.len(), 1);
        assert_eq!(r.positive[0].index, 3);
        assert!(r.negative.is_empty());
        let mut t = ParamVector::zeros(26);
        t.0[4] = -1.0;
        let r = feature_report(&t, 5).unwrap();
        assert_eq!(r.negative[0].index, 5);
        assert_eq!(r.mode, Mode::State);
        assert!(feature_report(&ParamVector::zeros(7), 3).is_err());
    }
}
