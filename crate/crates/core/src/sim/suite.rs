//! Named groups of simulation checks, as run by `vote-count verify`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::rng::{purpose, stream};
use super::{
    coverage_experiment, variance_experiment, verify_theorem1, vote_agreement, ReportRow,
    RunSettings, SimulationReport, World, DEFAULT_SIGMAS,
};
use crate::bounds::BandMethod;
use crate::curves::{build_basis, ErrorCountDistribution};
use crate::error::{Error, Result};
use crate::estimate::variance_comparison;
use crate::exactmath::ln_binom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Theorem1,
    Coverage,
    Variance,
    MonteCarlo,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["theorem1", "coverage", "variance", "montecarlo", "all"];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Coverage => "coverage",
            Suite::Variance => "variance",
            Suite::MonteCarlo => "montecarlo",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "theorem1" => Suite::Theorem1,
            "coverage" => Suite::Coverage,
            "variance" => Suite::Variance,
            "montecarlo" => Suite::MonteCarlo,
            "all" => Suite::All,
            _ => {
                return Err(Error::Verification(format!(
                    "unknown suite {s:?}, expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

/// Knobs for [`run_suite`]. `None` fields fall back to per-suite defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub replications: Option<usize>,
    /// Ensemble size for the coverage and variance suites.
    pub m: usize,
    pub n: Option<usize>,
    pub delta: f64,
    pub sigmas: f64,
    /// Number of random cells in the Monte Carlo grid.
    pub cells: usize,
    /// Number of random `(w, v)` draws for the analytic variance check.
    pub analytic_cases: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: None,
            m: 11,
            n: None,
            delta: 0.1,
            sigmas: DEFAULT_SIGMAS,
            cells: 200,
            analytic_cases: 1000,
        }
    }
}

impl SuiteConfig {
    fn settings(&self, default_reps: usize) -> RunSettings {
        RunSettings {
            replications: self.replications.unwrap_or(default_reps),
            seed: self.seed,
            sigmas: self.sigmas,
        }
    }
}

/// Fixed three-component binomial mixture used as the ground truth of the
/// coverage and variance suites: an easy bulk, a hard band near one half
/// and a small mass where most classifiers are wrong.
pub fn reference_world(m: usize, seed: u64) -> Result<World> {
    let mix: [(f64, f64); 3] = [(0.5, 0.15), (0.35, 0.45), (0.15, 0.7)];
    let w = (0..=m)
        .map(|i| {
            let lc = ln_binom(m as u64, i as i64);
            mix.iter()
                .map(|(weight, q)| {
                    weight * (lc + i as f64 * q.ln() + (m - i) as f64 * (1.0 - q).ln()).exp()
                })
                .sum()
        })
        .collect();
    Ok(World::new(ErrorCountDistribution::new(w)?, seed))
}

/// Random distribution on `{0..m}`: exponential weights on a random subset
/// of indices so that sparse and dense cases both occur.
pub fn random_distribution(m: usize, rng: &mut impl Rng) -> Result<ErrorCountDistribution> {
    let keep: f64 = rng.random_range(0.1..=1.0);
    let mut w: Vec<f64> = (0..=m)
        .map(|_| {
            if rng.random::<f64>() < keep {
                -(1.0 - rng.random::<f64>()).ln()
            } else {
                0.0
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..=m)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    ErrorCountDistribution::new(w)
}

/// Counts `(w, v)` draws with `m <= max_m` where the inference estimator's
/// per-example variance exceeds the direct one's.
pub fn analytic_variance_check(cases: usize, max_m: usize, seed: u64) -> Result<ReportRow> {
    let mut rng = stream(seed, &[purpose::WORLD_SAMPLE, u64::MAX]);
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let m = rng.random_range(1..=max_m);
        let basis = build_basis(m)?;
        let w = random_distribution(m, &mut rng)?;
        let v = 2 * rng.random_range(0..m.div_ceil(2)) + 1;
        let cmp = variance_comparison(&w, &basis, v)?;
        let excess = cmp.inference - cmp.direct;
        worst = worst.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
    }
    let mut row = ReportRow::at_most("analytic-variance-violations", None, violations as f64, 0.0, 0.0);
    if violations > 0 {
        row.check = format!("{} (worst excess {worst:e})", row.check);
    }
    Ok(row)
}

/// Random `(m, i, v)` cells with `m <= max_m`.
pub fn random_cells(count: usize, max_m: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    let mut rng = stream(seed, &[purpose::VOTE, u64::MAX]);
    (0..count)
        .map(|_| {
            let m = rng.random_range(1..=max_m);
            let i = rng.random_range(0..=m);
            let v = 2 * rng.random_range(0..m.div_ceil(2)) + 1;
            (m, i, v)
        })
        .collect()
}

pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<Vec<SimulationReport>> {
    let mut out = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;

    if wants(Suite::Theorem1) {
        let s = config.settings(100_000);
        for (m, p) in [(3, 0.1), (101, 0.3), (11, 0.0)] {
            out.push(verify_theorem1(m, p, &s)?);
        }
    }
    if wants(Suite::Coverage) {
        let s = config.settings(2_000);
        let world = reference_world(config.m, config.seed)?;
        out.push(coverage_experiment(
            &world,
            config.n.unwrap_or(500),
            config.delta,
            &BandMethod::ALL,
            &s,
        )?);
    }
    if wants(Suite::Variance) {
        let s = config.settings(10_000);
        let world = reference_world(config.m, config.seed)?;
        let mut report = variance_experiment(&world, config.n.unwrap_or(50), &s)?;
        report
            .rows
            .push(analytic_variance_check(config.analytic_cases, 25, config.seed)?);
        out.push(report);
    }
    if wants(Suite::MonteCarlo) {
        let s = config.settings(100_000);
        let cells = random_cells(config.cells, 101, config.seed);
        out.push(vote_agreement(&cells, &s)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().as_str(), name);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn reference_world_is_normalized() {
        let w = reference_world(11, 0).unwrap();
        let total: f64 = w.w.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.w.weights().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn random_cells_are_valid() {
        for (m, i, v) in random_cells(500, 30, 1) {
            assert!(i <= m && v <= m && v % 2 == 1);
        }
    }
}
