//! Seeded Monte Carlo checks of the closed forms and bound coverage.
//!
//! Replications run in parallel; each one draws from its own keyed stream
//! and results are reduced in replication order, so reports do not depend
//! on the thread count.

pub mod rng;
pub mod suite;

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{
    binomial_box_constraints, direct_hoeffding_band, inference_hoeffding_band, inference_lp_bounds,
    BandMethod, ConfidenceBand,
};
use crate::curves::{
    build_basis, error_curve, voter_counts, worst_case_all_voting, BasisMatrix,
    ErrorCountDistribution,
};
use crate::error::{Error, Result};
use crate::estimate::{inference_estimate, ValidationSample};
use crate::exactmath::{basis_error_rate, check_errors, check_voters};
use rng::{purpose, stream};

/// Default width of statistical envelopes, in standard errors.
pub const DEFAULT_SIGMAS: f64 = 3.0;

/// Replication count, seed and envelope width shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub replications: usize,
    pub seed: u64,
    pub sigmas: f64,
}

impl RunSettings {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            replications,
            seed,
            sigmas: DEFAULT_SIGMAS,
        }
    }

    fn check(&self, min_replications: usize) -> Result<()> {
        if self.replications < min_replications {
            return Err(Error::OutOfRange {
                name: "replications",
                value: self.replications as f64,
                range: if min_replications > 1 { "[2, inf)" } else { "[1, inf)" },
            });
        }
        if self.sigmas.is_nan() || self.sigmas < 0.0 {
            return Err(Error::OutOfRange {
                name: "sigmas",
                value: self.sigmas,
                range: "[0, inf)",
            });
        }
        Ok(())
    }
}

/// Ground-truth out-of-sample distribution of error counts.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub w: ErrorCountDistribution,
    pub seed: u64,
    cumulative: Vec<f64>,
}

impl World {
    pub fn new(w: ErrorCountDistribution, seed: u64) -> Self {
        let mut acc = 0.0;
        let cumulative = w
            .weights()
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self {
            w,
            seed,
            cumulative,
        }
    }

    pub fn m(&self) -> usize {
        self.w.m()
    }

    /// Draw one error count by inverting the CDF at a uniform variate.
    pub fn sample_example(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        match self.cumulative.iter().position(|&c| u < c) {
            Some(i) => i,
            // u landed in the rounding gap above the last partial sum
            None => self
                .w
                .weights()
                .iter()
                .rposition(|&x| x > 0.0)
                .unwrap_or(0),
        }
    }

    /// `n` error counts for replication `rep`.
    pub fn sample_counts(&self, n: usize, rep: u64) -> Vec<usize> {
        let mut rng = stream(self.seed, &[purpose::WORLD_SAMPLE, rep]);
        (0..n).map(|_| self.sample_example(&mut rng)).collect()
    }
}

/// Draw `v` of `m` voters without replacement when `i` of them are wrong;
/// returns whether the wrong ones hold the majority.
pub fn simulate_vote_with(m: usize, i: usize, v: usize, rng: &mut ChaCha8Rng) -> bool {
    let (mut remaining, mut bad, mut wrong) = (m, i, 0usize);
    for _ in 0..v {
        if rng.random_range(0..remaining) < bad {
            wrong += 1;
            bad -= 1;
        }
        remaining -= 1;
    }
    2 * wrong > v
}

pub fn simulate_vote(m: usize, i: usize, v: usize, seed: u64) -> Result<bool> {
    check_voters(m, v)?;
    check_errors(m, i)?;
    Ok(simulate_vote_with(
        m,
        i,
        v,
        &mut stream(seed, &[purpose::VOTE]),
    ))
}

/// Fraction of `reps` simulated votes that err.
pub fn simulate_vote_rate(m: usize, i: usize, v: usize, reps: usize, seed: u64) -> Result<f64> {
    check_voters(m, v)?;
    check_errors(m, i)?;
    RunSettings::new(reps, seed).check(1)?;
    let mut rng = stream(seed, &[purpose::VOTE, m as u64, i as u64, v as u64]);
    let errors = (0..reps)
        .filter(|_| simulate_vote_with(m, i, v, &mut rng))
        .count();
    Ok(errors as f64 / reps as f64)
}

/// One checked quantity in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub check: String,
    pub v: Option<usize>,
    pub observed: f64,
    pub expected: f64,
    /// Allowed slack around `expected`, in the check's own units.
    pub envelope: f64,
    pub passed: bool,
}

impl ReportRow {
    /// Passes when `|observed - expected| <= envelope`.
    pub fn two_sided(check: impl Into<String>, v: Option<usize>, observed: f64, expected: f64, envelope: f64) -> Self {
        Self {
            check: check.into(),
            v,
            observed,
            expected,
            envelope,
            passed: (observed - expected).abs() <= envelope,
        }
    }

    /// Passes when `observed >= expected - envelope`.
    pub fn at_least(check: impl Into<String>, v: Option<usize>, observed: f64, expected: f64, envelope: f64) -> Self {
        Self {
            check: check.into(),
            v,
            observed,
            expected,
            envelope,
            passed: observed >= expected - envelope,
        }
    }

    /// Passes when `observed <= expected + envelope`.
    pub fn at_most(check: impl Into<String>, v: Option<usize>, observed: f64, expected: f64, envelope: f64) -> Self {
        Self {
            check: check.into(),
            v,
            observed,
            expected,
            envelope,
            passed: observed <= expected + envelope,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub name: String,
    pub seed: u64,
    pub replications: usize,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: &str = "report,seed,replications,check,v,observed,expected,envelope,passed";

impl SimulationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.observed - r.expected).abs())
            .fold(0.0, f64::max)
    }

    /// Rows in [`REPORT_HEADER`] order, without the header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let v = r.v.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.name,
                self.seed,
                self.replications,
                r.check,
                v,
                r.observed,
                r.expected,
                r.envelope,
                r.passed
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_HEADER}\n{}", self.csv_rows())
    }

    pub fn summary(&self) -> String {
        let failed = self.failures().count();
        format!(
            "{}: {} ({} checks, {} failed, seed {}, {} replications, max |dev| {:.3e})",
            self.name,
            if failed == 0 { "PASS" } else { "FAIL" },
            self.rows.len(),
            failed,
            self.seed,
            self.replications,
            self.max_abs_deviation()
        )
    }
}

fn bernoulli_sigma(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Simulates all-voting on the two-point worst-case world and compares the
/// error rate with `2p(1 - 1/(m+1))`.
pub fn verify_theorem1(m: usize, p: f64, settings: &RunSettings) -> Result<SimulationReport> {
    settings.check(1)?;
    let worst = worst_case_all_voting(m, p)?;
    let world = World::new(worst.witness.clone(), settings.seed);
    let errors: usize = (0..settings.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(settings.seed, &[purpose::REPLICATION, rep as u64]);
            let i = world.sample_example(&mut rng);
            simulate_vote_with(m, i, m, &mut rng) as usize
        })
        .sum();
    let observed = errors as f64 / settings.replications as f64;
    let sigma = bernoulli_sigma(worst.rate, settings.replications);
    Ok(SimulationReport {
        name: format!("theorem1(m={m},p={p})"),
        seed: settings.seed,
        replications: settings.replications,
        rows: vec![
            ReportRow::two_sided(
                "all-vote-error",
                Some(m),
                observed,
                worst.rate,
                settings.sigmas * sigma,
            ),
            ReportRow::two_sided(
                "witness-mean-error",
                None,
                worst.witness.mean_error_rate(),
                p,
                1e-12,
            ),
        ],
    })
}

/// Direct estimate `k_v` for every odd `v` from simulated random voters.
fn simulated_direct_errors(m: usize, counts: &[usize], rng: &mut ChaCha8Rng) -> Vec<u64> {
    voter_counts(m)
        .map(|v| {
            counts
                .iter()
                .filter(|&&i| simulate_vote_with(m, i, v, rng))
                .count() as u64
        })
        .collect()
}

struct RepBands {
    bands: Vec<ConfidenceBand>,
}

fn bands_for_rep(
    world: &World,
    basis: &BasisMatrix,
    n: usize,
    delta: f64,
    methods: &[BandMethod],
    rep: u64,
) -> Result<RepBands> {
    let m = world.m();
    let counts = world.sample_counts(n, rep);
    let mut bands = Vec::with_capacity(methods.len());
    for &method in methods {
        let band = match method {
            BandMethod::DirectHoeffding => {
                let mut rng = stream(world.seed, &[purpose::VOTE, rep]);
                let k = simulated_direct_errors(m, &counts, &mut rng);
                direct_hoeffding_band(&k, n as u64, m, delta)?
            }
            BandMethod::InferenceHoeffding => {
                let sample = ValidationSample::from_counts(m, counts.clone())?;
                let curve = inference_estimate(&sample, basis)?;
                inference_hoeffding_band(&curve, n as u64, delta)?
            }
            BandMethod::InferenceBoxLp => {
                let sample = ValidationSample::from_counts(m, counts.clone())?;
                let boxes = binomial_box_constraints(&sample.empirical(), delta)?;
                inference_lp_bounds(&boxes, basis)?
            }
        };
        bands.push(band);
    }
    Ok(RepBands { bands })
}

fn sample_variance(xs: &[f64]) -> (f64, f64, f64) {
    // mean, variance (1/R), standard error of the variance estimate
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    (mean, m2, ((m4 - m2 * m2).max(0.0) / r).sqrt())
}

/// Draws `n`-example validation sets from `world`, builds each band and
/// records how often it covers the true curve at every `v` at once.
/// Also reports the replication variance of each Hoeffding band's centres.
pub fn coverage_experiment(
    world: &World,
    n: usize,
    delta: f64,
    methods: &[BandMethod],
    settings: &RunSettings,
) -> Result<SimulationReport> {
    settings.check(2)?;
    let m = world.m();
    let basis = build_basis(m)?;
    let truth = error_curve(&world.w, &basis)?;
    let truth = truth.values();
    let world = World::new(world.w.clone(), settings.seed ^ world.seed);
    let reps: Vec<RepBands> = (0..settings.replications)
        .into_par_iter()
        .map(|rep| bands_for_rep(&world, &basis, n, delta, methods, rep as u64))
        .collect::<Result<_>>()?;

    let r = settings.replications;
    let mut rows = Vec::new();
    for (k, &method) in methods.iter().enumerate() {
        let covered = reps.iter().filter(|b| b.bands[k].covers(truth)).count();
        let freq = covered as f64 / r as f64;
        rows.push(ReportRow::at_least(
            format!("coverage:{method}"),
            None,
            freq,
            1.0 - delta,
            settings.sigmas * bernoulli_sigma(1.0 - delta, r),
        ));
        for v in voter_counts(m) {
            let centers: Vec<f64> = reps.iter().map(|b| b.bands[k].entry(v).estimate).collect();
            let (mean, var, _) = sample_variance(&centers);
            let sd_mean = (var / r as f64).sqrt();
            rows.push(ReportRow::two_sided(
                format!("center-mean:{method}"),
                Some(v),
                mean,
                truth[(v - 1) / 2],
                settings.sigmas * sd_mean + 1e-12,
            ));
            if method != BandMethod::InferenceBoxLp {
                rows.push(ReportRow::at_least(
                    format!("center-variance:{method}"),
                    Some(v),
                    var,
                    0.0,
                    0.0,
                ));
            }
        }
    }
    Ok(SimulationReport {
        name: format!("coverage(m={m},n={n},delta={delta})"),
        seed: settings.seed,
        replications: r,
        rows,
    })
}

/// Replication variance of direct versus inference estimates on the same
/// validation sets. Checks unbiasedness of both and that the inference
/// variance does not exceed the direct one beyond the envelope.
pub fn variance_experiment(world: &World, n: usize, settings: &RunSettings) -> Result<SimulationReport> {
    settings.check(2)?;
    let m = world.m();
    let basis = build_basis(m)?;
    let truth = error_curve(&world.w, &basis)?;
    let world = World::new(world.w.clone(), settings.seed ^ world.seed);
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..settings.replications)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<f64>, Vec<f64>)> {
            let counts = world.sample_counts(n, rep as u64);
            let mut rng = stream(world.seed, &[purpose::VOTE, rep as u64]);
            let direct = simulated_direct_errors(m, &counts, &mut rng)
                .into_iter()
                .map(|k| k as f64 / n as f64)
                .collect();
            let sample = ValidationSample::from_counts(m, counts)?;
            let inference = inference_estimate(&sample, &basis)?.values().to_vec();
            Ok((direct, inference))
        })
        .collect::<Result<_>>()?;

    let r = settings.replications;
    let s = settings.sigmas;
    let mut rows = Vec::new();
    for (k, v) in voter_counts(m).enumerate() {
        let d: Vec<f64> = per_rep.iter().map(|(x, _)| x[k]).collect();
        let f: Vec<f64> = per_rep.iter().map(|(_, x)| x[k]).collect();
        let (dm, dv, dse) = sample_variance(&d);
        let (fm, fv, fse) = sample_variance(&f);
        let cmp = crate::estimate::variance_comparison(&world.w, &basis, v)?;
        let target = truth.value(v);
        rows.push(ReportRow::two_sided("mean-direct", Some(v), dm, target, s * (dv / r as f64).sqrt() + 1e-12));
        rows.push(ReportRow::two_sided("mean-inference", Some(v), fm, target, s * (fv / r as f64).sqrt() + 1e-12));
        rows.push(ReportRow::two_sided("variance-direct", Some(v), dv, cmp.direct / n as f64, s * dse + 1e-15));
        rows.push(ReportRow::two_sided("variance-inference", Some(v), fv, cmp.inference / n as f64, s * fse + 1e-15));
        rows.push(ReportRow::at_most(
            "variance-order",
            Some(v),
            fv - dv,
            0.0,
            s * (dse * dse + fse * fse).sqrt(),
        ));
    }
    Ok(SimulationReport {
        name: format!("variance(m={m},n={n})"),
        seed: settings.seed,
        replications: r,
        rows,
    })
}

/// Compares simulated vote error rates with `r(m, i, v)` on each cell.
pub fn vote_agreement(cells: &[(usize, usize, usize)], settings: &RunSettings) -> Result<SimulationReport> {
    settings.check(1)?;
    let rows = cells
        .par_iter()
        .map(|&(m, i, v)| -> Result<ReportRow> {
            let exact = basis_error_rate(m, i, v)?;
            let seed = settings.seed;
            let observed = simulate_vote_rate(m, i, v, settings.replications, seed)?;
            Ok(ReportRow::two_sided(
                format!("vote(m={m},i={i})"),
                Some(v),
                observed,
                exact,
                settings.sigmas * bernoulli_sigma(exact, settings.replications),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport {
        name: "montecarlo".into(),
        seed: settings.seed,
        replications: settings.replications,
        rows,
    })
}
