//! Voter-count selection from validation data.
//!
//! The direct estimator votes with freshly drawn random voters on every
//! validation example; the inference estimator only needs the number of
//! classifiers in error per example and mixes basis rows.

use rand::seq::index;
use rayon::prelude::*;

use crate::curves::{
    curve_from_weights, voter_counts, BasisMatrix, CurveSource, ErrorCountDistribution, ErrorCurve,
};
use crate::error::{Error, Result};
use crate::exactmath::{check_voters, compensated_sum};
use crate::sim::rng::{purpose, stream};

/// Binary error indicators: `n` rows (examples) by `m` columns (classifiers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMatrix {
    m: usize,
    n: usize,
    data: Vec<bool>,
}

impl ErrorMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, j: usize) -> &[bool] {
        &self.data[j * self.m..(j + 1) * self.m]
    }
}

/// Per-example counts of classifiers in error, optionally with the matrix
/// they were summed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationSample {
    m: usize,
    counts: Vec<usize>,
    matrix: Option<ErrorMatrix>,
}

impl ValidationSample {
    /// Counts-only sample; usable by the inference estimator alone.
    pub fn from_counts(m: usize, counts: Vec<usize>) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if counts.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&i) = counts.iter().find(|&&i| i > m) {
            return Err(Error::InvalidErrorCount { m, i });
        }
        Ok(Self {
            m,
            counts,
            matrix: None,
        })
    }

    /// Expands `(error_count, frequency)` pairs into per-example counts.
    pub fn from_histogram(m: usize, histogram: &[(usize, u64)]) -> Result<Self> {
        let mut counts = Vec::new();
        for &(i, freq) in histogram {
            counts.extend(std::iter::repeat_n(i, freq as usize));
        }
        Self::from_counts(m, counts)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn matrix(&self) -> Option<&ErrorMatrix> {
        self.matrix.as_ref()
    }

    pub fn empirical(&self) -> EmpiricalErrorCounts {
        let mut k = vec![0u64; self.m + 1];
        for &i in &self.counts {
            k[i] += 1;
        }
        EmpiricalErrorCounts {
            n: self.counts.len() as u64,
            counts: k,
        }
    }
}

/// Rows of 0/1 error indicators -> sample with row sums as counts.
pub fn ingest_error_matrix(rows: &[Vec<u8>]) -> Result<ValidationSample> {
    let first = rows.first().ok_or(Error::EmptySample)?;
    let m = first.len();
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut data = Vec::with_capacity(rows.len() * m);
    let mut counts = Vec::with_capacity(rows.len());
    for (row_idx, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::MalformedMatrix {
                row: row_idx,
                msg: format!("expected {m} entries, found {}", row.len()),
            });
        }
        let mut errs = 0;
        for (col, &x) in row.iter().enumerate() {
            match x {
                0 => data.push(false),
                1 => {
                    data.push(true);
                    errs += 1;
                }
                other => {
                    return Err(Error::MalformedMatrix {
                        row: row_idx,
                        msg: format!("entry {col} is {other}, expected 0 or 1"),
                    })
                }
            }
        }
        counts.push(errs);
    }
    Ok(ValidationSample {
        m,
        counts,
        matrix: Some(ErrorMatrix {
            m,
            n: rows.len(),
            data,
        }),
    })
}

/// Occurrence counts `k_i` of each error count `i` over `n` examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalErrorCounts {
    n: u64,
    counts: Vec<u64>,
}

impl EmpiricalErrorCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::EmptyEnsemble);
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self { n, counts })
    }

    pub fn m(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `k_i / n`.
    pub fn w_hat(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.counts.iter().map(|&k| k as f64 / n).collect()
    }

    pub fn distribution(&self) -> Result<ErrorCountDistribution> {
        ErrorCountDistribution::new(self.w_hat())
    }
}

/// Outcome of voting with `v` random voters on each validation example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectEstimate {
    pub v: usize,
    /// Errors `k_v` over the sample.
    pub errors: u64,
    /// Per-example voting error indicators.
    pub outcomes: Vec<bool>,
}

impl DirectEstimate {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.outcomes.len() as f64
    }
}

/// Majority vote of `v` classifiers drawn without replacement per example.
/// The draw for example `j` uses the stream keyed by `(v, j)`.
pub fn direct_estimate(sample: &ValidationSample, v: usize, seed: u64) -> Result<DirectEstimate> {
    let matrix = sample.matrix().ok_or(Error::MissingMatrix)?;
    check_voters(sample.m(), v)?;
    let outcomes: Vec<bool> = (0..matrix.n())
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, &[purpose::DIRECT_VOTERS, v as u64, j as u64]);
            let row = matrix.row(j);
            let wrong = index::sample(&mut rng, matrix.m(), v)
                .iter()
                .filter(|&c| row[c])
                .count();
            2 * wrong > v
        })
        .collect();
    let errors = outcomes.iter().filter(|&&e| e).count() as u64;
    Ok(DirectEstimate {
        v,
        errors,
        outcomes,
    })
}

/// Direct estimates for every odd `v`, and the error counts `k_v`.
pub fn direct_curve(sample: &ValidationSample, seed: u64) -> Result<(ErrorCurve, Vec<u64>)> {
    let m = sample.m();
    let estimates = voter_counts(m)
        .map(|v| direct_estimate(sample, v, seed))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<u64> = estimates.iter().map(|e| e.errors).collect();
    let curve = ErrorCurve::from_values(
        m,
        estimates.iter().map(DirectEstimate::rate).collect(),
        CurveSource::ValidationDirect,
    )?;
    Ok((curve, errors))
}

fn check_basis(sample_m: usize, basis: &BasisMatrix) -> Result<()> {
    if sample_m != basis.m() {
        return Err(Error::BasisMismatch {
            sample: sample_m,
            basis: basis.m(),
        });
    }
    Ok(())
}

/// `v -> sum_i w_hat_i r(m, i, v)`.
pub fn inference_estimate(sample: &ValidationSample, basis: &BasisMatrix) -> Result<ErrorCurve> {
    inference_from_counts(&sample.empirical(), basis)
}

pub fn inference_from_counts(
    counts: &EmpiricalErrorCounts,
    basis: &BasisMatrix,
) -> Result<ErrorCurve> {
    check_basis(counts.m(), basis)?;
    curve_from_weights(&counts.w_hat(), basis, CurveSource::ValidationInference)
}

/// `v -> (1/n) sum_j r(m, i_j, v)`, the per-example form of the same estimate.
pub fn inference_estimate_per_example(
    sample: &ValidationSample,
    basis: &BasisMatrix,
) -> Result<ErrorCurve> {
    check_basis(sample.m(), basis)?;
    let n = sample.n() as f64;
    let values = basis
        .voter_counts()
        .map(|v| compensated_sum(sample.counts().iter().map(|&i| basis.get(i, v))) / n)
        .collect();
    ErrorCurve::from_values(basis.m(), values, CurveSource::ValidationInference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorMethod {
    Direct,
    Inference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub v: usize,
    pub curve: ErrorCurve,
    /// `k_v` per odd `v`, for the direct method.
    pub direct_errors: Option<Vec<u64>>,
}

/// Pick the odd `v` with the lowest estimated error (smallest `v` on ties).
pub fn select_voters(
    sample: &ValidationSample,
    basis: &BasisMatrix,
    method: EstimatorMethod,
    seed: u64,
) -> Result<Selection> {
    check_basis(sample.m(), basis)?;
    let (curve, direct_errors) = match method {
        EstimatorMethod::Direct => {
            let (c, k) = direct_curve(sample, seed)?;
            (c, Some(k))
        }
        EstimatorMethod::Inference => (inference_estimate(sample, basis)?, None),
    };
    Ok(Selection {
        v: curve.argmin_v(),
        curve,
        direct_errors,
    })
}

/// Single-example variances of the two estimators at one `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComparison {
    /// Mean error `p = sum_i w_i r_i`.
    pub mean: f64,
    /// `p - p^2`.
    pub direct: f64,
    /// `sum_i w_i r_i^2 - p^2`.
    pub inference: f64,
}

pub fn variance_comparison(
    w: &ErrorCountDistribution,
    basis: &BasisMatrix,
    v: usize,
) -> Result<VarianceComparison> {
    check_basis(w.m(), basis)?;
    check_voters(basis.m(), v)?;
    let r = basis.column(v);
    let p = compensated_sum(w.weights().iter().zip(&r).map(|(a, b)| a * b));
    let second = compensated_sum(w.weights().iter().zip(&r).map(|(a, b)| a * b * b));
    Ok(VarianceComparison {
        mean: p,
        direct: p - p * p,
        inference: second - p * p,
    })
}
