//! Error curves over odd voter counts.
//!
//! A curve for an error-count distribution `w` is the mixture
//! `v -> sum_i w_i r(m, i, v)` of the basis rows `r(m, i, .)`.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::exactmath::{self, Arithmetic};
use crate::error::{Error, Result};

/// Normalization tolerance on ingestion.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Relative tolerance under which two curve values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Probability that exactly `i` of `m` classifiers err, for `i = 0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCountDistribution {
    w: Vec<f64>,
}

impl ErrorCountDistribution {
    /// Validates each entry and rescales to sum to one when the sum is
    /// within [`NORMALIZATION_TOLERANCE`].
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::EmptyEnsemble);
        }
        for (index, &value) in w.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        let total = exactmath::compensated_sum(w.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        // leave sums that are one up to accumulated rounding untouched, so
        // written-out distributions read back bit-for-bit
        let w = if (total - 1.0).abs() <= w.len() as f64 * f64::EPSILON {
            w
        } else {
            w.into_iter().map(|x| x / total).collect()
        };
        Ok(Self { w })
    }

    /// All mass on `i` errors.
    pub fn point_mass(m: usize, i: usize) -> Result<Self> {
        exactmath::check_errors(m, i)?;
        if m == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let mut w = vec![0.0; m + 1];
        w[i] = 1.0;
        Ok(Self { w })
    }

    /// Uniform over `0..=m`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self {
            w: vec![1.0 / (m + 1) as f64; m + 1],
        })
    }

    pub fn m(&self) -> usize {
        self.w.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.w.len() != other.w.len() {
            return Err(Error::LengthMismatch {
                expected: self.w.len(),
                actual: other.w.len(),
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha,
                range: "[0, 1]",
            });
        }
        Self::new(
            self.w
                .iter()
                .zip(&other.w)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        )
    }

    /// Average individual classifier error rate `sum_i w_i i / m`.
    pub fn mean_error_rate(&self) -> f64 {
        let m = self.m() as f64;
        exactmath::compensated_sum(self.w.iter().enumerate().map(|(i, w)| w * i as f64 / m))
    }

    /// Indices with nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Odd voter counts `1, 3, ..., <= m`.
pub fn voter_counts(m: usize) -> impl Iterator<Item = usize> + Clone {
    (1..=m).step_by(2)
}

/// Position of odd `v` in a per-voter-count vector.
pub fn voter_index(v: usize) -> usize {
    (v - 1) / 2
}

/// Table of `r(m, i, v)` for every `i in 0..=m` and odd `v <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    m: usize,
    cols: usize,
    // row-major, row i holds r(m, i, 1), r(m, i, 3), ...
    entries: Vec<f64>,
}

impl BasisMatrix {
    pub fn build(m: usize) -> Result<Self> {
        Self::build_with(Arithmetic::auto(m), m)
    }

    pub fn build_with(mode: Arithmetic, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let cols = m.div_ceil(2);
        let mut entries = Vec::with_capacity((m + 1) * cols);
        for i in 0..=m {
            for v in voter_counts(m) {
                entries.push(exactmath::basis_error_rate_with(mode, m, i, v)?);
            }
        }
        Ok(Self { m, cols, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of odd voter counts.
    pub fn num_voter_counts(&self) -> usize {
        self.cols
    }

    pub fn voter_counts(&self) -> impl Iterator<Item = usize> + Clone {
        voter_counts(self.m)
    }

    /// `r(m, i, v)`; panics on an out-of-range `i` or invalid `v`.
    pub fn get(&self, i: usize, v: usize) -> f64 {
        assert!(v % 2 == 1 && v <= self.m && i <= self.m, "bad index ({i}, {v})");
        self.entries[i * self.cols + voter_index(v)]
    }

    /// Basis curve `r(m, i, .)` over odd `v`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `r(m, ., v)` over `i = 0..=m`.
    pub fn column(&self, v: usize) -> Vec<f64> {
        (0..=self.m).map(|i| self.get(i, v)).collect()
    }
}

/// Build the basis for `m` classifiers.
pub fn build_basis(m: usize) -> Result<BasisMatrix> {
    BasisMatrix::build(m)
}

/// Where a curve's values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveSource {
    Distribution,
    ValidationDirect,
    ValidationInference,
}

impl fmt::Display for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveSource::Distribution => "distribution",
            CurveSource::ValidationDirect => "validation-direct",
            CurveSource::ValidationInference => "validation-inference",
        })
    }
}

pub(crate) fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Error rate per odd voter count, with the smallest minimizing `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    m: usize,
    values: Vec<f64>,
    argmin_v: usize,
    source: CurveSource,
}

impl ErrorCurve {
    /// `values[k]` is the rate at `v = 2k + 1`.
    pub fn from_values(m: usize, values: Vec<f64>, source: CurveSource) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let expected = m.div_ceil(2);
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let k = values
            .iter()
            .position(|&x| x == min || tied(x, min))
            .unwrap_or(0);
        Ok(Self {
            m,
            values,
            argmin_v: 2 * k + 1,
            source,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn source(&self) -> CurveSource {
        self.source
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rate at odd `v`.
    pub fn value(&self, v: usize) -> f64 {
        self.values[voter_index(v)]
    }

    /// `(v, rate)` pairs in increasing `v`.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &x)| (2 * k + 1, x))
    }

    /// Smallest `v` attaining the minimum (up to [`TIE_TOLERANCE`]).
    pub fn argmin_v(&self) -> usize {
        self.argmin_v
    }

    pub fn min_value(&self) -> f64 {
        self.value(self.argmin_v)
    }

    /// True when `v` is the argmin and every other point is strictly larger
    /// beyond the tie tolerance.
    pub fn is_strict_argmin(&self, v: usize) -> bool {
        let best = self.value(v);
        self.points()
            .all(|(u, x)| u == v || (x > best && !tied(x, best)))
    }
}

/// `v -> sum_i w_i r(m, i, v)`.
pub fn error_curve(w: &ErrorCountDistribution, basis: &BasisMatrix) -> Result<ErrorCurve> {
    curve_from_weights(w.weights(), basis, CurveSource::Distribution)
}

pub(crate) fn curve_from_weights(
    w: &[f64],
    basis: &BasisMatrix,
    source: CurveSource,
) -> Result<ErrorCurve> {
    if w.len() != basis.m() + 1 {
        return Err(Error::LengthMismatch {
            expected: basis.m() + 1,
            actual: w.len(),
        });
    }
    let values = basis
        .voter_counts()
        .map(|v| mix_column(w, basis, v))
        .collect();
    ErrorCurve::from_values(basis.m(), values, source)
}

pub(crate) fn mix_column(w: &[f64], basis: &BasisMatrix, v: usize) -> f64 {
    exactmath::compensated_sum(
        w.iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| x * basis.get(i, v)),
    )
}

/// Largest all-voting error rate for `m` classifiers with mean error `p`,
/// with the two-point distribution that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub rate: f64,
    pub witness: ErrorCountDistribution,
}

/// `2p(1 - 1/(m+1))`, attained by putting mass on the slimmest incorrect
/// majority `(m+1)/2` and on zero errors.
pub fn worst_case_all_voting(m: usize, p: f64) -> Result<WorstCase> {
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if m.is_multiple_of(2) {
        return Err(Error::EvenEnsemble(m));
    }
    if !(0.0..0.5).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "[0, 0.5)",
        });
    }
    let rate = 2.0 * p * (1.0 - 1.0 / (m + 1) as f64);
    let mut w = vec![0.0; m + 1];
    w[m.div_ceil(2)] = rate;
    w[0] = 1.0 - rate;
    Ok(WorstCase {
        rate,
        witness: ErrorCountDistribution::new(w)?,
    })
}

/// [`worst_case_all_voting`] rate for a rational `p`, without rounding.
pub fn worst_case_rate_exact(m: usize, p: &BigRational) -> Result<BigRational> {
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if m.is_multiple_of(2) {
        return Err(Error::EvenEnsemble(m));
    }
    let half = BigRational::new(1.into(), 2.into());
    if *p < BigRational::zero() || *p >= half {
        return Err(Error::OutOfRange {
            name: "p",
            value: exactmath::ratio_to_f64(p),
            range: "[0, 0.5)",
        });
    }
    let scale = BigRational::one() - BigRational::new(1.into(), (m + 1).into());
    Ok(p * scale * BigRational::from_integer(2.into()))
}

/// Effect of adding two voters to a basis curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Monotonicity {
    /// Incorrect classifiers cannot form a majority: rate stays at zero.
    ZeroFloor,
    /// Fewer than half in error: more voters strictly help.
    Decreasing,
    /// More than half in error: more voters strictly hurt.
    Increasing,
    /// Correct classifiers cannot form a majority: rate stays at one.
    OneCeiling,
    /// Even `m` with exactly half in error: adding voters changes nothing.
    Balanced,
}

/// Label for the step `v -> v + 2` of the basis curve for `i` errors.
pub fn monotonicity(m: usize, i: usize, v: usize) -> Monotonicity {
    let majority = v.div_ceil(2);
    if i < majority {
        Monotonicity::ZeroFloor
    } else if m - i < majority {
        Monotonicity::OneCeiling
    } else if 2 * i < m {
        Monotonicity::Decreasing
    } else if 2 * i > m {
        Monotonicity::Increasing
    } else {
        Monotonicity::Balanced
    }
}

/// Labels for every odd `v` with `v + 2 <= m`.
pub fn classify_monotonicity(m: usize, i: usize) -> Result<Vec<(usize, Monotonicity)>> {
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    exactmath::check_errors(m, i)?;
    Ok(voter_counts(m)
        .take_while(|v| v + 2 <= m)
        .map(|v| (v, monotonicity(m, i, v)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_rows_for_figure_scale() {
        let b = build_basis(101).unwrap();
        assert_eq!(b.num_voter_counts(), 51);
        assert!(b.row(0).iter().all(|&x| x == 0.0));
        assert!(b.row(101).iter().all(|&x| x == 1.0));
        let row = b.row(51);
        for pair in row.windows(2) {
            assert!(pair[1] > pair[0] || pair[0] == 1.0);
        }
        assert_eq!(*row.last().unwrap(), 1.0);
    }

    #[test]
    fn error_curve_examples() {
        let b5 = build_basis(5).unwrap();
        let zero = ErrorCountDistribution::point_mass(5, 0).unwrap();
        let c = error_curve(&zero, &b5).unwrap();
        assert!(c.values().iter().all(|&x| x == 0.0));
        assert_eq!(c.argmin_v(), 1);

        let w = ErrorCountDistribution::new(vec![0.0, 0.9, 0.0, 0.1, 0.0, 0.0]).unwrap();
        let c = error_curve(&w, &b5).unwrap();
        for (got, want) in c.values().iter().zip([0.24, 0.07, 0.1]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(c.argmin_v(), 3);

        let b = build_basis(101).unwrap();
        let c = error_curve(&ErrorCountDistribution::point_mass(101, 50).unwrap(), &b).unwrap();
        assert_eq!(c.argmin_v(), 101);
        assert_eq!(c.value(101), 0.0);
    }

    #[test]
    fn curve_rejects_mismatch_and_bad_sums() {
        let b = build_basis(5).unwrap();
        let w = ErrorCountDistribution::uniform(3).unwrap();
        assert!(error_curve(&w, &b).is_err());
        assert!(matches!(
            ErrorCountDistribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        assert!(ErrorCountDistribution::new(vec![1.5, -0.5]).is_err());
        let w = ErrorCountDistribution::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert_eq!(w.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn worst_case_values() {
        let wc = worst_case_all_voting(3, 0.1).unwrap();
        assert!((wc.rate - 0.15).abs() < 1e-15);
        let wc = worst_case_all_voting(101, 0.3).unwrap();
        assert!((wc.rate - 0.6 * 101.0 / 102.0).abs() < 1e-15);
        assert!((wc.rate - 0.594118).abs() < 1e-6);
        assert_eq!(worst_case_all_voting(7, 0.0).unwrap().rate, 0.0);
        assert!(worst_case_all_voting(4, 0.1).is_err());
        assert!(worst_case_all_voting(5, 0.5).is_err());
    }

    #[test]
    fn worst_case_witness_reproduces_rate() {
        for (m, p) in [(3usize, 0.1), (101, 0.3), (11, 0.45)] {
            let wc = worst_case_all_voting(m, p).unwrap();
            let b = build_basis(m).unwrap();
            let c = error_curve(&wc.witness, &b).unwrap();
            assert!((c.value(m) - wc.rate).abs() < 1e-12);
            assert!((wc.witness.mean_error_rate() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn monotonicity_labels() {
        assert!(classify_monotonicity(101, 0)
            .unwrap()
            .iter()
            .all(|&(_, l)| l == Monotonicity::ZeroFloor));
        assert_eq!(monotonicity(101, 30, 21), Monotonicity::Decreasing);
        assert_eq!(monotonicity(101, 60, 21), Monotonicity::Increasing);
        assert_eq!(monotonicity(101, 100, 3), Monotonicity::OneCeiling);
        assert_eq!(monotonicity(10, 5, 3), Monotonicity::Balanced);
        assert_eq!(classify_monotonicity(101, 3).unwrap().len(), 50);
    }

    #[test]
    fn basis_row_consequences() {
        let m = 15;
        let b = build_basis(m).unwrap();
        for i in 1..m.div_ceil(2) {
            let row = b.row(i);
            assert!(row.windows(2).all(|p| p[1] <= p[0]));
            if 2 * i + 1 <= m {
                assert_eq!(b.get(i, 2 * i + 1), 0.0);
            }
        }
        for i in m.div_ceil(2)..m {
            let row = b.row(i);
            assert!(row.windows(2).all(|p| p[1] >= p[0]));
            let j = m - i;
            if 2 * j + 1 <= m {
                assert_eq!(b.get(i, 2 * j + 1), 1.0);
            }
        }
    }

    #[test]
    fn relative_tie_tolerance() {
        let c = ErrorCurve::from_values(5, vec![1e-18, 1e-18 * (1.0 - 1e-9), 1e-18], CurveSource::Distribution)
            .unwrap();
        assert_eq!(c.argmin_v(), 3);
        assert!(c.is_strict_argmin(3));
        let c = ErrorCurve::from_values(5, vec![0.2, 0.2 + 1e-17, 0.3], CurveSource::Distribution).unwrap();
        assert_eq!(c.argmin_v(), 1);
        assert!(!c.is_strict_argmin(1));
    }
}
