//! Simultaneous PAC confidence bands on voting error per voter count.
//!
//! Three constructions:
//! - Hoeffding around the direct estimates `k_v / n`;
//! - Hoeffding around the inference estimates;
//! - binomial-inversion boxes on each `w_i` (Bonferroni over `2(m+1)`
//!   bounds) pushed through `sum_i w_i r(m,i,v)` by linear programming.

use std::fmt;
use std::str::FromStr;

use crate::construct::lp::{solve_lp, LpProblem, Relation, Sense};
use crate::curves::{
    mix_column, voter_counts, BasisMatrix, CurveSource, ErrorCountDistribution, ErrorCurve,
};
use crate::error::{check_unit_open, Error, Result};
use crate::estimate::EmpiricalErrorCounts;
use crate::exactmath::{
    chi_squared_critical, compensated_sum, hoeffding_margin, pearson_x2, BinomialInversion,
    PearsonX2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandMethod {
    DirectHoeffding,
    InferenceHoeffding,
    InferenceBoxLp,
}

impl BandMethod {
    pub const ALL: [BandMethod; 3] = [
        BandMethod::DirectHoeffding,
        BandMethod::InferenceHoeffding,
        BandMethod::InferenceBoxLp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandMethod::DirectHoeffding => "direct-hoeffding",
            BandMethod::InferenceHoeffding => "inference-hoeffding",
            BandMethod::InferenceBoxLp => "inference-box-lp",
        }
    }
}

impl fmt::Display for BandMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BandMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown band method '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEntry {
    pub v: usize,
    pub lower: f64,
    pub estimate: f64,
    pub upper: f64,
}

impl BandEntry {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Lower and upper bounds for every odd `v`, valid simultaneously with
/// probability at least `1 - delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub method: BandMethod,
    pub delta: f64,
    pub n: u64,
    pub entries: Vec<BandEntry>,
}

impl ConfidenceBand {
    pub fn entry(&self, v: usize) -> &BandEntry {
        &self.entries[(v - 1) / 2]
    }

    /// True when every `v` has `values[(v-1)/2]` inside its interval.
    pub fn covers(&self, values: &[f64]) -> bool {
        self.entries
            .iter()
            .zip(values)
            .all(|(e, &x)| e.contains(x))
    }

    pub fn mean_width(&self) -> f64 {
        compensated_sum(self.entries.iter().map(BandEntry::width)) / self.entries.len() as f64
    }
}

fn hoeffding_band(
    centers: impl Iterator<Item = (usize, f64)>,
    n: u64,
    m: usize,
    delta: f64,
    method: BandMethod,
) -> Result<ConfidenceBand> {
    let margin = hoeffding_margin(n, m, delta)?;
    let entries = centers
        .map(|(v, est)| BandEntry {
            v,
            lower: (est - margin).max(0.0),
            estimate: est,
            upper: (est + margin).min(1.0),
        })
        .collect();
    Ok(ConfidenceBand {
        method,
        delta,
        n,
        entries,
    })
}

/// `k_v / n +- sqrt((ln(m+1) - ln delta) / 2n)`, clipped to `[0, 1]`.
/// `errors[k]` is `k_v` for `v = 2k + 1`.
pub fn direct_hoeffding_band(errors: &[u64], n: u64, m: usize, delta: f64) -> Result<ConfidenceBand> {
    if errors.len() != m.div_ceil(2) {
        return Err(Error::LengthMismatch {
            expected: m.div_ceil(2),
            actual: errors.len(),
        });
    }
    if let Some(&k) = errors.iter().find(|&&k| k > n) {
        return Err(Error::OutOfRange {
            name: "k_v",
            value: k as f64,
            range: "0..=n",
        });
    }
    hoeffding_band(
        voter_counts(m).zip(errors).map(|(v, &k)| (v, k as f64 / n as f64)),
        n,
        m,
        delta,
        BandMethod::DirectHoeffding,
    )
}

/// Same half-width as the direct band, centred on inference estimates.
pub fn inference_hoeffding_band(curve: &ErrorCurve, n: u64, delta: f64) -> Result<ConfidenceBand> {
    if curve.source() != CurveSource::ValidationInference {
        return Err(Error::Verification(format!(
            "inference band needs an inference curve, got {}",
            curve.source()
        )));
    }
    hoeffding_band(
        curve.points(),
        n,
        curve.m(),
        delta,
        BandMethod::InferenceHoeffding,
    )
}

/// Per-`i` intervals `[t_i, u_i]` on the out-of-sample rates `w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraints {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Empirical rates the box was built from.
    pub w_hat: Vec<f64>,
    /// Failure probability spent on each one-sided bound.
    pub delta_per_bound: Vec<f64>,
    pub delta: f64,
    pub n: u64,
}

impl BoxConstraints {
    pub fn m(&self) -> usize {
        self.lower.len() - 1
    }

    /// `sum t_i <= 1 <= sum u_i`.
    pub fn is_feasible(&self) -> bool {
        compensated_sum(self.lower.iter().copied()) <= 1.0 + 1e-12
            && compensated_sum(self.upper.iter().copied()) >= 1.0 - 1e-12
    }
}

/// Uniform Bonferroni split: each of the `2(m+1)` one-sided bounds gets
/// `delta / (2(m+1))`.
pub fn binomial_box_constraints(counts: &EmpiricalErrorCounts, delta: f64) -> Result<BoxConstraints> {
    check_unit_open("delta", delta)?;
    let per = delta / (2 * (counts.m() + 1)) as f64;
    binomial_box_constraints_with(counts, delta, &vec![per; counts.m() + 1], BinomialInversion::default())
}

/// Box with an explicit per-`i` allocation; `per_index[i]` is spent on each
/// side of bound `i`, so `2 * sum(per_index)` must not exceed `delta`.
pub fn binomial_box_constraints_with(
    counts: &EmpiricalErrorCounts,
    delta: f64,
    per_index: &[f64],
    inversion: BinomialInversion,
) -> Result<BoxConstraints> {
    check_unit_open("delta", delta)?;
    let m = counts.m();
    if per_index.len() != m + 1 {
        return Err(Error::LengthMismatch {
            expected: m + 1,
            actual: per_index.len(),
        });
    }
    let spent = 2.0 * compensated_sum(per_index.iter().copied());
    if spent > delta * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            name: "delta allocation",
            value: spent,
            range: "<= delta",
        });
    }
    let n = counts.n();
    let mut lower = Vec::with_capacity(m + 1);
    let mut upper = Vec::with_capacity(m + 1);
    for (&k, &d) in counts.counts().iter().zip(per_index) {
        lower.push(inversion.lower(n, k, d)?);
        upper.push(inversion.upper(n, k, d)?);
    }
    Ok(BoxConstraints {
        lower,
        upper,
        w_hat: counts.w_hat(),
        delta_per_bound: per_index.to_vec(),
        delta,
        n,
    })
}

/// How to solve the box-and-simplex linear programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LpBackend {
    /// Fill from the lower corner in order of `r(m, i, v)`.
    #[default]
    WaterFilling,
    /// The general dense simplex solver.
    Simplex,
}

/// Optimum of `sum_i w_i r_i` over `{t <= w <= u, sum w = 1}`: start at `t`
/// and pour the remaining mass into the best indices first.
pub fn water_fill(r: &[f64], lower: &[f64], upper: &[f64], maximize: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| {
        let c = r[a].total_cmp(&r[b]);
        if maximize {
            c.reverse()
        } else {
            c
        }
        .then(a.cmp(&b))
    });
    let mut w = lower.to_vec();
    let mut remaining = 1.0 - compensated_sum(lower.iter().copied());
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).min(remaining);
        w[i] += add;
        remaining -= add;
    }
    w
}

fn simplex_extreme(r: &[f64], lower: &[f64], upper: &[f64], maximize: bool) -> Result<f64> {
    // substitute y = w - t so the variables are plain non-negative
    let k = r.len();
    let sense = if maximize {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    let mut problem = LpProblem::new(sense, r.to_vec());
    problem.constrain(
        "sum-to-one",
        vec![1.0; k],
        Relation::Eq,
        1.0 - compensated_sum(lower.iter().copied()),
    );
    for i in 0..k {
        let mut row = vec![0.0; k];
        row[i] = 1.0;
        problem.constrain(format!("w{i}<=u{i}"), row, Relation::Le, upper[i] - lower[i]);
    }
    let solution = solve_lp(&problem)?;
    let base = compensated_sum(lower.iter().zip(r).map(|(t, x)| t * x));
    Ok(base + solution.objective)
}

/// Min and max of `sum_i w_i r(m, i, v)` over the box intersected with the
/// probability simplex, for every odd `v`.
pub fn inference_lp_bounds(boxes: &BoxConstraints, basis: &BasisMatrix) -> Result<ConfidenceBand> {
    inference_lp_bounds_with(boxes, basis, LpBackend::default())
}

pub fn inference_lp_bounds_with(
    boxes: &BoxConstraints,
    basis: &BasisMatrix,
    backend: LpBackend,
) -> Result<ConfidenceBand> {
    let extremes = lp_extremes(boxes, basis, backend)?;
    let entries = basis
        .voter_counts()
        .zip(extremes)
        .map(|(v, (lo, hi))| {
            let estimate = mix_column(&boxes.w_hat, basis, v);
            // w_hat is feasible, so only rounding can put it outside [lo, hi]
            BandEntry {
                v,
                lower: lo.clamp(0.0, 1.0).min(estimate),
                estimate,
                upper: hi.clamp(0.0, 1.0).max(estimate),
            }
        })
        .collect();
    Ok(ConfidenceBand {
        method: BandMethod::InferenceBoxLp,
        delta: boxes.delta,
        n: boxes.n,
        entries,
    })
}

/// Raw `(min, max)` objective values per odd `v`, before clipping.
pub fn lp_extremes(
    boxes: &BoxConstraints,
    basis: &BasisMatrix,
    backend: LpBackend,
) -> Result<Vec<(f64, f64)>> {
    let m = basis.m();
    if boxes.m() != m {
        return Err(Error::BasisMismatch {
            sample: boxes.m(),
            basis: m,
        });
    }
    if !boxes.is_feasible() {
        return Err(Error::Verification(
            "box constraints exclude every probability vector".into(),
        ));
    }
    basis
        .voter_counts()
        .map(|v| {
            let r = basis.column(v);
            Ok(match backend {
                LpBackend::WaterFilling => {
                    let wl = water_fill(&r, &boxes.lower, &boxes.upper, false);
                    let wu = water_fill(&r, &boxes.lower, &boxes.upper, true);
                    (mix_column(&wl, basis, v), mix_column(&wu, basis, v))
                }
                LpBackend::Simplex => (
                    simplex_extreme(&r, &boxes.lower, &boxes.upper, false)?,
                    simplex_extreme(&r, &boxes.lower, &boxes.upper, true)?,
                ),
            })
        })
        .collect()
}

/// Outcome of the approximate likely-set test.
///
/// The chi-squared set is only an asymptotic approximation and is not a
/// superset of the exact likely set, so membership carries no validity
/// guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct X2Membership {
    pub statistic: PearsonX2,
    /// Chi-squared (`m` degrees of freedom) critical value with upper tail `delta`.
    pub threshold: f64,
    pub inside: bool,
}

pub fn x2_membership(
    w: &ErrorCountDistribution,
    w_hat: &ErrorCountDistribution,
    delta: f64,
) -> Result<X2Membership> {
    let statistic = pearson_x2(w.weights(), w_hat.weights())?;
    let threshold = chi_squared_critical(w.m(), delta)?;
    let inside = match statistic {
        PearsonX2::Finite(x) => x <= threshold,
        PearsonX2::Infinite => false,
    };
    Ok(X2Membership {
        statistic,
        threshold,
        inside,
    })
}
