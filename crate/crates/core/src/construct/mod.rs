//! Error-count distributions for which a chosen voter count is optimal.

pub mod lp;

use crate::curves::{error_curve, BasisMatrix, ErrorCountDistribution, ErrorCurve};
use crate::error::{Error, Result};
use crate::exactmath::check_voters;
use lp::{solve_lp, LpProblem, Relation, Sense};

/// Defaults used for the max-gap experiments at `m = 101`.
pub const DEFAULT_MEAN_ERROR: f64 = 0.3;
pub const DEFAULT_ALL_VOTE_CAP: f64 = 0.5;

/// Residual allowed when rechecking a solution against its constraints.
pub const RECHECK_TOLERANCE: f64 = 1e-8;

/// Largest `k` tried for the mixing weight `2^-k` on the high-error row.
const MAX_HALVINGS: i32 = 60;

/// Distribution whose error curve has a strict minimum at `vmin`.
///
/// `vmin = 1` puts all mass on `m - 1` errors; `vmin >= m - 1` puts it on
/// `(vmin - 1)/2`. Otherwise the mass is split between `a = (vmin-1)/2`
/// errors (which `vmin` voters always outvote) and `b = m - (vmin+1)/2`
/// errors (which every `v > vmin` loses), with weight `2^-k` on `b` for the
/// smallest `k` that makes `vmin` the strict argmin.
pub fn theorem4_distribution(m: usize, vmin: usize) -> Result<ErrorCountDistribution> {
    let basis = BasisMatrix::build(m)?;
    theorem4_distribution_with(&basis, vmin)
}

pub fn theorem4_distribution_with(
    basis: &BasisMatrix,
    vmin: usize,
) -> Result<ErrorCountDistribution> {
    let m = basis.m();
    check_voters(m, vmin)?;
    let verify = |w: ErrorCountDistribution| -> Result<Option<ErrorCountDistribution>> {
        let curve = error_curve(&w, basis)?;
        Ok((curve.argmin_v() == vmin && curve.is_strict_argmin(vmin)).then_some(w))
    };

    if vmin == 1 || vmin + 1 >= m {
        let i = if vmin == 1 { m - 1 } else { (vmin - 1) / 2 };
        let w = ErrorCountDistribution::point_mass(m, i)?;
        return verify(w)?.ok_or_else(|| {
            Error::Verification(format!("point mass at {i} is not minimized at v={vmin}"))
        });
    }

    let a = (vmin - 1) / 2;
    let b = m - vmin.div_ceil(2);
    for k in 1..=MAX_HALVINGS {
        let tail = 2f64.powi(-k);
        let mut w = vec![0.0; m + 1];
        w[a] = 1.0 - tail;
        w[b] = tail;
        if let Some(found) = verify(ErrorCountDistribution::new(w)?)? {
            return Ok(found);
        }
    }
    Err(Error::Verification(format!(
        "no mixing weight 2^-k, k <= {MAX_HALVINGS}, makes v={vmin} optimal for m={m}"
    )))
}

/// Result of the max-gap program for one `vmin`.
///
/// The three neighbour comparisons (against `v = 1`, `vmin - 2` and
/// `vmin + 2`) are all imposed, so `vmin` is always a local minimum.
/// Whether it is the global argmin is checked afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate {
    pub vmin: usize,
    pub w: ErrorCountDistribution,
    /// Curve at `v = m` minus curve at `vmin`, recomputed from `w`.
    pub gap: f64,
    pub curve: ErrorCurve,
    pub locally_optimal: bool,
    pub globally_optimal: bool,
    /// Largest constraint violation of `w`.
    pub max_residual: f64,
}

impl GapCertificate {
    /// Indices carrying weight above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.w
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The linear program behind [`max_gap_lp`], exposed for inspection.
pub fn max_gap_problem(
    basis: &BasisMatrix,
    vmin: usize,
    p: f64,
    all_vote_cap: f64,
) -> Result<LpProblem> {
    let m = basis.m();
    if m.is_multiple_of(2) {
        return Err(Error::EvenEnsemble(m));
    }
    check_voters(m, vmin)?;
    if vmin >= m {
        return Err(Error::InvalidVoterCount { m, v: vmin });
    }
    for (name, value) in [("p", p), ("all_vote_cap", all_vote_cap)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange {
                name,
                value,
                range: "[0, 1]",
            });
        }
    }
    let col_min = basis.column(vmin);
    let col_all = basis.column(m);
    let diff = |v: usize| -> Vec<f64> {
        let other = basis.column(v);
        col_min.iter().zip(&other).map(|(a, b)| a - b).collect()
    };

    let objective = col_all.iter().zip(&col_min).map(|(a, b)| a - b).collect();
    let mut problem = LpProblem::new(Sense::Maximize, objective);
    problem.constrain("sum-to-one", vec![1.0; m + 1], Relation::Eq, 1.0);
    if vmin > 1 {
        problem.constrain("vmin<=v1", diff(1), Relation::Le, 0.0);
    }
    if vmin > 3 {
        problem.constrain("vmin<=vmin-2", diff(vmin - 2), Relation::Le, 0.0);
    }
    if vmin + 2 <= m {
        problem.constrain("vmin<=vmin+2", diff(vmin + 2), Relation::Le, 0.0);
    }
    problem.constrain("all-vote-cap", col_all, Relation::Le, all_vote_cap);
    problem.constrain(
        "mean-error",
        (0..=m).map(|i| i as f64 / m as f64).collect(),
        Relation::Eq,
        p,
    );
    Ok(problem)
}

/// Maximize the error gap between all-voting and `vmin` voters subject to
/// `vmin` beating its neighbours and `v = 1`, all-voting error at most
/// `all_vote_cap`, and mean classifier error `p`.
pub fn max_gap_lp(
    basis: &BasisMatrix,
    vmin: usize,
    p: f64,
    all_vote_cap: f64,
) -> Result<GapCertificate> {
    let m = basis.m();
    let problem = max_gap_problem(basis, vmin, p, all_vote_cap)?;
    let solution = solve_lp(&problem)?;

    let cleaned: Vec<f64> = solution
        .x
        .iter()
        .map(|&x| if x.abs() < 1e-14 { 0.0 } else { x.min(1.0) })
        .collect();
    let max_residual = problem.max_residual(&cleaned);
    if max_residual > RECHECK_TOLERANCE {
        return Err(Error::Verification(format!(
            "vmin={vmin}: solution violates constraints by {max_residual:e}"
        )));
    }
    let w = ErrorCountDistribution::new(cleaned)?;
    let curve = error_curve(&w, basis)?;
    let gap = curve.value(m) - curve.value(vmin);
    if (gap - solution.objective).abs() > RECHECK_TOLERANCE {
        return Err(Error::Verification(format!(
            "vmin={vmin}: recomputed gap {gap} differs from objective {}",
            solution.objective
        )));
    }
    let best = curve.value(vmin);
    let mut neighbours = vec![1];
    if vmin > 1 {
        neighbours.push(vmin - 2);
    }
    if vmin + 2 <= m {
        neighbours.push(vmin + 2);
    }
    let locally_optimal = neighbours
        .iter()
        .all(|&v| best <= curve.value(v) + RECHECK_TOLERANCE);
    let globally_optimal = curve.points().all(|(_, x)| best <= x + RECHECK_TOLERANCE);
    Ok(GapCertificate {
        vmin,
        w,
        gap,
        curve,
        locally_optimal,
        globally_optimal,
        max_residual,
    })
}
