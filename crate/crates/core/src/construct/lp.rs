//! Dense two-phase simplex for small problems over `x >= 0`.
//!
//! Pivoting follows Bland's rule, so the method terminates on degenerate
//! problems. Intended for at most a few hundred columns.

use std::fmt;

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(label: impl Into<String>, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            label: label.into(),
            coeffs,
            relation,
            rhs,
        }
    }

    /// Amount by which `x` violates this constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `sense c.x` subject to `constraints` and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self {
            sense,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn constrain(
        &mut self,
        label: impl Into<String>,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    ) -> &mut Self {
        self.constraints
            .push(Constraint::new(label, coeffs, relation, rhs));
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest constraint or sign violation of `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let sign = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(sign, f64::max)
    }

    /// Labels of constraints that hold with equality at `x`.
    pub fn active_constraints(&self, x: &[f64], tol: f64) -> Vec<&str> {
        self.constraints
            .iter()
            .filter(|c| {
                let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
                (lhs - c.rhs).abs() <= tol
            })
            .map(|c| c.label.as_str())
            .collect()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::Malformed("no variables".into()));
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "constraint '{}' has {} coefficients, expected {n}",
                    c.label,
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!(
                    "constraint '{}' is not finite",
                    c.label
                )));
            }
        }
        if self.objective.iter().any(|a| !a.is_finite()) {
            return Err(LpError::Malformed("objective is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("infeasible; unsatisfied constraints: {}", .violated.join(", "))]
    Infeasible { violated: Vec<String> },
    #[error("objective is unbounded")]
    Unbounded,
    #[error("malformed problem: {0}")]
    Malformed(String),
}

impl LpError {
    pub fn status(&self) -> Option<LpStatus> {
        match self {
            LpError::Infeasible { .. } => Some(LpStatus::Infeasible),
            LpError::Unbounded => Some(LpStatus::Unbounded),
            LpError::Malformed(_) => None,
        }
    }
}

/// An optimal basic feasible solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        LpStatus::Optimal
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k != r {
                let f = row[c];
                if f != 0.0 {
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (x, y) in self.obj.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Sets the objective row for maximizing `cost . x` and prices out the basis.
    fn load_objective(&mut self, cost: &[f64]) {
        self.obj = vec![0.0; self.width + 1];
        for (j, &c) in cost.iter().enumerate() {
            self.obj[j] = -c;
        }
        for r in 0..self.rows.len() {
            let f = self.obj[self.basis[r]];
            if f != 0.0 {
                for (x, y) in self.obj.iter_mut().zip(&self.rows[r]) {
                    *x -= f * y;
                }
            }
        }
    }

    /// Runs simplex iterations; `allowed` masks columns that may enter.
    fn optimize(&mut self, allowed: &[bool]) -> Result<(), LpError> {
        loop {
            let entering = (0..self.width).find(|&j| allowed[j] && self.obj[j] < -PIVOT_EPS);
            let Some(c) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - PIVOT_EPS
                                || (ratio <= bratio + PIVOT_EPS && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Err(LpError::Unbounded),
            }
        }
    }
}

/// Solve `problem` with the two-phase simplex method.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let rows_in = &problem.constraints;

    // Column layout: originals, one slack/surplus per inequality, one
    // artificial per >= or = row (after sign normalization).
    let normalized: Vec<(Vec<f64>, Relation, f64)> = rows_in
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|a| -a).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let slacks = normalized
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let artificials = normalized
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Le)
        .count();
    let width = n + slacks + artificials;

    let mut rows = Vec::with_capacity(normalized.len());
    let mut basis = Vec::with_capacity(normalized.len());
    let mut art_row = Vec::new();
    let (mut s, mut a) = (n, n + slacks);
    for (r, (coeffs, rel, rhs)) in normalized.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(coeffs);
        row[width] = *rhs;
        match rel {
            Relation::Le => {
                row[s] = 1.0;
                basis.push(s);
                s += 1;
            }
            Relation::Ge => {
                row[s] = -1.0;
                row[a] = 1.0;
                basis.push(a);
                art_row.push(r);
                s += 1;
                a += 1;
            }
            Relation::Eq => {
                row[a] = 1.0;
                basis.push(a);
                art_row.push(r);
                a += 1;
            }
        }
        rows.push(row);
    }

    let mut t = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        width,
        iterations: 0,
    };
    let is_art = |j: usize| j >= n + slacks;

    if artificials > 0 {
        let mut cost = vec![0.0; width];
        for c in cost.iter_mut().skip(n + slacks) {
            *c = -1.0;
        }
        t.load_objective(&cost);
        t.optimize(&vec![true; width])?;
        let infeasibility = -t.obj[width];
        if infeasibility > FEASIBILITY_EPS {
            let violated = (0..t.rows.len())
                .filter(|&r| is_art(t.basis[r]) && t.rhs(r) > FEASIBILITY_EPS)
                .map(|r| {
                    // the artificial column identifies the originating row
                    let origin = art_row[t.basis[r] - n - slacks];
                    rows_in[origin].label.clone()
                })
                .collect();
            return Err(LpError::Infeasible { violated });
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < t.rows.len() {
            if is_art(t.basis[r]) {
                let col = (0..n + slacks).find(|&j| t.rows[r][j].abs() > PIVOT_EPS);
                match col {
                    Some(c) => {
                        t.pivot(r, c);
                        r += 1;
                    }
                    None => {
                        t.rows.remove(r);
                        t.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let mut cost = vec![0.0; width];
    for (j, &c) in problem.objective.iter().enumerate() {
        cost[j] = match problem.sense {
            Sense::Maximize => c,
            Sense::Minimize => -c,
        };
    }
    t.load_objective(&cost);
    let allowed: Vec<bool> = (0..width).map(|j| !is_art(j)).collect();
    t.optimize(&allowed)?;

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(r).max(0.0);
        }
    }
    let objective = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_problem(n: usize, sense: Sense, objective: Vec<f64>) -> LpProblem {
        let mut p = LpProblem::new(sense, objective);
        p.constrain("sum", vec![1.0; n], Relation::Eq, 1.0);
        p
    }

    #[test]
    fn vertex_of_simplex() {
        let p = simplex_problem(3, Sense::Maximize, vec![1.0, 0.0, 0.0]);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.status(), LpStatus::Optimal);
    }

    #[test]
    fn active_upper_bound() {
        let mut p = simplex_problem(3, Sense::Maximize, vec![1.0, 0.0, 0.0]);
        p.constrain("cap", vec![1.0, 0.0, 0.0], Relation::Le, 0.3);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 0.3).abs() < 1e-12);
        assert!(p.max_residual(&s.x) < 1e-12);
    }

    #[test]
    fn minimize_with_ge() {
        // min x + 2y s.t. x + y >= 2, x <= 1.5
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 2.0]);
        p.constrain("cover", vec![1.0, 1.0], Relation::Ge, 2.0);
        p.constrain("xcap", vec![1.0, 0.0], Relation::Le, 1.5);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 2.5).abs() < 1e-12);
        assert!((s.x[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x <= -1  is  x >= 1
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0]);
        p.constrain("neg", vec![-1.0], Relation::Le, -1.0);
        assert!((solve_lp(&p).unwrap().objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_reports_labels() {
        let mut p = simplex_problem(2, Sense::Maximize, vec![1.0, 1.0]);
        p.constrain("too-much", vec![1.0, 1.0], Relation::Ge, 2.0);
        match solve_lp(&p) {
            Err(e @ LpError::Infeasible { .. }) => {
                assert_eq!(e.status(), Some(LpStatus::Infeasible));
                let LpError::Infeasible { violated } = e else { unreachable!() };
                assert!(!violated.is_empty());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 0.0]);
        p.constrain("y", vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&p).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = simplex_problem(2, Sense::Maximize, vec![1.0, 2.0]);
        p.constrain("dup", vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_rejected() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 0.0]);
        p.constrain("short", vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::Malformed(_))));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook rule; Bland terminates.
        let mut p = LpProblem::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        p.constrain("r1", vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        p.constrain("r2", vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        p.constrain("r3", vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
