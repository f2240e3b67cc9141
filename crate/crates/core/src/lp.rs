//! Dense two-phase simplex for small equality-form linear programs.
//!
//! Solves `max c.x  s.t.  A x = b, x >= 0` with Bland's anti-cycling rule.
//! Redundant equality rows are detected after phase one and dropped.

use serde::{Deserialize, Serialize};

use crate::error::{KarmaError, Result};

/// Pivot and reduced-cost threshold.
pub const PIVOT_TOL: f64 = 1e-11;
/// Phase-one objective above this value means the problem is infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 100_000;

/// `max objective.x  s.t.  constraints x = rhs, x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if n == 0 {
            return Err(KarmaError::Lp("problem has no variables".into()));
        }
        if self.rhs.len() != self.n_rows() {
            return Err(KarmaError::Lp(format!(
                "{} constraint rows but {} right-hand sides",
                self.n_rows(),
                self.rhs.len()
            )));
        }
        if let Some(i) = self.constraints.iter().position(|row| row.len() != n) {
            return Err(KarmaError::Lp(format!("constraint row {i} does not have {n} columns")));
        }
        let finite = self
            .objective
            .iter()
            .chain(self.rhs.iter())
            .chain(self.constraints.iter().flatten())
            .all(|x| x.is_finite());
        if !finite {
            return Err(KarmaError::Lp("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Largest absolute violation of the equality constraints at `x`.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    /// `rows[i] = [A | I | b]` restricted to the live rows.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` over columns flagged in `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.n_cols).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let reduced = cost[j]
                        - self
                            .basis
                            .iter()
                            .zip(&self.rows)
                            .map(|(&bj, row)| cost[bj] * row[j])
                            .sum::<f64>();
                    reduced > PIVOT_TOL
                }
            });
            let Some(j) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL
                                || ((ratio - lr).abs() <= PIVOT_TOL && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leaving else {
                return Err(KarmaError::Lp("objective is unbounded".into()));
            };
            self.pivot(r, j);
        }
        Err(KarmaError::Lp("pivot limit reached".into()))
    }
}

/// Maximizes the problem's objective.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.check()?;
    let n = problem.n_vars();
    let m = problem.n_rows();
    let n_cols = n + m;
    let rows = problem
        .constraints
        .iter()
        .zip(&problem.rhs)
        .enumerate()
        .map(|(i, (a, &b))| {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut row: Vec<f64> = a.iter().map(|v| sign * v).collect();
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row.push(sign * b);
            row
        })
        .collect();
    let mut t = Tableau {
        rows,
        basis: (n..n_cols).collect(),
        n_cols,
    };

    let phase1_cost: Vec<f64> = (0..n_cols).map(|j| if j < n { 0.0 } else { -1.0 }).collect();
    t.optimize(&phase1_cost, &vec![true; n_cols])?;
    let infeasibility: f64 = (0..t.rows.len()).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i)).sum();
    if infeasibility > FEASIBILITY_TOL {
        return Err(KarmaError::Lp(format!(
            "problem is infeasible (phase-one residual {infeasibility:e})"
        )));
    }

    // Move artificials out of the basis; rows where that is impossible are redundant.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    let mut phase2_cost = problem.objective.clone();
    phase2_cost.extend(std::iter::repeat_n(0.0, m));
    let allowed: Vec<bool> = (0..n_cols).map(|j| j < n).collect();
    t.optimize(&phase2_cost, &allowed)?;

    let mut x = vec![0.0; n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.rhs(i);
        }
    }
    Ok(LpSolution {
        value: problem.objective_value(&x),
        x,
    })
}
