//! Outcome-dependent urgency dynamics.
//!
//! Urgency escalates one level (saturating at the top) when an agent yields
//! and resets to the lowest level when it is served. A small `epsilon` spreads
//! the remaining probability uniformly over the other levels.

use serde::{Deserialize, Serialize};

use crate::error::{KarmaError, Result};
use crate::Outcome;

/// Row sums of the transition matrices must match 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Finite urgency set with one row-stochastic transition matrix per outcome.
///
/// `phi[o][i][j]` is the probability of moving from level `i` to level `j`
/// after outcome `o` (0 = served, 1 = yielded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrgencyProcess {
    levels: Vec<u32>,
    phi: [Vec<Vec<f64>>; 2],
    epsilon: Option<f64>,
}

impl UrgencyProcess {
    /// Builds the reset-on-win / escalate-on-loss process.
    pub fn endogenous(levels: &[u32], epsilon: f64) -> Result<Self> {
        check_levels(levels)?;
        let n = levels.len();
        if n < 2 {
            return Err(KarmaError::param(
                "urgency_levels",
                "the endogenous process needs at least two levels",
            ));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(KarmaError::param(
                "epsilon",
                format!("must lie in the open interval (0, 1), got {epsilon}"),
            ));
        }
        let off = epsilon / (n - 1) as f64;
        let main = 1.0 - epsilon;
        let mut win = vec![vec![off; n]; n];
        let mut lose = vec![vec![off; n]; n];
        for i in 0..n {
            win[i][0] = main;
            lose[i][(i + 1).min(n - 1)] = main;
        }
        let mut process = Self::from_matrices(levels, win, lose)?;
        process.epsilon = Some(epsilon);
        Ok(process)
    }

    /// Builds a process from explicit matrices, indexed `[from][to]`.
    pub fn from_matrices(levels: &[u32], win: Vec<Vec<f64>>, lose: Vec<Vec<f64>>) -> Result<Self> {
        check_levels(levels)?;
        let n = levels.len();
        for (name, m) in [("phi_win", &win), ("phi_lose", &lose)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(KarmaError::param(name, format!("must be a {n}x{n} matrix")));
            }
            for (i, row) in m.iter().enumerate() {
                if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(KarmaError::param(
                        name,
                        format!("row {i} has a negative or non-finite entry"),
                    ));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(KarmaError::param(name, format!("row {i} sums to {s}, not 1")));
                }
            }
        }
        let process = Self {
            levels: levels.to_vec(),
            phi: [win, lose],
            epsilon: None,
        };
        if !process.mixture_is_irreducible() {
            return Err(KarmaError::param(
                "phi",
                "the equal-weight outcome mixture is not irreducible",
            ));
        }
        Ok(process)
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, u: usize) -> f64 {
        f64::from(self.levels[u])
    }

    pub fn max_level(&self) -> f64 {
        f64::from(*self.levels.last().expect("levels are non-empty"))
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Transition matrix conditioned on an outcome.
    pub fn matrix(&self, outcome: Outcome) -> &[Vec<f64>] {
        &self.phi[outcome.index()]
    }

    /// `Phi[to | from, outcome]`.
    #[inline]
    pub fn prob(&self, from: usize, to: usize, outcome: Outcome) -> f64 {
        self.phi[outcome.index()][from][to]
    }

    /// Urgency chain when every interaction is a fair coin toss.
    pub fn coin_mixture(&self) -> Vec<Vec<f64>> {
        let n = self.n_levels();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| 0.5 * self.phi[0][i][j] + 0.5 * self.phi[1][i][j])
                    .collect()
            })
            .collect()
    }

    fn mixture_is_irreducible(&self) -> bool {
        let m = self.coin_mixture();
        let n = m.len();
        (0..n).all(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if m[i][j] > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        })
    }
}

fn check_levels(levels: &[u32]) -> Result<()> {
    if levels.is_empty() {
        return Err(KarmaError::param("urgency_levels", "must not be empty"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KarmaError::param("urgency_levels", "must be strictly increasing"));
    }
    Ok(())
}
