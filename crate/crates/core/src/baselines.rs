//! Benchmark allocation rules and the MAX_EFF efficiency bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KarmaError, Result};
use crate::lp::{solve_lp, LpProblem, LpSolution};
use crate::urgency::UrgencyProcess;
use crate::Outcome;

/// Which of two paired agents receives the trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    First,
    Second,
}

impl Winner {
    pub fn coin<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            Winner::First
        } else {
            Winner::Second
        }
    }

    /// Outcomes of `(first, second)`.
    pub fn outcomes(self) -> (Outcome, Outcome) {
        match self {
            Winner::First => (Outcome::Win, Outcome::Lose),
            Winner::Second => (Outcome::Lose, Outcome::Win),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Random,
    Turn,
}

/// Per-agent history used by TURN. `wins <= interactions`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnCounter {
    pub wins: u64,
    pub interactions: u64,
}

impl TurnCounter {
    /// Fraction of past interactions won; 0 before the first interaction.
    pub fn fraction(&self) -> f64 {
        if self.interactions == 0 {
            0.0
        } else {
            self.wins as f64 / self.interactions as f64
        }
    }

    fn record(&mut self, won: bool) {
        self.interactions += 1;
        if won {
            self.wins += 1;
        }
    }
}

/// RANDOM: a fair coin decides the pair.
pub fn random_choose<R: Rng + ?Sized>(rng: &mut R) -> Winner {
    Winner::coin(rng)
}

/// TURN: the agent with the smaller historical win fraction is served; exact
/// ties are broken by a fair coin. Both counters are updated afterwards.
pub fn turn_choose<R: Rng + ?Sized>(a: &mut TurnCounter, b: &mut TurnCounter, rng: &mut R) -> Winner {
    // wins_a / n_a vs wins_b / n_b by cross-multiplication; 0/0 reads as 0/1
    let lhs = u128::from(a.wins) * u128::from(b.interactions.max(1));
    let rhs = u128::from(b.wins) * u128::from(a.interactions.max(1));
    let winner = match lhs.cmp(&rhs) {
        std::cmp::Ordering::Less => Winner::First,
        std::cmp::Ordering::Greater => Winner::Second,
        std::cmp::Ordering::Equal => Winner::coin(rng),
    };
    a.record(winner == Winner::First);
    b.record(winner == Winner::Second);
    winner
}

/// Index of variable `psi[u, o]` in the MAX_EFF program.
pub fn psi_index(u: usize, outcome: Outcome) -> usize {
    2 * u + outcome.index()
}

/// MAX_EFF: best stationary joint urgency/outcome distribution in which
/// exactly half of all contests are won.
///
/// Rows: one stationarity row per urgency level (one of them redundant),
/// normalization, and the outcome-share row.
pub fn build_max_eff_lp(process: &UrgencyProcess) -> LpProblem {
    let n = process.n_levels();
    let mut objective = vec![0.0; 2 * n];
    for u in 0..n {
        objective[psi_index(u, Outcome::Lose)] = -process.level(u);
    }
    let mut constraints = Vec::with_capacity(n + 2);
    let mut rhs = Vec::with_capacity(n + 2);
    for u in 0..n {
        let mut row = vec![0.0; 2 * n];
        for o in Outcome::ALL {
            row[psi_index(u, o)] += 1.0;
            for from in 0..n {
                row[psi_index(from, o)] -= process.prob(from, u, o);
            }
        }
        constraints.push(row);
        rhs.push(0.0);
    }
    constraints.push(vec![1.0; 2 * n]);
    rhs.push(1.0);
    constraints.push((0..2 * n).map(|j| if j % 2 == 0 { 1.0 } else { 0.0 }).collect());
    rhs.push(0.5);
    LpProblem {
        objective,
        constraints,
        rhs,
    }
}

/// Solves MAX_EFF; the value is an upper bound on the long-run average reward.
pub fn max_eff_bound(process: &UrgencyProcess) -> Result<LpSolution> {
    solve_lp(&build_max_eff_lp(process))
}

/// Stationary urgency distribution when every contest is a coin toss.
pub fn random_stationary_urgency(process: &UrgencyProcess) -> Result<Vec<f64>> {
    let m = process.coin_mixture();
    let n = m.len();
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| mu[i] * m[i][j]).sum()).collect();
        let delta = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        mu = next;
        if delta < 1e-15 {
            return Ok(mu);
        }
    }
    Err(KarmaError::Solver {
        message: "urgency chain did not reach stationarity (periodic?)".into(),
        residual: f64::NAN,
    })
}

/// Analytic long-run average reward of RANDOM: each agent loses half its
/// contests, independently of its urgency.
pub fn random_long_run_reward(process: &UrgencyProcess) -> Result<f64> {
    let mu = random_stationary_urgency(process)?;
    Ok(-0.5 * mu.iter().enumerate().map(|(u, m)| m * process.level(u)).sum::<f64>())
}
