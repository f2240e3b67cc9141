//! Stationary Nash equilibrium of the karma bidding game.
//!
//! The solver alternates four steps until the policy is an (approximate)
//! best response at every state and the state distribution is stationary:
//!
//! 1. policy evaluation: `V = R + alpha * P V` for the current social state,
//! 2. single-stage deviation values `Q[u, k, b]`,
//! 3. a damped logit (softmax) best response with an annealed temperature,
//! 4. a damped push-forward of the state distribution through `P`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{GameConfig, SolverConfig};
use crate::error::{KarmaError, Result};
use crate::model::MeanField;
use crate::state::{total_variation, SocialState};
use crate::urgency::UrgencyProcess;
use crate::Outcome;

/// Static description of the game the solver works on.
#[derive(Debug, Clone)]
pub struct Game {
    pub process: UrgencyProcess,
    pub alpha: f64,
    pub k_bar: usize,
    pub k_max: usize,
}

impl Game {
    pub fn from_config(config: &GameConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            process: config.process()?,
            alpha: config.alpha,
            k_bar: config.k_bar,
            k_max: config.k_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.process.n_levels() * (self.k_max + 1)
    }

    pub fn initial_state(&self) -> Result<SocialState> {
        SocialState::initial(self.process.n_levels(), self.k_max, self.k_bar)
    }

    fn check_shape(&self, social: &SocialState) -> Result<()> {
        if social.n_levels() != self.process.n_levels() || social.k_max() != self.k_max {
            return Err(KarmaError::Precondition(format!(
                "social state shape ({} levels, k_max {}) does not match the game ({} levels, k_max {})",
                social.n_levels(),
                social.k_max(),
                self.process.n_levels(),
                self.k_max
            )));
        }
        Ok(())
    }
}

/// Value-function quantities for one social state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTables {
    /// Expected discounted reward per state.
    pub v: Vec<f64>,
    /// Expected immediate reward per state.
    pub r: Vec<f64>,
    /// Row-major transition kernel, `p[from * n + to]`.
    pub p: Vec<f64>,
    pub n_states: usize,
    /// Sup-norm residual of the Bellman identity.
    pub bellman_residual: f64,
}

impl ValueTables {
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.p[from * self.n_states + to]
    }
}

/// Single-stage deviation values: `q[state][b]` for every feasible bid.
pub type QTable = Vec<Vec<f64>>;

/// Expected immediate reward and transition kernel induced by the policy.
pub fn reward_and_kernel(game: &Game, social: &SocialState) -> Result<(Vec<f64>, Vec<f64>)> {
    game.check_shape(social)?;
    let field = MeanField::new(social);
    let n = social.n_states();
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        let (u, k) = social.state(s);
        let u_value = game.process.level(u);
        let row = &mut p[s * n..(s + 1) * n];
        for (b, &pb) in social.policy()[s].iter().enumerate() {
            if pb == 0.0 {
                continue;
            }
            r[s] += pb * field.reward(u_value, b);
            field.for_each_transition(&game.process, u, k, b, |t, w| row[t] += pb * w);
        }
    }
    Ok((r, p))
}

/// Solves `V = R + alpha * P V` for the current social state.
pub fn policy_evaluation(game: &Game, social: &SocialState, tol_value: f64) -> Result<ValueTables> {
    let (r, p) = reward_and_kernel(game, social)?;
    let n = social.n_states();
    let alpha = game.alpha;
    let system = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - alpha * p[i * n + j]);
    let rhs = DVector::from_column_slice(&r);
    let v = system.lu().solve(&rhs).ok_or_else(|| KarmaError::Solver {
        message: "policy evaluation system is singular".into(),
        residual: f64::INFINITY,
    })?;
    let v: Vec<f64> = v.iter().copied().collect();
    let bellman_residual = bellman_residual(&v, &r, &p, alpha);
    if bellman_residual.is_nan() || bellman_residual > tol_value {
        return Err(KarmaError::Solver {
            message: "policy evaluation residual above tolerance".into(),
            residual: bellman_residual,
        });
    }
    Ok(ValueTables {
        v,
        r,
        p,
        n_states: n,
        bellman_residual,
    })
}

fn bellman_residual(v: &[f64], r: &[f64], p: &[f64], alpha: f64) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let pv: f64 = p[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
            (r[i] + alpha * pv - v[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// `Q[u, k, b] = xi[u, b] + alpha * E[V(u+, k+) | u, k, b]` for every feasible bid.
pub fn q_function(game: &Game, values: &ValueTables, social: &SocialState) -> Result<QTable> {
    game.check_shape(social)?;
    let field = MeanField::new(social);
    let n_levels = game.process.n_levels();
    let width = game.k_max + 1;
    // continuation[o][u][k+] = sum_{u+} Phi[u+ | u, o] V[u+, k+]
    let continuation: Vec<Vec<Vec<f64>>> = Outcome::ALL
        .iter()
        .map(|&o| {
            let m = game.process.matrix(o);
            (0..n_levels)
                .map(|u| {
                    (0..width)
                        .map(|kn| (0..n_levels).map(|un| m[u][un] * values.v[un * width + kn]).sum())
                        .collect()
                })
                .collect()
        })
        .collect();
    let q = (0..social.n_states())
        .map(|s| {
            let (u, k) = social.state(s);
            let u_value = game.process.level(u);
            (0..=k)
                .map(|b| {
                    let mut future = 0.0;
                    field.for_each_karma_transition(k, b, |o, kn, w| future += w * continuation[o.index()][u][kn]);
                    field.reward(u_value, b) + game.alpha * future
                })
                .collect()
        })
        .collect();
    Ok(q)
}

/// Logit response: bids weighted by `exp(Q / temperature)`.
pub fn perturbed_best_response(q: &QTable, temperature: f64) -> Vec<Vec<f64>> {
    assert!(temperature > 0.0, "temperature must be positive");
    q.iter()
        .map(|row| {
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = row.iter().map(|&x| ((x - top) / temperature).exp()).collect();
            let total: f64 = weights.iter().sum();
            weights.into_iter().map(|w| w / total).collect()
        })
        .collect()
}

/// Largest one-shot gain any state can obtain by switching to its best bid.
pub fn exploitability(q: &QTable, social: &SocialState) -> f64 {
    q.iter()
        .zip(social.policy())
        .map(|(row, bids)| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let current: f64 = row.iter().zip(bids).map(|(a, b)| a * b).sum();
            (best - current).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// `d P` for a row-major kernel.
pub fn push_forward(d: &[f64], p: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut next = vec![0.0; n];
    for (s, &m) in d.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (t, &pt) in p[s * n..(s + 1) * n].iter().enumerate() {
            next[t] += m * pt;
        }
    }
    next
}

/// Damped step `d <- (1 - step) d + step * d P` under the current social state.
pub fn stationary_distribution_step(game: &Game, social: &SocialState, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(KarmaError::param("step_size", "must lie in (0, 1]"));
    }
    let (_, p) = reward_and_kernel(game, social)?;
    Ok(mix(
        social.distribution(),
        &push_forward(social.distribution(), &p),
        step,
    ))
}

fn mix(old: &[f64], new: &[f64], step: f64) -> Vec<f64> {
    old.iter().zip(new).map(|(a, b)| (1.0 - step) * a + step * b).collect()
}

/// Diagnostics recorded at every outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total-variation distance between `d` and `d P`.
    pub stationarity_residual: f64,
    pub exploitability: f64,
    pub temperature: f64,
    pub mean_karma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub social: SocialState,
    pub values: ValueTables,
    pub q: QTable,
    pub p_bar: f64,
    pub residuals: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl EquilibriumResult {
    pub fn final_record(&self) -> &IterationRecord {
        self.residuals.last().expect("at least one iteration is recorded")
    }
}

/// Runs the damped smoothed best-response dynamics from `initial` (or the
/// default start) until both residuals pass their tolerances.
///
/// Non-convergence is reported through `converged = false`, not an error.
pub fn solve_sne(config: &GameConfig, initial: Option<SocialState>) -> Result<EquilibriumResult> {
    let game = Game::from_config(config)?;
    solve_game(&game, &config.solver, initial)
}

pub fn solve_game(game: &Game, solver: &SolverConfig, initial: Option<SocialState>) -> Result<EquilibriumResult> {
    solver.validate()?;
    let mut social = match initial {
        Some(s) => {
            game.check_shape(&s)?;
            s
        }
        None => game.initial_state()?,
    };
    let step = solver.step_size;
    let mut temperature = solver.br_temperature.max(solver.temperature_floor);
    let mut residuals = Vec::new();
    let mut iteration = 0;
    loop {
        let values = policy_evaluation(game, &social, solver.tol_value)?;
        let q = q_function(game, &values, &social)?;
        let next_d = push_forward(social.distribution(), &values.p);
        let record = IterationRecord {
            iteration,
            stationarity_residual: total_variation(social.distribution(), &next_d),
            exploitability: exploitability(&q, &social),
            temperature,
            mean_karma: social.mean_karma(),
        };
        residuals.push(record);
        let converged =
            record.exploitability <= solver.tol_policy && record.stationarity_residual <= solver.tol_distribution;
        if converged || iteration + 1 >= solver.max_outer_iters {
            let p_bar = MeanField::new(&social).p_bar;
            return Ok(EquilibriumResult {
                social,
                values,
                q,
                p_bar,
                residuals,
                converged,
                iterations: iteration + 1,
            });
        }
        let response = perturbed_best_response(&q, temperature);
        let policy = social
            .policy()
            .iter()
            .zip(&response)
            .map(|(old, new)| mix(old, new, step))
            .collect();
        social.set_policy(policy);
        social.set_distribution(mix(social.distribution(), &next_d, step));
        temperature = (temperature * solver.temperature_decay).max(solver.temperature_floor);
        iteration += 1;
    }
}
