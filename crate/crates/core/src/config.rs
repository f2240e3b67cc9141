//! Game, solver and experiment configuration.
//!
//! The on-disk format is a flat list of `key = value` lines with `#`
//! comments; lists and matrices are bracketed, e.g.
//!
//! ```text
//! alpha = 0.98
//! urgency_levels = [1, 2, 4, 8, 16]
//! # optional explicit matrices, rows indexed by the current level
//! # phi_win = [[1.0]]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KarmaError, Result};
use crate::urgency::UrgencyProcess;

/// Parameters of the equilibrium iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial softmax temperature of the perturbed best response.
    pub br_temperature: f64,
    /// Multiplicative temperature decay per outer iteration.
    pub temperature_decay: f64,
    /// Lower bound on the temperature.
    pub temperature_floor: f64,
    /// Damping applied to both the policy and distribution updates.
    pub step_size: f64,
    pub tol_policy: f64,
    pub tol_distribution: f64,
    /// Sup-norm Bellman residual accepted from policy evaluation.
    pub tol_value: f64,
    pub max_outer_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            br_temperature: 2.0,
            temperature_decay: 0.97,
            temperature_floor: 1e-5,
            step_size: 0.2,
            tol_policy: 1e-4,
            tol_distribution: 1e-6,
            tol_value: 1e-9,
            max_outer_iters: 2000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        positive("br_temperature", self.br_temperature)?;
        positive("temperature_floor", self.temperature_floor)?;
        positive("tol_policy", self.tol_policy)?;
        positive("tol_distribution", self.tol_distribution)?;
        positive("tol_value", self.tol_value)?;
        if !(self.temperature_decay > 0.0 && self.temperature_decay <= 1.0) {
            return Err(KarmaError::param("temperature_decay", "must lie in (0, 1]"));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(KarmaError::param("step_size", "must lie in (0, 1]"));
        }
        if self.max_outer_iters == 0 {
            return Err(KarmaError::param("max_outer_iters", "must be positive"));
        }
        Ok(())
    }
}

/// All scalars describing one game instance and the experiments run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub urgency_levels: Vec<u32>,
    pub epsilon: f64,
    /// Explicit urgency matrices; when both are set they replace the
    /// epsilon-generated process.
    pub phi_win: Option<Vec<Vec<f64>>>,
    pub phi_lose: Option<Vec<Vec<f64>>>,
    pub alpha: f64,
    pub k_bar: usize,
    pub k_max: usize,
    pub n_agents: usize,
    pub n_rounds: usize,
    /// Rounds simulated before metrics start accumulating.
    pub burn_in: usize,
    pub rng_seed: u64,
    pub solver: SolverConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            urgency_levels: vec![1, 2, 4, 8, 16],
            epsilon: 0.04,
            phi_win: None,
            phi_lose: None,
            alpha: 0.98,
            k_bar: 10,
            k_max: 40,
            n_agents: 1000,
            n_rounds: 1000,
            burn_in: 100,
            rng_seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

/// Flat mirror of [`GameConfig`] used for the text format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    urgency_levels: Vec<u32>,
    epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_win: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi_lose: Option<Vec<Vec<f64>>>,
    alpha: f64,
    k_bar: usize,
    k_max: usize,
    n_agents: usize,
    n_rounds: usize,
    burn_in: usize,
    rng_seed: u64,
    br_temperature: f64,
    temperature_decay: f64,
    temperature_floor: f64,
    step_size: f64,
    tol_policy: f64,
    tol_distribution: f64,
    tol_value: f64,
    max_outer_iters: usize,
}

impl Default for FlatConfig {
    fn default() -> Self {
        GameConfig::default().into()
    }
}

impl From<GameConfig> for FlatConfig {
    fn from(c: GameConfig) -> Self {
        let s = c.solver;
        Self {
            urgency_levels: c.urgency_levels,
            epsilon: c.epsilon,
            phi_win: c.phi_win,
            phi_lose: c.phi_lose,
            alpha: c.alpha,
            k_bar: c.k_bar,
            k_max: c.k_max,
            n_agents: c.n_agents,
            n_rounds: c.n_rounds,
            burn_in: c.burn_in,
            rng_seed: c.rng_seed,
            br_temperature: s.br_temperature,
            temperature_decay: s.temperature_decay,
            temperature_floor: s.temperature_floor,
            step_size: s.step_size,
            tol_policy: s.tol_policy,
            tol_distribution: s.tol_distribution,
            tol_value: s.tol_value,
            max_outer_iters: s.max_outer_iters,
        }
    }
}

impl From<FlatConfig> for GameConfig {
    fn from(f: FlatConfig) -> Self {
        Self {
            urgency_levels: f.urgency_levels,
            epsilon: f.epsilon,
            phi_win: f.phi_win,
            phi_lose: f.phi_lose,
            alpha: f.alpha,
            k_bar: f.k_bar,
            k_max: f.k_max,
            n_agents: f.n_agents,
            n_rounds: f.n_rounds,
            burn_in: f.burn_in,
            rng_seed: f.rng_seed,
            solver: SolverConfig {
                br_temperature: f.br_temperature,
                temperature_decay: f.temperature_decay,
                temperature_floor: f.temperature_floor,
                step_size: f.step_size,
                tol_policy: f.tol_policy,
                tol_distribution: f.tol_distribution,
                tol_value: f.tol_value,
                max_outer_iters: f.max_outer_iters,
            },
        }
    }
}

impl GameConfig {
    /// Parses and validates the flat text format. Missing keys take their
    /// default (case-study) values.
    pub fn from_text(text: &str) -> Result<Self> {
        let flat: FlatConfig = toml::from_str(text).map_err(|e| KarmaError::Config(e.message().to_string()))?;
        let config = GameConfig::from(flat);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Renders the flat text format; `from_text(to_text())` is lossless.
    pub fn to_text(&self) -> String {
        toml::to_string(&FlatConfig::from(self.clone())).expect("flat config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(KarmaError::param(
                "alpha",
                format!("must lie in [0, 1), got {}", self.alpha),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(KarmaError::param(
                "epsilon",
                format!("must lie in (0, 1), got {}", self.epsilon),
            ));
        }
        if self.k_max <= self.k_bar || self.k_max < 2 * self.k_bar {
            return Err(KarmaError::param(
                "k_max",
                format!("must exceed k_bar and be at least 2*k_bar = {}", 2 * self.k_bar),
            ));
        }
        if self.n_agents == 0 {
            return Err(KarmaError::param("n_agents", "must be positive"));
        }
        if self.n_rounds == 0 {
            return Err(KarmaError::param("n_rounds", "must be positive"));
        }
        self.solver.validate()?;
        self.process().map(|_| ())
    }

    /// The urgency process described by this configuration.
    pub fn process(&self) -> Result<UrgencyProcess> {
        match (&self.phi_win, &self.phi_lose) {
            (Some(win), Some(lose)) => UrgencyProcess::from_matrices(&self.urgency_levels, win.clone(), lose.clone()),
            (None, None) => UrgencyProcess::endogenous(&self.urgency_levels, self.epsilon),
            (Some(_), None) => Err(KarmaError::param("phi_lose", "must be given together with phi_win")),
            (None, Some(_)) => Err(KarmaError::param("phi_win", "must be given together with phi_lose")),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KarmaError::param(field, format!("must be positive, got {v}")))
    }
}
