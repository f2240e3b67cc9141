//! Karma economy for ride-hailing allocation with outcome-dependent urgency.
//!
//! Agents hold an artificial, conserved currency (karma) and bid it for
//! trips. Urgency escalates while an agent keeps yielding and resets once it
//! is served. The crate provides
//!
//! - the mean-field game primitives ([`model`], [`urgency`], [`state`]),
//! - a stationary Nash equilibrium solver ([`equilibrium`]),
//! - the RANDOM and TURN benchmarks and the MAX_EFF linear-programming bound
//!   ([`baselines`], [`lp`]),
//! - a finite-population simulator with efficiency and fairness metrics
//!   ([`simulator`]),
//! - CSV/JSON export and run manifests ([`export`], [`manifest`]).

pub mod baselines;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod export;
pub mod lp;
pub mod manifest;
pub mod model;
pub mod simulator;
pub mod state;
pub mod urgency;

use serde::{Deserialize, Serialize};

pub use config::{GameConfig, SolverConfig};
pub use equilibrium::{solve_sne, EquilibriumResult, Game};
pub use error::{KarmaError, Result};
pub use simulator::{MechanismKind, MetricsReport};

pub use state::{AgentState, SocialState};
pub use urgency::UrgencyProcess;

/// Result of one pairwise contest from the ego agent's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Served (o = 0).
    Win,
    /// Yielded (o = 1).
    Lose,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Win, Outcome::Lose];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Outcome::Win => 0,
            Outcome::Lose => 1,
        }
    }
}
