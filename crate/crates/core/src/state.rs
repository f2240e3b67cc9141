//! Agent and population-level state.

use serde::{Deserialize, Serialize};

use crate::error::{KarmaError, Result};

/// Tolerance applied to every probability mass at construction.
pub const MASS_TOL: f64 = 1e-10;

/// Private state of a single agent: urgency level index and karma balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub u: usize,
    pub k: u64,
}

/// State distribution `d` over `(u, k)` together with the shared policy `pi`.
///
/// Karma is truncated to `0..=k_max`. States are laid out urgency-major:
/// `index(u, k) = u * (k_max + 1) + k`. `pi[index(u, k)]` has `k + 1` entries,
/// one per feasible bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialState {
    n_levels: usize,
    k_max: usize,
    d: Vec<f64>,
    pi: Vec<Vec<f64>>,
}

impl SocialState {
    pub fn new(n_levels: usize, k_max: usize, d: Vec<f64>, pi: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = n_levels * (k_max + 1);
        if n_levels == 0 {
            return Err(KarmaError::Precondition(
                "social state needs at least one urgency level".into(),
            ));
        }
        if d.len() != n_states || pi.len() != n_states {
            return Err(KarmaError::Precondition(format!(
                "expected {n_states} states, got d={} pi={}",
                d.len(),
                pi.len()
            )));
        }
        if d.iter().any(|&m| m.is_nan() || m < 0.0) {
            return Err(KarmaError::Precondition(
                "state distribution has a negative entry".into(),
            ));
        }
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(KarmaError::Precondition(format!("state distribution sums to {total}")));
        }
        for (s, row) in pi.iter().enumerate() {
            let k = s % (k_max + 1);
            if row.len() != k + 1 {
                return Err(KarmaError::Precondition(format!(
                    "policy at karma {k} must have {} bid entries, got {}",
                    k + 1,
                    row.len()
                )));
            }
            if row.iter().any(|&m| m.is_nan() || m < 0.0) {
                return Err(KarmaError::Precondition(format!(
                    "policy at state {s} has a negative entry"
                )));
            }
            let t: f64 = row.iter().sum();
            if (t - 1.0).abs() > MASS_TOL {
                return Err(KarmaError::Precondition(format!("policy at state {s} sums to {t}")));
            }
        }
        Ok(Self { n_levels, k_max, d, pi })
    }

    /// Uniform urgency, all karma at `k_bar`, uniform bids over `0..=k`.
    pub fn initial(n_levels: usize, k_max: usize, k_bar: usize) -> Result<Self> {
        if k_bar > k_max {
            return Err(KarmaError::param("k_bar", "must not exceed k_max"));
        }
        let width = k_max + 1;
        let mut d = vec![0.0; n_levels * width];
        for u in 0..n_levels {
            d[u * width + k_bar] = 1.0 / n_levels as f64;
        }
        Self::new(n_levels, k_max, d, uniform_policy(n_levels, k_max))
    }

    /// Replaces the policy, keeping the distribution.
    pub fn with_policy(&self, pi: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.n_levels, self.k_max, self.d.clone(), pi)
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn n_states(&self) -> usize {
        self.d.len()
    }

    #[inline]
    pub fn index(&self, u: usize, k: usize) -> usize {
        u * (self.k_max + 1) + k
    }

    /// Inverse of [`SocialState::index`].
    #[inline]
    pub fn state(&self, s: usize) -> (usize, usize) {
        (s / (self.k_max + 1), s % (self.k_max + 1))
    }

    pub fn distribution(&self) -> &[f64] {
        &self.d
    }

    pub fn policy(&self) -> &[Vec<f64>] {
        &self.pi
    }

    pub fn mass(&self, u: usize, k: usize) -> f64 {
        self.d[self.index(u, k)]
    }

    pub fn bids(&self, u: usize, k: usize) -> &[f64] {
        &self.pi[self.index(u, k)]
    }

    pub fn expected_bid(&self, u: usize, k: usize) -> f64 {
        self.bids(u, k).iter().enumerate().map(|(b, p)| b as f64 * p).sum()
    }

    pub fn mean_karma(&self) -> f64 {
        self.d.iter().enumerate().map(|(s, m)| m * self.state(s).1 as f64).sum()
    }

    /// Probability mass at karma levels `>= k_from`.
    pub fn tail_mass(&self, k_from: usize) -> f64 {
        self.d
            .iter()
            .enumerate()
            .filter(|(s, _)| self.state(*s).1 >= k_from)
            .map(|(_, m)| m)
            .sum()
    }

    pub(crate) fn set_distribution(&mut self, d: Vec<f64>) {
        debug_assert_eq!(d.len(), self.d.len());
        self.d = d;
    }

    pub(crate) fn set_policy(&mut self, pi: Vec<Vec<f64>>) {
        debug_assert_eq!(pi.len(), self.pi.len());
        self.pi = pi;
    }
}

pub fn uniform_policy(n_levels: usize, k_max: usize) -> Vec<Vec<f64>> {
    (0..n_levels)
        .flat_map(|_| (0..=k_max).map(|k| vec![1.0 / (k + 1) as f64; k + 1]))
        .collect()
}

/// Total-variation distance between two masses on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
