//! Bidding, outcome, reward and karma-transition primitives of the mean-field game.
//!
//! Everything here is a pure function of a [`SocialState`]. [`MeanField`]
//! caches the population quantities (bid marginal, win probabilities per bid
//! and the average payment) so that the solver can evaluate many transitions
//! against the same social state without recomputing them.

use crate::error::{KarmaError, Result};
use crate::state::SocialState;
use crate::urgency::UrgencyProcess;
use crate::Outcome;

/// Probability that a bid `b` beats an opponent bid `b_prime`; ties are a fair coin.
pub fn outcome_probability(b: usize, b_prime: usize) -> f64 {
    match b.cmp(&b_prime) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 0.5,
    }
}

/// Distribution `nu[b']` of the bid placed by a randomly drawn opponent.
pub fn bid_marginal(social: &SocialState) -> Vec<f64> {
    let mut nu = vec![0.0; social.k_max() + 1];
    for (s, (&m, bids)) in social.distribution().iter().zip(social.policy()).enumerate() {
        if m == 0.0 {
            continue;
        }
        debug_assert_eq!(bids.len(), social.state(s).1 + 1);
        for (b, &p) in bids.iter().enumerate() {
            nu[b] += m * p;
        }
    }
    nu
}

/// Outcome distribution `[P(win), P(lose)]` for bid `b` against the marginal `nu`.
pub fn outcome_distribution(b: usize, nu: &[f64]) -> [f64; 2] {
    let below: f64 = nu.iter().take(b).sum();
    let tie = nu.get(b).copied().unwrap_or(0.0);
    let win = below + 0.5 * tie;
    [win, 1.0 - win]
}

/// Expected immediate reward: the urgency value is lost when yielding.
pub fn immediate_reward(u_value: f64, gamma: [f64; 2]) -> f64 {
    -u_value * gamma[Outcome::Lose.index()]
}

/// Expected karma paid per agent per interaction (winner pays its bid).
pub fn average_payment(social: &SocialState) -> f64 {
    let nu = bid_marginal(social);
    let win = win_probabilities(&nu);
    nu.iter()
        .zip(&win)
        .enumerate()
        .map(|(b, (n, w))| b as f64 * n * w)
        .sum()
}

/// `P(win | b)` for every bid in the support of `nu`.
pub fn win_probabilities(nu: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nu.len());
    let mut below = 0.0;
    for &n in nu {
        out.push(below + 0.5 * n);
        below += n;
    }
    out
}

/// Integer split of the average payment: `floor` karma with probability
/// `f_low`, `ceil` with probability `f_high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Redistribution {
    pub floor: usize,
    pub ceil: usize,
    pub f_low: f64,
    pub f_high: f64,
}

impl Redistribution {
    pub fn new(p_bar: f64) -> Self {
        let ceil = p_bar.ceil();
        let f_low = ceil - p_bar;
        Self {
            floor: p_bar.floor() as usize,
            ceil: ceil as usize,
            f_low,
            f_high: 1.0 - f_low,
        }
    }

    /// `(amount, probability)` branches. When `p_bar` is integral both amounts
    /// coincide and the floor branch has zero probability.
    pub fn branches(&self) -> [(usize, f64); 2] {
        [(self.floor, self.f_low), (self.ceil, self.f_high)]
    }
}

/// Distribution over the next karma balance, truncated at `k_max`.
///
/// Returns `(k_next, probability)` pairs with distinct `k_next` and strictly
/// positive probabilities.
pub fn karma_transition(k: usize, b: usize, outcome: Outcome, p_bar: f64, k_max: usize) -> Result<Vec<(usize, f64)>> {
    if b > k {
        return Err(KarmaError::Precondition(format!("bid {b} exceeds karma {k}")));
    }
    if !p_bar.is_finite() || p_bar < 0.0 {
        return Err(KarmaError::Precondition(format!(
            "average payment {p_bar} must be finite and nonnegative"
        )));
    }
    let base = match outcome {
        Outcome::Win => k - b,
        Outcome::Lose => k,
    };
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(2);
    for (gain, p) in Redistribution::new(p_bar).branches() {
        if p <= 0.0 {
            continue;
        }
        let next = (base + gain).min(k_max);
        match out.iter_mut().find(|(kn, _)| *kn == next) {
            Some(slot) => slot.1 += p,
            None => out.push((next, p)),
        }
    }
    Ok(out)
}

/// Joint distribution over `(u_next, k_next)` after bidding `b` in state `(u, k)`,
/// laid out like [`SocialState::index`].
pub fn state_transition(
    process: &UrgencyProcess,
    social: &SocialState,
    u: usize,
    k: usize,
    b: usize,
) -> Result<Vec<f64>> {
    if b > k {
        return Err(KarmaError::Precondition(format!("bid {b} exceeds karma {k}")));
    }
    let field = MeanField::new(social);
    let mut rho = vec![0.0; social.n_states()];
    field.for_each_transition(process, u, k, b, |s, p| rho[s] += p);
    Ok(rho)
}

/// Population quantities induced by a social state.
#[derive(Debug, Clone)]
pub struct MeanField {
    pub nu: Vec<f64>,
    pub win_prob: Vec<f64>,
    pub p_bar: f64,
    pub redistribution: Redistribution,
    k_max: usize,
}

impl MeanField {
    pub fn new(social: &SocialState) -> Self {
        let nu = bid_marginal(social);
        let win_prob = win_probabilities(&nu);
        let p_bar = nu
            .iter()
            .zip(&win_prob)
            .enumerate()
            .map(|(b, (n, w))| b as f64 * n * w)
            .sum();
        Self {
            redistribution: Redistribution::new(p_bar),
            nu,
            win_prob,
            p_bar,
            k_max: social.k_max(),
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    #[inline]
    pub fn gamma(&self, b: usize) -> [f64; 2] {
        let w = self.win_prob[b];
        [w, 1.0 - w]
    }

    /// Immediate reward `xi[u, b]`.
    #[inline]
    pub fn reward(&self, u_value: f64, b: usize) -> f64 {
        immediate_reward(u_value, self.gamma(b))
    }

    /// Calls `f(index(u_next, k_next), probability)` for each `(outcome,
    /// redistribution branch, u_next)` path. Indices may repeat.
    #[inline]
    pub fn for_each_transition<F: FnMut(usize, f64)>(
        &self,
        process: &UrgencyProcess,
        u: usize,
        k: usize,
        b: usize,
        mut f: F,
    ) {
        let width = self.k_max + 1;
        let gamma = self.gamma(b);
        for outcome in Outcome::ALL {
            let po = gamma[outcome.index()];
            if po == 0.0 {
                continue;
            }
            let base = match outcome {
                Outcome::Win => k - b,
                Outcome::Lose => k,
            };
            let row = &process.matrix(outcome)[u];
            for (gain, pk) in self.redistribution.branches() {
                if pk <= 0.0 {
                    continue;
                }
                let kn = (base + gain).min(self.k_max);
                let w = po * pk;
                for (un, &pu) in row.iter().enumerate() {
                    if pu != 0.0 {
                        f(un * width + kn, w * pu);
                    }
                }
            }
        }
    }

    /// Like [`MeanField::for_each_transition`] but aggregated per outcome and
    /// karma only: calls `f(outcome, k_next, probability)`.
    #[inline]
    pub fn for_each_karma_transition<F: FnMut(Outcome, usize, f64)>(&self, k: usize, b: usize, mut f: F) {
        let gamma = self.gamma(b);
        for outcome in Outcome::ALL {
            let po = gamma[outcome.index()];
            if po == 0.0 {
                continue;
            }
            let base = match outcome {
                Outcome::Win => k - b,
                Outcome::Lose => k,
            };
            for (gain, pk) in self.redistribution.branches() {
                if pk > 0.0 {
                    f(outcome, (base + gain).min(self.k_max), po * pk);
                }
            }
        }
    }
}
