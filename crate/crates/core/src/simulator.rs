//! Finite-population experiment.
//!
//! Every round the `N` agents are split into `N / 2` disjoint pairs by a
//! seeded shuffle. The mechanism picks one winner per pair; the loser pays its
//! urgency as a (negative) reward. Under KARMA the winner pays its bid and the
//! collected karma is handed back integer-exactly: everyone receives
//! `total / N` and a uniformly drawn set of `total % N` agents one extra unit.
//! Urgencies then move according to each agent's outcome.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{max_eff_bound, random_choose, turn_choose, TurnCounter, Winner};
use crate::config::GameConfig;
use crate::equilibrium::{solve_sne, EquilibriumResult};
use crate::error::{KarmaError, Result};
use crate::state::{AgentState, SocialState};
use crate::urgency::UrgencyProcess;
use crate::Outcome;

/// Cumulative bid distributions of an equilibrium policy.
#[derive(Debug, Clone, PartialEq)]
pub struct KarmaPolicy {
    n_levels: usize,
    k_max: usize,
    cdf: Vec<Vec<f64>>,
}

impl KarmaPolicy {
    /// Requires a converged equilibrium.
    pub fn from_equilibrium(result: &EquilibriumResult) -> Result<Self> {
        if !result.converged {
            return Err(KarmaError::Precondition(
                "KARMA needs a converged equilibrium policy".into(),
            ));
        }
        Ok(Self::from_social(&result.social))
    }

    /// Uses the policy of any social state, converged or not.
    pub fn from_social(social: &SocialState) -> Self {
        let cdf = social
            .policy()
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self {
            n_levels: social.n_levels(),
            k_max: social.k_max(),
            cdf,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Samples a bid at `(u, min(k, k_max))`, never above the true balance `k`.
    pub fn sample_bid<R: Rng + ?Sized>(&self, agent: AgentState, rng: &mut R) -> u64 {
        let k_idx = (agent.k as usize).min(self.k_max);
        let cdf = &self.cdf[agent.u * (self.k_max + 1) + k_idx];
        let draw: f64 = rng.random();
        let bid = cdf.iter().position(|&c| draw < c).unwrap_or_else(|| {
            // rounding left the last cumulative value just below 1
            cdf.iter().rposition(|&c| c > 0.0).unwrap_or(0)
        });
        (bid as u64).min(agent.k)
    }
}

/// Allocation rule used in the simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismKind {
    Karma(KarmaPolicy),
    Random,
    Turn,
    /// Serves the more urgent agent (coin on ties); the simulated companion
    /// of the MAX_EFF bound.
    GreedyUrgency,
}

impl MechanismKind {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismKind::Karma(_) => "karma",
            MechanismKind::Random => "random",
            MechanismKind::Turn => "turn",
            MechanismKind::GreedyUrgency => "greedy_urgency",
        }
    }
}

/// Finite agent population with its own seeded generator.
#[derive(Debug, Clone)]
pub struct Population {
    pub agents: Vec<AgentState>,
    pub turn: Vec<TurnCounter>,
    pub reward_sums: Vec<f64>,
    pub rounds_played: Vec<u64>,
    process: UrgencyProcess,
    rng: ChaCha8Rng,
    round: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn total_karma(&self) -> u64 {
        self.agents.iter().map(|a| a.k).sum()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn process(&self) -> &UrgencyProcess {
        &self.process
    }

    /// Counts of agents per karma balance `0..=max`.
    pub fn karma_histogram(&self) -> Vec<u64> {
        let top = self.agents.iter().map(|a| a.k).max().unwrap_or(0) as usize;
        let mut h = vec![0; top + 1];
        for a in &self.agents {
            h[a.k as usize] += 1;
        }
        h
    }
}

/// Everyone starts at the lowest urgency with exactly `k_bar` karma.
pub fn initialize_population(config: &GameConfig, mechanism: &MechanismKind) -> Result<Population> {
    config.validate()?;
    if !config.n_agents.is_multiple_of(2) {
        return Err(KarmaError::param(
            "n_agents",
            "must be even so that every agent is paired",
        ));
    }
    let process = config.process()?;
    if let MechanismKind::Karma(policy) = mechanism {
        if policy.n_levels != process.n_levels() {
            return Err(KarmaError::Precondition(
                "KARMA policy has a different number of urgency levels".into(),
            ));
        }
    }
    let n = config.n_agents;
    Ok(Population {
        agents: vec![
            AgentState {
                u: 0,
                k: config.k_bar as u64
            };
            n
        ],
        turn: vec![TurnCounter::default(); n],
        reward_sums: vec![0.0; n],
        rounds_played: vec![0; n],
        process,
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        round: 0,
    })
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    /// Reward of every agent, indexed like `Population::agents`.
    pub rewards: Vec<f64>,
    /// Urgency index each agent had while competing.
    pub urgencies: Vec<usize>,
    pub payments: u64,
    pub total_karma: u64,
}

/// Plays one round. Rewards are added to the running sums only when `record` is set.
pub fn run_round(pop: &mut Population, mechanism: &MechanismKind, record: bool) -> Result<RoundSummary> {
    let n = pop.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut pop.rng);

    let urgencies: Vec<usize> = pop.agents.iter().map(|a| a.u).collect();
    let mut outcomes = vec![Outcome::Lose; n];
    let mut payments = 0u64;
    for pair in order.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        let winner = match mechanism {
            MechanismKind::Karma(policy) => {
                let bi = policy.sample_bid(pop.agents[i], &mut pop.rng);
                let bj = policy.sample_bid(pop.agents[j], &mut pop.rng);
                let w = match bi.cmp(&bj) {
                    std::cmp::Ordering::Greater => Winner::First,
                    std::cmp::Ordering::Less => Winner::Second,
                    std::cmp::Ordering::Equal => Winner::coin(&mut pop.rng),
                };
                let (payer, bid) = match w {
                    Winner::First => (i, bi),
                    Winner::Second => (j, bj),
                };
                pop.agents[payer].k -= bid;
                payments += bid;
                w
            }
            MechanismKind::Random => random_choose(&mut pop.rng),
            MechanismKind::Turn => {
                let (a, b) = two_mut(&mut pop.turn, i, j);
                turn_choose(a, b, &mut pop.rng)
            }
            MechanismKind::GreedyUrgency => match urgencies[i].cmp(&urgencies[j]) {
                std::cmp::Ordering::Greater => Winner::First,
                std::cmp::Ordering::Less => Winner::Second,
                std::cmp::Ordering::Equal => Winner::coin(&mut pop.rng),
            },
        };
        let (oi, oj) = winner.outcomes();
        outcomes[i] = oi;
        outcomes[j] = oj;
    }

    if payments > 0 {
        let share = payments / n as u64;
        let extra = (payments % n as u64) as usize;
        for a in pop.agents.iter_mut() {
            a.k += share;
        }
        for idx in index::sample(&mut pop.rng, n, extra) {
            pop.agents[idx].k += 1;
        }
    }

    let mut rewards = vec![0.0; n];
    for i in 0..n {
        if outcomes[i] == Outcome::Lose {
            rewards[i] = -pop.process.level(urgencies[i]);
        }
        let draw: f64 = pop.rng.random();
        let row = &pop.process.matrix(outcomes[i])[urgencies[i]];
        pop.agents[i].u = sample_index(row, draw);
    }
    if record {
        for (sum, r) in pop.reward_sums.iter_mut().zip(&rewards) {
            *sum += r;
        }
        pop.rounds_played.iter_mut().for_each(|c| *c += 1);
    }
    pop.round += 1;
    Ok(RoundSummary {
        rewards,
        urgencies,
        payments,
        total_karma: pop.total_karma(),
    })
}

fn two_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = v.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

fn sample_index(probs: &[f64], draw: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Long-run efficiency and ex-post fairness of one simulated mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mechanism: String,
    pub seed: u64,
    pub n_agents: usize,
    pub n_rounds: usize,
    pub burn_in: usize,
    /// Average reward per agent per measured round.
    pub r_bar: f64,
    /// Negative population standard deviation of per-agent average rewards.
    pub beta: f64,
    pub per_agent_average: Vec<f64>,
    /// Empirical urgency distribution over measured rounds.
    pub urgency_marginal: Vec<f64>,
    pub lp_bound: Option<f64>,
    /// Running mean of `r_bar` after each measured round.
    #[serde(skip)]
    pub running_r_bar: Vec<f64>,
    /// Total karma after every round, burn-in included (KARMA only).
    #[serde(skip)]
    pub karma_totals: Vec<u64>,
    /// Karma histogram after every round, burn-in included (KARMA only).
    #[serde(skip)]
    pub karma_histogram: Vec<Vec<u64>>,
}

/// `(r_bar, beta, per-agent averages)` from accumulated rewards over `rounds` rounds.
pub fn compute_metrics(reward_sums: &[f64], rounds: usize) -> (f64, f64, Vec<f64>) {
    let n = reward_sums.len() as f64;
    let averages: Vec<f64> = reward_sums.iter().map(|s| s / rounds as f64).collect();
    let mean = averages.iter().sum::<f64>() / n;
    let var = averages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    (mean, -var.sqrt(), averages)
}

/// Runs `burn_in + n_rounds` rounds and measures the last `n_rounds`.
pub fn run_experiment(config: &GameConfig, mechanism: &MechanismKind) -> Result<MetricsReport> {
    let mut pop = initialize_population(config, mechanism)?;
    let is_karma = matches!(mechanism, MechanismKind::Karma(_));
    let expected_total = (config.n_agents * config.k_bar) as u64;
    let n_levels = pop.process.n_levels();
    let mut running_r_bar = Vec::with_capacity(config.n_rounds);
    let mut karma_totals = Vec::new();
    let mut karma_histogram = Vec::new();
    let mut urgency_counts = vec![0u64; n_levels];
    let mut cumulative = 0.0;
    for t in 0..config.burn_in + config.n_rounds {
        let record = t >= config.burn_in;
        let summary = run_round(&mut pop, mechanism, record)?;
        if is_karma {
            if summary.total_karma != expected_total {
                return Err(KarmaError::Precondition(format!(
                    "karma not conserved in round {t}: {} != {expected_total}",
                    summary.total_karma
                )));
            }
            karma_totals.push(summary.total_karma);
            karma_histogram.push(pop.karma_histogram());
        }
        if record {
            cumulative += summary.rewards.iter().sum::<f64>();
            let measured = (t + 1 - config.burn_in) as f64;
            running_r_bar.push(cumulative / (measured * config.n_agents as f64));
            for u in summary.urgencies {
                urgency_counts[u] += 1;
            }
        }
    }
    let (r_bar, beta, per_agent_average) = compute_metrics(&pop.reward_sums, config.n_rounds);
    let total_obs = urgency_counts.iter().sum::<u64>() as f64;
    Ok(MetricsReport {
        mechanism: mechanism.name().to_string(),
        seed: config.rng_seed,
        n_agents: config.n_agents,
        n_rounds: config.n_rounds,
        burn_in: config.burn_in,
        r_bar,
        beta,
        per_agent_average,
        urgency_marginal: urgency_counts.iter().map(|&c| c as f64 / total_obs).collect(),
        lp_bound: None,
        running_r_bar,
        karma_totals,
        karma_histogram,
    })
}

/// All four mechanisms on common seeds, plus the MAX_EFF bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<MetricsReport>,
    pub lp_bound: f64,
}

/// Simulates KARMA, RANDOM, TURN and GREEDY_URGENCY with the same seed.
pub fn run_comparison(config: &GameConfig, equilibrium: &EquilibriumResult) -> Result<Comparison> {
    let lp_bound = max_eff_bound(&config.process()?)?.value;
    let mechanisms = [
        MechanismKind::Karma(KarmaPolicy::from_equilibrium(equilibrium)?),
        MechanismKind::Random,
        MechanismKind::Turn,
        MechanismKind::GreedyUrgency,
    ];
    let reports = mechanisms
        .iter()
        .map(|m| {
            run_experiment(config, m).map(|mut r| {
                r.lp_bound = Some(lp_bound);
                r
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { reports, lp_bound })
}

/// Solves for the equilibrium and runs the comparison.
pub fn solve_and_compare(config: &GameConfig) -> Result<(EquilibriumResult, Comparison)> {
    let equilibrium = solve_sne(config, None)?;
    let comparison = run_comparison(config, &equilibrium)?;
    Ok((equilibrium, comparison))
}
