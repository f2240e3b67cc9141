//! CSV and JSON writers for equilibria, simulation traces and comparisons.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! value parses back to the identical `f64`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumResult, IterationRecord};
use crate::error::Result;
use crate::simulator::{Comparison, MetricsReport};
use crate::urgency::UrgencyProcess;

pub fn write_policy_csv<W: Write>(mut w: W, process: &UrgencyProcess, result: &EquilibriumResult) -> io::Result<()> {
    writeln!(w, "urgency_level,karma,bid,probability")?;
    let social = &result.social;
    for s in 0..social.n_states() {
        let (u, k) = social.state(s);
        for (b, p) in social.policy()[s].iter().enumerate() {
            writeln!(w, "{},{k},{b},{p}", process.levels()[u])?;
        }
    }
    Ok(())
}

pub fn write_distribution_csv<W: Write>(
    mut w: W,
    process: &UrgencyProcess,
    result: &EquilibriumResult,
) -> io::Result<()> {
    writeln!(w, "urgency_level,karma,mass")?;
    let social = &result.social;
    for (s, m) in social.distribution().iter().enumerate() {
        let (u, k) = social.state(s);
        writeln!(w, "{},{k},{m}", process.levels()[u])?;
    }
    Ok(())
}

pub fn write_residuals_csv<W: Write>(mut w: W, residuals: &[IterationRecord]) -> io::Result<()> {
    writeln!(
        w,
        "iteration,stationarity_residual,exploitability,temperature,mean_karma"
    )?;
    for r in residuals {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iteration, r.stationarity_residual, r.exploitability, r.temperature, r.mean_karma
        )?;
    }
    Ok(())
}

/// Compact JSON summary of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub converged: bool,
    pub iterations: usize,
    pub exploitability: f64,
    pub stationarity_residual: f64,
    pub mean_karma: f64,
    /// Mass at karma `>= k_max - 2`.
    pub truncation_mass: f64,
    pub average_payment: f64,
    pub bellman_residual: f64,
    pub residuals: Vec<IterationRecord>,
}

impl EquilibriumSummary {
    pub fn new(result: &EquilibriumResult) -> Self {
        let last = result.final_record();
        let k_max = result.social.k_max();
        Self {
            converged: result.converged,
            iterations: result.iterations,
            exploitability: last.exploitability,
            stationarity_residual: last.stationarity_residual,
            mean_karma: result.social.mean_karma(),
            truncation_mass: result.social.tail_mass(k_max.saturating_sub(2)),
            average_payment: result.p_bar,
            bellman_residual: result.values.bellman_residual,
            residuals: result.residuals.clone(),
        }
    }
}

/// Writes `policy.csv`, `distribution.csv`, `residuals.csv` and `summary.json`.
pub fn write_equilibrium(dir: &Path, process: &UrgencyProcess, result: &EquilibriumResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths = ["policy.csv", "distribution.csv", "residuals.csv", "summary.json"].map(|f| dir.join(f));
    write_policy_csv(io::BufWriter::new(fs::File::create(&paths[0])?), process, result)?;
    write_distribution_csv(io::BufWriter::new(fs::File::create(&paths[1])?), process, result)?;
    write_residuals_csv(io::BufWriter::new(fs::File::create(&paths[2])?), &result.residuals)?;
    fs::write(
        &paths[3],
        serde_json::to_string_pretty(&EquilibriumSummary::new(result))?,
    )?;
    Ok(paths.to_vec())
}

pub fn write_running_reward_csv<W: Write>(mut w: W, report: &MetricsReport) -> io::Result<()> {
    writeln!(w, "round,r_bar")?;
    for (t, r) in report.running_r_bar.iter().enumerate() {
        writeln!(w, "{},{r}", t + report.burn_in)?;
    }
    Ok(())
}

/// Long format: one row per (round, karma balance) with a nonzero count.
pub fn write_karma_histogram_csv<W: Write>(mut w: W, report: &MetricsReport) -> io::Result<()> {
    writeln!(w, "round,karma,count")?;
    for (t, h) in report.karma_histogram.iter().enumerate() {
        for (k, &c) in h.iter().enumerate().filter(|(_, &c)| c > 0) {
            writeln!(w, "{t},{k},{c}")?;
        }
    }
    Ok(())
}

pub fn write_metrics_csv<W: Write>(mut w: W, report: &MetricsReport) -> io::Result<()> {
    writeln!(w, "mechanism,seed,n_agents,n_rounds,burn_in,r_bar,beta")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        report.mechanism, report.seed, report.n_agents, report.n_rounds, report.burn_in, report.r_bar, report.beta
    )
}

/// One row per mechanism and a final `max_eff_lp` reference row (empty beta).
pub fn write_comparison_csv<W: Write>(mut w: W, comparison: &Comparison) -> io::Result<()> {
    writeln!(w, "mechanism,r_bar,beta")?;
    for r in &comparison.reports {
        writeln!(w, "{},{},{}", r.mechanism, r.r_bar, r.beta)?;
    }
    writeln!(w, "max_eff_lp,{},", comparison.lp_bound)
}
