use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use karma_core::baselines::{build_max_eff_lp, psi_index};
use karma_core::export::{self, EquilibriumSummary};
use karma_core::lp::{solve_lp, LpProblem};
use karma_core::manifest::RunManifest;
use karma_core::simulator::{run_comparison, run_experiment, KarmaPolicy};
use karma_core::{solve_sne, EquilibriumResult, GameConfig, KarmaError, MechanismKind, Outcome};

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "karma",
    version,
    about = "Karma economy: equilibrium solver, simulator and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Flat `key = value` config file, or a run manifest (JSON) to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mechanism {
    Karma,
    Random,
    Turn,
    GreedyUrgency,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the stationary Nash equilibrium.
    Solve(Common),
    /// Simulate one mechanism on a finite population.
    Simulate {
        #[arg(long, value_enum)]
        mechanism: Mechanism,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate every mechanism on common seeds and report the MAX_EFF bound.
    Compare(Common),
    /// Solve the MAX_EFF linear program.
    Lp {
        #[command(flatten)]
        common: Common,
        /// Solve a hand-written problem (JSON `LpProblem`) instead of MAX_EFF.
        #[arg(long)]
        problem: Option<PathBuf>,
    },
}

enum Failure {
    Karma(KarmaError),
    NotConverged(String),
}

impl From<KarmaError> for Failure {
    fn from(e: KarmaError) -> Self {
        Failure::Karma(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Karma(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Simulate { mechanism, common } => cmd_simulate(mechanism, &common),
        Command::Compare(c) => cmd_compare(&c),
        Command::Lp { common, problem } => cmd_lp(&common, problem.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Karma(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                KarmaError::Io(_) => EXIT_IO,
                KarmaError::Solver { .. } => EXIT_NOT_CONVERGED,
                _ => EXIT_USAGE,
            })
        }
    }
}

/// Reads a flat config, or the config snapshot of a JSON run manifest.
fn load_config(common: &Common) -> Result<GameConfig, KarmaError> {
    let mut config = match &common.config {
        None => GameConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)?;
            if text.trim_start().starts_with('{') {
                let manifest = RunManifest::from_json(&text)?;
                manifest.config.validate()?;
                manifest.config
            } else {
                GameConfig::from_text(&text)?
            }
        }
    };
    if let Some(seed) = common.seed {
        config.rng_seed = seed;
    }
    Ok(config)
}

/// Writes to stdout; a closed pipe (`karma ... | head`) is not an error.
fn emit(bytes: &[u8]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(bytes).and_then(|()| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn solve(config: &GameConfig, manifest: &mut RunManifest) -> Result<EquilibriumResult, KarmaError> {
    let start = Instant::now();
    let result = solve_sne(config, None)?;
    manifest.timings_ms.insert("solve".into(), elapsed_ms(start));
    Ok(result)
}

fn require_converged(result: &EquilibriumResult) -> CmdResult {
    if result.converged {
        return Ok(());
    }
    let last = result.final_record();
    Err(Failure::NotConverged(format!(
        "equilibrium did not converge in {} iterations (exploitability {:e}, stationarity residual {:e})",
        result.iterations, last.exploitability, last.stationarity_residual
    )))
}

fn finish(manifest: &mut RunManifest, out: &Path, outputs: &[PathBuf]) -> Result<(), KarmaError> {
    manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    let path = out.join("manifest.json");
    manifest.outputs.push(path.display().to_string());
    manifest.save(path)
}

fn cmd_solve(common: &Common) -> CmdResult {
    let config = load_config(common)?;
    let mut manifest = RunManifest::new("solve", &config);
    let result = solve(&config, &mut manifest)?;
    let outputs = export::write_equilibrium(&common.out, &config.process()?, &result)?;
    finish(&mut manifest, &common.out, &outputs)?;
    let mut summary = serde_json::to_value(EquilibriumSummary::new(&result)).map_err(KarmaError::from)?;
    summary.as_object_mut().map(|m| m.remove("residuals"));
    emit(
        format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).map_err(KarmaError::from)?
        )
        .as_bytes(),
    )?;
    require_converged(&result)
}

fn cmd_simulate(mechanism: Mechanism, common: &Common) -> CmdResult {
    let config = load_config(common)?;
    let mut manifest = RunManifest::new("simulate", &config);
    let mechanism = match mechanism {
        Mechanism::Karma => {
            let result = solve(&config, &mut manifest)?;
            require_converged(&result)?;
            MechanismKind::Karma(KarmaPolicy::from_equilibrium(&result)?)
        }
        Mechanism::Random => MechanismKind::Random,
        Mechanism::Turn => MechanismKind::Turn,
        Mechanism::GreedyUrgency => MechanismKind::GreedyUrgency,
    };
    manifest.mechanisms.push(mechanism.name().into());
    let start = Instant::now();
    let report = run_experiment(&config, &mechanism)?;
    manifest.timings_ms.insert("simulate".into(), elapsed_ms(start));

    fs::create_dir_all(&common.out)?;
    let mut outputs = Vec::new();
    let json_path = common.out.join("metrics.json");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).map_err(KarmaError::from)?,
    )?;
    outputs.push(json_path);
    if common.format == Format::Csv {
        let p = common.out.join("metrics.csv");
        export::write_metrics_csv(io::BufWriter::new(fs::File::create(&p)?), &report)?;
        outputs.push(p);
    }
    let running = common.out.join("running_reward.csv");
    export::write_running_reward_csv(io::BufWriter::new(fs::File::create(&running)?), &report)?;
    outputs.push(running);
    if !report.karma_histogram.is_empty() {
        let hist = common.out.join("karma_histogram.csv");
        export::write_karma_histogram_csv(io::BufWriter::new(fs::File::create(&hist)?), &report)?;
        outputs.push(hist);
    }
    finish(&mut manifest, &common.out, &outputs)?;
    emit(
        format!(
            "{}\n",
            json!({"mechanism": report.mechanism, "r_bar": report.r_bar, "beta": report.beta})
        )
        .as_bytes(),
    )?;
    Ok(())
}

fn cmd_compare(common: &Common) -> CmdResult {
    let config = load_config(common)?;
    let mut manifest = RunManifest::new("compare", &config);
    let result = solve(&config, &mut manifest)?;
    require_converged(&result)?;
    let start = Instant::now();
    let comparison = run_comparison(&config, &result)?;
    manifest.timings_ms.insert("simulate".into(), elapsed_ms(start));
    manifest.mechanisms = comparison.reports.iter().map(|r| r.mechanism.clone()).collect();

    fs::create_dir_all(&common.out)?;
    let mut rendered = Vec::new();
    let path = match common.format {
        Format::Csv => {
            export::write_comparison_csv(&mut rendered, &comparison)?;
            common.out.join("compare.csv")
        }
        Format::Json => {
            let rows: Vec<_> = comparison
                .reports
                .iter()
                .map(|r| json!({"mechanism": r.mechanism, "r_bar": r.r_bar, "beta": r.beta}))
                .collect();
            let doc = json!({"mechanisms": rows, "lp_bound": comparison.lp_bound});
            rendered = serde_json::to_vec_pretty(&doc).map_err(KarmaError::from)?;
            rendered.push(b'\n');
            common.out.join("compare.json")
        }
    };
    fs::write(&path, &rendered)?;
    finish(&mut manifest, &common.out, &[path])?;
    emit(&rendered)?;
    Ok(())
}

fn cmd_lp(common: &Common, problem: Option<&Path>) -> CmdResult {
    let report = match problem {
        Some(path) => {
            let problem: LpProblem = serde_json::from_str(&fs::read_to_string(path)?).map_err(KarmaError::from)?;
            let solution = solve_lp(&problem)?;
            json!({
                "value": solution.value,
                "x": solution.x,
                "constraint_residual": problem.constraint_residual(&solution.x),
            })
        }
        None => {
            let config = load_config(common)?;
            let process = config.process()?;
            let problem = build_max_eff_lp(&process);
            let solution = solve_lp(&problem)?;
            let psi: Vec<_> = process
                .levels()
                .iter()
                .enumerate()
                .flat_map(|(u, level)| {
                    let x = &solution.x;
                    Outcome::ALL.map(|o| {
                        json!({
                            "urgency_level": level,
                            "outcome": o.index(),
                            "mass": x[psi_index(u, o)],
                        })
                    })
                })
                .collect();
            json!({
                "r_bar_max": solution.value,
                "psi": psi,
                "constraint_residual": problem.constraint_residual(&solution.x),
            })
        }
    };
    emit(format!("{}\n", serde_json::to_string_pretty(&report).map_err(KarmaError::from)?).as_bytes())?;
    Ok(())
}
