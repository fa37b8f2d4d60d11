//! Batch front end: classify hypotheses, run tests, build confidence
//! sequences, and execute verification or Monte Carlo suites, emitting CSV.
//!
//! Exit codes: `0` success, `1` usage error, `2` quantitative verification
//! failure (an optimality residual or a Monte Carlo rate above its bound), so
//! CI can tell "misuse" from "math broke".
//!
//! Every flag can also be supplied through `--config file.json` (same key
//! names, snake_case); explicit flags override file values, and unknown keys
//! in the file are rejected by name. The `EVCLASS_THREADS` environment
//! variable caps the worker pool used by `cs` and `simulate`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Deserialize;

use evclass::betting::StrategySpec;
use evclass::config::Tolerances;
use evclass::game::{run_test, write_trajectory_csv};
use evclass::hypothesis::{Classification, Hypothesis};
use evclass::meanest::{bounded_mean_cs, heavy_tail_cs, CsOptions, MuGrid};
use evclass::sim::{
    coverage, optimality_sweep, type_one_error, witness_generator, CsFamily,
};
use evclass::stream::{read_stream_file, GeneratorSpec};

/// Fatal CLI outcomes, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad files, out-of-range parameters. Exit 1.
    Usage(String),
    /// A quantitative verification bound was violated. Exit 2.
    Verification(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "evclass",
    version,
    about = "Testing by betting with dual e-classes: classification, games, confidence sequences"
)]
struct Cli {
    /// JSON file providing defaults for any flag; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Feasibility tolerance override (default 1e-9).
    #[arg(long, global = true)]
    tol_feasibility: Option<f64>,
    /// Rank / relative-interior threshold override (default 1e-10).
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Classify a hypothesis and report its minimal-constraint dimension.
    Classify {
        /// Hypothesis definition file (JSON).
        #[arg(long, value_name = "FILE")]
        hypothesis: Option<PathBuf>,
    },
    /// Run one testing game on a stream and write the trajectory.
    Test {
        #[arg(long, value_name = "FILE")]
        hypothesis: Option<PathBuf>,
        /// Strategy spec: a JSON file path or an inline JSON object.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        /// Observation CSV with columns x1..xn.
        #[arg(long, value_name = "FILE")]
        stream: Option<PathBuf>,
        /// Synthetic generator: JSON file path or inline JSON (needs --seed).
        #[arg(long, value_name = "SPEC")]
        gen: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Observations to draw from --gen.
        #[arg(long)]
        rounds: Option<usize>,
        /// Stop after this many rounds even if the stream is longer.
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Trajectory CSV path.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Build an anytime-valid confidence sequence over a mu grid.
    Cs {
        /// Family: "bounded" (default) or "heavy-tail".
        #[arg(long)]
        family: Option<String>,
        /// Candidate means: "lo:hi:step" or "v1,v2,...".
        #[arg(long)]
        mu_grid: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_name = "FILE")]
        stream: Option<PathBuf>,
        #[arg(long, value_name = "SPEC")]
        gen: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        strategy: Option<String>,
        /// Output CSV path (required).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Sample-grid step for the bounded tabulation (default 1e-3).
        #[arg(long)]
        bounded_step: Option<f64>,
        /// Sample-grid step for the heavy-tail tabulation (default 0.1).
        #[arg(long)]
        heavy_step: Option<f64>,
        /// Truncation radius for the heavy-tail tabulation (default 50).
        #[arg(long)]
        truncation: Option<f64>,
    },
    /// Randomized finite-scale optimality verification of the maximality
    /// oracle; exits 2 if any residual or re-solve check fails.
    VerifyOptimality {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Largest random grid size (default 6, capped at 12).
        #[arg(long)]
        max_grid: Option<usize>,
        /// Largest random constraint dimension (default 2, capped at 3).
        #[arg(long)]
        max_dim: Option<usize>,
    },
    /// Seeded Monte Carlo: type-I error of a test or coverage of a
    /// confidence sequence; exits 2 if the three-sigma bound is violated.
    Simulate {
        /// "type1", "coverage-bounded", or "coverage-heavy".
        #[arg(long)]
        task: Option<String>,
        #[arg(long, value_name = "FILE")]
        hypothesis: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Stream distribution; defaults to the hypothesis's matching
        /// witness for type1.
        #[arg(long, value_name = "SPEC")]
        gen: Option<String>,
        #[arg(long)]
        mu_grid: Option<String>,
        #[arg(long)]
        true_mean: Option<f64>,
        #[arg(long)]
        bounded_step: Option<f64>,
        #[arg(long)]
        heavy_step: Option<f64>,
        #[arg(long)]
        truncation: Option<f64>,
    },
}

/// Optional defaults file; same keys as the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    hypothesis: Option<PathBuf>,
    strategy: Option<String>,
    delta: Option<f64>,
    stream: Option<PathBuf>,
    gen: Option<String>,
    seed: Option<u64>,
    rounds: Option<usize>,
    max_rounds: Option<usize>,
    mu_grid: Option<String>,
    output: Option<PathBuf>,
    family: Option<String>,
    task: Option<String>,
    trials: Option<usize>,
    replicates: Option<usize>,
    true_mean: Option<f64>,
    max_grid: Option<usize>,
    max_dim: Option<usize>,
    bounded_step: Option<f64>,
    heavy_step: Option<f64>,
    truncation: Option<f64>,
    tol_feasibility: Option<f64>,
    tol_rank: Option<f64>,
}

/// Fully resolved run configuration.
#[derive(Debug)]
pub struct RunConfig {
    command: ResolvedCommand,
    tolerances: Tolerances,
}

#[derive(Debug)]
enum ResolvedCommand {
    Classify {
        hypothesis: PathBuf,
    },
    Test {
        hypothesis: PathBuf,
        strategy: StrategySpec,
        delta: f64,
        stream: StreamSource,
        max_rounds: Option<usize>,
        output: Option<PathBuf>,
    },
    Cs {
        family: Family,
        mu_grid: MuGrid,
        delta: f64,
        stream: StreamSource,
        strategy: StrategySpec,
        output: PathBuf,
        opts: CsOptions,
    },
    VerifyOptimality {
        trials: usize,
        seed: u64,
        max_grid: usize,
        max_dim: usize,
    },
    SimulateType1 {
        hypothesis: PathBuf,
        strategy: StrategySpec,
        delta: f64,
        rounds: usize,
        replicates: usize,
        seed: u64,
        gen: Option<GeneratorSpec>,
    },
    SimulateCoverage {
        family: Family,
        true_mean: f64,
        mu_grid: MuGrid,
        strategy: StrategySpec,
        delta: f64,
        rounds: usize,
        replicates: usize,
        seed: u64,
        gen: GeneratorSpec,
        opts: CsOptions,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Bounded,
    HeavyTail,
}

#[derive(Debug)]
enum StreamSource {
    Csv(PathBuf),
    Generated {
        spec: GeneratorSpec,
        seed: u64,
        rounds: usize,
    },
}

impl StreamSource {
    fn materialize(&self) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            StreamSource::Csv(path) => read_stream_file(path).map_err(CliError::usage),
            StreamSource::Generated { spec, seed, rounds } => {
                spec.generate(*seed, *rounds).map_err(CliError::usage)
            }
        }
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{key}")))
}

fn check_delta(delta: f64) -> Result<f64, CliError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        Err(CliError::Usage(format!(
            "delta must lie in (0,1), got {delta}"
        )))
    }
}

/// Parses a strategy or generator argument: inline JSON if it starts with
/// `{`, a file path otherwise.
fn load_json_or_path<T: serde::de::DeserializeOwned>(arg: &str, key: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| CliError::Usage(format!("cannot read --{key} file {arg:?}: {e}")))?
    };
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid --{key} spec: {e}")))
}

fn parse_mu_grid(spec: &str) -> Result<MuGrid, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = if parts.len() == 3 {
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad mu-grid bound {:?}", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad mu-grid bound {:?}", parts[1])))?;
        let step: f64 = parts[2]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad mu-grid step {:?}", parts[2])))?;
        MuGrid::range(lo, hi, step)
    } else {
        let vals = spec
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad mu-grid value {v:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        MuGrid::new(vals)
    };
    grid.map_err(|e| CliError::Usage(format!("invalid mu grid {spec:?}: {e}")))
}

fn parse_family(name: Option<String>) -> Result<Family, CliError> {
    match name.as_deref() {
        None | Some("bounded") => Ok(Family::Bounded),
        Some("heavy-tail") | Some("heavy_tail") => Ok(Family::HeavyTail),
        Some(other) => Err(CliError::Usage(format!(
            "unknown family {other:?} (expected bounded | heavy-tail)"
        ))),
    }
}

fn resolve_stream(
    stream: Option<PathBuf>,
    gen: Option<String>,
    seed: Option<u64>,
    rounds: Option<usize>,
) -> Result<StreamSource, CliError> {
    match (stream, gen) {
        (Some(path), None) => Ok(StreamSource::Csv(path)),
        (None, Some(spec)) => {
            let spec: GeneratorSpec = load_json_or_path(&spec, "gen")?;
            let seed =
                seed.ok_or_else(|| CliError::Usage("--seed is required with --gen".into()))?;
            let rounds =
                rounds.ok_or_else(|| CliError::Usage("--rounds is required with --gen".into()))?;
            Ok(StreamSource::Generated { spec, seed, rounds })
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--stream and --gen are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "one of --stream or --gen is required".into(),
        )),
    }
}

fn cs_options(
    bounded_step: Option<f64>,
    heavy_step: Option<f64>,
    truncation: Option<f64>,
) -> CsOptions {
    let mut opts = CsOptions::default();
    if let Some(v) = bounded_step {
        opts.bounded_step = v;
    }
    if let Some(v) = heavy_step {
        opts.heavy_step = v;
    }
    if let Some(v) = truncation {
        opts.truncation = v;
    }
    opts
}

/// Parses argv (plus the optional `--config` defaults file) into a resolved
/// run configuration. Flags override file values; unknown flags and unknown
/// file keys are rejected by name.
pub fn parse_config<I, S>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::usage)?;
    resolve(cli)
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file: ConfigFile = match &cli.config {
        None => ConfigFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {path:?}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config file: {e}")))?
        }
    };
    let tolerances = Tolerances {
        feasibility: cli
            .tol_feasibility
            .or(file.tol_feasibility)
            .unwrap_or(Tolerances::default().feasibility),
        rank: cli
            .tol_rank
            .or(file.tol_rank)
            .unwrap_or(Tolerances::default().rank),
    };
    if tolerances.feasibility <= 0.0 || tolerances.rank <= 0.0 {
        return Err(CliError::Usage(
            "tolerances must be strictly positive".into(),
        ));
    }

    let command = match cli.command {
        CommandArgs::Classify { hypothesis } => ResolvedCommand::Classify {
            hypothesis: require(hypothesis.or(file.hypothesis), "hypothesis")?,
        },
        CommandArgs::Test {
            hypothesis,
            strategy,
            delta,
            stream,
            gen,
            seed,
            rounds,
            max_rounds,
            output,
        } => {
            let strategy_arg = require(strategy.or(file.strategy), "strategy")?;
            ResolvedCommand::Test {
                hypothesis: require(hypothesis.or(file.hypothesis), "hypothesis")?,
                strategy: load_json_or_path(&strategy_arg, "strategy")?,
                delta: check_delta(require(delta.or(file.delta), "delta")?)?,
                stream: resolve_stream(
                    stream.or(file.stream),
                    gen.or(file.gen),
                    seed.or(file.seed),
                    rounds.or(file.rounds),
                )?,
                max_rounds: max_rounds.or(file.max_rounds),
                output,
            }
        }
        CommandArgs::Cs {
            family,
            mu_grid,
            delta,
            stream,
            gen,
            seed,
            rounds,
            strategy,
            output,
            bounded_step,
            heavy_step,
            truncation,
        } => {
            let strategy_arg = require(strategy.or(file.strategy), "strategy")?;
            let grid_arg = require(mu_grid.or(file.mu_grid), "mu-grid")?;
            ResolvedCommand::Cs {
                family: parse_family(family.or(file.family))?,
                mu_grid: parse_mu_grid(&grid_arg)?,
                delta: check_delta(require(delta.or(file.delta), "delta")?)?,
                stream: resolve_stream(
                    stream.or(file.stream),
                    gen.or(file.gen),
                    seed.or(file.seed),
                    rounds.or(file.rounds),
                )?,
                strategy: load_json_or_path(&strategy_arg, "strategy")?,
                output: require(output.or(file.output), "output")?,
                opts: cs_options(
                    bounded_step.or(file.bounded_step),
                    heavy_step.or(file.heavy_step),
                    truncation.or(file.truncation),
                ),
            }
        }
        CommandArgs::VerifyOptimality {
            trials,
            seed,
            max_grid,
            max_dim,
        } => {
            let max_grid = max_grid.or(file.max_grid).unwrap_or(6);
            let max_dim = max_dim.or(file.max_dim).unwrap_or(2);
            if !(2..=12).contains(&max_grid) || !(1..=3).contains(&max_dim) {
                return Err(CliError::Usage(
                    "verify-optimality caps: 2 <= max-grid <= 12, 1 <= max-dim <= 3".into(),
                ));
            }
            ResolvedCommand::VerifyOptimality {
                trials: trials.or(file.trials).unwrap_or(500),
                seed: seed.or(file.seed).unwrap_or(0),
                max_grid,
                max_dim,
            }
        }
        CommandArgs::Simulate {
            task,
            hypothesis,
            strategy,
            delta,
            rounds,
            replicates,
            seed,
            gen,
            mu_grid,
            true_mean,
            bounded_step,
            heavy_step,
            truncation,
        } => {
            let task = require(task.or(file.task), "task")?;
            let strategy_arg = require(strategy.or(file.strategy), "strategy")?;
            let strategy: StrategySpec = load_json_or_path(&strategy_arg, "strategy")?;
            let delta = check_delta(require(delta.or(file.delta), "delta")?)?;
            let rounds = require(rounds.or(file.rounds), "rounds")?;
            let replicates = require(replicates.or(file.replicates), "replicates")?;
            let seed = require(seed.or(file.seed), "seed")?;
            let gen = gen
                .or(file.gen)
                .map(|g| load_json_or_path::<GeneratorSpec>(&g, "gen"))
                .transpose()?;
            match task.as_str() {
                "type1" => ResolvedCommand::SimulateType1 {
                    hypothesis: require(hypothesis.or(file.hypothesis), "hypothesis")?,
                    strategy,
                    delta,
                    rounds,
                    replicates,
                    seed,
                    gen,
                },
                "coverage-bounded" | "coverage-heavy" => {
                    let family = if task == "coverage-bounded" {
                        Family::Bounded
                    } else {
                        Family::HeavyTail
                    };
                    let grid_arg = require(mu_grid.or(file.mu_grid), "mu-grid")?;
                    ResolvedCommand::SimulateCoverage {
                        family,
                        true_mean: require(true_mean.or(file.true_mean), "true-mean")?,
                        mu_grid: parse_mu_grid(&grid_arg)?,
                        strategy,
                        delta,
                        rounds,
                        replicates,
                        seed,
                        gen: gen.ok_or_else(|| {
                            CliError::Usage("--gen is required for coverage tasks".into())
                        })?,
                        opts: cs_options(
                            bounded_step.or(file.bounded_step),
                            heavy_step.or(file.heavy_step),
                            truncation.or(file.truncation),
                        ),
                    }
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown task {other:?} (expected type1 | coverage-bounded | coverage-heavy)"
                    )))
                }
            }
        }
    };
    Ok(RunConfig {
        command,
        tolerances,
    })
}

/// Executes a resolved configuration, appending human-readable lines to
/// `out`. Returns the exit code.
pub fn run_command(config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    match &config.command {
        ResolvedCommand::Classify { hypothesis } => {
            let hyp = load_hypothesis(hypothesis, config.tolerances)?;
            let c = hyp.constraint();
            let _ = writeln!(out, "classification: {}", hyp.classification());
            let _ = writeln!(
                out,
                "constraint components: {} tight, {} slack",
                c.m_tight(),
                c.m_slack()
            );
            if hyp.classification() == Classification::Proper {
                let minimal = hyp.reduce_to_minimal();
                let _ = writeln!(out, "minimal constraint dimension: {}", minimal.m_tight());
            }
            Ok(())
        }
        ResolvedCommand::Test {
            hypothesis,
            strategy,
            delta,
            stream,
            max_rounds,
            output,
        } => {
            let hyp = load_hypothesis(hypothesis, config.tolerances)?;
            let obs = stream.materialize()?;
            let max_rounds = max_rounds.unwrap_or(obs.len());
            let run = run_test(&obs, &hyp, strategy, *delta, max_rounds)
                .map_err(CliError::usage)?;
            let _ = writeln!(out, "verdict: {}", run.verdict);
            let _ = writeln!(out, "final log-wealth: {}", run.final_log_wealth());
            if let Some(path) = output {
                let lam_len = hyp.constraint().m_tight() + hyp.constraint().m_slack();
                let file = std::fs::File::create(path).map_err(CliError::usage)?;
                write_trajectory_csv(&run.trajectory, hyp.grid().dim(), lam_len, file)
                    .map_err(CliError::usage)?;
                let _ = writeln!(out, "trajectory: {}", path.display());
            }
            Ok(())
        }
        ResolvedCommand::Cs {
            family,
            mu_grid,
            delta,
            stream,
            strategy,
            output,
            opts,
        } => {
            let obs = stream.materialize()?;
            let xs: Vec<f64> = obs
                .iter()
                .map(|x| {
                    if x.len() == 1 {
                        Ok(x[0])
                    } else {
                        Err(CliError::Usage(
                            "confidence sequences need scalar observations".into(),
                        ))
                    }
                })
                .collect::<Result<_, _>>()?;
            let cs = match family {
                Family::Bounded => bounded_mean_cs(&xs, mu_grid, *delta, strategy, opts),
                Family::HeavyTail => heavy_tail_cs(&xs, mu_grid, *delta, strategy, opts),
            }
            .map_err(CliError::usage)?;
            let file = std::fs::File::create(output).map_err(CliError::usage)?;
            cs.write_csv(file).map_err(CliError::usage)?;
            let _ = writeln!(
                out,
                "confidence sequence: {} rounds, {} candidates -> {}",
                cs.rounds,
                cs.candidates.len(),
                output.display()
            );
            let _ = writeln!(out, "final set width: {}", cs.width_at(cs.rounds));
            Ok(())
        }
        ResolvedCommand::VerifyOptimality {
            trials,
            seed,
            max_grid,
            max_dim,
        } => {
            let sweep = optimality_sweep(*trials, *seed, *max_grid, *max_dim)
                .map_err(CliError::usage)?;
            let _ = writeln!(out, "trials: {}", sweep.trials);
            let _ = writeln!(out, "max residual: {:.3e}", sweep.max_residual);
            let _ = writeln!(
                out,
                "failures: majorization {}, maximality {}, residual {}",
                sweep.majorization_failures,
                sweep.maximality_failures,
                sweep.residual_failures
            );
            if sweep.all_passed() {
                Ok(())
            } else {
                Err(CliError::Verification(
                    "optimality verification failed".into(),
                ))
            }
        }
        ResolvedCommand::SimulateType1 {
            hypothesis,
            strategy,
            delta,
            rounds,
            replicates,
            seed,
            gen,
        } => {
            let hyp = load_hypothesis(hypothesis, config.tolerances)?;
            let gen = match gen {
                Some(g) => g.clone(),
                None => witness_generator(&hyp).map_err(CliError::usage)?,
            };
            let report =
                type_one_error(&hyp, strategy, &gen, *delta, *rounds, *replicates, *seed)
                    .map_err(CliError::usage)?;
            let _ = writeln!(
                out,
                "type-I rate: {:.4} ({} / {})",
                report.rate, report.hits, report.replicates
            );
            let _ = writeln!(out, "std err: {:.4}", report.std_err);
            let _ = writeln!(out, "bound (delta + 3 sigma): {:.4}", report.bound);
            if report.within_bound() {
                Ok(())
            } else {
                Err(CliError::Verification(format!(
                    "type-I rate {:.4} exceeds bound {:.4}",
                    report.rate, report.bound
                )))
            }
        }
        ResolvedCommand::SimulateCoverage {
            family,
            true_mean,
            mu_grid,
            strategy,
            delta,
            rounds,
            replicates,
            seed,
            gen,
            opts,
        } => {
            let fam = match family {
                Family::Bounded => CsFamily::Bounded,
                Family::HeavyTail => CsFamily::HeavyTail,
            };
            let report = coverage(
                fam, *true_mean, mu_grid, strategy, gen, *delta, *rounds, *replicates, *seed,
                opts,
            )
            .map_err(CliError::usage)?;
            let _ = writeln!(
                out,
                "miss rate: {:.4} ({} / {})",
                report.report.rate, report.report.hits, report.report.replicates
            );
            let _ = writeln!(out, "std err: {:.4}", report.report.std_err);
            let _ = writeln!(out, "bound (delta + 3 sigma): {:.4}", report.report.bound);
            let _ = writeln!(out, "nesting: {}", if report.nesting_ok { "ok" } else { "violated" });
            if report.report.within_bound() && report.nesting_ok {
                Ok(())
            } else {
                Err(CliError::Verification(format!(
                    "coverage miss rate {:.4} exceeds bound {:.4} (nesting {})",
                    report.report.rate,
                    report.report.bound,
                    if report.nesting_ok { "ok" } else { "violated" }
                )))
            }
        }
    }
}

fn load_hypothesis(path: &Path, tolerances: Tolerances) -> Result<Hypothesis, CliError> {
    Hypothesis::from_file(path, tolerances)
        .map_err(|e| CliError::Usage(format!("hypothesis file {path:?}: {e}")))
}

/// Applies `EVCLASS_THREADS` to the global worker pool; call once at startup.
pub fn configure_thread_pool() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("EVCLASS_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            CliError::Usage(format!(
                "EVCLASS_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
        if n == 0 {
            return Err(CliError::Usage(
                "EVCLASS_THREADS must be a positive integer".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::usage)?;
    }
    Ok(())
}

/// Full CLI entry point: parse, run, print, map to an exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    if let Err(CliError::Usage(msg)) = configure_thread_pool() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let config = match resolve(cli) {
        Ok(c) => c,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
        Err(CliError::Verification(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_VERIFICATION;
        }
    };
    let mut out = String::new();
    match run_command(&config, &mut out) {
        Ok(()) => {
            print!("{out}");
            EXIT_OK
        }
        Err(CliError::Usage(msg)) => {
            print!("{out}");
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Verification(msg)) => {
            print!("{out}");
            eprintln!("verification failure: {msg}");
            EXIT_VERIFICATION
        }
    }
}
