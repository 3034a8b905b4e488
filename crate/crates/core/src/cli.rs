//! Command-line front end: `brwre <rho|classify|bellman|simulate|couple>`.
//!
//! Every run writes `result.json` into the output directory, preceded by a
//! header with the sha256 of the effective configuration and the master
//! seed. `simulate` also writes `replicates.jsonl` and `bellman` writes
//! `field.csv`. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure, 4 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bellman::{critical_m, value_iteration, value_iteration_escalating, IterationConfig, IterationStatus};
use crate::classify::classify;
use crate::config::{parse_config, CoupleDirection, ExperimentConfig};
use crate::environment::{couple_lower, couple_raise, OffspringDistribution, RealizedEnvironment};
use crate::error::{BellmanError, ConfigError, Error};
use crate::kernel::{power_iteration_rho, RhoEstimate};
use crate::presets::PRESETS;
use crate::simulator::{estimate_alpha, run_replicates, AlphaEstimate, BmcStarConfig, NuEstimate};
use crate::spectral::{env_rho, has_zero_drift, nearest_neighbor_rho, SpectralResult, ZeroDrift};

#[derive(Debug, Parser)]
#[command(name = "brwre", version, about = "Transience and recurrence of branching random walks in random environment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use a named preset instead of a configuration file.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub radius: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub cap: Option<u128>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectral radius of the environment and the zero-drift test.
    Rho,
    /// Transient versus strongly recurrent verdict.
    Classify,
    /// Value iteration at `m`, or the critical mean when `m` is unset.
    Bellman,
    /// Monte Carlo estimate of the expected frozen count at the origin.
    Simulate,
    /// Offspring law with a prescribed mean that dominates or is dominated.
    Couple,
    /// List the shipped presets.
    Presets,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Rho => "rho",
            Command::Classify => "classify",
            Command::Bellman => "bellman",
            Command::Simulate => "simulate",
            Command::Couple => "couple",
            Command::Presets => "presets",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Validation(_) => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// Reads the configuration and applies flag overrides.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let text = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => return Err(ConfigError::Missing("--config and --preset are mutually exclusive".into()).into()),
        (Some(path), None) => fs::read_to_string(path).map_err(io_err(path))?,
        (None, Some(name)) => format!("preset = {name}\n"),
        (None, None) => return Err(ConfigError::Missing("give --config PATH or --preset NAME".into()).into()),
    };
    let mut cfg = parse_config(&text)?;
    let run = &mut cfg.run;
    let mut flagged: Vec<&str> = Vec::new();
    if let Some(v) = cli.seed {
        run.seed = v;
        flagged.push("seed");
    }
    if let Some(v) = cli.replicates {
        run.replicates = v;
        flagged.push("replicates");
    }
    if let Some(v) = cli.horizon {
        run.horizon = v;
        flagged.push("horizon");
    }
    if let Some(v) = cli.radius {
        run.radius = v;
        flagged.push("radius");
    }
    if let Some(v) = cli.tol {
        run.tol = v;
        flagged.push("tol");
    }
    if let Some(v) = cli.cap {
        run.cap = v;
        flagged.push("cap");
    }
    let dim = cfg.model.graph.dimension;
    cfg.run.check_ranges(dim, |key| if flagged.contains(&key) { format!("flag --{key}") } else { "config".into() })?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Header<'a> {
    config_hash: String,
    seed: u64,
    command: &'static str,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header<'a>,
    result: T,
}

#[derive(Serialize)]
struct SimulateReport {
    #[serde(flatten)]
    nu: NuEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<AlphaEstimate>,
}

#[derive(Serialize)]
struct RhoReport {
    #[serde(flatten)]
    minimax: SpectralResult,
    zero_drift: ZeroDrift,
    closed_form: Option<f64>,
    power_iteration: Option<RhoEstimate>,
}

#[derive(Serialize)]
struct BellmanReport {
    m: f64,
    status: IterationStatus,
    sweeps: usize,
    radius: usize,
    max_value: f64,
    critical: Option<crate::bellman::CriticalMean>,
}

#[derive(Serialize)]
struct CoupleReport {
    direction: CoupleDirection,
    target: f64,
    input: Vec<f64>,
    input_mean: f64,
    output: Vec<f64>,
    output_mean: f64,
    dominance_holds: bool,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Runs one command and returns the line to print on stdout.
pub fn run(cli: &Cli) -> Result<String, Error> {
    if cli.command == Command::Presets {
        return Ok(PRESETS.iter().map(|(n, d, _)| format!("{n:<20} {d}")).collect::<Vec<_>>().join("\n"));
    }
    let cfg = load_config(cli)?;
    let spec = cfg.spec()?;
    let header = Header { config_hash: cfg.hash(), seed: cfg.run.seed, command: cli.command.name(), config: &cfg };
    let out = &cli.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let result_path = out.join("result.json");
    let r = &cfg.run;

    match cli.command {
        Command::Rho => {
            let minimax = env_rho(&spec, r.tol)?;
            let single = (spec.step_support().len() == 1).then(|| &spec.step_support()[0].0);
            let closed_form = single.and_then(|p| nearest_neighbor_rho(p).ok());
            let power_iteration = match single {
                Some(p) if r.n_max >= 2 => Some(power_iteration_rho(p, r.n_max)?),
                _ => None,
            };
            let line = format!("rho = {:.12} (residual {:.1e})", minimax.rho, minimax.residual);
            let report = RhoReport { minimax, zero_drift: has_zero_drift(&spec), closed_form, power_iteration };
            write_json(&result_path, &Document { header: &header, result: report })?;
            Ok(line)
        }
        Command::Classify => {
            let verdict = classify(&spec, r.tol)?;
            write_json(&result_path, &Document { header: &header, result: &verdict })?;
            Ok(verdict.to_string())
        }
        Command::Bellman => {
            let it =
                IterationConfig { radius: r.radius, origin: r.origin_site(), max_sweeps: r.max_sweeps(), blowup: r.blowup, anchor: 1.0 };
            let (m, critical) = match r.m {
                Some(m) => (m, None),
                None => {
                    let c = critical_m(&spec, &it, r.bisect_tol)?;
                    (c.bracket.0, Some(c))
                }
            };
            let run = if critical.is_some() { value_iteration_escalating(&spec, m, &it)? } else { value_iteration(&spec, m, &it)? };
            if run.status == IterationStatus::Indeterminate {
                return Err(BellmanError::Indeterminate { m, sweeps: run.sweeps }.into());
            }
            let field_path = out.join("field.csv");
            let lines = vec![
                format!("config_hash = {}", header.config_hash),
                format!("seed = {}", header.seed),
                format!("m = {m}"),
                format!("status = {:?}", run.status),
            ];
            let mut buf = Vec::new();
            run.field.write_csv(&mut buf, &lines).map_err(io_err(&field_path))?;
            fs::write(&field_path, buf).map_err(io_err(&field_path))?;
            let line = match &critical {
                Some(c) => {
                    format!("critical m = {:.6} (bracket {:.6}..{:.6}, 1/rho = {:.6})", c.critical_m, c.bracket.0, c.bracket.1, 1.0 / c.rho)
                }
                None => format!("m = {m}: {:?} after {} sweeps", run.status, run.sweeps),
            };
            let report =
                BellmanReport { m, status: run.status, sweeps: run.sweeps, radius: r.radius, max_value: run.field.max(), critical };
            write_json(&result_path, &Document { header: &header, result: report })?;
            Ok(line)
        }
        Command::Simulate => {
            let env = RealizedEnvironment::new(Arc::new(spec), r.env_seed());
            let sim = BmcStarConfig { origin: r.origin_site(), start: r.start_site(), horizon: r.horizon, cap: r.cap, prune: r.prune };
            let records = run_replicates(&env, &sim, r.replicates, r.seed)?;
            let est = NuEstimate::from_records(&records, r.horizon);
            let path = out.join("replicates.jsonl");
            let mut buf = Vec::new();
            let mut line = serde_json::to_string(&header).expect("header serializes");
            line.push('\n');
            buf.extend_from_slice(line.as_bytes());
            for rec in &records {
                serde_json::to_writer(&mut buf, rec).expect("record serializes");
                buf.write_all(b"\n").expect("writing to memory");
            }
            fs::write(&path, buf).map_err(io_err(&path))?;
            let mut line = format!(
                "E nu = {:.6} +- {:.6} ({} replicates, {} saturated{})",
                est.mean,
                est.std_error,
                est.replicates,
                est.saturated_runs,
                if est.unreliable { ", unreliable" } else { "" }
            );
            let alpha = match r.threshold {
                Some(t) => Some(estimate_alpha(&env, r.origin_site(), r.replicates, r.horizon, t, r.cap, r.seed)?),
                None => None,
            };
            if let Some(a) = &alpha {
                line.push_str(&format!("; {:.4} of runs visit the origin at least {} times", a.fraction, a.threshold));
            }
            write_json(&result_path, &Document { header: &header, result: SimulateReport { nu: est, alpha } })?;
            Ok(line)
        }
        Command::Couple => {
            let target = r.couple_target.ok_or_else(|| ConfigError::Missing("couple needs `couple_target` in [run]".into()))?;
            let (mu, _): &(OffspringDistribution, f64) =
                spec.offspring_support().get(r.couple_index).ok_or_else(|| ConfigError::Range {
                    location: "config".into(),
                    key: "couple_index".into(),
                    message: format!("only {} offspring laws", spec.offspring_support().len()),
                })?;
            let (coupled, holds) = match r.couple_direction {
                CoupleDirection::Raise => {
                    let c = couple_raise(mu, target)?;
                    let holds = c.dominates(mu, 1e-12);
                    (c, holds)
                }
                CoupleDirection::Lower => {
                    let c = couple_lower(mu, target)?;
                    let holds = mu.dominates(&c, 1e-12);
                    (c, holds)
                }
            };
            let line = format!("mean {:.12} -> {:.12}", mu.mean(), coupled.mean());
            let report = CoupleReport {
                direction: r.couple_direction,
                target,
                input: mu.masses().to_vec(),
                input_mean: mu.mean(),
                output: coupled.masses().to_vec(),
                output_mean: coupled.mean(),
                dominance_holds: holds,
            };
            write_json(&result_path, &Document { header: &header, result: report })?;
            Ok(line)
        }
        Command::Presets => unreachable!("handled above"),
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
