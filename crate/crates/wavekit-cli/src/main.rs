//! `wavekit` — experiment pipeline CLI for the passive-imaging toolkit.
//!
//! Subcommands map one-to-one onto pipeline stages:
//!
//! * `simulate`     forward solve, Dirichlet trace
//! * `correlate`    noise-driven kernel estimates + seed-ensemble study
//! * `energy`       energy-decay certificate (weights, rate, pointwise bound)
//! * `reconstruct`  profile recovery, deterministic or noise-driven
//! * `demo`         the full chain with built-in defaults, no config needed
//!
//! Exit codes: `0` success, `1` configuration/validation error, `2` numerical
//! failure (instability, singular solve), `3` a stage completed but missed an
//! acceptance tolerance.

mod config;
mod run;

use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use run::{ReconMode, RunManifest, StageOutcome};
use std::path::PathBuf;
use std::process::ExitCode;
use wavekit::error::WavekitError;

#[derive(Parser)]
#[command(name = "wavekit", version, about = "Passive-imaging experiment pipeline")]
struct Cli {
    /// TOML configuration file (required except for `demo`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace `noise.seed` from the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One forward solve; writes the boundary trace.
    Simulate,
    /// Kernel estimates from noisy data plus the convergence study.
    Correlate,
    /// Energy-decay certificate for the configured profile.
    Energy,
    /// Profile recovery via the layer-stripping sweep.
    Reconstruct {
        /// Source of the impulse response.
        #[arg(long, value_enum, default_value_t = Mode::Direct)]
        mode: Mode,
    },
    /// Full pipeline with built-in defaults (ignores --config).
    Demo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Direct,
    FromNoise,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: acceptance tolerance not met (see stage output)");
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err
                .chain()
                .any(|c| matches!(c.downcast_ref(), Some(WavekitError::Numerical(_))));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

/// Run the selected command; `Ok(pass)` reports whether every stage met its
/// acceptance tolerance.
fn dispatch(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = load_config(cli)?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let stages: Vec<StageOutcome> = match &cli.command {
        Command::Simulate => vec![run::cmd_simulate(&cfg, &out, cli.quiet)?],
        Command::Correlate => vec![run::cmd_correlate(&cfg, &out, cli.quiet)?],
        Command::Energy => vec![run::cmd_energy(&cfg, &out, cli.quiet)?],
        Command::Reconstruct { mode } => {
            let mode = match mode {
                Mode::Direct => ReconMode::Direct,
                Mode::FromNoise => ReconMode::FromNoise,
            };
            vec![run::cmd_reconstruct(&cfg, &out, mode, cli.quiet)?]
        }
        Command::Demo => run::cmd_demo(&cfg, &out, cli.quiet)?,
    };
    let pass = stages.iter().all(|s| s.pass);
    run::write_manifest(
        &out,
        &RunManifest {
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages,
        },
    )?;
    Ok(pass)
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match (&cli.command, &cli.config) {
        (Command::Demo, _) => config::demo_config(),
        (_, Some(path)) => RunConfig::load(path)?,
        (_, None) => anyhow::bail!("--config is required (only `demo` runs without one)"),
    };
    if let Some(seed) = cli.seed_override {
        match &mut cfg.noise {
            Some(n) => n.seed = seed,
            None => anyhow::bail!("--seed-override given but the config has no [noise] section"),
        }
    }
    Ok(cfg)
}
