//! Command-line front end for `trajphase`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::CommandOutput;
use crate::config::{preset, ScenarioConfig, PRESETS};
use crate::error::{CliError, ConfigError};
use crate::report::RunReport;

#[derive(Debug, Parser)]
#[command(name = "trajphase", version, about = "Open-system trajectories and their geometric phases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,

    /// Bundled scenario; see `trajphase presets`.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,

    /// Output file. Without it, results go to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Run report (JSON). Defaults to `<out>.report.json` when --out is set.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,

    /// Overrides run.seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Overrides run.steps.
    #[arg(long, global = true, value_name = "N")]
    pub steps: Option<usize>,

    /// Only errors on stderr; no summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Density matrix over time from the master equation.
    Evolve,
    /// No-jump geometric phase over the sweep grid.
    NojumpPhase,
    /// Quantum-jump trajectories and their ensemble average.
    JumpSample,
    /// Averaged geometric phase of linear QSD trajectories.
    QsdPhase,
    /// Whether the configured shift is hidden, and what it changes.
    SymmetryCheck,
    /// List bundled scenarios, or print one with --preset.
    Presets,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::NojumpPhase => "nojump-phase",
            Command::JumpSample => "jump-sample",
            Command::QsdPhase => "qsd-phase",
            Command::SymmetryCheck => "symmetry-check",
            Command::Presets => "presets",
        }
    }
}

fn load(cli: &Cli) -> Result<(ScenarioConfig, String), ConfigError> {
    let (text, origin) = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            (text, path.display().to_string())
        }
        (None, Some(name)) => {
            let text = preset(name).ok_or_else(|| ConfigError::Invalid {
                field: "--preset".into(),
                message: format!("unknown preset {name:?}"),
            })?;
            (text.to_string(), format!("preset:{name}"))
        }
        (None, None) => {
            return Err(ConfigError::Invalid {
                field: "--config".into(),
                message: "give --config PATH or --preset NAME".into(),
            })
        }
    };
    let mut cfg = ScenarioConfig::from_toml(&text, &origin)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(steps) = cli.steps {
        cfg.run.steps = Some(steps);
    }
    cfg.validate()?;
    Ok((cfg, origin))
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(value) = std::env::var("TRAJPHASE_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| ConfigError::Invalid {
        field: "TRAJPHASE_THREADS".into(),
        message: format!("expected a positive integer, got {value:?}"),
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `dir/name.csv` with suffix `ensemble.csv` becomes `dir/name.ensemble.csv`.
pub fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

/// Runs one command; the caller maps errors to exit codes.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    report::init_logging(cli.quiet);
    if cli.command == Command::Presets {
        match &cli.preset {
            Some(name) => {
                let text = preset(name).ok_or_else(|| ConfigError::Invalid {
                    field: "--preset".into(),
                    message: format!("unknown preset {name:?}"),
                })?;
                print!("{text}");
            }
            None => PRESETS.iter().for_each(|(name, _)| println!("{name}")),
        }
        return Ok(());
    }
    configure_threads()?;
    let (cfg, origin) = load(cli)?;
    let effective = cfg.to_toml();
    let mut report = RunReport::new(cli.command.name(), &origin, &effective, cfg.run.seed.unwrap_or(0));
    let start = Instant::now();

    let out: CommandOutput = match cli.command {
        Command::Evolve => commands::evolve(&cfg)?,
        Command::NojumpPhase => commands::nojump_phase(&cfg)?,
        Command::JumpSample => commands::jump_sample(&cfg)?,
        Command::QsdPhase => commands::qsd_phase(&cfg)?,
        Command::SymmetryCheck => commands::symmetry_check(&cfg)?,
        Command::Presets => unreachable!("handled above"),
    };

    match &cli.out {
        Some(path) => {
            write(path, &out.primary)?;
            report.outputs.push(path.display().to_string());
            for (suffix, text) in &out.extra {
                let p = companion_path(path, suffix);
                write(&p, text)?;
                report.outputs.push(p.display().to_string());
            }
            if !cli.quiet {
                if let Some(msg) = &out.message {
                    println!("{msg}");
                }
            }
        }
        None if cli.command == Command::SymmetryCheck => {
            if let Some(msg) = &out.message {
                println!("{msg}");
            }
        }
        None => {
            print!("{}", out.primary);
            for (_, text) in &out.extra {
                print!("\n{text}");
            }
        }
    }

    report.finish(start.elapsed());
    let report_path = cli
        .report
        .clone()
        .or_else(|| cli.out.as_ref().map(|p| companion_path(p, "report.json")));
    if let Some(path) = report_path {
        write(&path, &report.to_json())?;
    }
    Ok(())
}
