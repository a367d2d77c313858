mod commands;
mod config;
mod plot;
mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use sastirap_core::protocol::CdMode;

use crate::commands::RunContext;
use crate::config::RunConfig;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SASTIRAP_OUT";
const DEFAULT_OUT: &str = "sastirap-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Simulate,
    Sweep,
    Qsl,
    Tomo,
    ExportPulses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CdArg {
    Off,
    AnalyticEffective,
    PhysicalTwoPhoton,
}

/// Superadiabatic STIRAP simulator for a driven three-level ladder.
#[derive(Debug, Parser)]
#[command(name = "sastirap", version)]
struct Cli {
    command: Command,
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present_any = ["preset", "list_presets"])]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Print the built-in presets and exit.
    #[arg(long)]
    list_presets: bool,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Reuse cached sweep points from an earlier run.
    #[arg(long)]
    resume: bool,
    /// Check the configuration and exit.
    #[arg(long)]
    validate_only: bool,
    /// Output directory; overrides the config and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the counterdiabatic drive mode.
    #[arg(long, value_enum)]
    cd: Option<CdArg>,
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    if let Some(name) = &cli.preset {
        let text = presets::get(name).with_context(|| format!("unknown preset `{name}`; available: {}", presets::names().join(", ")))?;
        return Ok((RunConfig::parse(text).with_context(|| format!("preset `{name}`"))?, PathBuf::from(".")));
    }
    let Some(path) = &cli.config else { bail!("either --config or --preset is required") };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = RunConfig::parse(&text).with_context(|| format!("{}", path.display()))?;
    Ok((cfg, path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)))
}

fn run(cli: Cli) -> Result<()> {
    if cli.list_presets {
        for name in presets::names() {
            println!("{name}");
        }
        return Ok(());
    }
    if cli.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let (mut cfg, base_dir) = load(&cli)?;
    if let Some(cd) = cli.cd {
        cfg.protocol.cd = match cd {
            CdArg::Off => CdMode::Off,
            CdArg::AnalyticEffective => CdMode::AnalyticEffective,
            CdArg::PhysicalTwoPhoton => CdMode::PhysicalTwoPhoton,
        };
        cfg.validate()?;
    }
    if cli.validate_only {
        println!("configuration ok");
        return Ok(());
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = RunContext { out, jobs: cli.jobs, resume: cli.resume };
    let spec = cfg.protocol_spec()?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &spec, &ctx),
        Command::Sweep => commands::sweep(&cfg, &ctx),
        Command::Qsl => commands::qsl(&cfg, &spec),
        Command::Tomo => commands::tomo(&cfg, &ctx, &base_dir),
        Command::ExportPulses => commands::export_pulses(&spec, &ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
