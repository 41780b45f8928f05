//! `larmor`: scenario runner writing deterministic CSV reports.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on an invalid
//! configuration, 3 when a convergence or verification diagnostic fails
//! (the reports are still written).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, Table};
use output::Output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("diagnostic failed: {0}")]
    Convergence(String),
    #[error(transparent)]
    Core(larmor_core::Error),
    #[error("output: {0}")]
    Io(String),
}

impl From<larmor_core::Error> for CliError {
    fn from(e: larmor_core::Error) -> Self {
        use larmor_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::InvalidBarrier(_) | E::SpectrumReachesZero => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "larmor", version, about = "Larmor, dwell and phase times for tunneling spin-1/2 packets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` configuration file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Divide every grid step by this factor.
    #[arg(long, global = true, default_value_t = 1)]
    refine: usize,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// T, R and transmission phase over a wavenumber sweep.
    Stationary,
    /// psi_tr and psi_ref profiles at k0.
    Decompose,
    /// Occupancy and spin traces of the packet.
    Packet,
    /// Every clock, with convergence against a twice finer run.
    Larmor,
    /// Dwell and phase times against barrier opacity.
    Hartman,
    /// Oracle spin rotation against omega_L times the Larmor time.
    Verify,
    /// Oracle spin response to fields in and behind the barrier.
    Probe,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Decompose => "decompose",
            Command::Packet => "packet",
            Command::Larmor => "larmor",
            Command::Hartman => "hartman",
            Command::Verify => "verify",
            Command::Probe => "probe",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut table = match &cli.config {
        Some(path) => Table::load(path)?,
        None => Table::default(),
    };
    if let Some(out) = &cli.out {
        table.force("output.dir", &out.to_string_lossy());
    }
    let cfg = RunConfig::resolve(table, cli.refine)?;
    if !cli.quiet {
        for w in cfg.scenario().warnings() {
            eprintln!("warning: {w}");
        }
    }

    let mut manifest = String::from("# larmor run manifest\n");
    manifest.push_str(&format!("run.command = {}\n", cli.command.name()));
    manifest.push_str(&format!("run.refine = {}\n", cfg.refine));
    manifest.push_str(&format!("run.version = {}\n", env!("CARGO_PKG_VERSION")));
    for line in cfg.table.lines() {
        manifest.push_str(&line);
        manifest.push('\n');
    }
    let out = Output::create(cfg.out_dir.as_ref(), &manifest, cli.quiet)?;
    out.log(format!("manifest sha256 {}", out.hash()));

    match cli.command {
        Command::Stationary => commands::stationary(&cfg, &out),
        Command::Decompose => commands::decompose(&cfg, &out),
        Command::Packet => commands::packet(&cfg, &out),
        Command::Larmor => commands::larmor(&cfg, &out),
        Command::Hartman => commands::hartman(&cfg, &out),
        Command::Verify => commands::verify(&cfg, &out),
        Command::Probe => commands::probe(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
