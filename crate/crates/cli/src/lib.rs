//! Command-line front end for the trapped-electron toolkit.
//!
//! Every subcommand reads a sectioned config (see [`config`]), computes, and
//! writes CSV or JSON to `--out` or stdout. Exit codes: 0 success, 1 I/O,
//! 2 bad input or config, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod units;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", match line { Some(l) => format!("config line {l}: {msg}"), None => format!("config: {msg}") })]
    Config { line: Option<usize>, msg: String },
    #[error("input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config { .. } | CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<etrap_core::Error> for CliError {
    fn from(e: etrap_core::Error) -> Self {
        use etrap_core::Error as E;
        match e {
            E::Io(m) => CliError::Io(m),
            E::Parse { .. } | E::Schema(_) | E::Contract(_) | E::InvalidDimension(_) | E::OutOfDomain(_) => {
                CliError::Input(e.to_string())
            }
            E::Shape(_) | E::Singular(_) | E::Divergent(_) | E::StepSize(_) | E::NoConvergence(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "etrap", version, about = "Trapped-electron circuit QED calculations")]
pub struct Cli {
    /// Config file in `[section]` / `key = value` form.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Built-in parameter set applied before the config file.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Print the resolved parameters in SI units to stderr.
    #[arg(long, global = true)]
    pub echo_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ζ against electron frequency, exact and closed forms.
    DispersiveSweep,
    /// Cooling estimates.
    Cooling(CoolingArgs),
    /// Electron–ion coupling table with published values alongside.
    CoulombTable,
    /// Pseudopotential minimum, secular frequencies and depth.
    Trap(TrapArgs),
    /// Lorentzian fit of a transmission trace.
    FitSpectrum(FitArgs),
    /// Phonon readout noise budget.
    ReadoutBudget,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct CoolingModeArgs {
    /// Measurement-based sideband cooling trajectory.
    #[arg(long)]
    pub protocol: bool,
    /// Ion-mediated steady state.
    #[arg(long)]
    pub sympathetic: bool,
    /// Cavity-assisted equilibrium.
    #[arg(long)]
    pub cavity: bool,
}

#[derive(Debug, Args)]
pub struct CoolingArgs {
    #[command(flatten)]
    pub mode: CoolingModeArgs,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct TrapSourceArgs {
    /// Analytic surface-electrode layout from `[trapfields]`.
    #[arg(long)]
    pub layout: bool,
    /// Field-map CSV (`x_m,y_m,z_m,Ex_Vpm,Ey_Vpm,Ez_Vpm`).
    #[arg(long, value_name = "PATH")]
    pub fieldmap: Option<PathBuf>,
    /// Ideal quadrupole with the configured secular and drive frequencies.
    #[arg(long)]
    pub synthetic: bool,
}

#[derive(Debug, Args)]
pub struct TrapArgs {
    #[command(flatten)]
    pub source: TrapSourceArgs,
    /// Also write the synthetic field map as CSV.
    #[arg(long, value_name = "PATH", requires = "synthetic")]
    pub export_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trace CSV with `freq_hz,mag` columns.
    pub trace: PathBuf,
    /// Also list resonance candidates.
    #[arg(long)]
    pub modes: bool,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to `stderr`; results go to `--out` or `stdout`.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::execute(&cli, stderr) {
        Ok(bytes) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
                None => stdout.write_all(&bytes).map_err(CliError::from),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
