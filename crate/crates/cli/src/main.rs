//! `plates`: file-in, file-out front end for the plate-channel library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plate_channel::Error;

/// Exit-code classes: usage/config problems, numerical failures and failed verification.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
    Verification(usize),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(n) => write!(f, "{n} verification case(s) failed"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "plates", version, about = "Linear dynamics and stability of fluid-loaded plates in a channel")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: $PLATES_OUTPUT_DIR, else plates-out/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    /// JSON configuration or recipe file.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve initial data and export plate fields at the requested times.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Half-width L of the periodic domain [-L, L).
        #[arg(long)]
        half_width: Option<f64>,
        /// Grid points N (even).
        #[arg(long)]
        points: Option<usize>,
        /// Comma-separated output times.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Spectral-abscissa scan, unstable intervals and verdict.
    Stability {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, requires = "kmax")]
        kmin: Option<f64>,
        #[arg(long, requires = "kmin")]
        kmax: Option<f64>,
        #[arg(long, default_value_t = 400)]
        count: usize,
    },
    /// Eigenvalues of M(k) at given wavenumbers.
    Spectrum {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        k: Vec<f64>,
        /// Also dump the entries of A, B, C and M.
        #[arg(long)]
        dump: bool,
    },
    /// Pseudospectral fields, contours and widths.
    Pseudospec {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        k: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Green's function norms along a ray x = V t.
    Greens {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, allow_hyphen_values = true)]
        velocity: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Initial taper scale of the wavenumber integral.
        #[arg(long)]
        k_cut: Option<f64>,
    },
    /// Run the verification battery; exits 1 if any case fails.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random configurations in the assembly check.
        #[arg(long, default_value_t = 50)]
        configs: usize,
    },
    /// Spectra for plates with several horizontal dimensions.
    NdimSpectrum {
        #[command(flatten)]
        config: ConfigArg,
        /// Halton directions in addition to the axes and flow directions.
        #[arg(long, default_value_t = 8)]
        directions: usize,
        #[arg(long, default_value_t = 40)]
        radii: usize,
        #[arg(long, default_value_t = 20.0)]
        kmax: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate { config, half_width, points, times } => {
            commands::simulate(&config.config, out, half_width, points, times)
        }
        Command::Stability { config, kmin, kmax, count } => commands::stability(&config.config, out, kmin.zip(kmax), count),
        Command::Spectrum { config, k, dump } => commands::spectrum(&config.config, out, &k, dump),
        Command::Pseudospec { config, k, levels, resolution } => {
            commands::pseudospec(&config.config, out, k, levels, resolution)
        }
        Command::Greens { config, velocity, times, k_cut } => commands::greens(&config.config, out, velocity, times, k_cut),
        Command::Verify { seed, configs } => commands::verify(out, seed, configs),
        Command::NdimSpectrum { config, directions, radii, kmax } => {
            commands::ndim_spectrum(&config.config, out, directions, radii, kmax)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plates: {e}");
            ExitCode::from(e.code())
        }
    }
}
