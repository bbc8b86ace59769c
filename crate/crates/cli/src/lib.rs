//! `ssblow` command line: each subcommand resolves its parameters, runs one
//! library pipeline and writes CSV, JSON, SVG and a manifest into a run
//! directory named after the configuration hash.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical or I/O
//! failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod config;
pub mod output;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(ssblow::Error),
    Io(std::io::Error),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "{s}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Numerical(s) => write!(f, "{s}"),
        }
    }
}

impl From<ssblow::Error> for CliError {
    fn from(e: ssblow::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ssblow", version, about = "Self-similar NLS blowup experiments")]
pub struct Cli {
    /// TOML file; keys at top level or under a table named after the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root (default: $SSBLOW_OUT, else ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    /// Grid size (power of two).
    #[arg(long)]
    pub n: Option<usize>,
    /// Half-width L of the periodic box [-L, L).
    #[arg(long)]
    pub half_width: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProfileArgs {
    /// Read the profile from this file instead of solving for it.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Working regularity σ.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Shooting bracket `q0_min,q0_max,b_min,b_max`.
    #[arg(long, value_delimiter = ',')]
    pub bracket: Option<Vec<f64>>,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Coarse scan points per bracket axis before Newton (0 = start at the centre).
    #[arg(long)]
    pub scan: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FlowArgs {
    #[arg(long)]
    pub dtau: Option<f64>,
    #[arg(long)]
    pub tau_end: Option<f64>,
    #[arg(long)]
    pub cadence: Option<usize>,
    #[arg(long)]
    pub sponge_strength: Option<f64>,
    #[arg(long)]
    pub sponge_inner: Option<f64>,
    /// Interior window as a fraction of L.
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply e^{itΔ_b} to a Gaussian or to a CSV field (columns x,re,im).
    Propagate {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        oversample: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Kernel supremum K(t) of e^{itΔ_b} and its two-regime law.
    DispersiveBench {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Admissible-region map and sampled Strichartz integrals.
    StrichartzMap {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        n_t: Option<usize>,
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Resolvent inversion, oracle, identity, shift and λ-decay checks.
    ResolventCheck {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        z_re: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        z_im: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Solve for the self-similar profile by shooting.
    Profile {
        #[command(flatten)]
        prof: ProfileArgs,
    },
    /// Discrete spectrum and Riesz projections of the linearized operator.
    Spectrum {
        #[command(flatten)]
        prof: ProfileArgs,
        #[arg(long)]
        radial_n: Option<usize>,
        #[arg(long)]
        radial_r: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Renormalized flow started at the profile (fixed-point run).
    Evolve {
        #[command(flatten)]
        prof: ProfileArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Decay of a small perturbation of the profile.
    Perturb {
        #[command(flatten)]
        prof: ProfileArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        amplitude: Option<f64>,
        /// Project the perturbation onto the essential spectral subspace.
        #[arg(long)]
        project: Option<bool>,
        #[arg(long)]
        radial_n: Option<usize>,
        #[arg(long)]
        radial_r: Option<f64>,
    },
    /// Growth of the critical norms for truncated profile data.
    Critnorm {
        #[command(flatten)]
        prof: ProfileArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Cutoff radius of the initial truncation.
        #[arg(long)]
        r0: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Propagate { .. } => "propagate",
            Command::DispersiveBench { .. } => "dispersive-bench",
            Command::StrichartzMap { .. } => "strichartz-map",
            Command::ResolventCheck { .. } => "resolvent-check",
            Command::Profile { .. } => "profile",
            Command::Spectrum { .. } => "spectrum",
            Command::Evolve { .. } => "evolve",
            Command::Perturb { .. } => "perturb",
            Command::Critnorm { .. } => "critnorm",
        }
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// code. Diagnostics go to stderr; the run directory is printed on stdout.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
