//! Command-line driver for cforge.
//!
//! Exit codes: 0 when the run produced a certified result, 2 when it ran to
//! completion without one (blow-up branch, zero branch, no convergence), 1 on
//! errors. The run summary is printed to standard output as TOML; warnings
//! and a one-line status go to standard error.

pub mod config;
pub mod run;
pub mod summary;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use config::{parse_config_with, Overrides};
use run::{execute, Subcommand, EXIT_ERROR};

#[derive(Debug, Parser)]
#[command(
    name = "cforge",
    version,
    about = "Solvers for the conformal constraint equations on a periodic grid"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// Run configuration (TOML). Relative paths inside it resolve against its directory.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Registry fixture id; overrides the config file.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Grid points per axis [default: 32].
    #[arg(long)]
    pub n_axis: Option<usize>,
    /// Picard under-relaxation in (0, 1] [default: 0.5].
    #[arg(long)]
    pub relax: Option<f64>,
    /// Multiply σ by this factor [default: 1].
    #[arg(long)]
    pub sigma_scale: Option<f64>,
    /// Also write the run summary to this file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Write solution fields into this directory.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct TGrid {
    /// Comma-separated continuation parameters ending at 1 [default: 0,0.1,...,1].
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// Solve the Lichnerowicz equation for a fixed source w.
    SolveLich(Common),
    /// Solve the vector equation for a fixed conformal factor (φ ≡ 1 by default).
    SolveVector(Common),
    /// Damped Picard iteration for the coupled system.
    SolveCoupled(Common),
    /// Continuation in t for φ = tT(φ); reports the blow-up branch with a limit diagnostic.
    Continuation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: TGrid,
    },
    /// Continuation for the t¹²-modified map; certifies a solution for scaled data.
    ModifiedContinuation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: TGrid,
    },
    /// Run the continuation and analyse its blow-up tail against the limit equation.
    LimitDiagnostic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: TGrid,
    },
    /// Truncated near-CMC defect iteration.
    DefectNear(Common),
    /// Gated far-from-CMC defect iteration (positive Yamabe invariant).
    DefectFar(Common),
    /// Local supersolution probes and the capped defect iteration below ψ.
    DefectLocal {
        #[command(flatten)]
        common: Common,
        /// ψ = this factor times the Picard solution [default: 2].
        #[arg(long)]
        psi_scale: Option<f64>,
    },
    /// Run a study campaign from the config file's [study] table.
    Study(Common),
}

impl Command {
    fn split(self) -> (Subcommand, Common, Overrides) {
        let mut ov = Overrides::default();
        let (cmd, common) = match self {
            Command::SolveLich(c) => (Subcommand::SolveLich, c),
            Command::SolveVector(c) => (Subcommand::SolveVector, c),
            Command::SolveCoupled(c) => (Subcommand::SolveCoupled, c),
            Command::Continuation { common, grid } => {
                ov.t = grid.t;
                (Subcommand::Continuation, common)
            }
            Command::ModifiedContinuation { common, grid } => {
                ov.t = grid.t;
                (Subcommand::ModifiedContinuation, common)
            }
            Command::LimitDiagnostic { common, grid } => {
                ov.t = grid.t;
                (Subcommand::LimitDiagnostic, common)
            }
            Command::DefectNear(c) => (Subcommand::DefectNear, c),
            Command::DefectFar(c) => (Subcommand::DefectFar, c),
            Command::DefectLocal { common, psi_scale } => {
                ov.psi_solution_scale = psi_scale;
                (Subcommand::DefectLocal, common)
            }
            Command::Study(c) => (Subcommand::Study, c),
        };
        ov.fixture = common.fixture.clone();
        ov.n_axis = common.n_axis;
        ov.relax = common.relax;
        ov.sigma_scale = common.sigma_scale;
        ov.summary = common.summary.clone();
        ov.dump_dir = common.dump_dir.clone();
        (cmd, common, ov)
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR,
            };
            let _ = e.print();
            return code;
        }
    };
    let (cmd, common, ov) = cli.command.split();
    let cfg = match parse_config_with(common.config.as_deref(), &ov) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match execute(cmd, &cfg) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let text = out.summary.render();
            print!("{text}");
            if let Some(path) = &cfg.summary {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return EXIT_ERROR;
                }
            }
            eprintln!("{}", out.status);
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
