use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use guidetrap::cli::{self, CliError, Format, RunConfig};

#[derive(Parser)]
#[command(
    name = "guidetrap",
    version,
    about = "Bound-state energies of heterogeneous Dirichlet strip waveguides"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Perturbative energy through third order, variational bound and verdict
    Energy(CommonArgs),
    /// Exact slab solution, series coefficients and error-order sweep
    Slab(CommonArgs),
    /// Finite-difference oracle: L/h sweeps, extrapolation, comparisons
    Oracle(OracleArgs),
    /// Point-evaluate the transverse-excited Green's correlator
    Greens(GreensArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Human)]
    format: FormatArg,
    /// Override the 2D quadrature relative tolerance
    #[arg(long = "tol-quad-2d")]
    tol_quad_2d: Option<f64>,
    /// Override the 4D quadrature relative tolerance
    #[arg(long = "tol-quad-4d")]
    tol_quad_4d: Option<f64>,
    /// Override the Green's-function tail tolerance
    #[arg(long = "tol-greens")]
    tol_greens: Option<f64>,
    /// Override the slab residual tolerance
    #[arg(long = "tol-slab")]
    tol_slab: Option<f64>,
    /// Override the finite-difference residual tolerance
    #[arg(long = "tol-fd")]
    tol_fd: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write the finest eigenvector as a dense text grid
    #[arg(long)]
    export_eigenvector: Option<PathBuf>,
}

#[derive(Args)]
struct GreensArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    x1: f64,
    #[arg(long)]
    y1: f64,
    #[arg(long)]
    x2: f64,
    #[arg(long)]
    y2: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Human,
    Records,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Human => Format::Human,
            FormatArg::Records => Format::Records,
        }
    }
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = cli::load_config(&common.config)?;
    for (slot, value) in [
        (&mut config.tolerances.quad_rel_2d, common.tol_quad_2d),
        (&mut config.tolerances.quad_rel_4d, common.tol_quad_4d),
        (&mut config.tolerances.greens_tail, common.tol_greens),
        (&mut config.tolerances.slab_residual, common.tol_slab),
        (&mut config.tolerances.fd_residual, common.tol_fd),
    ] {
        if value.is_some() {
            *slot = value;
        }
    }
    Ok(config)
}

fn run() -> Result<bool, CliError> {
    let args = Cli::parse();
    match args.command {
        Command::Energy(common) => {
            let config = load(&common)?;
            let report = cli::run_energy(&config)?;
            print!("{}", report.render(common.format.into()));
            Ok(report.converged)
        }
        Command::Slab(common) => {
            let config = load(&common)?;
            let report = cli::run_slab(&config)?;
            print!("{}", report.render(common.format.into()));
            Ok(report.converged)
        }
        Command::Oracle(args) => {
            let config = load(&args.common)?;
            let (report, extras) = cli::run_oracle(&config)?;
            print!("{}", report.render(args.common.format.into()));
            if let Some(path) = &args.export_eigenvector {
                let mut file = std::fs::File::create(path)?;
                guidetrap::fd::write_eigenvector(&mut file, &extras.cfg, &extras.finest)
                    .map_err(|e| CliError::Numeric(format!("eigenvector export: {e}")))?;
            }
            Ok(report.converged)
        }
        Command::Greens(args) => {
            let config = load(&args.common)?;
            let report = cli::run_greens(
                &config,
                args.x1,
                args.y1,
                args.x2,
                args.y2,
                args.common.tol_greens,
            )?;
            print!("{}", report.render(args.common.format.into()));
            Ok(report.converged)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("guidetrap: flagged non-convergence (see report)");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("guidetrap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
