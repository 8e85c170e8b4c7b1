//! Recovers a signal from a measurement matrix and modulus observations
//! stored as CPLX-CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use prvbem::gs::{gs_solve, GsInit};
use prvbem::io::{read_cplx, write_cplx};
use prvbem::{solve, CMatrix, Complex64, MeasurementEnsemble, ModelParams, SolverConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algorithm {
    Prvbem,
    Gs,
}

#[derive(Debug, Parser)]
#[command(name = "prvbem-solve", version, about = "Solve one phase retrieval instance")]
struct Args {
    /// M x N measurement matrix.
    #[arg(long)]
    matrix: PathBuf,
    /// M x 1 observations; only the real parts are used.
    #[arg(long)]
    y: PathBuf,
    /// Where to write the N x 1 estimate.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "prvbem")]
    algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap (prvbem) or iteration count (gs).
    #[arg(long)]
    iters: Option<usize>,
}

fn run(args: &Args) -> prvbem::Result<()> {
    let d = read_cplx(&args.matrix)?;
    let y = read_cplx(&args.y)?;
    if y.ncols() != 1 {
        return Err(prvbem::Error::DimensionMismatch(format!(
            "observations must be a single column, got {} columns",
            y.ncols()
        )));
    }
    let y: Vec<f64> = y.iter().map(|v| v.re).collect();
    let ensemble = MeasurementEnsemble::new(d, y)?;
    let x_hat: Vec<Complex64> = match args.algo {
        Algorithm::Prvbem => {
            let mut cfg = SolverConfig {
                seed: args.seed,
                ..SolverConfig::default()
            };
            if let Some(it) = args.iters {
                cfg.max_iters = it;
            }
            let sol = solve(&ensemble, &ModelParams::blind(&ensemble), &cfg)?;
            eprintln!(
                "prvbem: {} iterations, converged={}, sigma_n2_hat={:e}",
                sol.iterations, sol.converged, sol.state.sigma_n2_hat
            );
            sol.x_hat
        }
        Algorithm::Gs => {
            let iters = args.iters.unwrap_or(prvbem::gs::DEFAULT_ITERS);
            gs_solve(&ensemble, iters, GsInit::Random, args.seed)?.0
        }
    };
    let n = x_hat.len();
    write_cplx(&args.out, &CMatrix::from_vec(n, 1, x_hat))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prvbem-solve: {e}");
            ExitCode::FAILURE
        }
    }
}
