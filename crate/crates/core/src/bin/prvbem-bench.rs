//! Runs the phase-retrieval benchmark grid and writes per-trial results and
//! plot data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use prvbem::bench::{self, curves, emit_curve, run_experiment, ExperimentConfig, Metric};
use prvbem::io::write_results;

#[derive(Debug, Parser)]
#[command(name = "prvbem-bench", version, about = "Phase retrieval benchmark harness")]
struct Args {
    /// Signal length N.
    #[arg(long)]
    n: Option<usize>,
    /// Measurement ratios M/N, comma separated.
    #[arg(long)]
    alphas: Option<String>,
    /// Noise variances, comma separated.
    #[arg(long)]
    noise: Option<String>,
    /// Trials per (ratio, noise) cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Algorithms to run: prvbem, gs.
    #[arg(long)]
    algos: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Per-trial results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-data file with mean correlation and runtime curves.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// key=value settings file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

struct Outputs {
    out: PathBuf,
    curves: Option<PathBuf>,
}

fn configure(args: &Args) -> prvbem::Result<(ExperimentConfig, Outputs)> {
    let mut cfg = ExperimentConfig::default();
    let mut outputs = Outputs {
        out: PathBuf::from("results.csv"),
        curves: None,
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|source| prvbem::Error::Io {
            path: path.clone(),
            source,
        })?;
        for (key, value) in bench::parse_key_values(&text, path)? {
            match key.as_str() {
                "out" => outputs.out = PathBuf::from(value),
                "curves" => outputs.curves = Some(PathBuf::from(value)),
                _ => cfg.set(&key, &value)?,
            }
        }
    }
    let flags: [(&str, Option<String>); 7] = [
        ("n", args.n.map(|v| v.to_string())),
        ("alphas", args.alphas.clone()),
        ("noise", args.noise.clone()),
        ("trials", args.trials.map(|v| v.to_string())),
        ("algos", args.algos.clone()),
        ("seed", args.seed.map(|v| v.to_string())),
        ("workers", args.workers.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if let Some(p) = &args.out {
        outputs.out = p.clone();
    }
    if let Some(p) = &args.curves {
        outputs.curves = Some(p.clone());
    }
    cfg.validate()?;
    Ok((cfg, outputs))
}

fn run(args: &Args) -> prvbem::Result<()> {
    let (cfg, outputs) = configure(args)?;
    log::info!(
        "running {} cells x {} algorithms",
        cfg.alphas.len() * cfg.sigma_n2_list.len() * cfg.trials,
        cfg.algos.len()
    );
    let rows = run_experiment(&cfg)?;
    write_results(&outputs.out, &rows)?;
    if let Some(path) = &outputs.curves {
        emit_curve(path, &rows)?;
    }
    for curve in curves(&rows, Metric::Correlation)? {
        let means: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{}:{:.3}", p.ratio, p.mean))
            .collect();
        println!(
            "{:<7} sigma_n2={:<4} {}",
            curve.algo.name(),
            curve.sigma_n2,
            means.join(" ")
        );
        if curve.sigma_n2 == 0.0 {
            for (a, b) in curve.decreases() {
                eprintln!(
                    "warning: {} mean correlation drops between M/N={a} and M/N={b}",
                    curve.algo.name()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prvbem-bench: {e}");
            ExitCode::FAILURE
        }
    }
}
