//! Prints the per-iteration free energy and hyperparameter estimates for one
//! synthetic instance: `cargo run --release --example trace -- [M/N] [sigma_n2] [seed] [fix|noise|blind]`.

use prvbem::metrics::recovery_correlation;
use prvbem::solver::{init_state, iterate};
use prvbem::synth::{gen_matrix, gen_observations, gen_signal};
use prvbem::{MeasurementEnsemble, ModelParams, SolverConfig};

fn main() -> prvbem::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map_or(4.0, |s| s.parse().unwrap());
    let sigma_n2: f64 = args.get(2).map_or(0.0, |s| s.parse().unwrap());
    let seed: u64 = args.get(3).map_or(1, |s| s.parse().unwrap());
    let mode = args.get(4).map_or("blind", |s| s.as_str());
    let n = 64;
    let m = (alpha * n as f64).round() as usize;

    let d = gen_matrix(m, n, seed)?;
    let x = gen_signal(n, 1.0, seed + 1)?;
    let (y, _) = gen_observations(&d, &x, sigma_n2, seed + 2)?;
    let ens = MeasurementEnsemble::new(d, y)?;
    let params = match mode {
        "fix" => ModelParams::new(1.0, sigma_n2)?,
        "noise" => ModelParams::blind(&ens),
        _ => ModelParams::blind(&ens).with_signal_var_estimation(true),
    };
    let cfg = SolverConfig { seed, ..SolverConfig::default() };
    let floor = cfg.noise_floor(&ens);
    let mut s = init_state(&ens, &params, &cfg)?;
    println!("init F={:.6e} sx2={:.4e} sn2={:.4e}", s.free_energy, s.sigma_x2, s.sigma_n2_hat);
    for it in 1..=cfg.max_iters {
        let prev = s.free_energy;
        iterate(&mut s, &ens, &params, floor);
        let corr = recovery_correlation(&s.m, &x)?;
        if it <= 20 || it % 25 == 0 {
            println!(
                "{it:4} F={:.10e} dF={:.3e} sx2={:.4e} sn2={:.4e} corr={corr:.6}",
                s.free_energy,
                prev - s.free_energy,
                s.sigma_x2,
                s.sigma_n2_hat
            );
        }
        if prev - s.free_energy < cfg.kl_tol {
            println!("stop at {it}: corr={corr:.6}");
            break;
        }
    }
    Ok(())
}
