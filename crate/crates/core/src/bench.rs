//! Monte-Carlo experiment harness.
//!
//! Sweeps the measurement ratio `M/N` and the noise level, generates one
//! instance per (ratio, noise, trial) cell and runs every selected algorithm
//! on that same instance. Instance seeds are derived from the master seed
//! and the cell's indices with [`derive_seed`], so results do not depend on
//! scheduling or on the number of workers:
//!
//! ```text
//! cell   = derive_seed(master, [alpha_index, noise_index, trial])
//! D      = gen_matrix(M, N, derive_seed(cell, [MATRIX]))
//! x      = gen_signal(N, sigma_x2, derive_seed(cell, [SIGNAL]))
//! y      = gen_observations(D, x, sigma_n2, derive_seed(cell, [NOISE]))
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gs::{gs_solve, GsInit, DEFAULT_ITERS};
use crate::io::sort_results;
use crate::metrics::recovery_correlation;
use crate::model::{MeasurementEnsemble, ModelParams};
use crate::rng::{derive_seed, stream};
use crate::solver::{solve, SolverConfig};
use crate::synth::{gen_matrix, gen_observations, gen_signal};
use crate::{Error, Result};

/// Stream tag for the Gerchberg-Saxton initial point.
const BASELINE_STREAM: u64 = 0x4753_494e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Prvbem,
    Gs,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Prvbem => "prvbem",
            Algo::Gs => "gs",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prvbem" => Ok(Algo::Prvbem),
            "gs" => Ok(Algo::Gs),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// One algorithm run on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub algo: Algo,
    pub n: usize,
    pub m: usize,
    pub sigma_n2: f64,
    pub trial: usize,
    pub seed: u64,
    pub correlation: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    /// Final noise estimate; empty for algorithms that do not estimate it.
    pub sigma_n2_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Measurement ratios `M/N`.
    pub alphas: Vec<f64>,
    pub sigma_n2_list: Vec<f64>,
    /// Prior variance used to generate signals. Never shown to the solvers.
    pub sigma_x2: f64,
    pub trials: usize,
    pub algos: Vec<Algo>,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub gs_iters: usize,
    /// Also run the prior-variance M-step inside prVBEM.
    pub estimate_signal_var: bool,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 64,
            alphas: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            sigma_n2_list: vec![0.0, 0.3, 0.7],
            sigma_x2: 1.0,
            trials: 100,
            algos: vec![Algo::Prvbem, Algo::Gs],
            master_seed: 0,
            workers: 0,
            gs_iters: DEFAULT_ITERS,
            estimate_signal_var: false,
            solver: SolverConfig::default(),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::invalid(format!("{key}: cannot parse '{s}'")))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse '{}'", value.trim())))
}

impl ExperimentConfig {
    /// Number of measurements for ratio `alpha`.
    pub fn rows_for(&self, alpha: f64) -> usize {
        (alpha * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        if self.alphas.is_empty() {
            return Err(Error::invalid("alphas must not be empty"));
        }
        for &a in &self.alphas {
            if !(a.is_finite() && a > 0.0) || self.rows_for(a) == 0 {
                return Err(Error::invalid(format!(
                    "alpha {a} does not give at least one measurement for n = {}",
                    self.n
                )));
            }
            if self.algos.contains(&Algo::Gs) && self.rows_for(a) < self.n {
                return Err(Error::invalid(format!(
                    "gs needs M >= N but alpha {a} gives M = {}",
                    self.rows_for(a)
                )));
            }
        }
        if self.sigma_n2_list.is_empty() {
            return Err(Error::invalid("noise list must not be empty"));
        }
        if let Some(v) = self.sigma_n2_list.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {v}")));
        }
        if !(self.sigma_x2.is_finite() && self.sigma_x2 > 0.0) {
            return Err(Error::invalid(format!("sigma_x2 must be > 0, got {}", self.sigma_x2)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.algos.is_empty() {
            return Err(Error::invalid("at least one algorithm must be selected"));
        }
        if self.gs_iters == 0 {
            return Err(Error::invalid("gs_iters must be >= 1"));
        }
        self.solver.validate()
    }

    /// Applies one `key = value` setting. Keys match the CLI flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse_one(key, value)?,
            "alphas" => self.alphas = parse_list(key, value)?,
            "noise" => self.sigma_n2_list = parse_list(key, value)?,
            "sigma_x2" => self.sigma_x2 = parse_one(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "algos" => self.algos = parse_list(key, value)?,
            "seed" => self.master_seed = parse_one(key, value)?,
            "workers" => self.workers = parse_one(key, value)?,
            "gs_iters" => self.gs_iters = parse_one(key, value)?,
            "estimate_signal_var" => self.estimate_signal_var = parse_one(key, value)?,
            "max_iters" => self.solver.max_iters = parse_one(key, value)?,
            "kl_tol" => self.solver.kl_tol = parse_one(key, value)?,
            "restarts" => self.solver.restarts = parse_one(key, value)?,
            "sigma_n2_floor" => self.solver.sigma_n2_floor = parse_one(key, value)?,
            _ => return Err(Error::invalid(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: format!("expected key=value, got '{line}'"),
        })?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

/// Seed of the instance in cell (`alpha_index`, `noise_index`, `trial`).
pub fn cell_seed(master: u64, alpha_index: usize, noise_index: usize, trial: usize) -> u64 {
    derive_seed(master, &[alpha_index as u64, noise_index as u64, trial as u64])
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    alpha: f64,
    alpha_index: usize,
    sigma_n2: f64,
    noise_index: usize,
    trial: usize,
}

/// Runs the whole grid; rows come back in [`sort_results`] order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let mut cells = Vec::new();
    for (alpha_index, &alpha) in config.alphas.iter().enumerate() {
        for (noise_index, &sigma_n2) in config.sigma_n2_list.iter().enumerate() {
            for trial in 0..config.trials {
                cells.push(Cell {
                    alpha,
                    alpha_index,
                    sigma_n2,
                    noise_index,
                    trial,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let per_cell: Vec<Result<Vec<TrialResult>>> =
        pool.install(|| cells.par_iter().map(|c| run_cell(config, c)).collect());
    let mut rows = Vec::with_capacity(cells.len() * config.algos.len());
    for r in per_cell {
        rows.extend(r?);
    }
    sort_results(&mut rows);
    Ok(rows)
}

/// Runs one cell of the grid, exactly as [`run_experiment`] would.
pub fn run_trial(
    config: &ExperimentConfig,
    alpha_index: usize,
    noise_index: usize,
    trial: usize,
) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let (Some(&alpha), Some(&sigma_n2)) = (
        config.alphas.get(alpha_index),
        config.sigma_n2_list.get(noise_index),
    ) else {
        return Err(Error::invalid(format!(
            "cell ({alpha_index}, {noise_index}) is outside the configured grid"
        )));
    };
    if trial >= config.trials {
        return Err(Error::invalid(format!(
            "trial {trial} is outside the configured {} trials",
            config.trials
        )));
    }
    run_cell(
        config,
        &Cell {
            alpha,
            alpha_index,
            sigma_n2,
            noise_index,
            trial,
        },
    )
}

fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<Vec<TrialResult>> {
    let n = config.n;
    let m = config.rows_for(cell.alpha);
    let seed = cell_seed(config.master_seed, cell.alpha_index, cell.noise_index, cell.trial);
    let d = gen_matrix(m, n, derive_seed(seed, &[stream::MATRIX]))?;
    let x = gen_signal(n, config.sigma_x2, derive_seed(seed, &[stream::SIGNAL]))?;
    let (y, _) = gen_observations(&d, &x, cell.sigma_n2, derive_seed(seed, &[stream::NOISE]))?;
    let ensemble = MeasurementEnsemble::new(d, y)?;

    let mut out = Vec::with_capacity(config.algos.len());
    for &algo in &config.algos {
        let (x_hat, iterations, runtime_ms, sigma_n2_hat) = match algo {
            Algo::Prvbem => {
                let params = ModelParams::blind(&ensemble)
                    .with_signal_var_estimation(config.estimate_signal_var);
                let solver = SolverConfig {
                    seed: derive_seed(seed, &[stream::SOLVER]),
                    ..config.solver
                };
                let start = Instant::now();
                let sol = solve(&ensemble, &params, &solver)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                (sol.x_hat, sol.iterations, ms, Some(sol.state.sigma_n2_hat))
            }
            Algo::Gs => {
                let start = Instant::now();
                let (x_hat, it) = gs_solve(
                    &ensemble,
                    config.gs_iters,
                    GsInit::Random,
                    derive_seed(seed, &[BASELINE_STREAM]),
                )?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                (x_hat, it, ms, None)
            }
        };
        out.push(TrialResult {
            algo,
            n,
            m,
            sigma_n2: cell.sigma_n2,
            trial: cell.trial,
            seed,
            correlation: recovery_correlation(&x_hat, &x)?,
            iterations,
            runtime_ms,
            sigma_n2_hat,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Correlation,
    RuntimeMs,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Correlation => "correlation",
            Metric::RuntimeMs => "runtime_ms",
        }
    }

    fn of(self, r: &TrialResult) -> f64 {
        match self {
            Metric::Correlation => r.correlation,
            Metric::RuntimeMs => r.runtime_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    /// `M/N`.
    pub ratio: f64,
    pub mean: f64,
    pub trials: usize,
}

/// Per-cell means of one metric for one algorithm at one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub algo: Algo,
    pub sigma_n2: f64,
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Consecutive points where the mean drops, as `(ratio_before, ratio_after)`.
    pub fn decreases(&self) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .filter(|w| w[1].mean < w[0].mean)
            .map(|w| (w[0].ratio, w[1].ratio))
            .collect()
    }
}

/// Groups `results` by (algorithm, noise level) and averages `metric` over
/// trials at each `M/N`.
pub fn curves(results: &[TrialResult], metric: Metric) -> Result<Vec<Curve>> {
    if results.is_empty() {
        return Err(Error::invalid("no results to summarise"));
    }
    let mut rows = results.to_vec();
    sort_results(&mut rows);
    let mut out: Vec<Curve> = Vec::new();
    let mut keys: Vec<(Algo, f64)> = Vec::new();
    for r in &rows {
        if !keys.iter().any(|&(a, s)| a == r.algo && s == r.sigma_n2) {
            keys.push((r.algo, r.sigma_n2));
        }
    }
    keys.sort_by(|a, b| a.0.name().cmp(b.0.name()).then(a.1.total_cmp(&b.1)));
    for (algo, sigma_n2) in keys {
        let mut points: Vec<CurvePoint> = Vec::new();
        for r in rows.iter().filter(|r| r.algo == algo && r.sigma_n2 == sigma_n2) {
            let ratio = r.m as f64 / r.n as f64;
            match points.last_mut() {
                Some(p) if p.ratio == ratio => {
                    p.mean += metric.of(r);
                    p.trials += 1;
                }
                _ => points.push(CurvePoint {
                    ratio,
                    mean: metric.of(r),
                    trials: 1,
                }),
            }
        }
        for p in &mut points {
            p.mean /= p.trials as f64;
        }
        out.push(Curve {
            algo,
            sigma_n2,
            metric,
            points,
        });
    }
    Ok(out)
}

/// Plot data: per algorithm, a correlation section then a runtime section,
/// each holding one block per noise level. Blocks are separated by a blank
/// line; every block is `m_over_n mean trials` rows under a `#` header.
pub fn format_curves(results: &[TrialResult]) -> Result<String> {
    let corr = curves(results, Metric::Correlation)?;
    let time = curves(results, Metric::RuntimeMs)?;
    let mut algos: Vec<Algo> = corr.iter().map(|c| c.algo).collect();
    algos.dedup();
    let mut out = String::new();
    for algo in algos {
        for curve in corr.iter().chain(&time).filter(|c| c.algo == algo) {
            let _ = writeln!(
                out,
                "# algo={} sigma_n2={} metric={}",
                algo.name(),
                curve.sigma_n2,
                curve.metric.name()
            );
            out.push_str("# m_over_n mean trials\n");
            for p in &curve.points {
                let _ = writeln!(out, "{} {} {}", p.ratio, p.mean, p.trials);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn emit_curve(path: impl AsRef<Path>, results: &[TrialResult]) -> Result<()> {
    let path = path.as_ref();
    let text = format_curves(results)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
