//! Mean-field variational Bayes EM for phase retrieval.
//!
//! The posterior over the signal coefficients and the missing measurement
//! phases is approximated by `prod_i CN(m_i, sigma_i) prod_mu VM(theta_mu)`.
//! One iteration performs, in order:
//!
//! 1. the von Mises update of every phase factor, which rebuilds the
//!    effective observations `y_bar`;
//! 2. one Gauss-Seidel sweep over the coefficient factors, keeping the
//!    residual `y_bar - D m` up to date in `O(M)` per coefficient;
//! 3. the optional M-steps for the noise and prior variances, followed by a
//!    refresh of the coefficient variances under the new hyperparameters;
//! 4. evaluation of the free energy (negative ELBO).
//!
//! Each block minimises the free energy exactly over its own variables, so
//! the free energy never increases from one iteration to the next.
//!
//! The coefficient mean update uses `m_i ∝ d_i^H r_i`. With the phases known
//! this makes the fixed point the ridge estimate
//! `(sigma_n2/sigma_x2 I + D^H D)^{-1} D^H y_bar`; the conjugate orientation
//! `r_i^H d_i` does not.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bessel::{bessel_ratio_complement, log_bessel_i0_scaled, Concentration};
use crate::model::{MeasurementEnsemble, ModelParams, PosteriorState, VonMisesStats};
use crate::rng::{derive_seed, stream, GaussianStream};
use crate::synth::wrap_angle;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// `m = 0`. A fixed point of the updates; only useful for tests.
    ZeroMean,
    /// `m_i ~ CN(0, sigma_x2)`, seeded.
    #[default]
    RandomGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the free energy drops by less than this between iterations.
    pub kl_tol: f64,
    /// Noise variance floor, relative to `max(1, y^H y / M)`.
    pub sigma_n2_floor: f64,
    /// Independent restarts; the run with the lowest free energy wins.
    pub restarts: usize,
    pub init_scheme: InitScheme,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            kl_tol: 1e-8,
            sigma_n2_floor: 1e-12,
            restarts: 1,
            init_scheme: InitScheme::RandomGaussian,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.kl_tol.is_finite() && self.kl_tol > 0.0) {
            return Err(Error::invalid(format!("kl_tol must be > 0, got {}", self.kl_tol)));
        }
        if !(self.sigma_n2_floor.is_finite() && self.sigma_n2_floor > 0.0) {
            return Err(Error::invalid(format!(
                "sigma_n2_floor must be > 0, got {}",
                self.sigma_n2_floor
            )));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be >= 1"));
        }
        Ok(())
    }

    /// Absolute noise floor for `ensemble`.
    pub fn noise_floor(&self, ensemble: &MeasurementEnsemble) -> f64 {
        let scale = ensemble.y_energy() / ensemble.rows() as f64;
        self.sigma_n2_floor * scale.max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Posterior means, the coordinate-wise MAP estimate.
    pub x_hat: Vec<Complex64>,
    pub state: PosteriorState,
    pub iterations: usize,
    /// Whether the stopping rule fired before `max_iters`.
    pub converged: bool,
    /// Free energy after initialisation and after every iteration.
    pub trace: Vec<f64>,
}

pub fn init_state(
    ensemble: &MeasurementEnsemble,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PosteriorState> {
    config.validate()?;
    ModelParams::new(params.sigma_x2, params.sigma_n2)?;
    let (m_rows, n) = (ensemble.rows(), ensemble.cols());
    let floor = config.noise_floor(ensemble);
    let sigma_n2_hat = if params.estimate_noise {
        ensemble.y_energy() / m_rows as f64
    } else {
        params.sigma_n2
    }
    .max(floor);

    let m = match config.init_scheme {
        InitScheme::ZeroMean => vec![ZERO; n],
        InitScheme::RandomGaussian => {
            let mut g = GaussianStream::new(derive_seed(config.seed, &[stream::SOLVER]));
            (0..n).map(|_| g.complex_normal(params.sigma_x2)).collect()
        }
    };
    let z_mean = ensemble.apply(&m);
    let mut state = PosteriorState {
        m,
        sigma: vec![params.sigma_x2; n],
        residual: z_mean.iter().map(|z| -z).collect(),
        z_mean,
        y_bar: vec![ZERO; m_rows],
        phase: vec![VonMisesStats::uniform(); m_rows],
        free_energy: f64::INFINITY,
        sigma_n2_hat,
        sigma_x2: params.sigma_x2,
    };
    refresh_coefficient_variances(&mut state, ensemble);
    update_phase_stats(&mut state, ensemble);
    state.free_energy = free_energy(&state, ensemble);
    Ok(state)
}

/// Von Mises update of every phase factor from the current `z_mean` and
/// noise estimate; rebuilds `y_bar` and `residual`.
pub fn update_phase_stats(state: &mut PosteriorState, ensemble: &MeasurementEnsemble) {
    let sigma_n2 = state.sigma_n2_hat;
    for (mu, &y) in ensemble.y().iter().enumerate() {
        let w = state.z_mean[mu] * y;
        let (stats, y_bar) = if w == ZERO {
            (VonMisesStats::uniform(), ZERO)
        } else {
            let kappa = (2.0 * w.norm() / sigma_n2).min(f64::MAX);
            let direction = w.arg();
            let stats = VonMisesStats::new(
                wrap_angle(direction),
                Concentration::new(kappa).unwrap_or(Concentration::ZERO),
            );
            (stats, Complex64::from_polar(y * stats.resultant, direction))
        };
        state.phase[mu] = stats;
        state.y_bar[mu] = y_bar;
        state.residual[mu] = y_bar - state.z_mean[mu];
    }
}

/// One sequential pass `i = 0..N` over the coefficient factors.
pub fn sweep_coefficients(state: &mut PosteriorState, ensemble: &MeasurementEnsemble) {
    let (sigma_n2, sigma_x2) = (state.sigma_n2_hat, state.sigma_x2);
    for (r, (yb, z)) in state.residual.iter_mut().zip(state.y_bar.iter().zip(&state.z_mean)) {
        *r = yb - z;
    }
    for i in 0..ensemble.cols() {
        let energy = ensemble.column_energies()[i];
        let col = ensemble.column(i);
        let denom = sigma_n2 + sigma_x2 * energy;
        // d_i^H r_i where r_i = residual + m_i d_i
        let proj: Complex64 = col
            .iter()
            .zip(&state.residual)
            .map(|(d, r)| d.conj() * r)
            .sum::<Complex64>()
            + state.m[i] * energy;
        let updated = proj * (sigma_x2 / denom);
        let delta = updated - state.m[i];
        if delta != ZERO {
            for (r, d) in state.residual.iter_mut().zip(col) {
                *r -= d * delta;
            }
        }
        state.m[i] = updated;
        state.sigma[i] = sigma_n2 * sigma_x2 / denom;
    }
    state.z_mean = ensemble.apply(&state.m);
    for (r, (yb, z)) in state.residual.iter_mut().zip(state.y_bar.iter().zip(&state.z_mean)) {
        *r = yb - z;
    }
}

/// `sigma_i = sigma_n2 sigma_x2 / (sigma_n2 + sigma_x2 d_i^H d_i)`.
pub fn refresh_coefficient_variances(state: &mut PosteriorState, ensemble: &MeasurementEnsemble) {
    let (sigma_n2, sigma_x2) = (state.sigma_n2_hat, state.sigma_x2);
    for (s, &e) in state.sigma.iter_mut().zip(ensemble.column_energies()) {
        *s = sigma_n2 * sigma_x2 / (sigma_n2 + sigma_x2 * e);
    }
}

/// `E_q ||y ∘ e^{-j theta} - D x||^2`.
///
/// Evaluated as `||y_bar - z_mean||^2 + sum_mu y_mu^2 (1 - R_mu^2) +
/// sum_i sigma_i d_i^H d_i`, which equals `y^H y - 2 Re(y_bar^H z_mean) +
/// ||z_mean||^2 + sum_i sigma_i d_i^H d_i` but keeps full relative
/// precision when the phases are nearly certain.
pub fn expected_misfit(state: &PosteriorState, ensemble: &MeasurementEnsemble) -> f64 {
    let residual: f64 = state
        .y_bar
        .iter()
        .zip(&state.z_mean)
        .map(|(yb, z)| (yb - z).norm_sqr())
        .sum();
    let phase_spread: f64 = ensemble
        .y()
        .iter()
        .zip(&state.phase)
        .filter(|(&y, _)| y != 0.0)
        .map(|(&y, p)| {
            let comp = bessel_ratio_complement(p.concentration);
            y * y * comp * (2.0 - comp)
        })
        .sum();
    let coeff_spread: f64 = state
        .sigma
        .iter()
        .zip(ensemble.column_energies())
        .map(|(s, e)| s * e)
        .sum();
    residual + phase_spread + coeff_spread
}

/// The noise M-step before clamping to the floor. Never negative.
pub fn noise_variance_unclamped(state: &PosteriorState, ensemble: &MeasurementEnsemble) -> f64 {
    expected_misfit(state, ensemble) / ensemble.rows() as f64
}

/// Noise M-step; returns the unclamped value.
pub fn estimate_noise_variance(
    state: &mut PosteriorState,
    ensemble: &MeasurementEnsemble,
    floor: f64,
) -> f64 {
    let v = noise_variance_unclamped(state, ensemble);
    state.sigma_n2_hat = v.max(floor);
    v
}

/// Prior-variance M-step: `sigma_x2 = mean(|m_i|^2 + sigma_i)`.
pub fn estimate_signal_variance(state: &mut PosteriorState) {
    let n = state.m.len() as f64;
    let total: f64 = state
        .m
        .iter()
        .zip(&state.sigma)
        .map(|(m, s)| m.norm_sqr() + s)
        .sum();
    state.sigma_x2 = (total / n).max(f64::MIN_POSITIVE);
}

/// Free energy split by origin. The terms sum to the negative ELBO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergyTerms {
    /// `sum_mu E log q(theta_mu)`.
    pub phase_neg_entropy: f64,
    /// `sum_i E log q(x_i)`.
    pub coeff_neg_entropy: f64,
    /// `-E log p(y | x, theta)`.
    pub likelihood: f64,
    /// `-E log p(x)`.
    pub signal_prior: f64,
    /// `-E log p(theta)`.
    pub phase_prior: f64,
}

impl FreeEnergyTerms {
    pub fn total(&self) -> f64 {
        self.phase_neg_entropy
            + self.coeff_neg_entropy
            + self.likelihood
            + self.signal_prior
            + self.phase_prior
    }
}

pub fn free_energy_terms(state: &PosteriorState, ensemble: &MeasurementEnsemble) -> FreeEnergyTerms {
    let (m_rows, n) = (ensemble.rows() as f64, ensemble.cols() as f64);
    let log_2pi = (2.0 * PI).ln();
    // kappa R - log(2 pi I0) = -kappa (1 - R) - log(e^{-kappa} I0) - log 2 pi
    let phase_neg_entropy: f64 = state
        .phase
        .iter()
        .map(|p| {
            let k = p.concentration;
            let kr = if k.value() == 0.0 {
                0.0
            } else {
                k.value() * bessel_ratio_complement(k)
            };
            -kr - log_bessel_i0_scaled(k) - log_2pi
        })
        .sum();
    let coeff_neg_entropy: f64 = state
        .sigma
        .iter()
        .map(|s| -(PI * std::f64::consts::E * s).ln())
        .sum();
    let sigma_n2 = state.sigma_n2_hat;
    let likelihood =
        m_rows * (PI * sigma_n2).ln() + expected_misfit(state, ensemble) / sigma_n2;
    let sigma_x2 = state.sigma_x2;
    let second_moment: f64 = state
        .m
        .iter()
        .zip(&state.sigma)
        .map(|(m, s)| m.norm_sqr() + s)
        .sum();
    let signal_prior = n * (PI * sigma_x2).ln() + second_moment / sigma_x2;
    FreeEnergyTerms {
        phase_neg_entropy,
        coeff_neg_entropy,
        likelihood,
        signal_prior,
        phase_prior: m_rows * log_2pi,
    }
}

/// `KL(q || p(x, theta | y)) - log p(y)`.
pub fn free_energy(state: &PosteriorState, ensemble: &MeasurementEnsemble) -> f64 {
    free_energy_terms(state, ensemble).total()
}

/// One full iteration; updates `state.free_energy`.
pub fn iterate(
    state: &mut PosteriorState,
    ensemble: &MeasurementEnsemble,
    params: &ModelParams,
    floor: f64,
) {
    update_phase_stats(state, ensemble);
    sweep_coefficients(state, ensemble);
    if params.estimate_noise {
        estimate_noise_variance(state, ensemble, floor);
    }
    if params.estimate_signal_var {
        estimate_signal_variance(state);
    }
    if params.estimate_noise || params.estimate_signal_var {
        refresh_coefficient_variances(state, ensemble);
    }
    state.free_energy = free_energy(state, ensemble);
}

/// Runs the solver to convergence, keeping the best of `config.restarts`
/// independently seeded runs.
pub fn solve(
    ensemble: &MeasurementEnsemble,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    let mut best: Option<Solution> = None;
    for r in 0..config.restarts {
        let mut cfg = *config;
        if r > 0 {
            cfg.seed = derive_seed(config.seed, &[stream::RESTART, r as u64]);
        }
        let run = solve_once(ensemble, params, &cfg)?;
        let better = best
            .as_ref()
            .is_none_or(|b| run.state.free_energy < b.state.free_energy);
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn solve_once(
    ensemble: &MeasurementEnsemble,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<Solution> {
    let mut cfg = *config;
    if ensemble.y().iter().all(|&y| y == 0.0) {
        // m = 0 is the exact posterior mean here and a fixed point
        cfg.init_scheme = InitScheme::ZeroMean;
    }
    let floor = cfg.noise_floor(ensemble);
    let mut state = init_state(ensemble, params, &cfg)?;
    let mut trace = vec![state.free_energy];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let previous = state.free_energy;
        iterate(&mut state, ensemble, params, floor);
        iterations += 1;
        trace.push(state.free_energy);
        if previous - state.free_energy < cfg.kl_tol {
            converged = true;
            break;
        }
    }
    log::debug!(
        "solver stopped after {iterations} iterations (converged: {converged}, F = {})",
        state.free_energy
    );
    Ok(Solution {
        x_hat: state.m.clone(),
        state,
        iterations,
        converged,
        trace,
    })
}
