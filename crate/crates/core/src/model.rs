//! Domain types shared by the solvers, the generator and the harness.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bessel::{bessel_ratio, Concentration};
use crate::{Error, Result};

/// Dense complex matrix, column-major.
pub type CMatrix = DMatrix<Complex64>;

/// Prior and noise hyperparameters, and whether the solver re-estimates them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Prior variance of each signal coefficient.
    pub sigma_x2: f64,
    /// Noise variance of each measurement.
    pub sigma_n2: f64,
    pub estimate_noise: bool,
    pub estimate_signal_var: bool,
}

impl ModelParams {
    pub fn new(sigma_x2: f64, sigma_n2: f64) -> Result<Self> {
        if !(sigma_x2.is_finite() && sigma_x2 > 0.0) {
            return Err(Error::invalid(format!("sigma_x2 must be > 0, got {sigma_x2}")));
        }
        if !(sigma_n2.is_finite() && sigma_n2 >= 0.0) {
            return Err(Error::invalid(format!("sigma_n2 must be >= 0, got {sigma_n2}")));
        }
        Ok(ModelParams {
            sigma_x2,
            sigma_n2,
            estimate_noise: false,
            estimate_signal_var: false,
        })
    }

    pub fn with_noise_estimation(mut self, on: bool) -> Self {
        self.estimate_noise = on;
        self
    }

    pub fn with_signal_var_estimation(mut self, on: bool) -> Self {
        self.estimate_signal_var = on;
        self
    }

    /// Neither variance is known. The noise variance is estimated, starting
    /// from the solver's own initialiser; the prior variance is fixed at the
    /// moment estimate `y^H y / ||D||_F^2`. Its M-step is left off because it
    /// shrinks `sigma_x2` towards the `m = 0` solution from every start tried.
    pub fn blind(ensemble: &MeasurementEnsemble) -> Self {
        let energy: f64 = ensemble.column_energies().iter().sum();
        let sigma_x2 = (ensemble.y_energy() / energy).max(f64::MIN_POSITIVE);
        ModelParams {
            sigma_x2: if sigma_x2.is_finite() { sigma_x2 } else { 1.0 },
            sigma_n2: 0.0,
            estimate_noise: true,
            estimate_signal_var: false,
        }
    }
}

/// Measurement matrix `D` and modulus observations `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    d: CMatrix,
    y: Vec<f64>,
    column_energies: Vec<f64>,
}

impl MeasurementEnsemble {
    pub fn new(d: CMatrix, y: Vec<f64>) -> Result<Self> {
        let (m, n) = d.shape();
        if m == 0 || n == 0 {
            return Err(Error::dims(format!("matrix must be non-empty, got {m}x{n}")));
        }
        if y.len() != m {
            return Err(Error::dims(format!(
                "matrix has {m} rows but y has {} entries",
                y.len()
            )));
        }
        if let Some((pos, v)) = d.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite matrix entry {v} at ({}, {})",
                pos % m,
                pos / m
            )));
        }
        for (mu, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite observation y[{mu}] = {v}")));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("negative observation y[{mu}] = {v}")));
            }
        }
        let column_energies = d.column_iter().map(|c| c.norm_squared()).collect();
        Ok(MeasurementEnsemble {
            d,
            y,
            column_energies,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.d.nrows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.d.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `d_i^H d_i` for every column.
    pub fn column_energies(&self) -> &[f64] {
        &self.column_energies
    }

    /// Column `i` as a contiguous slice.
    #[inline]
    pub fn column(&self, i: usize) -> &[Complex64] {
        let m = self.rows();
        &self.d.as_slice()[i * m..(i + 1) * m]
    }

    /// `y^H y`.
    pub fn y_energy(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum()
    }

    /// `D v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (i, &vi) in v.iter().enumerate() {
            if vi == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, &d) in out.iter_mut().zip(self.column(i)) {
                *o += d * vi;
            }
        }
        out
    }
}

/// Planted quantities behind a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x: Vec<Complex64>,
    /// Conjugate phases, `y_mu e^{-j theta_mu} = z_mu + n_mu`, in `[0, 2 pi)`.
    pub theta: Vec<f64>,
    pub noise: Vec<Complex64>,
    pub seed: u64,
}

/// Von Mises factor `q(theta_mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VonMisesStats {
    /// `arg(y_mu^* <z_mu>)` in `[0, 2 pi)`.
    pub mean_direction: f64,
    pub concentration: Concentration,
    /// Mean resultant length `I1(kappa)/I0(kappa)`.
    pub resultant: f64,
}

impl VonMisesStats {
    pub fn uniform() -> Self {
        VonMisesStats::default()
    }

    pub fn new(mean_direction: f64, concentration: Concentration) -> Self {
        VonMisesStats {
            mean_direction,
            concentration,
            resultant: bessel_ratio(concentration),
        }
    }
}

/// Mean-field posterior `prod_i CN(m_i, sigma_i) prod_mu VM(theta_mu)` and
/// the current hyperparameter estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub m: Vec<Complex64>,
    pub sigma: Vec<f64>,
    /// `D m`.
    pub z_mean: Vec<Complex64>,
    /// `y_mu E_q[e^{-j theta_mu}]`.
    pub y_bar: Vec<Complex64>,
    /// `y_bar - z_mean`.
    pub residual: Vec<Complex64>,
    pub phase: Vec<VonMisesStats>,
    pub free_energy: f64,
    pub sigma_n2_hat: f64,
    /// Current prior variance (fixed or estimated).
    pub sigma_x2: f64,
}
