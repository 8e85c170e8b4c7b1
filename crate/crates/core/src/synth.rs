//! Random problem instances.
//!
//! Matrices are filled column by column (row index fastest), each entry
//! drawing its real part then its imaginary part from one
//! [`GaussianStream`]. Signals and noise draw one complex value per entry in
//! index order.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::model::{CMatrix, GroundTruth};
use crate::rng::GaussianStream;
use crate::{Error, Result};

/// `m_rows x n_cols` matrix of i.i.d. `CN(0, 1/m_rows)` entries.
pub fn gen_matrix(m_rows: usize, n_cols: usize, seed: u64) -> Result<CMatrix> {
    if m_rows == 0 || n_cols == 0 {
        return Err(Error::invalid(format!(
            "matrix dimensions must be >= 1, got {m_rows}x{n_cols}"
        )));
    }
    let mut g = GaussianStream::new(seed);
    let var = 1.0 / m_rows as f64;
    let data: Vec<Complex64> = (0..m_rows * n_cols).map(|_| g.complex_normal(var)).collect();
    Ok(CMatrix::from_vec(m_rows, n_cols, data))
}

/// Length-`n` vector of i.i.d. `CN(0, sigma_x2)` entries.
pub fn gen_signal(n: usize, sigma_x2: f64, seed: u64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::invalid("signal length must be >= 1"));
    }
    if !(sigma_x2.is_finite() && sigma_x2 > 0.0) {
        return Err(Error::invalid(format!("sigma_x2 must be > 0, got {sigma_x2}")));
    }
    let mut g = GaussianStream::new(seed);
    Ok((0..n).map(|_| g.complex_normal(sigma_x2)).collect())
}

/// Noisy modulus observations `y = |D x + n|`, `n ~ CN(0, sigma_n2)`.
///
/// The recorded phases satisfy `y_mu e^{-j theta_mu} = (D x)_mu + n_mu`.
pub fn gen_observations(
    d: &CMatrix,
    x: &[Complex64],
    sigma_n2: f64,
    seed: u64,
) -> Result<(Vec<f64>, GroundTruth)> {
    if d.ncols() != x.len() {
        return Err(Error::dims(format!(
            "matrix has {} columns but x has {} entries",
            d.ncols(),
            x.len()
        )));
    }
    if !(sigma_n2.is_finite() && sigma_n2 >= 0.0) {
        return Err(Error::invalid(format!("sigma_n2 must be >= 0, got {sigma_n2}")));
    }
    let m = d.nrows();
    let mut g = GaussianStream::new(seed);
    let noise: Vec<Complex64> = if sigma_n2 > 0.0 {
        (0..m).map(|_| g.complex_normal(sigma_n2)).collect()
    } else {
        vec![Complex64::new(0.0, 0.0); m]
    };
    let mut y = Vec::with_capacity(m);
    let mut theta = Vec::with_capacity(m);
    for mu in 0..m {
        let mut w = noise[mu];
        for (i, &xi) in x.iter().enumerate() {
            w += d[(mu, i)] * xi;
        }
        y.push(w.norm());
        theta.push(wrap_angle(-w.arg()));
    }
    Ok((
        y,
        GroundTruth {
            x: x.to_vec(),
            theta,
            noise,
            seed,
        },
    ))
}

/// Maps any finite angle into `[0, 2 pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}
