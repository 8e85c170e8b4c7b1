//! Phase-invariant scoring.

use num_complex::Complex64;

use crate::{Error, Result};

/// `|x_hat^H x_true| / (||x_hat|| ||x_true||)`, or 0 for an all-zero estimate.
///
/// Invariant under any nonzero complex rescaling of either argument, so a
/// global phase offset (which the measurements cannot resolve) is ignored.
pub fn recovery_correlation(x_hat: &[Complex64], x_true: &[Complex64]) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::dims(format!(
            "estimate has {} entries but truth has {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let nt = x_true.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if nt == 0.0 {
        return Err(Error::invalid("reference signal is identically zero"));
    }
    let nh = x_hat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if nh == 0.0 {
        return Ok(0.0);
    }
    let inner: Complex64 = x_hat.iter().zip(x_true).map(|(a, b)| a.conj() * b).sum();
    Ok((inner.norm() / (nh * nt)).min(1.0))
}
