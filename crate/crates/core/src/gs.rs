//! Gerchberg-Saxton alternating projections.
//!
//! Alternates between the magnitude set `{z : |z_mu| = y_mu}` and the
//! column span of `D`. The span projection is a least-squares solve through
//! a thin QR factorisation computed once per run.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::{CMatrix, MeasurementEnsemble};
use crate::rng::GaussianStream;
use crate::{Error, Result};

pub const DEFAULT_ITERS: usize = 3000;

/// Pivots below this fraction of the largest one count as rank deficiency.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GsInit {
    Given(Vec<Complex64>),
    /// `CN(0, 1)` entries from the run seed.
    Random,
}

/// `D^+` applied through `D = Q R`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q_adj: DMatrix<Complex64>,
    r: DMatrix<Complex64>,
}

impl LeastSquares {
    pub fn new(d: &CMatrix) -> Result<Self> {
        let (m, n) = d.shape();
        if m < n {
            return Err(Error::RankDeficient {
                index: m,
                pivot: 0.0,
            });
        }
        let qr = d.clone().qr();
        let r = qr.r();
        let largest = (0..n).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
        for i in 0..n {
            let pivot = r[(i, i)].norm();
            if pivot.is_nan() || pivot <= RANK_TOL * largest {
                return Err(Error::RankDeficient { index: i, pivot });
            }
        }
        Ok(LeastSquares {
            q_adj: qr.q().adjoint(),
            r,
        })
    }

    /// `argmin_x ||D x - b||`.
    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let rhs = &self.q_adj * b;
        self.r
            .solve_upper_triangular(&rhs)
            .expect("pivots checked at construction")
    }
}

/// Projects `z` onto the magnitude set; entries with `z_mu = 0` take phase 0.
pub fn magnitude_projection(z: &DVector<Complex64>, y: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(
        z.len(),
        z.iter().zip(y).map(|(zv, &yv)| {
            let r = zv.norm();
            if r == 0.0 {
                Complex64::new(yv, 0.0)
            } else {
                zv * (yv / r)
            }
        }),
    )
}

/// Runs `iters` Gerchberg-Saxton iterations and returns the final estimate.
pub fn gs_solve(
    ensemble: &MeasurementEnsemble,
    iters: usize,
    init: GsInit,
    seed: u64,
) -> Result<(Vec<Complex64>, usize)> {
    if iters == 0 {
        return Err(Error::invalid("iteration count must be >= 1"));
    }
    let n = ensemble.cols();
    let x0 = match init {
        GsInit::Given(x) => {
            if x.len() != n {
                return Err(Error::dims(format!(
                    "initial estimate has {} entries, expected {n}",
                    x.len()
                )));
            }
            x
        }
        GsInit::Random => {
            let mut g = GaussianStream::new(seed);
            (0..n).map(|_| g.complex_normal(1.0)).collect()
        }
    };
    let d = ensemble.matrix();
    let ls = LeastSquares::new(d)?;
    let mut x = DVector::from_vec(x0);
    for _ in 0..iters {
        let z = d * &x;
        let target = magnitude_projection(&z, ensemble.y());
        x = ls.solve(&target);
    }
    Ok((x.iter().copied().collect(), iters))
}
