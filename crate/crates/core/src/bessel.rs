//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Only the combinations needed by the phase posterior are exposed: the
//! ratio `I1/I0` (the mean resultant length of a von Mises law), its
//! complement `1 - I1/I0`, and `log I0` in plain and exponentially scaled
//! form. Small arguments use the ascending power series; arguments at or
//! above [`SERIES_LIMIT`] use the Hankel asymptotic expansion truncated at
//! its smallest term, which at the crossover is already accurate to about
//! 1e-13 relative.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Crossover between the power series and the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 15.0;

/// Concentration parameter of a von Mises distribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Concentration(f64);

impl Concentration {
    pub const ZERO: Concentration = Concentration(0.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::invalid(format!("concentration must be finite, got {kappa}")));
        }
        if kappa < 0.0 {
            return Err(Error::invalid(format!("concentration must be >= 0, got {kappa}")));
        }
        // normalise -0.0
        Ok(Concentration(kappa.max(0.0)))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Concentration {
    type Error = Error;

    fn try_from(kappa: f64) -> Result<Self> {
        Concentration::new(kappa)
    }
}

/// Largest `f64` below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// `I1(k) / I0(k)`, in `[0, 1)`.
///
/// Above roughly `k = 1e16` the true value is closer to 1 than the float
/// spacing allows; the result saturates at the largest float below 1.
pub fn bessel_ratio(kappa: Concentration) -> f64 {
    let k = kappa.0;
    let r = if k < SERIES_LIMIT {
        let s = Series::eval(k);
        s.i1 / s.i0
    } else {
        let a = Asymptotic::eval(k);
        a.s1 / a.s0
    };
    r.min(BELOW_ONE)
}

/// `1 - I1(k) / I0(k)`, accurate in relative terms for large `k` where the
/// ratio itself rounds to 1.
pub fn bessel_ratio_complement(kappa: Concentration) -> f64 {
    let k = kappa.0;
    if k < SERIES_LIMIT {
        let s = Series::eval(k);
        (s.i0 - s.i1) / s.i0
    } else {
        let a = Asymptotic::eval(k);
        a.diff / a.s0
    }
}

/// `log I0(k)`.
pub fn log_bessel_i0(kappa: Concentration) -> f64 {
    let k = kappa.0;
    if k < SERIES_LIMIT {
        Series::eval(k).i0_tail.ln_1p()
    } else {
        k + log_bessel_i0_scaled(kappa)
    }
}

/// `log(exp(-k) I0(k))`, finite for every finite `k`.
pub fn log_bessel_i0_scaled(kappa: Concentration) -> f64 {
    let k = kappa.0;
    if k < SERIES_LIMIT {
        Series::eval(k).i0_tail.ln_1p() - k
    } else {
        let a = Asymptotic::eval(k);
        a.s0.ln() - 0.5 * (2.0 * PI * k).ln()
    }
}

/// Ascending series `I0 = sum q^j/(j!)^2`, `I1 = (k/2) sum q^j/(j!(j+1)!)`
/// with `q = k^2/4`. All terms are positive so the sums carry no
/// cancellation. `i0_tail = I0 - 1` keeps `log I0` accurate near zero.
struct Series {
    i0: f64,
    i0_tail: f64,
    i1: f64,
}

impl Series {
    fn eval(k: f64) -> Series {
        let q = 0.25 * k * k;
        let mut t0 = 1.0;
        let mut t1 = 1.0;
        let mut tail = 0.0;
        let mut i1 = 1.0;
        let mut j = 1.0;
        while j < 200.0 {
            t0 *= q / (j * j);
            t1 *= q / (j * (j + 1.0));
            tail += t0;
            i1 += t1;
            if t0 <= f64::EPSILON * 1e-2 * tail && t1 <= f64::EPSILON * 1e-2 * i1 {
                break;
            }
            j += 1.0;
        }
        Series {
            i0: 1.0 + tail,
            i0_tail: tail,
            i1: 0.5 * k * i1,
        }
    }
}

/// Hankel expansion `I_v(k) ~ e^k / sqrt(2 pi k) * sum_j (-1)^j a_j(v) / k^j`.
/// `s0` and `s1` are the order-0 and order-1 sums; `diff = s0 - s1` is
/// summed term by term so `1 - I1/I0` keeps full relative precision.
struct Asymptotic {
    s0: f64,
    s1: f64,
    diff: f64,
}

impl Asymptotic {
    fn eval(k: f64) -> Asymptotic {
        let mut t0 = 1.0_f64;
        let mut t1 = 1.0_f64;
        let mut s0 = 1.0;
        let mut s1 = 1.0;
        let mut diff = 0.0;
        let mut prev = f64::INFINITY;
        let mut j = 1.0_f64;
        loop {
            let odd = 2.0 * j - 1.0;
            let scale = 1.0 / (8.0 * j * k);
            let n0 = t0 * odd * odd * scale;
            let n1 = t1 * (odd * odd - 4.0) * scale;
            let size = n0.abs().max(n1.abs());
            // the expansion diverges past its smallest term
            if size >= prev {
                break;
            }
            t0 = n0;
            t1 = n1;
            s0 += t0;
            s1 += t1;
            diff += t0 - t1;
            prev = size;
            // diff is the smallest of the three sums
            if size <= 1e-2 * f64::EPSILON * diff.abs() {
                break;
            }
            j += 1.0;
        }
        Asymptotic { s0, s1, diff }
    }
}
