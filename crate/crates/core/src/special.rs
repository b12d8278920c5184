//! Special functions in log space: modified Bessel functions of order zero
//! and one, Kummer's confluent hypergeometric function, log-gamma and
//! log-beta.

use core::f64::consts::PI;

// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};

/// Switch from the power series to the large-argument expansion.
const BESSEL_ASYMPTOTIC_FROM: f64 = 30.0;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `log(e^a + e^b)`, tolerant of infinities.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + libm::log1p((lo - hi).exp())
}

/// `log Σ e^{x_i}`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY || hi == f64::INFINITY {
        return hi;
    }
    hi + xs.iter().map(|&x| (x - hi).exp()).sum::<f64>().ln()
}

fn check_bessel_arg(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        bail!(InvalidParameter, "Bessel argument must be finite and >= 0, got {x}");
    }
    Ok(())
}

/// Power series of `I0` and `I1` together.
fn bessel_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * x;
    let (mut s0, mut s1) = (t0, t1);
    let mut k = 1.0;
    loop {
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        if t0 < s0 * 1e-17 && t1 <= s1 * 1e-17 {
            break;
        }
        k += 1.0;
    }
    (s0, s1)
}

/// `e^{-x} sqrt(2 pi x) I_nu(x)` for nu in {0, 1} by the large-argument
/// expansion, truncated at its smallest term.
fn bessel_asymptotic_scaled(nu: u8, x: f64) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum
}

/// `log I0(x)` for `x >= 0`.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    check_bessel_arg(x)?;
    if x < BESSEL_ASYMPTOTIC_FROM {
        Ok(bessel_series(x).0.ln())
    } else {
        Ok(x - 0.5 * (2.0 * PI * x).ln() + bessel_asymptotic_scaled(0, x).ln())
    }
}

/// `I1(x)/I0(x)`, in `[0, 1)` and increasing.
pub fn bessel_ratio_i1_i0(x: f64) -> Result<f64> {
    check_bessel_arg(x)?;
    if x < BESSEL_ASYMPTOTIC_FROM {
        let (i0, i1) = bessel_series(x);
        Ok(i1 / i0)
    } else {
        Ok(bessel_asymptotic_scaled(1, x) / bessel_asymptotic_scaled(0, x))
    }
}

/// Inverse of [`bessel_ratio_i1_i0`]: the `kappa >= 0` with
/// `I1(kappa)/I0(kappa) = r`. Returns 0 for `r <= 0`.
pub fn inverse_bessel_ratio(r: f64) -> Result<f64> {
    if r.is_nan() || r >= 1.0 {
        bail!(InvalidParameter, "Bessel ratio target must be < 1, got {r}");
    }
    if r <= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while bessel_ratio_i1_i0(hi)? < r {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            bail!(Numerical, "Bessel ratio inversion did not bracket {r}");
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_ratio_i1_i0(mid)? < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Log of the Kummer series `Σ (a)_k/(b)_k x^k/k!` for `x >= 0`,
/// `a, b > 0`, kept in range by rescaling.
fn log_kummer_positive(a: f64, b: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    const RESCALE: f64 = 1e280;
    const MAX_TERMS: usize = 10_000_000;
    let mut log_scale = 0.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * x / (kf + 1.0);
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += RESCALE.ln();
        }
        // Past the peak the ratio (a+k)x/((b+k)(k+1)) is below one and
        // decreasing, so the remaining tail is bounded by a geometric series.
        let ratio = (a + kf + 1.0) / (b + kf + 1.0) * x / (kf + 2.0);
        if ratio < 0.5 && term < sum * 1e-17 {
            return Ok(log_scale + sum.ln());
        }
    }
    bail!(Numerical, "1F1({a}, {b}, {x}) series did not converge")
}

/// `log 1F1(a; b; x)`.
///
/// Supported: `a, b > 0` with `x >= 0`, or `x < 0` with `b >= a` (through
/// Kummer's transformation `1F1(a;b;x) = e^x 1F1(b-a;b;-x)`).
pub fn log_kummer_1f1(a: f64, b: f64, x: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || !x.is_finite() {
        bail!(InvalidParameter, "1F1 arguments must be finite ({a}, {b}, {x})");
    }
    if a <= 0.0 || b <= 0.0 {
        bail!(Unsupported, "1F1 needs a > 0 and b > 0, got a={a}, b={b}");
    }
    if x >= 0.0 {
        return log_kummer_positive(a, b, x);
    }
    if b == a {
        return Ok(x);
    }
    if b < a {
        bail!(Unsupported, "1F1({a}; {b}; {x}) with x < 0 and b < a");
    }
    Ok(x + log_kummer_positive(b - a, b, -x)?)
}
