//! Random number generation and samplers: normal, gamma, beta, Poisson,
//! truncated gamma on `(0,1]`, von Mises and the tilted-beta family
//! `D(alpha, beta, lambda)` with density proportional to
//! `d^(alpha-1) (1-d)^(beta-1) e^(-lambda d)` on `(0,1)`.

use core::f64::consts::PI;

use num_complex::Complex64;
// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{bail, Result};
use crate::special::{log_bessel_i0, log_beta, log_kummer_1f1};

/// The generator used throughout: xoshiro256++ (period 2^256 - 1).
pub type Rng = Xoshiro256PlusPlus;

const MAX_REJECTIONS: usize = 10_000_000;

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from a master seed and a byte key
/// (FNV-1a over the key, mixed with the master seed).
pub fn derive_seed(master: u64, key: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in key {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(master) ^ h)
}

/// Seed for the `index`-th substream of `master`.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, &index.to_le_bytes())
}

/// Uniform on `(0, 1]`, safe to take logs of.
pub fn uniform_pos<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn std_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard complex normal: independent real and imaginary parts with
/// variance 1/2 each, so `E|z|^2 = 1`.
pub fn std_complex_normal<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(s * std_normal(rng), s * std_normal(rng))
}

/// Gamma with the given shape and rate (mean `shape/rate`).
pub fn gamma<R: RngCore + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        bail!(InvalidParameter, "gamma needs finite shape, rate > 0 (got {shape}, {rate})");
    }
    let g = rand_distr::Gamma::new(shape, 1.0 / rate)
        .map_err(|e| crate::Error::InvalidParameter(alloc::format!("{e}")))?;
    Ok(g.sample(rng))
}

pub fn beta<R: RngCore + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        bail!(InvalidParameter, "beta needs finite a, b > 0 (got {a}, {b})");
    }
    let d = rand_distr::Beta::new(a, b)
        .map_err(|e| crate::Error::InvalidParameter(alloc::format!("{e}")))?;
    Ok(d.sample(rng))
}

pub fn poisson<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = rand_distr::Poisson::new(mean)
        .map_err(|e| crate::Error::InvalidParameter(alloc::format!("{e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Gamma(shape, rate) conditioned on `(0, 1]`.
///
/// Three regimes, none of which stalls: `rate = 0` is a power law sampled by
/// inversion; a large rate puts most gamma mass below one so plain rejection
/// is cheap; otherwise a power-law proposal `x^(c-1)` is used with the
/// exponent chosen to maximize the acceptance rate.
pub fn truncated_gamma<R: RngCore + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate >= 0.0) || !shape.is_finite() || !rate.is_finite() {
        bail!(
            InvalidParameter,
            "truncated gamma needs shape > 0, rate >= 0 (got {shape}, {rate})"
        );
    }
    if rate == 0.0 {
        return Ok(uniform_pos(rng).powf(1.0 / shape));
    }
    if rate >= shape + 2.0 * shape.sqrt() {
        for _ in 0..MAX_REJECTIONS {
            let x = gamma(rng, shape, rate)?;
            if x <= 1.0 {
                return Ok(x);
            }
        }
        bail!(Numerical, "truncated gamma rejection did not terminate");
    }
    // d solves ln(rate/d) = 1/(shape-d) on (0, min(rate, shape)); the left
    // side minus the right side is decreasing there.
    let mut lo = 0.0;
    let mut hi = rate.min(shape);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (rate / mid).ln() - 1.0 / (shape - mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = 0.5 * (lo + hi);
    let c = shape - d;
    let log_m = d * (d / rate).ln() - d;
    for _ in 0..MAX_REJECTIONS {
        let x = uniform_pos(rng).powf(1.0 / c);
        let log_ratio = d * x.ln() - rate * x - log_m;
        if uniform_pos(rng).ln() < log_ratio {
            return Ok(x);
        }
    }
    bail!(Numerical, "truncated gamma rejection did not terminate")
}

/// Von Mises draw on the unit circle with location `nu0` and concentration
/// `kappa` (Best and Fisher's wrapped-Cauchy rejection scheme).
pub fn von_mises<R: RngCore + ?Sized>(rng: &mut R, nu0: Complex64, kappa: f64) -> Result<Complex64> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        bail!(InvalidParameter, "von Mises concentration must be finite and >= 0, got {kappa}");
    }
    let modulus = nu0.norm();
    if !((modulus - 1.0).abs() <= 1e-6) {
        bail!(InvalidParameter, "von Mises location must be a unit complex, |nu0| = {modulus}");
    }
    let mu = nu0.arg();
    if kappa < 1e-8 {
        return Ok(Complex64::cis(PI * (2.0 * rng.random::<f64>() - 1.0)));
    }
    if kappa > 1e6 {
        return Ok(Complex64::cis(mu + std_normal(rng) / kappa.sqrt()));
    }
    let s = if kappa < 1e-5 {
        1.0 / kappa + kappa
    } else {
        let r = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (r - (2.0 * r).sqrt()) / (2.0 * kappa);
        (1.0 + rho * rho) / (2.0 * rho)
    };
    for _ in 0..MAX_REJECTIONS {
        let z = (PI * rng.random::<f64>()).cos();
        let w = (1.0 + s * z) / (s + z);
        let y = kappa * (s - w);
        let v = uniform_pos(rng);
        if y * (2.0 - y) - v >= 0.0 || (y / v).ln() + 1.0 - y >= 0.0 {
            let mut angle = w.clamp(-1.0, 1.0).acos();
            if rng.random::<f64>() < 0.5 {
                angle = -angle;
            }
            return Ok(Complex64::cis(mu + angle));
        }
    }
    bail!(Numerical, "von Mises rejection did not terminate")
}

/// Log density of the von Mises law with respect to the uniform probability
/// measure on the circle: `kappa Re(s conj(nu0)) - log I0(kappa)`.
pub fn log_von_mises_density(s: Complex64, nu0: Complex64, kappa: f64) -> Result<f64> {
    Ok(kappa * (s * nu0.conj()).re - log_bessel_i0(kappa)?)
}

fn check_d_params(alpha: f64, beta: f64, lambda: f64) -> Result<()> {
    if !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() || !lambda.is_finite() {
        bail!(
            InvalidParameter,
            "D distribution needs finite alpha, beta > 0 and finite lambda (got {alpha}, {beta}, {lambda})"
        );
    }
    Ok(())
}

/// `log ∫_0^1 d^(alpha-1) (1-d)^(beta-1) e^(-lambda d) dd`
/// `= log B(alpha, beta) + log 1F1(alpha; alpha+beta; -lambda)`.
pub fn log_d_normalizer(alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    check_d_params(alpha, beta, lambda)?;
    Ok(log_beta(alpha, beta) + log_kummer_1f1(alpha, alpha + beta, -lambda)?)
}

/// Normalized log density of `D(alpha, beta, lambda)` at `delta`.
pub fn log_d_density(delta: f64, alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    let norm = log_d_normalizer(alpha, beta, lambda)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((alpha - 1.0) * delta.ln() + (beta - 1.0) * libm::log1p(-delta) - lambda * delta - norm)
}

/// Draw from `D(alpha, beta, lambda)`.
///
/// With `alpha, beta >= 1` the proposal is a gamma truncated to `(0,1]`
/// whose rate comes from the tangent of `log(1-d)` at the mode, giving
/// acceptance probability close to one; modes above 1/2 are handled through
/// the reflection `1 - D(beta, alpha, -lambda)`.
pub fn d_distribution<R: RngCore + ?Sized>(rng: &mut R, alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    check_d_params(alpha, beta, lambda)?;
    if lambda == 0.0 {
        return self::beta(rng, alpha, beta);
    }
    if alpha >= 1.0 && beta >= 1.0 {
        let mode = d_mode(alpha, beta, lambda);
        if reflect(alpha, beta, mode) {
            return Ok(1.0 - d_tangent(rng, beta, alpha, -lambda, 1.0 - mode)?);
        }
        return d_tangent(rng, alpha, beta, lambda, mode);
    }
    if beta >= 1.0 && lambda + beta - 1.0 >= 0.0 {
        return d_tangent(rng, alpha, beta, lambda, 0.0);
    }
    if alpha >= 1.0 && alpha - 1.0 - lambda >= 0.0 {
        return Ok(1.0 - d_tangent(rng, beta, alpha, -lambda, 0.0)?);
    }
    // Both shapes below one with an awkward tilt: Beta proposal, accept
    // with e^(-lambda d) over its maximum on [0,1].
    let shift = lambda.min(0.0);
    for _ in 0..MAX_REJECTIONS {
        let x = self::beta(rng, alpha, beta)?;
        if uniform_pos(rng).ln() < -lambda * x + shift {
            return Ok(x);
        }
    }
    bail!(Numerical, "D({alpha},{beta},{lambda}) rejection did not terminate")
}

/// Mode of `D(alpha, beta, lambda)` for `alpha, beta >= 1`.
fn d_mode(alpha: f64, beta: f64, lambda: f64) -> f64 {
    // Root in [0,1] of lambda d^2 - (alpha+beta-2+lambda) d + (alpha-1),
    // written to avoid cancellation.
    let b = alpha + beta - 2.0 + lambda;
    let disc = (b * b - 4.0 * lambda * (alpha - 1.0)).max(0.0);
    let den = b + disc.sqrt();
    if den <= 0.0 {
        // alpha = beta = 1 with lambda < 0: density increasing on (0,1).
        return 1.0;
    }
    (2.0 * (alpha - 1.0) / den).clamp(0.0, 1.0)
}

/// Whether sampling the reflection `1 - d` is cheaper. The tangent envelope
/// loses about `(beta-1) var / (2 (1-mode)^2)` in log acceptance, so the side
/// with the smaller curvature term is used.
fn reflect(alpha: f64, beta: f64, mode: f64) -> bool {
    if mode <= 0.0 {
        return false;
    }
    if mode >= 1.0 {
        return true;
    }
    (alpha - 1.0) / (mode * mode) < (beta - 1.0) / ((1.0 - mode) * (1.0 - mode))
}

/// Truncated-gamma proposal using the tangent of `log(1-d)` at `t`.
/// Requires `beta >= 1` and `lambda + (beta-1)/(1-t) >= 0`.
fn d_tangent<R: RngCore + ?Sized>(rng: &mut R, alpha: f64, beta: f64, lambda: f64, t: f64) -> Result<f64> {
    let slope = 1.0 / (1.0 - t);
    let rate = (lambda + (beta - 1.0) * slope).max(0.0);
    for _ in 0..MAX_REJECTIONS {
        let x = truncated_gamma(rng, alpha, rate)?;
        if beta == 1.0 {
            return Ok(x);
        }
        if x >= 1.0 {
            continue;
        }
        let log_bound = libm::log1p(-x) - libm::log1p(-t) + (x - t) * slope;
        if uniform_pos(rng).ln() < (beta - 1.0) * log_bound {
            return Ok(x);
        }
    }
    bail!(Numerical, "D({alpha},{beta},{lambda}) rejection did not terminate")
}

/// Acceptance rate of the `D` sampler's main proposal, for diagnostics.
pub fn d_acceptance_rate<R: RngCore + ?Sized>(
    rng: &mut R,
    alpha: f64,
    beta: f64,
    lambda: f64,
    trials: usize,
) -> Result<f64> {
    check_d_params(alpha, beta, lambda)?;
    if !(alpha >= 1.0 && beta >= 1.0) || lambda == 0.0 {
        bail!(InvalidParameter, "acceptance rate only defined for the tangent branch");
    }
    let mode = d_mode(alpha, beta, lambda);
    let (a, b, l, t) = if reflect(alpha, beta, mode) {
        (beta, alpha, -lambda, 1.0 - mode)
    } else {
        (alpha, beta, lambda, mode)
    };
    let slope = 1.0 / (1.0 - t);
    let rate = (l + (b - 1.0) * slope).max(0.0);
    let mut accepted = 0usize;
    for _ in 0..trials {
        let x = truncated_gamma(rng, a, rate)?;
        let log_bound = libm::log1p(-x) - libm::log1p(-t) + (x - t) * slope;
        if x < 1.0 && uniform_pos(rng).ln() < (b - 1.0) * log_bound {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / trials as f64)
}
