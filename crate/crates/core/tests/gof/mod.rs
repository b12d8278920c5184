//! Goodness-of-fit checks of the library's samplers at n = 1e5 against
//! independent distribution functions. Each family returns its p-values.
#![allow(dead_code)]

use std::f64::consts::PI;

use crate::common::{ks_p_value, log_gamma, GridCdf};
use fpmatch_core::sampling::{
    beta, d_distribution, gamma, poisson, rng_from_seed, std_complex_normal, std_normal, truncated_gamma, von_mises,
    Rng,
};
use fpmatch_core::Complex64;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Gamma, Normal};

pub const N: usize = 100_000;
pub const LEVEL: f64 = 1e-3;

pub type Checks = Vec<(String, f64)>;

pub fn draws(seed: u64, mut f: impl FnMut(&mut Rng) -> f64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..N).map(|_| f(&mut rng)).collect()
}

pub fn normal() -> Checks {
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut out = vec![("std normal".into(), ks_p_value(&mut draws(1, |r| std_normal(r)), |x| z.cdf(x)))];
    // Circular complex normal with E|z|^2 = 1: parts are N(0, 1/2).
    let half = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let mut rng = rng_from_seed(2);
    let zs: Vec<Complex64> = (0..N).map(|_| std_complex_normal(&mut rng)).collect();
    let mut re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    out.push(("complex normal re".into(), ks_p_value(&mut re, |x| half.cdf(x))));
    out.push(("complex normal im".into(), ks_p_value(&mut im, |x| half.cdf(x))));
    out
}

pub const GAMMA_CASES: [(f64, f64); 4] = [(1.0, 1.0), (3.7, 2.0), (0.4, 1.0), (60.0, 0.5)];

pub fn gamma_family() -> Checks {
    GAMMA_CASES
        .iter()
        .enumerate()
        .map(|(k, &(shape, rate))| {
            let g = Gamma::new(shape, rate).unwrap();
            let mut xs = draws(10 + k as u64, |r| gamma(r, shape, rate).unwrap());
            (format!("gamma({shape},{rate})"), ks_p_value(&mut xs, |x| g.cdf(x)))
        })
        .collect()
}

pub const BETA_CASES: [(f64, f64); 3] = [(14.67, 3.30), (0.5, 0.7), (2.0, 30.0)];

pub fn beta_family() -> Checks {
    BETA_CASES
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let d = Beta::new(a, b).unwrap();
            let mut xs = draws(20 + k as u64, |r| beta(r, a, b).unwrap());
            (format!("beta({a},{b})"), ks_p_value(&mut xs, |x| d.cdf(x)))
        })
        .collect()
}

pub const TRUNCATED_GAMMA_CASES: [(f64, f64); 5] = [(3.0, 2.0), (0.5, 0.1), (40.0, 0.01), (2.0, 300.0), (120.0, 90.0)];

/// CDF of the gamma density restricted to `(0, 1]`, by grid quadrature.
pub fn truncated_gamma_cdf(shape: f64, rate: f64) -> GridCdf {
    GridCdf::new(|x: f64| if x <= 0.0 { 0.0 } else { ((shape - 1.0) * x.ln() - rate * x).exp() }, 0.0, 1.0, 4000)
}

pub fn truncated_gamma_family() -> Checks {
    TRUNCATED_GAMMA_CASES
        .iter()
        .enumerate()
        .map(|(k, &(shape, rate))| {
            let cdf = truncated_gamma_cdf(shape, rate);
            let mut xs = draws(30 + k as u64, |r| truncated_gamma(r, shape, rate).unwrap());
            let p = if xs.iter().all(|&x| x > 0.0 && x <= 1.0) { ks_p_value(&mut xs, |x| cdf.cdf(x)) } else { 0.0 };
            (format!("truncated gamma({shape},{rate})"), p)
        })
        .collect()
}

/// Chi-square test over cells with expected count >= 20, tails pooled.
pub fn poisson_family() -> Checks {
    [3.0, 132.74]
        .iter()
        .enumerate()
        .map(|(k, &mean)| {
            let mut rng = rng_from_seed(40 + k as u64);
            let xs: Vec<u64> = (0..N).map(|_| poisson(&mut rng, mean).unwrap()).collect();
            let pmf = |j: u64| (j as f64 * f64::ln(mean) - mean - log_gamma(j as f64 + 1.0)).exp();
            let hi = (mean + 10.0 * f64::sqrt(mean)) as u64 + 5;
            let mut cells: Vec<(u64, u64, f64)> = Vec::new();
            let (mut start, mut acc) = (0u64, 0.0);
            for j in 0..=hi {
                acc += pmf(j);
                if acc * N as f64 >= 20.0 {
                    cells.push((start, j, acc));
                    start = j + 1;
                    acc = 0.0;
                }
            }
            let head: f64 = cells[..cells.len() - 1].iter().map(|c| c.2).sum();
            let last = cells.last_mut().unwrap();
            last.1 = u64::MAX;
            last.2 = 1.0 - head;
            let stat: f64 = cells
                .iter()
                .map(|&(lo, hi, p)| {
                    let o = xs.iter().filter(|&&x| x >= lo && x <= hi).count() as f64;
                    let e = p * N as f64;
                    (o - e) * (o - e) / e
                })
                .sum();
            let chi = ChiSquared::new((cells.len() - 1) as f64).unwrap();
            (format!("poisson({mean})"), 1.0 - chi.cdf(stat))
        })
        .collect()
}

pub const VON_MISES_KAPPAS: [f64; 4] = [0.0, 0.5, 5.0, 35.0];

pub fn von_mises_draws(k: usize) -> (Complex64, Vec<Complex64>) {
    let nu0 = Complex64::cis(1.0 + k as f64);
    let mut rng = rng_from_seed(50 + k as u64);
    let zs = (0..N).map(|_| von_mises(&mut rng, nu0, VON_MISES_KAPPAS[k]).unwrap()).collect();
    (nu0, zs)
}

pub fn von_mises_family() -> Checks {
    let mut out: Checks = (0..VON_MISES_KAPPAS.len())
        .map(|k| {
            let kappa = VON_MISES_KAPPAS[k];
            let (nu0, zs) = von_mises_draws(k);
            let mut angles: Vec<f64> = zs.iter().map(|z| (z * nu0.conj()).arg()).collect();
            let cdf = GridCdf::new(|t: f64| (kappa * (t.cos() - 1.0)).exp(), -PI, PI, 4000);
            (format!("von mises({kappa})"), ks_p_value(&mut angles, |x| cdf.cdf(x)))
        })
        .collect();
    // Rayleigh test of uniformity: P(Z > z) ~ exp(-z).
    let mut rng = rng_from_seed(59);
    let s: Complex64 = (0..N).map(|_| von_mises(&mut rng, Complex64::new(1.0, 0.0), 0.0).unwrap()).sum();
    out.push(("von mises(0) rayleigh".into(), (-s.norm_sqr() / N as f64).exp()));
    out
}

/// Unnormalized log density of D(alpha, beta, lambda) on (0, 1).
pub fn d_log_density(alpha: f64, beta: f64, lambda: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - lambda * x
}

/// Unnormalized D density scaled so that its maximum on a grid is 1; also
/// returns the log of the scale.
pub fn d_density(alpha: f64, beta: f64, lambda: f64) -> (impl Fn(f64) -> f64, f64) {
    let g = d_log_density(alpha, beta, lambda);
    let peak = (1..10_000).map(|k| g(k as f64 / 10_000.0)).fold(f64::NEG_INFINITY, f64::max);
    let f = move |x: f64| if x <= 0.0 || x >= 1.0 { 0.0 } else { (g(x) - peak).exp() };
    (f, peak)
}

pub const D_CASES: [(f64, f64, f64); 7] = [
    (2.0, 3.0, 5.0),
    (17.0, 4.0, 50.0),
    (115.0, 4.0, 20.0),
    (14.67, 3.3, 0.0),
    (30.0, 2.0, -40.0),
    (0.7, 0.8, 3.0),
    (36.0, 90.0, 118.0),
];

pub fn d_family() -> Checks {
    let mut out: Checks = D_CASES
        .iter()
        .enumerate()
        .map(|(k, &(a, b, l))| {
            let cdf = GridCdf::new(d_density(a, b, l).0, 0.0, 1.0, 8000);
            let mut xs = draws(60 + k as u64, |r| d_distribution(r, a, b, l).unwrap());
            (format!("D({a},{b},{l})"), ks_p_value(&mut xs, |x| cdf.cdf(x)))
        })
        .collect();
    let d = Beta::new(14.67, 3.3).unwrap();
    let mut xs = draws(70, |r| d_distribution(r, 14.67, 3.3, 0.0).unwrap());
    out.push(("D(14.67,3.3,0) vs beta".into(), ks_p_value(&mut xs, |x| d.cdf(x))));
    out
}

/// Every family.
pub fn all() -> Checks {
    [normal(), gamma_family(), beta_family(), truncated_gamma_family(), poisson_family(), von_mises_family(), d_family()].concat()
}

pub fn assert_all_pass(checks: &Checks) {
    let failed: Vec<_> = checks.iter().filter(|c| !(c.1 > LEVEL)).collect();
    assert!(failed.is_empty(), "goodness-of-fit failures: {failed:?}");
}
