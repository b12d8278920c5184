//! Estimation of the fixed parameters from matching-augmented pairs
//! `(A_i, B_i, xi_i)` under the prosecution hypothesis.
//!
//! The complete-data likelihood factorizes: `(alpha_delta, beta_delta, rho0)`
//! only enter the thinning factor, `chi` only the type factor, and
//! `(omega, kappa)` only the geometric factor. The first group is fitted by
//! direct maximization of the marginal likelihood, `chi` in closed form, and
//! `(omega, kappa)` by stochastic EM over `(tau_A, tau_B, sigma, psi)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::RngCore;

use crate::error::{bail, Result};
use crate::mcmc::{gibbs_sweep, ChainState, Pair, SweepPlan, XiStats};
use crate::model::{FixedParams, LatentParams};
use crate::quadrature::integrate;
use crate::sampling::{log_d_normalizer, rng_from_seed, std_normal};
use crate::special::{inverse_bessel_ratio, log_beta};
use crate::types::{Matching, MinutiaConfig, MinutiaType};

/// A pair together with its ground-truth matching.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub a: MinutiaConfig,
    pub b: MinutiaConfig,
    pub xi_check: Matching,
}

impl TrainingPair {
    pub fn new(a: MinutiaConfig, b: MinutiaConfig, xi_check: Matching) -> Result<Self> {
        xi_check.check_sizes(&a, &b)?;
        Ok(TrainingPair { a, b, xi_check })
    }
}

// ---------------------------------------------------------------------------
// Nelder-Mead

/// Outcome of a simplex minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization from `x0` with initial step `step` per
/// coordinate. Stops when the spread of simplex values is below `ftol`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    ftol: f64,
    max_evals: usize,
) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| nan_to_inf(f(p))).collect();
    let mut evals = n + 1;
    let mut converged = false;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol * (1.0 + vals[0].abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = nan_to_inf(f(&xr));
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = nan_to_inf(f(&xe));
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = nan_to_inf(f(&x));
                (x, v)
            } else {
                let x = along(0.5);
                let v = nan_to_inf(f(&x));
                (x, v)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = nan_to_inf(f(&p));
                    pts[i] = p;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    Minimum {
        x: pts[best].clone(),
        value: vals[best],
        evaluations: evals,
        converged,
    }
}

fn nan_to_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

// ---------------------------------------------------------------------------
// (alpha_delta, beta_delta, rho0)

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaRhoConfig {
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for DeltaRhoConfig {
    fn default() -> Self {
        DeltaRhoConfig {
            restarts: 5,
            max_evals: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaRhoFit {
    pub alpha_delta: f64,
    pub beta_delta: f64,
    pub rho0: f64,
    pub log_likelihood: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Sufficient statistics of one pair for the thinning factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Counts {
    n_a: usize,
    n_b: usize,
    n_xi: usize,
}

fn grouped_counts(corpus: &[TrainingPair]) -> Vec<(Counts, usize)> {
    let mut all: Vec<Counts> = corpus
        .iter()
        .map(|p| Counts {
            n_a: p.a.len(),
            n_b: p.b.len(),
            n_xi: p.xi_check.len(),
        })
        .collect();
    all.sort_unstable();
    let mut out: Vec<(Counts, usize)> = Vec::new();
    for c in all {
        match out.last_mut() {
            Some((last, k)) if *last == c => *k += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}

/// `log ∫∫ f1 d delta_A d delta_B` for one pair's counts.
fn log_f1_integral(c: Counts, alpha: f64, beta: f64, rho0: f64) -> Result<f64> {
    let (na, nb, nxi) = (c.n_a as f64, c.n_b as f64, c.n_xi as f64);
    let pa = alpha + na - 1.0;
    let pb = beta + nb - nxi - 1.0;
    let log_integrand = |d: f64| -> f64 {
        if !(d > 0.0 && d < 1.0) {
            return f64::NEG_INFINITY;
        }
        let inner = log_d_normalizer(nb + 1.0, na - nxi + 1.0, rho0 * (1.0 - d)).unwrap_or(f64::NAN);
        -rho0 * d + pa * d.ln() + pb * libm::log1p(-d) + inner
    };
    // Scale by the peak so that the absolute tolerance is meaningful.
    let mut peak = f64::NEG_INFINITY;
    let mut at = 0.5;
    const GRID: usize = 64;
    for k in 0..GRID {
        let d = (k as f64 + 0.5) / GRID as f64;
        let v = log_integrand(d);
        if v > peak {
            peak = v;
            at = d;
        }
    }
    if !peak.is_finite() {
        bail!(Numerical, "thinning integrand not finite for {c:?}");
    }
    // Refine the peak by golden-section search on the bracketing cell.
    let (mut lo, mut hi) = ((at - 1.0 / GRID as f64).max(1e-12), (at + 1.0 / GRID as f64).min(1.0 - 1e-12));
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    for _ in 0..40 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if log_integrand(m1) > log_integrand(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    peak = peak.max(log_integrand(0.5 * (lo + hi)));
    let r = integrate(|d| (log_integrand(d) - peak).exp(), 0.0, 1.0, 1e-10, 1e-12)?;
    Ok(peak + r.value.ln() - log_beta(alpha, beta) + (na + nb - nxi) * rho0.ln())
}

/// Marginal log likelihood of `(alpha_delta, beta_delta, rho0)` over a
/// corpus (the thinning factor with `delta_A, delta_B` integrated out).
pub fn delta_rho_log_likelihood(corpus: &[TrainingPair], alpha: f64, beta: f64, rho0: f64) -> Result<f64> {
    if corpus.is_empty() {
        bail!(InvalidParameter, "empty corpus");
    }
    let mut total = 0.0;
    for (c, k) in grouped_counts(corpus) {
        total += k as f64 * log_f1_integral(c, alpha, beta, rho0)?;
    }
    Ok(total)
}

/// Maximum likelihood `(alpha_delta, beta_delta, rho0)` by Nelder-Mead on
/// log parameters with random restarts.
pub fn fit_delta_rho(corpus: &[TrainingPair], cfg: &DeltaRhoConfig) -> Result<DeltaRhoFit> {
    if corpus.is_empty() {
        bail!(InvalidParameter, "empty corpus");
    }
    for (i, p) in corpus.iter().enumerate() {
        if p.a.is_empty() || p.b.is_empty() {
            bail!(Degenerate, "pair {i} has an empty configuration");
        }
    }
    let groups = grouped_counts(corpus);
    let objective = |x: &[f64]| -> f64 {
        let (al, be, rho) = (x[0].exp(), x[1].exp(), x[2].exp());
        if !(al.is_finite() && be.is_finite() && rho.is_finite()) || al > 1e6 || be > 1e6 {
            return f64::INFINITY;
        }
        let mut total = 0.0;
        for &(c, k) in &groups {
            match log_f1_integral(c, al, be, rho) {
                Ok(v) if v.is_finite() => total += k as f64 * v,
                _ => return f64::INFINITY,
            }
        }
        -total
    };
    // Start: rho0 from the largest counts, Beta(4, 1) for delta_A.
    let mean_na = corpus.iter().map(|p| p.a.len() as f64).sum::<f64>() / corpus.len() as f64;
    let mut x0 = vec![4.0f64.ln(), 0.0, (mean_na / 0.8).ln()];
    let mut rng = rng_from_seed(cfg.seed);
    let mut best: Option<Minimum> = None;
    let mut evaluations = 0;
    for r in 0..=cfg.restarts {
        if r > 0 {
            let base = &best.as_ref().map(|b| b.x.clone()).unwrap_or_else(|| x0.clone());
            x0 = base.iter().map(|v| v + 0.5 * std_normal(&mut rng)).collect();
        }
        let m = nelder_mead(objective, &x0, 0.5, 1e-10, cfg.max_evals);
        evaluations += m.evaluations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one run");
    if !best.value.is_finite() {
        bail!(Numerical, "thinning likelihood could not be evaluated at any start point");
    }
    Ok(DeltaRhoFit {
        alpha_delta: best.x[0].exp(),
        beta_delta: best.x[1].exp(),
        rho0: best.x[2].exp(),
        log_likelihood: -best.value,
        evaluations,
        converged: best.converged,
    })
}

// ---------------------------------------------------------------------------
// chi

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChiFit {
    pub chi: f64,
    pub bifurcations: usize,
    pub ridge_endings: usize,
    /// The estimate is 0 or 1, outside the open parameter domain.
    pub boundary: bool,
}

/// Closed-form maximizer of the type factor: the share of bifurcations
/// among latent minutiae with observed type.
pub fn fit_chi(corpus: &[TrainingPair]) -> Result<ChiFit> {
    let (mut bif, mut end) = (0usize, 0usize);
    for p in corpus {
        bif += p.a.count(MinutiaType::Bifurcation) + p.b.count(MinutiaType::Bifurcation)
            - p.xi_check.count_type(&p.a, &p.b, MinutiaType::Bifurcation);
        end += p.a.count(MinutiaType::RidgeEnding) + p.b.count(MinutiaType::RidgeEnding)
            - p.xi_check.count_type(&p.a, &p.b, MinutiaType::RidgeEnding);
    }
    if bif + end == 0 {
        bail!(Degenerate, "no typed minutiae in the corpus");
    }
    let chi = bif as f64 / (bif + end) as f64;
    Ok(ChiFit {
        chi,
        bifurcations: bif,
        ridge_endings: end,
        boundary: bif == 0 || end == 0,
    })
}

// ---------------------------------------------------------------------------
// (omega, kappa)

/// `x = q^2 / (q^2 - 1)` with `q = omega^2 + 1`.
pub fn x_from_omega(omega: f64) -> f64 {
    let w2 = omega * omega;
    let q = w2 + 1.0;
    q * q / (w2 * (w2 + 2.0))
}

/// Inverse of [`x_from_omega`] for `x > 1`.
pub fn omega_from_x(x: f64) -> f64 {
    ((x / (x - 1.0)).sqrt() - 1.0).sqrt()
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, each polished by Newton
/// steps.
pub fn real_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = Vec::new();
    if c3.abs() <= 1e-14 * scale {
        if c2.abs() <= 1e-14 * scale {
            if c1 != 0.0 {
                roots.push(-c0 / c1);
            }
            return roots;
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let qq = -0.5 * (c1 + c1.signum() * s);
            if qq != 0.0 {
                roots.push(qq / c2);
                roots.push(c0 / qq);
            } else {
                roots.push(0.0);
            }
        }
        return roots;
    }
    let (a, b, c) = (c2 / c3, c1 / c3, c0 / c3);
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    if r * r < q * q * q {
        let theta = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let tau = 2.0 * core::f64::consts::PI;
        for k in 0..3 {
            roots.push(m * ((theta + tau * k as f64) / 3.0).cos() - a / 3.0);
        }
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
        let small = if big == 0.0 { 0.0 } else { q / big };
        roots.push(big + small - a / 3.0);
    }
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((c3 * *x + c2) * *x + c1) * *x + c0;
            let d = (3.0 * c3 * *x + 2.0 * c2) * *x + c1;
            if d != 0.0 {
                *x -= f / d;
            }
        }
    }
    roots
}

/// Score of the location part of the geometric factor with respect to `x`:
/// `R1/x - R2 + R3 (2x - 1) / sqrt(x (x - 1))`.
pub fn x_score(x: f64, r1: f64, r2: f64, r3: f64) -> f64 {
    r1 / x - r2 + r3 * (2.0 * x - 1.0) / (x * (x - 1.0)).sqrt()
}

/// Maximizing `x` given the statistics `R1, R2, R3`: among the real roots
/// greater than one of the squared score equation, the one whose unsquared
/// score is closest to zero.
pub fn solve_x(r1: f64, r2: f64, r3: f64) -> Result<f64> {
    let roots = real_cubic_roots(
        r2 * r2 - 4.0 * r3 * r3,
        4.0 * r3 * r3 - 2.0 * r1 * r2 - r2 * r2,
        r1 * r1 + 2.0 * r1 * r2 - r3 * r3,
        -r1 * r1,
    );
    let loglik = |x: f64| r1 * x.ln() - x * r2 + 2.0 * (x * (x - 1.0)).sqrt() * r3;
    let mut best: Option<(f64, f64)> = None;
    for x in roots.into_iter().filter(|x| *x > 1.0 && x.is_finite()) {
        let s = x_score(x, r1, r2, r3).abs();
        best = match best {
            None => Some((x, s)),
            Some((_, bs)) if s < bs - 1e-9 * bs.max(1e-300) => Some((x, s)),
            Some((bx, bs)) if (s - bs).abs() <= 1e-9 * bs.max(1e-300) && loglik(x) > loglik(bx) => Some((x, s)),
            keep => keep,
        };
    }
    match best {
        Some((x, _)) => Ok(x),
        None => bail!(Numerical, "no admissible root x > 1 for R = ({r1}, {r2}, {r3})"),
    }
}

/// Sufficient statistics of the geometric factor for the M-step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemStats {
    /// Total number of matched pairs.
    pub r1: f64,
    /// `Σ sigma^-2 Σ_edges (|r_a - tau_A|^2 + |r_b - tau_B|^2)`.
    pub r2: f64,
    /// `Σ sigma^-2 Σ_edges Re((r_a - tau_A) conj(psi (r_b - tau_B)))`.
    pub r3: f64,
    /// `Σ Σ_edges Re(s_a conj(psi s_b))`.
    pub orientation: f64,
}

impl SemStats {
    pub fn add(&mut self, p: &TrainingPair, theta: &LatentParams) {
        let u = 1.0 / (theta.sigma * theta.sigma);
        let (am, bm) = (p.a.minutiae(), p.b.minutiae());
        for (i, j) in p.xi_check.edges() {
            let xa = am[i].location() - theta.tau_a;
            let xb = bm[j].location() - theta.tau_b;
            self.r1 += 1.0;
            self.r2 += u * (xa.norm_sqr() + xb.norm_sqr());
            self.r3 += u * (xa * (theta.psi * xb).conj()).re;
            self.orientation += (am[i].orientation() * (theta.psi * bm[j].orientation()).conj()).re;
        }
    }

    /// Exact M-step: `(omega, kappa)`.
    pub fn m_step(&self) -> Result<(f64, f64)> {
        if !(self.r1 > 0.0) {
            bail!(Degenerate, "no matched pairs in the corpus");
        }
        let x = solve_x(self.r1, self.r2, self.r3)?;
        let kappa = inverse_bessel_ratio(self.orientation / self.r1)?;
        Ok((omega_from_x(x), kappa))
    }
}

/// Mann-Kendall trend test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MannKendall {
    pub s: i64,
    pub z: f64,
    /// Two-sided p-value under the normal approximation.
    pub p_value: f64,
}

pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += match xs[j].partial_cmp(&xs[i]) {
                Some(core::cmp::Ordering::Greater) => 1,
                Some(core::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    // Tie correction.
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut k = 0;
    while k < n {
        let mut e = k + 1;
        while e < n && sorted[e] == sorted[k] {
            e += 1;
        }
        let t = (e - k) as f64;
        tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
        k = e;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = if var <= 0.0 || s == 0 {
        0.0
    } else {
        (s - s.signum()) as f64 / var.sqrt()
    };
    MannKendall {
        s,
        z,
        p_value: libm::erfc(z.abs() / core::f64::consts::SQRT_2),
    }
}

/// Stochastic EM settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemConfig {
    pub init_omega: f64,
    pub init_kappa: f64,
    /// Window length of the stabilization criterion.
    pub window: usize,
    /// Relative change between consecutive window means declared stable.
    pub tolerance: f64,
    /// Iteration cap for the stabilization phase.
    pub max_burn: usize,
    /// Iterations averaged after stabilization.
    pub n_average: usize,
    /// Spacing of the trend test on the averaging window.
    pub trend_thin: usize,
    pub seed: u64,
}

impl Default for SemConfig {
    fn default() -> Self {
        SemConfig {
            init_omega: 0.2,
            init_kappa: 5.0,
            window: 50,
            tolerance: 0.01,
            max_burn: 5000,
            n_average: 500,
            trend_thin: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemFit {
    pub omega: f64,
    pub kappa: f64,
    /// Iteration at which the stabilization criterion held.
    pub stabilized_at: usize,
    pub stabilized: bool,
    pub omega_trace: Vec<f64>,
    pub kappa_trace: Vec<f64>,
    pub omega_trend: MannKendall,
    pub kappa_trend: MannKendall,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Stochastic EM for `(omega, kappa)` with every pair's matching fixed to
/// its ground truth. `fixed` supplies the remaining parameters; its `omega`
/// and `kappa` are ignored in favour of `cfg`'s starting values.
pub fn fit_omega_kappa(corpus: &[TrainingPair], fixed: &FixedParams, cfg: &SemConfig) -> Result<SemFit> {
    if corpus.is_empty() {
        bail!(InvalidParameter, "empty corpus");
    }
    if cfg.window == 0 || cfg.n_average == 0 {
        bail!(InvalidParameter, "window and n_average must be positive");
    }
    let pairs: Vec<Pair<'_>> = corpus.iter().map(|p| Pair::new(&p.a, &p.b)).collect::<Result<_>>()?;
    let mut params = FixedParams {
        omega: cfg.init_omega,
        kappa: cfg.init_kappa,
        ..*fixed
    };
    params.validate()?;
    let mut states: Vec<ChainState> = corpus
        .iter()
        .zip(&pairs)
        .map(|(p, pair)| {
            let mut s = ChainState::initial(pair, &params);
            s.xi = p.xi_check.clone();
            s.theta.psi = initial_psi(p);
            s
        })
        .collect();
    let plan = SweepPlan {
        delta_a: false,
        delta_b: false,
        xi: false,
        ..SweepPlan::FULL
    };
    let mut rng = rng_from_seed(cfg.seed);
    let mut stats = XiStats::default();
    let mut omega_trace = Vec::new();
    let mut kappa_trace = Vec::new();

    let mut iterate = |params: &mut FixedParams, rng: &mut dyn RngCore| -> Result<(f64, f64)> {
        let mut r = SemStats::default();
        for ((p, pair), s) in corpus.iter().zip(&pairs).zip(states.iter_mut()) {
            gibbs_sweep(pair, s, params, &plan, &mut stats, rng)?;
            r.add(p, &s.theta);
        }
        let (w, k) = r.m_step()?;
        params.omega = w;
        params.kappa = k.max(1e-8);
        Ok((w, k))
    };

    let w = cfg.window;
    let mut stabilized_at = cfg.max_burn;
    let mut stabilized = false;
    for it in 0..cfg.max_burn {
        let (om, ka) = iterate(&mut params, &mut rng)?;
        omega_trace.push(om);
        kappa_trace.push(ka);
        let n = omega_trace.len();
        if n >= 2 * w {
            let rel = |t: &[f64]| {
                let (m1, m2) = (mean(&t[n - 2 * w..n - w]), mean(&t[n - w..]));
                ((m2 - m1) / m2).abs()
            };
            if rel(&omega_trace) < cfg.tolerance && rel(&kappa_trace) < cfg.tolerance {
                stabilized_at = it + 1;
                stabilized = true;
                break;
            }
        }
    }
    let start = omega_trace.len();
    for _ in 0..cfg.n_average {
        let (om, ka) = iterate(&mut params, &mut rng)?;
        omega_trace.push(om);
        kappa_trace.push(ka);
    }
    let thin = |t: &[f64]| -> Vec<f64> { t[start..].iter().step_by(cfg.trend_thin.max(1)).copied().collect() };
    Ok(SemFit {
        omega: mean(&omega_trace[start..]),
        kappa: mean(&kappa_trace[start..]),
        stabilized_at,
        stabilized,
        omega_trend: mann_kendall(&thin(&omega_trace)),
        kappa_trend: mann_kendall(&thin(&kappa_trace)),
        omega_trace,
        kappa_trace,
    })
}

/// Mean direction of `s_a conj(s_b)` over the ground-truth edges.
fn initial_psi(p: &TrainingPair) -> Complex64 {
    let (am, bm) = (p.a.minutiae(), p.b.minutiae());
    let z: Complex64 = p
        .xi_check
        .edges()
        .map(|(i, j)| am[i].orientation() * bm[j].orientation().conj())
        .sum();
    if z.norm() > 0.0 {
        z / z.norm()
    } else {
        Complex64::new(1.0, 0.0)
    }
}

// ---------------------------------------------------------------------------
// Everything

/// Which estimation stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FitStage {
    All,
    DeltaRho,
    Chi,
    OmegaKappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitConfig {
    pub delta_rho: DeltaRhoConfig,
    pub sem: SemConfig,
}

/// Fitted parameters with per-stage details. Stages that were not run keep
/// the starting values in `params` and `None` in their slot.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub params: FixedParams,
    pub delta_rho: Option<DeltaRhoFit>,
    pub chi: Option<ChiFit>,
    pub omega_kappa: Option<SemFit>,
}

/// Runs the requested stages in order `(alpha, beta, rho0)`, `chi`,
/// `(omega, kappa)`, each later stage using the earlier estimates.
pub fn fit(corpus: &[TrainingPair], start: &FixedParams, stage: FitStage, cfg: &FitConfig) -> Result<FitReport> {
    let mut params = *start;
    let mut report = FitReport {
        params,
        delta_rho: None,
        chi: None,
        omega_kappa: None,
    };
    if matches!(stage, FitStage::All | FitStage::DeltaRho) {
        let f = fit_delta_rho(corpus, &cfg.delta_rho)?;
        params.alpha_delta = f.alpha_delta;
        params.beta_delta = f.beta_delta;
        params.rho0 = f.rho0;
        report.delta_rho = Some(f);
    }
    if matches!(stage, FitStage::All | FitStage::Chi) {
        let f = fit_chi(corpus)?;
        if !f.boundary {
            params.chi = f.chi;
        }
        report.chi = Some(f);
    }
    if matches!(stage, FitStage::All | FitStage::OmegaKappa) {
        let f = fit_omega_kappa(corpus, &params, &cfg.sem)?;
        params.omega = f.omega;
        params.kappa = f.kappa;
        report.omega_kappa = Some(f);
    }
    report.params = params;
    Ok(report)
}
