//! Metropolis-within-Gibbs sampling of `(theta, xi)` given a pair `(A, B)`
//! under the prosecution hypothesis.
//!
//! Every block of `theta` has an exact full conditional, returned as a small
//! value type that can both sample and evaluate its log density. The density
//! evaluation is what Chib's estimator consumes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use num_complex::Complex64;
// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng as _, RngCore};

use crate::assignment::max_weight_matching;
use crate::error::{bail, Result};
use crate::model::{log_joint_hp, log_prior, EdgeWeightContext, FixedParams, LatentParams};
use crate::sampling::{self, d_distribution, log_d_density, std_complex_normal, uniform_pos};
use crate::special::{ln_gamma, log_bessel_i0};
use crate::types::{Matching, MinutiaConfig, MinutiaType};

/// Candidate log weights more than this below the largest contribute less
/// than `1e-17` relative each and are skipped.
const NEGLIGIBLE_LOG_WEIGHT: f64 = 40.0;

/// A pair of configurations with per-minutia quantities unpacked.
#[derive(Debug, Clone)]
pub struct Pair<'a> {
    pub a: &'a MinutiaConfig,
    pub b: &'a MinutiaConfig,
    ra: Vec<Complex64>,
    rb: Vec<Complex64>,
    sa: Vec<Complex64>,
    sb: Vec<Complex64>,
    ta: Vec<MinutiaType>,
    tb: Vec<MinutiaType>,
}

impl<'a> Pair<'a> {
    pub fn new(a: &'a MinutiaConfig, b: &'a MinutiaConfig) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            bail!(Degenerate, "both configurations need at least one minutia");
        }
        if !(a.scatter() + b.scatter() > 0.0) {
            bail!(Degenerate, "all minutiae coincide");
        }
        let unpack = |c: &MinutiaConfig| {
            let m = c.minutiae();
            (
                m.iter().map(|x| x.location()).collect::<Vec<_>>(),
                m.iter().map(|x| x.orientation()).collect::<Vec<_>>(),
                m.iter().map(|x| x.mtype()).collect::<Vec<_>>(),
            )
        };
        let (ra, sa, ta) = unpack(a);
        let (rb, sb, tb) = unpack(b);
        Ok(Pair { a, b, ra, rb, sa, sb, ta, tb })
    }

    pub fn n_a(&self) -> usize {
        self.ra.len()
    }

    pub fn n_b(&self) -> usize {
        self.rb.len()
    }

    /// Row-major `n_A x n_B` matrix of edge weights at `theta`.
    pub fn weights(&self, theta: &LatentParams, fixed: &FixedParams) -> Result<Vec<f64>> {
        let ctx = EdgeWeightContext::new(theta, fixed)?;
        Ok(ctx.matrix(&self.ra, &self.sa, &self.ta, &self.rb, &self.sb, &self.tb))
    }
}

/// Current values of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: LatentParams,
    pub xi: Matching,
    pub sweep: u64,
}

impl ChainState {
    /// Empty matching; `delta_A` at its prior mean, `delta_B = 1/2`,
    /// `tau` at the centroids, `psi = 1` and
    /// `sigma^2 = (S_A + S_B) / (2 (n_A + n_B))`.
    pub fn initial(pair: &Pair<'_>, fixed: &FixedParams) -> Self {
        let n = (pair.n_a() + pair.n_b()) as f64;
        let s = pair.a.scatter() + pair.b.scatter();
        ChainState {
            theta: LatentParams {
                delta_a: fixed.alpha_delta / (fixed.alpha_delta + fixed.beta_delta),
                delta_b: 0.5,
                tau_a: pair.a.centroid(),
                tau_b: pair.b.centroid(),
                sigma: (s / (2.0 * n)).sqrt(),
                psi: Complex64::new(1.0, 0.0),
            },
            xi: Matching::empty(pair.n_a(), pair.n_b()),
            sweep: 0,
        }
    }

    /// Starting point near the dominant posterior mode.
    ///
    /// With `psi` uniform a chain started from [`ChainState::initial`]
    /// tends to lock onto a handful of chance coincidences and never find
    /// the true alignment. Here candidate alignments `(psi, t)` with
    /// `r_a - c_A ~ psi (r_b - c_B) + t` are collected by Hough voting over
    /// all type-compatible pairs, each candidate (plus the plain start) is
    /// polished by alternating the exact `argmax_xi` with conditional modes
    /// of `tau, sigma, psi`, and the one with the highest joint density is
    /// returned.
    pub fn aligned(pair: &Pair<'_>, fixed: &FixedParams) -> Result<Self> {
        const PSI_BINS: usize = 32;
        const CANDIDATES: usize = 12;
        const FINALISTS: usize = 3;
        const POLISH: usize = 4;
        let base = ChainState::initial(pair, fixed);
        let (ca, cb) = (pair.a.centroid(), pair.b.centroid());
        let spread = base.theta.sigma;
        let cell = (2.0 * fixed.omega + 0.1) * spread;
        let width = 2.0 * PI / PSI_BINS as f64;

        let mut votes: BTreeMap<(usize, i64, i64), u32> = BTreeMap::new();
        for i in 0..pair.n_a() {
            for j in 0..pair.n_b() {
                if pair.ta[i].is_typed() && pair.tb[j].is_typed() && pair.ta[i] != pair.tb[j] {
                    continue;
                }
                let ang = (pair.sa[i] * pair.sb[j].conj()).arg();
                let pos = (if ang < 0.0 { ang + 2.0 * PI } else { ang }) / width;
                let k0 = (pos.floor() as usize) % PSI_BINS;
                let k1 = if pos - pos.floor() < 0.5 { (k0 + PSI_BINS - 1) % PSI_BINS } else { (k0 + 1) % PSI_BINS };
                for k in [k0, k1] {
                    let psi = Complex64::cis((k as f64 + 0.5) * width);
                    let t = (pair.ra[i] - ca) - psi * (pair.rb[j] - cb);
                    let key = (k, (t.re / cell).floor() as i64, (t.im / cell).floor() as i64);
                    *votes.entry(key).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<((usize, i64, i64), u32)> = votes.into_iter().filter(|v| v.1 >= 2).collect();
        ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));

        let mut starts = alloc::vec![base.theta];
        for &((k, ix, iy), _) in ranked.iter().take(CANDIDATES) {
            let psi = Complex64::cis((k as f64 + 0.5) * width);
            let t = Complex64::new((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell);
            starts.push(LatentParams {
                tau_a: ca,
                tau_b: cb - psi.conj() * t,
                psi,
                ..base.theta
            });
        }

        let polish = |theta: LatentParams, rounds: usize| -> Result<(f64, ChainState)> {
            let mut s = ChainState {
                theta,
                xi: Matching::empty(pair.n_a(), pair.n_b()),
                sweep: 0,
            };
            for _ in 0..rounds {
                s.xi = argmax_xi(pair, &s.theta, fixed)?;
                let tau = cond_tau(pair, &s, fixed)?;
                s.theta.tau_a = tau.mean[0];
                s.theta.tau_b = tau.mean[1];
                let sg = cond_sigma(pair, &s, fixed)?;
                s.theta.sigma = (sg.rate / sg.shape).sqrt();
                let nu0 = cond_psi(pair, &s, fixed).nu0;
                if nu0.norm() > 0.0 {
                    s.theta.psi = nu0 / nu0.norm();
                }
            }
            s.xi = argmax_xi(pair, &s.theta, fixed)?;
            let score = log_joint_hp(pair.a, pair.b, &s.xi, &s.theta, fixed)? + log_prior(&s.theta, fixed);
            Ok((score, s))
        };
        // One round for every candidate, more for the most promising.
        let mut scored = starts
            .into_iter()
            .map(|t| polish(t, 1))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best: Option<(f64, ChainState)> = None;
        for (_, s) in scored.into_iter().take(FINALISTS) {
            let r = polish(s.theta, POLISH)?;
            if best.as_ref().is_none_or(|(b, _)| r.0 > *b) {
                best = Some(r);
            }
        }
        Ok(best.map(|(_, s)| s).unwrap_or(base))
    }
}

/// A `D(alpha, beta, lambda)` full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DCond {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl DCond {
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        d_distribution(rng, self.alpha, self.beta, self.lambda)
    }

    pub fn log_density(&self, delta: f64) -> Result<f64> {
        log_d_density(delta, self.alpha, self.beta, self.lambda)
    }
}

/// `delta_A | rest ~ D(alpha_delta + n_A, beta_delta + n_B - n_xi, rho0 (1 - delta_B))`.
pub fn cond_delta_a(pair: &Pair<'_>, state: &ChainState, fixed: &FixedParams) -> DCond {
    let nxi = state.xi.len() as f64;
    DCond {
        alpha: fixed.alpha_delta + pair.n_a() as f64,
        beta: fixed.beta_delta + pair.n_b() as f64 - nxi,
        lambda: fixed.rho0 * (1.0 - state.theta.delta_b),
    }
}

/// `delta_B | rest ~ D(n_B + 1, n_A - n_xi + 1, rho0 (1 - delta_A))`.
pub fn cond_delta_b(pair: &Pair<'_>, state: &ChainState, fixed: &FixedParams) -> DCond {
    let nxi = state.xi.len() as f64;
    DCond {
        alpha: pair.n_b() as f64 + 1.0,
        beta: pair.n_a() as f64 - nxi + 1.0,
        lambda: fixed.rho0 * (1.0 - state.theta.delta_a),
    }
}

/// Bivariate complex normal full conditional of `(tau_A, tau_B)`:
/// density `pi^-2 det(L) exp(-(t - m)^H L (t - m))` with precision `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauCond {
    /// Precision `[[p11, p12], [conj(p12), p22]]`.
    pub p11: f64,
    pub p12: Complex64,
    pub p22: f64,
    pub mean: [Complex64; 2],
}

impl TauCond {
    fn det(&self) -> f64 {
        self.p11 * self.p22 - self.p12.norm_sqr()
    }

    /// Covariance, the inverse of the precision: `(c11, c12, c22)`.
    pub fn covariance(&self) -> (f64, Complex64, f64) {
        let d = self.det();
        (self.p22 / d, -self.p12 / d, self.p11 / d)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> (Complex64, Complex64) {
        let (c11, c12, c22) = self.covariance();
        let l11 = c11.sqrt();
        let l21 = c12.conj() / l11;
        let l22 = (c22 - l21.norm_sqr()).max(0.0).sqrt();
        let z1 = std_complex_normal(rng);
        let z2 = std_complex_normal(rng);
        (self.mean[0] + z1 * l11, self.mean[1] + l21 * z1 + z2 * l22)
    }

    pub fn log_density(&self, tau_a: Complex64, tau_b: Complex64) -> f64 {
        let x = tau_a - self.mean[0];
        let y = tau_b - self.mean[1];
        let quad = self.p11 * x.norm_sqr() + self.p22 * y.norm_sqr() + 2.0 * (x.conj() * self.p12 * y).re;
        self.det().ln() - 2.0 * PI.ln() - quad
    }
}

/// Full conditional of `(tau_A, tau_B)`. Unmatched minutiae contribute
/// `sigma^-2` each to their own diagonal entry; every matched pair
/// contributes `Sigma_AB^-1`.
pub fn cond_tau(pair: &Pair<'_>, state: &ChainState, fixed: &FixedParams) -> Result<TauCond> {
    let th = &state.theta;
    let xi = &state.xi;
    let nxi = xi.len() as f64;
    let q = fixed.q();
    let k = q * q / fixed.q2m1();
    let m12 = -th.psi * (k / q);

    let mut ua = Complex64::new(0.0, 0.0);
    let mut ub = ua;
    let mut ea = ua;
    let mut eb = ua;
    for (i, r) in pair.ra.iter().enumerate() {
        if xi.partner_of_a(i).is_some() {
            ea += r;
        } else {
            ua += r;
        }
    }
    for (j, r) in pair.rb.iter().enumerate() {
        if xi.partner_of_b(j).is_some() {
            eb += r;
        } else {
            ub += r;
        }
    }
    // Precision and linear term in units of sigma^-2.
    let p11 = pair.n_a() as f64 - nxi + nxi * k;
    let p22 = pair.n_b() as f64 - nxi + nxi * k;
    let p12 = m12 * nxi;
    let h1 = ua + ea * k + m12 * eb;
    let h2 = ub + m12.conj() * ea + eb * k;
    let det = p11 * p22 - p12.norm_sqr();
    if !(det > 0.0) {
        bail!(Numerical, "singular precision in the tau conditional");
    }
    let mean = [(h1 * p22 - p12 * h2) / det, (h2 * p11 - p12.conj() * h1) / det];
    let u = 1.0 / (th.sigma * th.sigma);
    Ok(TauCond {
        p11: p11 * u,
        p12: p12 * u,
        p22: p22 * u,
        mean,
    })
}

/// Full conditional of `sigma`: `u = sigma^-2 ~ Gamma(shape, rate)`.
/// Densities are reported with respect to `d sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaCond {
    pub shape: f64,
    pub rate: f64,
}

impl SigmaCond {
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let u = sampling::gamma(rng, self.shape, self.rate)?;
        Ok(1.0 / u.sqrt())
    }

    pub fn log_density(&self, sigma: f64) -> f64 {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let u = 1.0 / (sigma * sigma);
        let (k, r) = (self.shape, self.rate);
        k * r.ln() - ln_gamma(k) + (k - 1.0) * u.ln() - r * u + LN_2 - 3.0 * sigma.ln()
    }
}

pub fn cond_sigma(pair: &Pair<'_>, state: &ChainState, fixed: &FixedParams) -> Result<SigmaCond> {
    let th = &state.theta;
    let xi = &state.xi;
    let q = fixed.q();
    let k = q * q / fixed.q2m1();
    let mut rate = 0.0;
    for (i, r) in pair.ra.iter().enumerate() {
        if xi.partner_of_a(i).is_none() {
            rate += (r - th.tau_a).norm_sqr();
        }
    }
    for (j, r) in pair.rb.iter().enumerate() {
        if xi.partner_of_b(j).is_none() {
            rate += (r - th.tau_b).norm_sqr();
        }
    }
    for (i, j) in xi.edges() {
        let xa = pair.ra[i] - th.tau_a;
        let xb = pair.rb[j] - th.tau_b;
        rate += k * (xa.norm_sqr() + xb.norm_sqr() - 2.0 / q * (xa * (xb * th.psi).conj()).re);
    }
    if !(rate > 0.0) || !rate.is_finite() {
        bail!(Degenerate, "sigma conditional has non-positive rate {rate}");
    }
    Ok(SigmaCond {
        shape: (pair.n_a() + pair.n_b()) as f64 + 2.0,
        rate,
    })
}

/// Full conditional of `psi`: von Mises with location `nu0/|nu0|` and
/// concentration `|nu0|`, uniform when `nu0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiCond {
    pub nu0: Complex64,
}

impl PsiCond {
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Complex64> {
        let k = self.nu0.norm();
        if k == 0.0 {
            return Ok(Complex64::cis(PI * (2.0 * rng.random::<f64>() - 1.0)));
        }
        sampling::von_mises(rng, self.nu0 / k, k)
    }

    pub fn log_density(&self, psi: Complex64) -> Result<f64> {
        Ok((psi * self.nu0.conj()).re - log_bessel_i0(self.nu0.norm())?)
    }
}

pub fn cond_psi(pair: &Pair<'_>, state: &ChainState, fixed: &FixedParams) -> PsiCond {
    let th = &state.theta;
    let c = 2.0 * fixed.q() / fixed.q2m1() / (th.sigma * th.sigma);
    let mut nu0 = Complex64::new(0.0, 0.0);
    for (i, j) in state.xi.edges() {
        let xa = pair.ra[i] - th.tau_a;
        let xb = pair.rb[j] - th.tau_b;
        nu0 += pair.sa[i] * pair.sb[j].conj() * fixed.kappa + xa * xb.conj() * c;
    }
    PsiCond { nu0 }
}

/// What one `xi` step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiMove {
    /// No selectable `b` (everything clamped).
    Idle,
    /// `beta` left unmatched, re-paired, or newly paired with a free `a`.
    Gibbs,
    /// `a` moved from its partner to the unmatched `beta`; accepted.
    SwapAccepted,
    /// Swap proposal rejected by the Metropolis-Hastings test.
    SwapRejected,
}

/// The auxiliary-variable sampler for `xi` at fixed `theta`.
///
/// A `beta` is drawn uniformly among the selectable minutiae of `B`, its
/// edge is removed, and a partner `a` (or none) is drawn with probability
/// proportional to `exp(w(a, beta) - w(a, current partner of a))`. Moves to
/// an `a` that was already matched steal it from its partner; such a move is
/// only a valid Gibbs update when its reverse is available, so it is passed
/// through a Metropolis-Hastings test (and rejected outright when `beta` was
/// matched, which has no single-step reverse). Minutiae `b < clamp` and
/// their partners are never touched.
#[derive(Debug, Clone)]
pub struct XiKernel {
    cols: Vec<f64>,
    n_a: usize,
    n_b: usize,
    clamp: usize,
    scratch: Vec<f64>,
    total: f64,
}

/// `exp(lw - hi)`, or zero when that is below double-precision resolution
/// relative to the largest term (which is 1).
fn relative_weight(lw: f64, hi: f64) -> f64 {
    if lw < hi - NEGLIGIBLE_LOG_WEIGHT {
        0.0
    } else {
        (lw - hi).exp()
    }
}

impl XiKernel {
    pub fn new(pair: &Pair<'_>, theta: &LatentParams, fixed: &FixedParams, clamp: usize) -> Result<Self> {
        let ctx = EdgeWeightContext::new(theta, fixed)?;
        let cols = ctx.matrix_by_column(&pair.ra, &pair.sa, &pair.ta, &pair.rb, &pair.sb, &pair.tb);
        Ok(Self::from_columns(cols, pair.n_a(), pair.n_b(), clamp))
    }

    /// `weights` is row-major `n_A x n_B`.
    pub fn from_weights(weights: Vec<f64>, n_a: usize, n_b: usize, clamp: usize) -> Self {
        assert_eq!(weights.len(), n_a * n_b);
        let mut cols = alloc::vec![0.0; n_a * n_b];
        for a in 0..n_a {
            for b in 0..n_b {
                cols[b * n_a + a] = weights[a * n_b + b];
            }
        }
        Self::from_columns(cols, n_a, n_b, clamp)
    }

    // Column-major storage keeps the candidate scan for one b contiguous.
    fn from_columns(cols: Vec<f64>, n_a: usize, n_b: usize, clamp: usize) -> Self {
        XiKernel {
            cols,
            n_a,
            n_b,
            clamp: clamp.min(n_b),
            scratch: Vec::with_capacity(n_a + 1),
            total: 0.0,
        }
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.cols[b * self.n_a + a]
    }

    pub fn set_clamp(&mut self, clamp: usize) {
        self.clamp = clamp.min(self.n_b);
    }

    /// Number of selectable `b`.
    pub fn n_free(&self) -> usize {
        self.n_b - self.clamp
    }

    /// Fills `scratch` with candidate weights for `beta` relative to the
    /// largest (index `n_a` is "no partner"), given a matching in which
    /// `beta` is unmatched. Returns their log-sum.
    fn candidates(&mut self, xi: &Matching, beta: usize) -> f64 {
        let n_a = self.n_a;
        self.scratch.resize(n_a + 1, 0.0);
        let col = &self.cols[beta * n_a..(beta + 1) * n_a];
        let mut hi = 0.0f64;
        for (a, (out, &w)) in self.scratch.iter_mut().zip(col).enumerate() {
            let lw = match xi.partner_of_a(a) {
                None => w,
                Some(b) if b < self.clamp => f64::NEG_INFINITY,
                Some(b) => w - self.cols[b * n_a + a],
            };
            hi = hi.max(lw);
            *out = lw;
        }
        self.scratch[n_a] = 0.0;
        let mut total = 0.0;
        for v in self.scratch.iter_mut() {
            *v = relative_weight(*v, hi);
            total += *v;
        }
        self.total = total;
        hi + total.ln()
    }

    /// Probability that `beta` is matched to `a` (`None`: unmatched) under
    /// the full conditional of `beta`'s edge given every other edge of `xi`.
    /// `beta` must be unmatched in `xi` and `a`, if any, unmatched as well.
    pub fn log_conditional(&mut self, xi: &Matching, beta: usize, a: Option<usize>) -> f64 {
        debug_assert!(xi.partner_of_b(beta).is_none());
        // Only free a compete with "no partner" for a fixed remainder.
        let mut hi = 0.0f64;
        self.scratch.clear();
        for i in 0..self.n_a {
            if xi.partner_of_a(i).is_none() {
                let w = self.cols[beta * self.n_a + i];
                hi = hi.max(w);
                self.scratch.push(w);
            }
        }
        self.scratch.push(0.0);
        let total: f64 = self.scratch.iter().map(|&lw| relative_weight(lw, hi)).sum();
        let log_z = hi + total.ln();
        match a {
            None => -log_z,
            Some(i) if xi.partner_of_a(i).is_some() => f64::NEG_INFINITY,
            Some(i) => self.cols[beta * self.n_a + i] - log_z,
        }
    }

    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let target = rng.random::<f64>() * self.total;
        let mut acc = 0.0;
        let mut last_possible = self.n_a;
        for (i, &p) in self.scratch.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            last_possible = i;
            acc += p;
            if target < acc {
                return i;
            }
        }
        last_possible
    }

    /// One update of `xi`.
    pub fn step<R: RngCore + ?Sized>(&mut self, xi: &mut Matching, rng: &mut R) -> XiMove {
        if self.n_free() == 0 {
            return XiMove::Idle;
        }
        let beta = rng.random_range(self.clamp..self.n_b);
        let a0 = xi.remove_b(beta);
        let log_z = self.candidates(xi, beta);
        let pick = self.draw(rng);
        if pick == self.n_a {
            return XiMove::Gibbs;
        }
        let a = pick;
        let Some(b) = xi.partner_of_a(a) else {
            xi.insert(a, beta).expect("free endpoints");
            return XiMove::Gibbs;
        };
        if let Some(a0) = a0 {
            xi.insert(a0, beta).expect("restoring removed edge");
            return XiMove::SwapRejected;
        }
        let delta = self.weight(a, beta) - self.weight(a, b);
        xi.remove_a(a);
        xi.insert(a, beta).expect("free endpoints");
        let log_z_rev = self.candidates(xi, b);
        let log_r = log_z - delta - log_z_rev;
        if log_r >= 0.0 || uniform_pos(rng).ln() < log_r {
            XiMove::SwapAccepted
        } else {
            xi.remove_a(a);
            xi.insert(a, b).expect("restoring swapped edge");
            XiMove::SwapRejected
        }
    }
}

/// One `xi` update at the chain's current `theta`.
pub fn step_xi<R: RngCore + ?Sized>(
    pair: &Pair<'_>,
    state: &mut ChainState,
    fixed: &FixedParams,
    rng: &mut R,
) -> Result<XiMove> {
    let mut k = XiKernel::new(pair, &state.theta, fixed, 0)?;
    Ok(k.step(&mut state.xi, rng))
}

/// Which blocks a sweep updates. Fixed blocks keep their current values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPlan {
    pub delta_a: bool,
    pub delta_b: bool,
    pub tau: bool,
    pub sigma: bool,
    pub psi: bool,
    pub xi: bool,
    /// Minutiae `b < xi_clamp` keep their edges.
    pub xi_clamp: usize,
    /// Number of `xi` steps per sweep; `None` means `n_A`.
    pub xi_steps: Option<usize>,
}

impl SweepPlan {
    pub const FULL: SweepPlan = SweepPlan {
        delta_a: true,
        delta_b: true,
        tau: true,
        sigma: true,
        psi: true,
        xi: true,
        xi_clamp: 0,
        xi_steps: None,
    };
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan::FULL
    }
}

/// Swap-move counters accumulated by [`gibbs_sweep`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XiStats {
    pub steps: u64,
    pub swaps_accepted: u64,
    pub swaps_rejected: u64,
}

impl XiStats {
    fn record(&mut self, m: XiMove) {
        self.steps += 1;
        match m {
            XiMove::SwapAccepted => self.swaps_accepted += 1,
            XiMove::SwapRejected => self.swaps_rejected += 1,
            _ => {}
        }
    }
}

/// One sweep: `delta_A`, `delta_B`, `(tau_A, tau_B)`, `sigma`, `psi`, then
/// `n_A` steps of the `xi` sampler, each block only if the plan frees it.
pub fn gibbs_sweep<R: RngCore + ?Sized>(
    pair: &Pair<'_>,
    state: &mut ChainState,
    fixed: &FixedParams,
    plan: &SweepPlan,
    stats: &mut XiStats,
    rng: &mut R,
) -> Result<()> {
    if plan.delta_a {
        state.theta.delta_a = cond_delta_a(pair, state, fixed).sample(rng)?;
    }
    if plan.delta_b {
        state.theta.delta_b = cond_delta_b(pair, state, fixed).sample(rng)?;
    }
    if plan.tau {
        let (ta, tb) = cond_tau(pair, state, fixed)?.sample(rng);
        state.theta.tau_a = ta;
        state.theta.tau_b = tb;
    }
    if plan.sigma {
        state.theta.sigma = cond_sigma(pair, state, fixed)?.sample(rng)?;
    }
    if plan.psi {
        state.theta.psi = cond_psi(pair, state, fixed).sample(rng)?;
    }
    if plan.xi {
        let mut k = XiKernel::new(pair, &state.theta, fixed, plan.xi_clamp)?;
        for _ in 0..plan.xi_steps.unwrap_or(pair.n_a()) {
            stats.record(k.step(&mut state.xi, rng));
        }
    }
    state.sweep += 1;
    Ok(())
}

/// The matching maximizing `log_joint_hp` at `theta`: a maximum-weight
/// bipartite matching on the positive edge weights.
pub fn argmax_xi(pair: &Pair<'_>, theta: &LatentParams, fixed: &FixedParams) -> Result<Matching> {
    let w = pair.weights(theta, fixed)?;
    let edges = max_weight_matching(&w, pair.n_a(), pair.n_b());
    Matching::from_edges(pair.n_a(), pair.n_b(), edges)
}

/// One row of a chain trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub sweep: u64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub tau_a: Complex64,
    pub tau_b: Complex64,
    pub sigma: f64,
    /// Angle of `psi` in radians.
    pub psi_angle: f64,
    pub n_xi: usize,
}

impl TraceRecord {
    pub fn of(state: &ChainState) -> Self {
        TraceRecord {
            sweep: state.sweep,
            delta_a: state.theta.delta_a,
            delta_b: state.theta.delta_b,
            tau_a: state.theta.tau_a,
            tau_b: state.theta.tau_b,
            sigma: state.theta.sigma,
            psi_angle: state.theta.psi.arg(),
            n_xi: state.xi.len(),
        }
    }
}

/// Runs a full chain from the aligned start and records every sweep after
/// `burn`.
pub fn run_chain<R: RngCore + ?Sized>(
    pair: &Pair<'_>,
    fixed: &FixedParams,
    burn: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<TraceRecord>> {
    let mut state = ChainState::aligned(pair, fixed)?;
    let mut stats = XiStats::default();
    let mut out = Vec::with_capacity(samples);
    for i in 0..burn + samples {
        gibbs_sweep(pair, &mut state, fixed, &SweepPlan::FULL, &mut stats, rng)?;
        if i >= burn {
            out.push(TraceRecord::of(&state));
        }
    }
    Ok(out)
}
