//! Log densities of the parametric model.
//!
//! Conventions shared by every function here: complex normal densities are
//! `phi(r; tau, s2) = exp(-|r - tau|^2 / s2) / (pi s2)`; the von Mises density
//! is taken with respect to the uniform probability measure on the circle;
//! the data-only factors `c~(A) c~(B)` (which carry the orientation and
//! type-observation densities and cancel in the likelihood ratio) are dropped
//! from both hypotheses.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::special::{ln_gamma, log_bessel_i0, log_beta, log_kummer_1f1};
use crate::types::{Matching, Minutia, MinutiaConfig, MinutiaType};

/// Population-level parameters, treated as known when scoring a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedParams {
    /// Expected number of latent minutiae.
    pub rho0: f64,
    /// Probability that a latent minutia is a bifurcation.
    pub chi: f64,
    /// Probability that an observed minutia has its type unobserved. Only
    /// used by the simulator.
    pub epsilon: f64,
    /// Location error scale relative to the latent spread.
    pub omega: f64,
    /// Orientation error concentration.
    pub kappa: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
}

impl Default for FixedParams {
    /// The estimates obtained on the reference casework database.
    fn default() -> Self {
        FixedParams {
            rho0: 132.74,
            chi: 0.38,
            epsilon: 0.1,
            omega: 0.047,
            kappa: 35.0,
            alpha_delta: 14.67,
            beta_delta: 3.30,
        }
    }
}

impl FixedParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho0", self.rho0),
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("alpha_delta", self.alpha_delta),
            ("beta_delta", self.beta_delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                bail!(InvalidParameter, "{name} must be finite and > 0, got {v}");
            }
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            bail!(InvalidParameter, "chi must lie in (0,1), got {}", self.chi);
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            bail!(InvalidParameter, "epsilon must lie in [0,1], got {}", self.epsilon);
        }
        Ok(())
    }

    /// `q = omega^2 + 1`.
    pub fn q(&self) -> f64 {
        self.omega * self.omega + 1.0
    }

    /// `q^2 - 1 = omega^2 (omega^2 + 2)`, computed without cancellation.
    pub fn q2m1(&self) -> f64 {
        let w2 = self.omega * self.omega;
        w2 * (w2 + 2.0)
    }
}

/// Per-comparison nuisance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatentParams {
    pub delta_a: f64,
    pub delta_b: f64,
    pub tau_a: Complex64,
    pub tau_b: Complex64,
    pub sigma: f64,
    /// Relative rotation, a unit complex number.
    pub psi: Complex64,
}

impl LatentParams {
    pub fn in_domain(&self) -> bool {
        self.delta_a > 0.0
            && self.delta_a < 1.0
            && self.delta_b > 0.0
            && self.delta_b < 1.0
            && self.sigma > 0.0
            && self.sigma.is_finite()
            && self.tau_a.re.is_finite()
            && self.tau_a.im.is_finite()
            && self.tau_b.re.is_finite()
            && self.tau_b.im.is_finite()
            && (self.psi.norm() - 1.0).abs() < 1e-9
    }

    pub fn validate(&self) -> Result<()> {
        if !self.in_domain() {
            bail!(InvalidParameter, "latent parameters out of domain: {self:?}");
        }
        Ok(())
    }
}

/// Covariance of a matched location pair:
/// `sigma^2 [[1, psi/q], [conj(psi)/q, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaAB {
    pub sigma2: f64,
    /// Off-diagonal entry divided by `sigma^2`, i.e. `psi/q`.
    pub coupling: Complex64,
}

impl SigmaAB {
    pub fn new(sigma: f64, psi: Complex64, fixed: &FixedParams) -> Self {
        SigmaAB {
            sigma2: sigma * sigma,
            coupling: psi / fixed.q(),
        }
    }

    /// `log det`, i.e. `log(sigma^4 (1 - |coupling|^2))`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.sigma2.ln() + (1.0 - self.coupling.norm_sqr()).ln()
    }

    /// Bivariate complex normal log density of the centred pair `(x_a, x_b)`.
    pub fn log_density(&self, x_a: Complex64, x_b: Complex64) -> f64 {
        let c = self.coupling;
        let one_m = 1.0 - c.norm_sqr();
        let quad = (x_a.norm_sqr() + x_b.norm_sqr() - 2.0 * (c.conj() * x_a * x_b.conj()).re)
            / (self.sigma2 * one_m);
        -quad - 2.0 * PI.ln() - self.log_det()
    }
}

/// Type compatibility factor `T(t_a, t_b)`.
pub fn type_compat(ta: MinutiaType, tb: MinutiaType, chi: f64) -> f64 {
    match ta.code() * tb.code() {
        0 => 1.0,
        -1 => 0.0,
        _ if ta == MinutiaType::Bifurcation => 1.0 / chi,
        _ => 1.0 / (1.0 - chi),
    }
}

/// `log pr(theta)`: Beta(alpha_delta, beta_delta) on `delta_A`, uniform on
/// `delta_B`, and the improper `sigma^-5` on `(tau_A, tau_B, sigma, psi)`
/// with `psi` measured by the uniform probability on the circle. Returns
/// `-inf` outside the domain.
pub fn log_prior(theta: &LatentParams, fixed: &FixedParams) -> f64 {
    if !theta.in_domain() {
        return f64::NEG_INFINITY;
    }
    let (a, b) = (fixed.alpha_delta, fixed.beta_delta);
    (a - 1.0) * theta.delta_a.ln() + (b - 1.0) * libm::log1p(-theta.delta_a)
        - log_beta(a, b)
        - 5.0 * theta.sigma.ln()
}

/// `(n^(1), n^(-1))`: bifurcation and ridge-ending counts.
fn typed_counts(cfg: &MinutiaConfig) -> (f64, f64) {
    (
        cfg.count(MinutiaType::Bifurcation) as f64,
        cfg.count(MinutiaType::RidgeEnding) as f64,
    )
}

/// `log pr(A, B | H_d)` with `theta` integrated out analytically, up to the
/// dropped factors `c~(A) c~(B)`.
pub fn log_marginal_hd(a: &MinutiaConfig, b: &MinutiaConfig, fixed: &FixedParams) -> Result<f64> {
    fixed.validate()?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if a.is_empty() || b.is_empty() {
        bail!(Degenerate, "both configurations need at least one minutia");
    }
    let s = a.scatter() + b.scatter();
    if !(s > 0.0) || !s.is_finite() {
        bail!(Degenerate, "total scatter S_A + S_B must be positive, got {s}");
    }
    let (a1, am1) = typed_counts(a);
    let (b1, bm1) = typed_counts(b);
    let n = na + nb;
    let (al, be, rho) = (fixed.alpha_delta, fixed.beta_delta, fixed.rho0);
    let types = (a1 + b1) * fixed.chi.ln() + (am1 + bm1) * libm::log1p(-fixed.chi);
    let locations = n * (rho / (PI * s)).ln() + 2.0 * PI.ln() + ln_gamma(n)
        - core::f64::consts::LN_2
        - na.ln()
        - nb.ln();
    let delta_a = ln_gamma(al + be) + ln_gamma(al + na) - ln_gamma(al) - ln_gamma(al + be + na)
        + log_kummer_1f1(be, al + be + na, rho)?;
    let delta_b = -(nb + 1.0).ln() + log_kummer_1f1(1.0, nb + 2.0, rho)?;
    Ok(-2.0 * rho + types + locations + delta_a + delta_b)
}

/// Counts of the joint density that depend on the matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub n_xi: usize,
    pub n_xi_bif: usize,
    pub n_xi_end: usize,
}

impl MatchCounts {
    pub fn of(a: &MinutiaConfig, b: &MinutiaConfig, xi: &Matching) -> Self {
        MatchCounts {
            n_xi: xi.len(),
            n_xi_bif: xi.count_type(a, b, MinutiaType::Bifurcation),
            n_xi_end: xi.count_type(a, b, MinutiaType::RidgeEnding),
        }
    }
}

/// `log pr(A, B, xi | theta, H_p)`, up to the dropped factors
/// `c~(A) c~(B)`. Returns `-inf` if a matched pair has opposite types.
pub fn log_joint_hp(
    a: &MinutiaConfig,
    b: &MinutiaConfig,
    xi: &Matching,
    theta: &LatentParams,
    fixed: &FixedParams,
) -> Result<f64> {
    fixed.validate()?;
    theta.validate()?;
    xi.check_sizes(a, b)?;
    let am = a.minutiae();
    let bm = b.minutiae();
    if xi
        .edges()
        .any(|(ia, ib)| type_compat(am[ia].mtype(), bm[ib].mtype(), fixed.chi) == 0.0)
    {
        return Ok(f64::NEG_INFINITY);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let c = MatchCounts::of(a, b, xi);
    let nxi = c.n_xi as f64;
    let (a1, am1) = typed_counts(a);
    let (b1, bm1) = typed_counts(b);
    let (da, db, rho) = (theta.delta_a, theta.delta_b, fixed.rho0);

    let mut total = -rho * (da + db - da * db)
        + (na + nb - nxi) * rho.ln()
        + (a1 + b1 - c.n_xi_bif as f64) * fixed.chi.ln()
        + (am1 + bm1 - c.n_xi_end as f64) * libm::log1p(-fixed.chi)
        + na * da.ln()
        + nb * db.ln()
        + (nb - nxi) * libm::log1p(-da)
        + (na - nxi) * libm::log1p(-db);

    let s2 = theta.sigma * theta.sigma;
    let log_phi = |x: Complex64| -x.norm_sqr() / s2 - (PI * s2).ln();
    for (i, m) in am.iter().enumerate() {
        if xi.partner_of_a(i).is_none() {
            total += log_phi(m.location() - theta.tau_a);
        }
    }
    for (j, m) in bm.iter().enumerate() {
        if xi.partner_of_b(j).is_none() {
            total += log_phi(m.location() - theta.tau_b);
        }
    }
    let sig = SigmaAB::new(theta.sigma, theta.psi, fixed);
    let log_i0 = log_bessel_i0(fixed.kappa)?;
    for (ia, ib) in xi.edges() {
        let (ma, mb) = (&am[ia], &bm[ib]);
        total += sig.log_density(ma.location() - theta.tau_a, mb.location() - theta.tau_b);
        total += fixed.kappa * (ma.orientation() * (theta.psi * mb.orientation()).conj()).re - log_i0;
    }
    Ok(total)
}

/// Parameter-dependent constants of the edge weight, computed once per
/// `theta`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeWeightContext {
    kappa: f64,
    psi: Complex64,
    tau_a: Complex64,
    tau_b: Complex64,
    inv_s2: f64,
    cross: f64,
    penalty: f64,
    log_const: f64,
    log_t_bif: f64,
    log_t_end: f64,
}

impl EdgeWeightContext {
    pub fn new(theta: &LatentParams, fixed: &FixedParams) -> Result<Self> {
        let q = fixed.q();
        let dd = fixed.q2m1();
        let log_const = (q * q / dd).ln()
            - fixed.rho0.ln()
            - log_bessel_i0(fixed.kappa)?
            - libm::log1p(-theta.delta_a)
            - libm::log1p(-theta.delta_b);
        Ok(EdgeWeightContext {
            kappa: fixed.kappa,
            psi: theta.psi,
            tau_a: theta.tau_a,
            tau_b: theta.tau_b,
            inv_s2: 1.0 / (theta.sigma * theta.sigma),
            cross: 2.0 * q / dd,
            penalty: 1.0 / dd,
            log_const,
            log_t_bif: -fixed.chi.ln(),
            log_t_end: -libm::log1p(-fixed.chi),
        })
    }

    /// `w(a, b | theta)`: the change in `log_joint_hp` from adding `a~b`.
    pub fn weight(&self, a: &Minutia, b: &Minutia) -> f64 {
        self.weight_parts(
            a.location(),
            a.orientation(),
            a.mtype(),
            b.location(),
            b.orientation(),
            b.mtype(),
        )
    }

    /// [`Self::weight`] from precomputed locations and unit orientations.
    pub fn weight_parts(
        &self,
        ra: Complex64,
        sa: Complex64,
        ta: MinutiaType,
        rb: Complex64,
        sb: Complex64,
        tb: MinutiaType,
    ) -> f64 {
        let log_t = match (ta.code(), tb.code()) {
            (x, y) if x * y == 0 => 0.0,
            (x, y) if x != y => return f64::NEG_INFINITY,
            (1, _) => self.log_t_bif,
            _ => self.log_t_end,
        };
        let xa = ra - self.tau_a;
        let xb = rb - self.tau_b;
        self.kappa * (sa * (self.psi * sb).conj()).re
            + self.cross * (self.psi.conj() * xa * xb.conj()).re * self.inv_s2
            - self.penalty * (xa.norm_sqr() + xb.norm_sqr()) * self.inv_s2
            + self.log_const
            + log_t
    }

    /// Row-major `n_A x n_B` matrix of [`Self::weight_parts`], with the
    /// per-row and per-column factors computed once.
    pub fn matrix(
        &self,
        ra: &[Complex64],
        sa: &[Complex64],
        ta: &[MinutiaType],
        rb: &[Complex64],
        sb: &[Complex64],
        tb: &[MinutiaType],
    ) -> Vec<f64> {
        self.fill(ra, sa, ta, rb, sb, tb, false)
    }

    /// As [`Self::matrix`] but column-major (`b` outer).
    pub fn matrix_by_column(
        &self,
        ra: &[Complex64],
        sa: &[Complex64],
        ta: &[MinutiaType],
        rb: &[Complex64],
        sb: &[Complex64],
        tb: &[MinutiaType],
    ) -> Vec<f64> {
        self.fill(ra, sa, ta, rb, sb, tb, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        &self,
        ra: &[Complex64],
        sa: &[Complex64],
        ta: &[MinutiaType],
        rb: &[Complex64],
        sb: &[Complex64],
        tb: &[MinutiaType],
        by_column: bool,
    ) -> Vec<f64> {
        let c = self.cross * self.inv_s2;
        let pen = self.penalty * self.inv_s2;
        let rows: Vec<(Complex64, Complex64, f64)> = ra
            .iter()
            .zip(sa)
            .map(|(&r, &s)| {
                let x = r - self.tau_a;
                (s, x, -pen * x.norm_sqr())
            })
            .collect();
        let cols: Vec<(Complex64, Complex64, f64)> = rb
            .iter()
            .zip(sb)
            .map(|(&r, &s)| {
                let x = r - self.tau_b;
                (self.psi * s * self.kappa, self.psi * x * c, self.log_const - pen * x.norm_sqr())
            })
            .collect();
        let entry = |i: usize, j: usize| -> f64 {
            let log_t = match (ta[i], tb[j]) {
                (MinutiaType::Unobserved, _) | (_, MinutiaType::Unobserved) => 0.0,
                (x, y) if x != y => return f64::NEG_INFINITY,
                (MinutiaType::Bifurcation, _) => self.log_t_bif,
                _ => self.log_t_end,
            };
            let ((s, x, row), (u, v, col)) = (rows[i], cols[j]);
            s.re * u.re + s.im * u.im + x.re * v.re + x.im * v.im + row + col + log_t
        };
        let (na, nb) = (ra.len(), rb.len());
        let mut out = Vec::with_capacity(na * nb);
        if by_column {
            for j in 0..nb {
                out.extend((0..na).map(|i| entry(i, j)));
            }
        } else {
            for i in 0..na {
                out.extend((0..nb).map(|j| entry(i, j)));
            }
        }
        out
    }
}

/// `w(a, b | theta)` for one pair of minutiae.
pub fn edge_weight(a: &Minutia, b: &Minutia, theta: &LatentParams, fixed: &FixedParams) -> Result<f64> {
    Ok(EdgeWeightContext::new(theta, fixed)?.weight(a, b))
}

/// All edge weights, row-major with index `ia * n_B + ib`.
pub fn weight_matrix(
    a: &MinutiaConfig,
    b: &MinutiaConfig,
    theta: &LatentParams,
    fixed: &FixedParams,
) -> Result<Vec<f64>> {
    let ctx = EdgeWeightContext::new(theta, fixed)?;
    let mut w = Vec::with_capacity(a.len() * b.len());
    for ma in a.minutiae() {
        for mb in b.minutiae() {
            w.push(ctx.weight(ma, mb));
        }
    }
    Ok(w)
}
