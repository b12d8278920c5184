//! Chib's estimator of `log pr(A, B | H_p)` and the log10 likelihood ratio.
//!
//! The identity used is
//! `log pr(A,B) = log pr(A,B,xi*,theta*) - log pr(theta*, xi* | A, B)`
//! with the posterior ordinate split by blocks,
//! `p(dA*) p(dB* | dA*) p(tau* | dA*, dB*) p(sigma* | ...) p(psi* | ...) p(xi* | theta*)`.
//! Block `k`'s ordinate is averaged over a run in which blocks before `k`
//! are held at their starred values and block `k` itself is free; its star
//! value is the mean of the same run. The matching ordinate is the product
//! over `b` in index order of `p(xi*_b | xi*_{<b}, theta*)`, each estimated
//! from a chain with the edges of `b' < b` clamped.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::LN_10;

use num_complex::Complex64;
// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::mcmc::{
    argmax_xi, cond_delta_a, cond_delta_b, cond_psi, cond_sigma, cond_tau, gibbs_sweep, ChainState, Pair,
    SweepPlan, XiKernel, XiStats,
};
use crate::model::{log_joint_hp, log_marginal_hd, log_prior, FixedParams, LatentParams};
use crate::sampling::rng_from_seed;
use crate::special::log_sum_exp;
use crate::types::{Matching, MinutiaConfig};

/// Run lengths and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChibConfig {
    /// Burn-in sweeps of the unrestricted chain.
    pub n_burn: usize,
    /// Saved sweeps per ordinate run.
    pub n_samples: usize,
    /// Burn-in sweeps after each block is fixed.
    pub n_burn_reduced: usize,
    /// Samples per matching-ordinate term.
    pub n_xi: usize,
    /// Number of batches for the Monte Carlo standard error.
    pub n_batches: usize,
    pub seed: u64,
}

impl Default for ChibConfig {
    fn default() -> Self {
        ChibConfig {
            n_burn: 5000,
            n_samples: 5000,
            n_burn_reduced: 500,
            n_xi: 200,
            n_batches: 10,
            seed: 0,
        }
    }
}

impl ChibConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_xi == 0 {
            bail!(InvalidParameter, "n_samples and n_xi must be positive");
        }
        if self.n_batches < 2 || self.n_batches > self.n_samples.min(self.n_xi) {
            bail!(
                InvalidParameter,
                "n_batches must lie in 2..=min(n_samples, n_xi), got {}",
                self.n_batches
            );
        }
        Ok(())
    }
}

/// A Monte Carlo average of ordinates, in log space, with its batch
/// standard error on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogOrdinate {
    pub log_value: f64,
    pub se: f64,
}

/// Intermediate quantities of one estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChibDiagnostics {
    pub theta_star: LatentParams,
    pub xi_star_edges: Vec<(usize, usize)>,
    /// `log pr(A, B, xi*, theta* | H_p) + log pr(theta*)`.
    pub log_numerator: f64,
    pub delta_a: LogOrdinate,
    pub delta_b: LogOrdinate,
    pub tau: LogOrdinate,
    pub sigma: LogOrdinate,
    pub psi: LogOrdinate,
    /// Sum of the per-`b` matching terms.
    pub xi: LogOrdinate,
    pub xi_terms: Vec<f64>,
    /// Mean number of edges in the unrestricted run.
    pub mean_n_xi: f64,
    pub swap_acceptance: f64,
}

/// Estimated `log pr(A, B | H_p)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HpEstimate {
    pub log_hp: f64,
    /// Monte Carlo standard error of `log_hp` (natural log).
    pub mc_se: f64,
    pub diagnostics: ChibDiagnostics,
}

/// Result of a comparison.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LrResult {
    pub a_id: String,
    pub b_id: String,
    pub log10_lr: f64,
    pub log_hp: f64,
    pub log_hd: f64,
    /// Monte Carlo standard error of `log10_lr`.
    pub mc_se: f64,
    pub seed: u64,
    pub stages: ChibDiagnostics,
}

/// Log of the mean of `exp(log_values)`, with the batch-means standard error
/// of that log.
pub fn log_mean_with_se(log_values: &[f64], n_batches: usize) -> LogOrdinate {
    let n = log_values.len();
    let log_value = log_sum_exp(log_values) - (n as f64).ln();
    if n_batches < 2 || n < n_batches || log_value == f64::NEG_INFINITY {
        return LogOrdinate { log_value, se: 0.0 };
    }
    let hi = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let size = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|k| {
            let chunk = &log_values[k * size..(k + 1) * size];
            chunk.iter().map(|&v| (v - hi).exp()).sum::<f64>() / size as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n_batches - 1) as f64;
    LogOrdinate {
        log_value,
        se: (var / n_batches as f64).sqrt() / mean,
    }
}

struct Runner<'p, 'c> {
    pair: &'p Pair<'c>,
    fixed: &'p FixedParams,
    cfg: &'p ChibConfig,
    rng: crate::sampling::Rng,
    state: ChainState,
    stats: XiStats,
}

impl Runner<'_, '_> {
    fn sweeps(&mut self, plan: &SweepPlan, n: usize) -> Result<()> {
        for _ in 0..n {
            gibbs_sweep(self.pair, &mut self.state, self.fixed, plan, &mut self.stats, &mut self.rng)?;
        }
        Ok(())
    }

    /// Runs `n_samples` sweeps under `plan`, calling `record` after each.
    fn collect(&mut self, plan: &SweepPlan, mut record: impl FnMut(&ChainState) -> Result<()>) -> Result<()> {
        for _ in 0..self.cfg.n_samples {
            gibbs_sweep(self.pair, &mut self.state, self.fixed, plan, &mut self.stats, &mut self.rng)?;
            record(&self.state)?;
        }
        Ok(())
    }
}

/// Estimate of `log pr(A, B | H_p)` by Chib's method.
pub fn estimate_log_hp(
    a: &MinutiaConfig,
    b: &MinutiaConfig,
    fixed: &FixedParams,
    cfg: &ChibConfig,
) -> Result<HpEstimate> {
    fixed.validate()?;
    cfg.validate()?;
    let pair = Pair::new(a, b)?;
    let mut run = Runner {
        pair: &pair,
        fixed,
        cfg,
        rng: rng_from_seed(cfg.seed),
        state: ChainState::aligned(&pair, fixed)?,
        stats: XiStats::default(),
    };
    let n = cfg.n_samples as f64;
    let mut plan = SweepPlan::FULL;
    run.sweeps(&plan, cfg.n_burn)?;

    // delta_A
    let mut conds = Vec::with_capacity(cfg.n_samples);
    let (mut sum, mut sum_nxi) = (0.0, 0.0);
    run.collect(&plan, |s| {
        conds.push(cond_delta_a(&pair, s, fixed));
        sum += s.theta.delta_a;
        sum_nxi += s.xi.len() as f64;
        Ok(())
    })?;
    let delta_a_star = sum / n;
    let lv = conds.iter().map(|c| c.log_density(delta_a_star)).collect::<Result<Vec<_>>>()?;
    let o_delta_a = log_mean_with_se(&lv, cfg.n_batches);
    let mean_n_xi = sum_nxi / n;

    // delta_B
    plan.delta_a = false;
    run.state.theta.delta_a = delta_a_star;
    run.sweeps(&plan, cfg.n_burn_reduced)?;
    let mut conds = Vec::with_capacity(cfg.n_samples);
    let mut sum = 0.0;
    run.collect(&plan, |s| {
        conds.push(cond_delta_b(&pair, s, fixed));
        sum += s.theta.delta_b;
        Ok(())
    })?;
    let delta_b_star = sum / n;
    let lv = conds.iter().map(|c| c.log_density(delta_b_star)).collect::<Result<Vec<_>>>()?;
    let o_delta_b = log_mean_with_se(&lv, cfg.n_batches);

    // (tau_A, tau_B)
    plan.delta_b = false;
    run.state.theta.delta_b = delta_b_star;
    run.sweeps(&plan, cfg.n_burn_reduced)?;
    let mut conds = Vec::with_capacity(cfg.n_samples);
    let (mut sa, mut sb) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    run.collect(&plan, |s| {
        conds.push(cond_tau(&pair, s, fixed)?);
        sa += s.theta.tau_a;
        sb += s.theta.tau_b;
        Ok(())
    })?;
    let (tau_a_star, tau_b_star) = (sa / n, sb / n);
    let lv: Vec<f64> = conds.iter().map(|c| c.log_density(tau_a_star, tau_b_star)).collect();
    let o_tau = log_mean_with_se(&lv, cfg.n_batches);

    // sigma
    plan.tau = false;
    run.state.theta.tau_a = tau_a_star;
    run.state.theta.tau_b = tau_b_star;
    run.sweeps(&plan, cfg.n_burn_reduced)?;
    let mut conds = Vec::with_capacity(cfg.n_samples);
    let mut sum = 0.0;
    run.collect(&plan, |s| {
        conds.push(cond_sigma(&pair, s, fixed)?);
        sum += s.theta.sigma;
        Ok(())
    })?;
    let sigma_star = sum / n;
    let lv: Vec<f64> = conds.iter().map(|c| c.log_density(sigma_star)).collect();
    let o_sigma = log_mean_with_se(&lv, cfg.n_batches);

    // psi: star value is the mean direction
    plan.sigma = false;
    run.state.theta.sigma = sigma_star;
    run.sweeps(&plan, cfg.n_burn_reduced)?;
    let mut conds = Vec::with_capacity(cfg.n_samples);
    let mut resultant = Complex64::new(0.0, 0.0);
    run.collect(&plan, |s| {
        conds.push(cond_psi(&pair, s, fixed));
        resultant += s.theta.psi;
        Ok(())
    })?;
    let psi_star = if resultant.norm() > 0.0 {
        resultant / resultant.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let lv = conds.iter().map(|c| c.log_density(psi_star)).collect::<Result<Vec<_>>>()?;
    let o_psi = log_mean_with_se(&lv, cfg.n_batches);

    let theta_star = LatentParams {
        delta_a: delta_a_star,
        delta_b: delta_b_star,
        tau_a: tau_a_star,
        tau_b: tau_b_star,
        sigma: sigma_star,
        psi: psi_star,
    };
    let xi_star = argmax_xi(&pair, &theta_star, fixed)?;
    let (xi_terms, o_xi) = xi_ordinate(&pair, &theta_star, &xi_star, fixed, cfg, &mut run.rng)?;

    let log_numerator = log_joint_hp(a, b, &xi_star, &theta_star, fixed)? + log_prior(&theta_star, fixed);
    let ords = [o_delta_a, o_delta_b, o_tau, o_sigma, o_psi, o_xi];
    let log_hp = log_numerator - ords.iter().map(|o| o.log_value).sum::<f64>();
    let mc_se = ords.iter().map(|o| o.se * o.se).sum::<f64>().sqrt();
    let swaps = run.stats.swaps_accepted + run.stats.swaps_rejected;
    Ok(HpEstimate {
        log_hp,
        mc_se,
        diagnostics: ChibDiagnostics {
            theta_star,
            xi_star_edges: xi_star.edges().collect(),
            log_numerator,
            delta_a: o_delta_a,
            delta_b: o_delta_b,
            tau: o_tau,
            sigma: o_sigma,
            psi: o_psi,
            xi: o_xi,
            xi_terms,
            mean_n_xi,
            swap_acceptance: if swaps == 0 {
                0.0
            } else {
                run.stats.swaps_accepted as f64 / swaps as f64
            },
        },
    })
}

/// `log p(xi* | theta*, A, B)` as a sum over `b` of estimated
/// `log p(xi*_b | xi*_{<b})`.
fn xi_ordinate(
    pair: &Pair<'_>,
    theta: &LatentParams,
    xi_star: &Matching,
    fixed: &FixedParams,
    cfg: &ChibConfig,
    rng: &mut crate::sampling::Rng,
) -> Result<(Vec<f64>, LogOrdinate)> {
    let nb = pair.n_b();
    let mut kernel = XiKernel::new(pair, theta, fixed, 0)?;
    let burn = (cfg.n_xi / 10).max(10);
    let mut terms = Vec::with_capacity(nb);
    let mut var = 0.0;
    for beta in 0..nb {
        let target = xi_star.partner_of_b(beta);
        if beta + 1 == nb {
            // Nothing after beta: the conditional is exact.
            let mut rest = xi_star.clone();
            rest.remove_b(beta);
            terms.push(kernel.log_conditional(&rest, beta, target));
            continue;
        }
        kernel.set_clamp(beta);
        let steps = kernel.n_free();
        let mut xi = xi_star.clone();
        for _ in 0..burn * steps {
            kernel.step(&mut xi, rng);
        }
        let mut lv = Vec::with_capacity(cfg.n_xi);
        for _ in 0..cfg.n_xi {
            for _ in 0..steps {
                kernel.step(&mut xi, rng);
            }
            let mut rest = xi.clone();
            rest.remove_b(beta);
            lv.push(kernel.log_conditional(&rest, beta, target));
        }
        let o = log_mean_with_se(&lv, cfg.n_batches);
        if o.log_value == f64::NEG_INFINITY {
            bail!(
                Degenerate,
                "matching ordinate term for b={beta} estimated as zero; increase n_xi"
            );
        }
        var += o.se * o.se;
        terms.push(o.log_value);
    }
    let total = terms.iter().sum();
    Ok((terms, LogOrdinate { log_value: total, se: var.sqrt() }))
}

/// `log10` likelihood ratio of `A` and `B` originating from the same finger.
pub fn log10_lr(a: &MinutiaConfig, b: &MinutiaConfig, fixed: &FixedParams, cfg: &ChibConfig) -> Result<LrResult> {
    let log_hd = log_marginal_hd(a, b, fixed)?;
    let hp = estimate_log_hp(a, b, fixed, cfg)?;
    Ok(LrResult {
        a_id: a.id().into(),
        b_id: b.id().into(),
        log10_lr: (hp.log_hp - log_hd) / LN_10,
        log_hp: hp.log_hp,
        log_hd,
        mc_se: hp.mc_se / LN_10,
        seed: cfg.seed,
        stages: hp.diagnostics,
    })
}
