//! Synthetic print/mark pairs drawn from the generative model.
//!
//! Canonical frame: the latent process has `tau_0 = 0`, `sigma_0 = 1`;
//! `A` is observed in that frame and `B` under the rotation `conj(psi)`
//! with `psi` uniform on the circle. With `q = omega^2 + 1` the observed
//! locations then have the model's marginal scale `sigma = sqrt(q)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore};

use crate::error::Result;
use crate::model::{FixedParams, LatentParams};
use crate::sampling::{beta, poisson, rng_from_seed, std_complex_normal, substream_seed, von_mises};
use crate::types::{Matching, Minutia, MinutiaConfig, MinutiaType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Hypothesis {
    Hp,
    Hd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub fixed: FixedParams,
    pub n_pairs: usize,
    pub hypothesis: Hypothesis,
    pub seed: u64,
}

/// One simulated comparison. `true_xi` and `true_theta` are present for
/// same-source pairs only.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPair {
    pub a: MinutiaConfig,
    pub b: MinutiaConfig,
    pub true_xi: Option<Matching>,
    pub true_theta: Option<LatentParams>,
}

struct Latent {
    location: Complex64,
    orientation: Complex64,
    mtype: MinutiaType,
}

fn unit<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * core::f64::consts::PI)
}

fn latent_process<R: RngCore + ?Sized>(rng: &mut R, fixed: &FixedParams) -> Result<Vec<Latent>> {
    let n = poisson(rng, fixed.rho0)? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let location = std_complex_normal(rng);
        let mtype = if rng.random::<f64>() < fixed.chi {
            MinutiaType::Bifurcation
        } else {
            MinutiaType::RidgeEnding
        };
        out.push(Latent {
            location,
            orientation: unit(rng),
            mtype,
        });
    }
    Ok(out)
}

fn observe_type<R: RngCore + ?Sized>(rng: &mut R, t: MinutiaType, epsilon: f64) -> MinutiaType {
    if rng.random::<f64>() < epsilon {
        MinutiaType::Unobserved
    } else {
        t
    }
}

fn minutia(location: Complex64, orientation: Complex64, t: MinutiaType) -> Result<Minutia> {
    Minutia::from_orientation(location, orientation / orientation.norm(), t)
}

fn acceptable(n_a: usize, n_b: usize) -> bool {
    n_a >= 1 && n_b >= 1 && n_a + n_b >= 3
}

/// Same-source pair. Draws are repeated until both configurations are
/// non-empty with at least three minutiae in total.
pub fn sample_pair_hp<R: RngCore + ?Sized>(rng: &mut R, fixed: &FixedParams) -> Result<SimulatedPair> {
    fixed.validate()?;
    loop {
        let latent = latent_process(rng, fixed)?;
        let delta_a = beta(rng, fixed.alpha_delta, fixed.beta_delta)?;
        let delta_b = rng.random::<f64>();
        let psi = unit(rng);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut edges = Vec::new();
        for m in &latent {
            let in_a = rng.random::<f64>() < delta_a;
            let in_b = rng.random::<f64>() < delta_b;
            let mut ia = None;
            if in_a {
                let r = m.location + fixed.omega * std_complex_normal(rng);
                let t = observe_type(rng, m.mtype, fixed.epsilon);
                ia = Some(a.len());
                a.push(minutia(r, m.orientation, t)?);
            }
            if in_b {
                let r = psi.conj() * (m.location + fixed.omega * std_complex_normal(rng));
                let z = von_mises(rng, Complex64::new(1.0, 0.0), fixed.kappa)?;
                let t = observe_type(rng, m.mtype, fixed.epsilon);
                if let Some(i) = ia {
                    edges.push((i, b.len()));
                }
                b.push(minutia(r, psi.conj() * m.orientation * z, t)?);
            }
        }
        if !acceptable(a.len(), b.len()) {
            continue;
        }
        let (a, map_a) = shuffled(rng, a);
        let (b, map_b) = shuffled(rng, b);
        let xi = Matching::from_edges(a.len(), b.len(), edges.iter().map(|&(i, j)| (map_a[i], map_b[j])))?;
        let q = fixed.q();
        return Ok(SimulatedPair {
            a: MinutiaConfig::new("a", a),
            b: MinutiaConfig::new("b", b),
            true_xi: Some(xi),
            true_theta: Some(LatentParams {
                delta_a,
                delta_b,
                tau_a: Complex64::new(0.0, 0.0),
                tau_b: Complex64::new(0.0, 0.0),
                sigma: q.sqrt(),
                psi,
            }),
        });
    }
}

/// Random order of `v`; `map[old] = new`.
fn shuffled<R: RngCore + ?Sized>(rng: &mut R, v: Vec<Minutia>) -> (Vec<Minutia>, Vec<usize>) {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.shuffle(rng);
    let mut map = alloc::vec![0; v.len()];
    for (new, &old) in order.iter().enumerate() {
        map[old] = new;
    }
    (order.iter().map(|&i| v[i]).collect(), map)
}

fn single_config<R: RngCore + ?Sized>(rng: &mut R, fixed: &FixedParams, delta: f64, rotation: Complex64) -> Result<Vec<Minutia>> {
    let latent = latent_process(rng, fixed)?;
    let mut out = Vec::new();
    for m in &latent {
        if rng.random::<f64>() < delta {
            let r = rotation * (m.location + fixed.omega * std_complex_normal(rng));
            let t = observe_type(rng, m.mtype, fixed.epsilon);
            out.push(minutia(r, rotation * m.orientation, t)?);
        }
    }
    Ok(out)
}

/// Different-source pair: two independent latent configurations.
pub fn sample_pair_hd<R: RngCore + ?Sized>(rng: &mut R, fixed: &FixedParams) -> Result<SimulatedPair> {
    fixed.validate()?;
    loop {
        let delta_a = beta(rng, fixed.alpha_delta, fixed.beta_delta)?;
        let a = single_config(rng, fixed, delta_a, Complex64::new(1.0, 0.0))?;
        let delta_b = rng.random::<f64>();
        let rot = unit(rng).conj();
        let b = single_config(rng, fixed, delta_b, rot)?;
        if !acceptable(a.len(), b.len()) {
            continue;
        }
        return Ok(SimulatedPair {
            a: MinutiaConfig::new("a", a),
            b: MinutiaConfig::new("b", b),
            true_xi: None,
            true_theta: None,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Subset {
    Good,
    Bad,
    Ugly,
}

impl Subset {
    pub fn name(self) -> &'static str {
        match self {
            Subset::Good => "good",
            Subset::Bad => "bad",
            Subset::Ugly => "ugly",
        }
    }
}

/// Splits pairs by mark size: ranked by `n_B` descending (ties by id),
/// the last `round(85 n / 258)` are ugly, the `round(85 n / 258)` before
/// them bad, and the rest good. At `n = 258` this gives 88/85/85.
pub fn partition_subsets(pairs: &[(&str, usize)]) -> Vec<Subset> {
    let n = pairs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pairs[j].1.cmp(&pairs[i].1).then_with(|| pairs[i].0.cmp(pairs[j].0)));
    let k = (n as f64 * 85.0 / 258.0).round() as usize;
    let n_good = n - 2 * k.min(n / 2);
    let mut out = alloc::vec![Subset::Ugly; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_good {
            Subset::Good
        } else if rank < n_good + k {
            Subset::Bad
        } else {
            Subset::Ugly
        };
    }
    out
}

/// A generated dataset: pairs with ids `pair####_a`/`pair####_b` and their
/// subset labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SimConfig,
    pub pairs: Vec<SimulatedPair>,
    pub subsets: Vec<Subset>,
}

pub fn pair_name(index: usize) -> String {
    format!("pair{index:04}")
}

/// Pair `i` is drawn from its own substream of `cfg.seed`, so the dataset
/// is a function of the seed alone.
pub fn make_dataset(cfg: &SimConfig) -> Result<Dataset> {
    if cfg.n_pairs == 0 {
        crate::error::bail!(InvalidParameter, "n_pairs must be at least 1");
    }
    cfg.fixed.validate()?;
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    for i in 0..cfg.n_pairs {
        let mut rng = rng_from_seed(substream_seed(cfg.seed, i as u64));
        let mut p = match cfg.hypothesis {
            Hypothesis::Hp => sample_pair_hp(&mut rng, &cfg.fixed)?,
            Hypothesis::Hd => sample_pair_hd(&mut rng, &cfg.fixed)?,
        };
        let name = pair_name(i);
        p.a = p.a.with_id(format!("{name}_a"));
        p.b = p.b.with_id(format!("{name}_b"));
        pairs.push(p);
    }
    let keys: Vec<(&str, usize)> = pairs.iter().map(|p| (p.b.id(), p.b.len())).collect();
    let subsets = partition_subsets(&keys);
    Ok(Dataset {
        config: *cfg,
        pairs,
        subsets,
    })
}
