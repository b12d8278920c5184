//! Minutiae, minutia configurations, matchings and similarity transforms.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};

/// Largest tolerated deviation of `|orientation|` from one before
/// normalization.
pub const ORIENTATION_TOLERANCE: f64 = 1e-6;

/// Observed minutia type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MinutiaType {
    RidgeEnding,
    Unobserved,
    Bifurcation,
}

impl MinutiaType {
    /// Integer code: -1 ridge ending, 0 unobserved, +1 bifurcation.
    pub fn code(self) -> i8 {
        match self {
            MinutiaType::RidgeEnding => -1,
            MinutiaType::Unobserved => 0,
            MinutiaType::Bifurcation => 1,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            -1 => Ok(MinutiaType::RidgeEnding),
            0 => Ok(MinutiaType::Unobserved),
            1 => Ok(MinutiaType::Bifurcation),
            other => bail!(InvalidMinutia, "type code {other} is not one of -1, 0, 1"),
        }
    }

    pub fn is_typed(self) -> bool {
        self != MinutiaType::Unobserved
    }

    fn slot(self) -> usize {
        (self.code() + 1) as usize
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = libm::remainder(theta, 2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// A single minutia: location in the plane, orientation on the unit circle
/// and type.
///
/// The orientation is stored as an angle in `(-pi, pi]`; the unit complex
/// number is derived from it, which keeps serialization exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    location: Complex64,
    angle: f64,
    mtype: MinutiaType,
}

impl Minutia {
    pub fn new(location: Complex64, angle: f64, mtype: MinutiaType) -> Result<Self> {
        if !location.re.is_finite() || !location.im.is_finite() {
            bail!(InvalidMinutia, "non-finite location {location}");
        }
        if !angle.is_finite() {
            bail!(InvalidMinutia, "non-finite orientation angle {angle}");
        }
        Ok(Minutia {
            location,
            angle: wrap_angle(angle),
            mtype,
        })
    }

    /// Builds a minutia from a unit complex orientation. The orientation is
    /// normalized; moduli further than [`ORIENTATION_TOLERANCE`] from one are
    /// rejected.
    pub fn from_orientation(
        location: Complex64,
        orientation: Complex64,
        mtype: MinutiaType,
    ) -> Result<Self> {
        let modulus = orientation.norm();
        if !modulus.is_finite() || (modulus - 1.0).abs() > ORIENTATION_TOLERANCE {
            bail!(InvalidMinutia, "orientation modulus {modulus} is not one");
        }
        Minutia::new(location, orientation.arg(), mtype)
    }

    pub fn location(&self) -> Complex64 {
        self.location
    }

    /// Orientation angle in radians, in `(-pi, pi]`.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Orientation as a unit complex number.
    pub fn orientation(&self) -> Complex64 {
        Complex64::cis(self.angle)
    }

    pub fn mtype(&self) -> MinutiaType {
        self.mtype
    }
}

/// A finite set of minutiae with derived statistics.
///
/// Positions in the list are the identity of each minutia: matchings refer to
/// them by index, and index order is the total order used by Chib's ξ
/// ordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MinutiaConfig {
    id: String,
    minutiae: Vec<Minutia>,
    type_counts: [usize; 3],
    centroid: Complex64,
    scatter: f64,
}

impl MinutiaConfig {
    pub fn new(id: impl Into<String>, minutiae: Vec<Minutia>) -> Self {
        let mut type_counts = [0usize; 3];
        for m in &minutiae {
            type_counts[m.mtype.slot()] += 1;
        }
        let n = minutiae.len();
        let centroid = if n == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            minutiae.iter().map(|m| m.location).sum::<Complex64>() / n as f64
        };
        let scatter = minutiae
            .iter()
            .map(|m| (m.location - centroid).norm_sqr())
            .sum();
        MinutiaConfig {
            id: id.into(),
            minutiae,
            type_counts,
            centroid,
            scatter,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn get(&self, index: usize) -> Option<&Minutia> {
        self.minutiae.get(index)
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    /// Number of minutiae of the given type.
    pub fn count(&self, mtype: MinutiaType) -> usize {
        self.type_counts[mtype.slot()]
    }

    /// Mean location.
    pub fn centroid(&self) -> Complex64 {
        self.centroid
    }

    /// Sum of squared distances to the centroid.
    pub fn scatter(&self) -> f64 {
        self.scatter
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Reorders the minutiae; `order[i]` is the old index of the new i-th
    /// minutia.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            bail!(InvalidParameter, "permutation has wrong length");
        }
        let mut seen = vec![false; self.len()];
        let mut out = Vec::with_capacity(self.len());
        for &i in order {
            if i >= self.len() || core::mem::replace(&mut seen[i], true) {
                bail!(InvalidParameter, "not a permutation");
            }
            out.push(self.minutiae[i]);
        }
        Ok(MinutiaConfig::new(self.id.clone(), out))
    }
}

/// Similarity transformation `r -> psi r + tau`, `s -> psi s / |psi|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    tau: Complex64,
    psi: Complex64,
}

impl SimilarityTransform {
    pub fn new(tau: Complex64, psi: Complex64) -> Result<Self> {
        if psi.norm_sqr() == 0.0 || !psi.norm_sqr().is_finite() {
            bail!(InvalidParameter, "scale-rotation must be finite and nonzero");
        }
        if !tau.re.is_finite() || !tau.im.is_finite() {
            bail!(InvalidParameter, "translation must be finite");
        }
        Ok(SimilarityTransform { tau, psi })
    }

    pub fn identity() -> Self {
        SimilarityTransform {
            tau: Complex64::new(0.0, 0.0),
            psi: Complex64::new(1.0, 0.0),
        }
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn psi(&self) -> Complex64 {
        self.psi
    }

    pub fn apply_minutia(&self, m: &Minutia) -> Minutia {
        Minutia {
            location: self.psi * m.location + self.tau,
            angle: wrap_angle(m.angle + self.psi.arg()),
            mtype: m.mtype,
        }
    }

    pub fn apply(&self, cfg: &MinutiaConfig) -> MinutiaConfig {
        let minutiae = cfg.minutiae.iter().map(|m| self.apply_minutia(m)).collect();
        MinutiaConfig::new(cfg.id.clone(), minutiae)
    }
}

/// Applies a similarity transform to every minutia of a configuration.
pub fn apply_transform(cfg: &MinutiaConfig, t: &SimilarityTransform) -> MinutiaConfig {
    t.apply(cfg)
}

/// Edge set of a bipartite graph between `A` and `B` with maximum degree one.
///
/// Unmatched minutiae have no entry; there is no sentinel minutia.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    a_to_b: Vec<Option<usize>>,
    b_to_a: Vec<Option<usize>>,
    n_edges: usize,
}

impl Matching {
    pub fn empty(n_a: usize, n_b: usize) -> Self {
        Matching {
            a_to_b: vec![None; n_a],
            b_to_a: vec![None; n_b],
            n_edges: 0,
        }
    }

    pub fn from_edges(
        n_a: usize,
        n_b: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut m = Matching::empty(n_a, n_b);
        for (a, b) in edges {
            m.insert(a, b)?;
        }
        Ok(m)
    }

    pub fn n_a(&self) -> usize {
        self.a_to_b.len()
    }

    pub fn n_b(&self) -> usize {
        self.b_to_a.len()
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.n_edges
    }

    pub fn is_empty(&self) -> bool {
        self.n_edges == 0
    }

    pub fn partner_of_a(&self, a: usize) -> Option<usize> {
        self.a_to_b.get(a).copied().flatten()
    }

    pub fn partner_of_b(&self, b: usize) -> Option<usize> {
        self.b_to_a.get(b).copied().flatten()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.partner_of_a(a) == Some(b)
    }

    /// Adds the edge `a~b`; both endpoints must be unmatched.
    pub fn insert(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.n_a() || b >= self.n_b() {
            bail!(
                InvalidMatching,
                "edge ({a},{b}) out of bounds for {}x{}",
                self.n_a(),
                self.n_b()
            );
        }
        if self.a_to_b[a].is_some() || self.b_to_a[b].is_some() {
            bail!(InvalidMatching, "edge ({a},{b}) would exceed degree one");
        }
        self.a_to_b[a] = Some(b);
        self.b_to_a[b] = Some(a);
        self.n_edges += 1;
        Ok(())
    }

    /// Removes the edge incident to `b`, returning its `A` endpoint.
    pub fn remove_b(&mut self, b: usize) -> Option<usize> {
        let a = self.b_to_a.get_mut(b)?.take()?;
        self.a_to_b[a] = None;
        self.n_edges -= 1;
        Some(a)
    }

    /// Removes the edge incident to `a`, returning its `B` endpoint.
    pub fn remove_a(&mut self, a: usize) -> Option<usize> {
        let b = self.a_to_b.get_mut(a)?.take()?;
        self.b_to_a[b] = None;
        self.n_edges -= 1;
        Some(b)
    }

    /// Edges `(a, b)` in increasing order of `b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.b_to_a
            .iter()
            .enumerate()
            .filter_map(|(b, a)| a.map(|a| (a, b)))
    }

    /// Checks that the matching fits the two configurations.
    pub fn check_sizes(&self, a: &MinutiaConfig, b: &MinutiaConfig) -> Result<()> {
        if self.n_a() != a.len() || self.n_b() != b.len() {
            bail!(
                InvalidMatching,
                "matching is {}x{} but configurations are {}x{}",
                self.n_a(),
                self.n_b(),
                a.len(),
                b.len()
            );
        }
        Ok(())
    }

    /// Number of edges whose endpoints both have type `t`.
    pub fn count_type(&self, a: &MinutiaConfig, b: &MinutiaConfig, t: MinutiaType) -> usize {
        self.edges()
            .filter(|&(ia, ib)| a.minutiae[ia].mtype == t && b.minutiae[ib].mtype == t)
            .count()
    }
}

/// `|Xi(A,B)|`, the number of bipartite matchings of maximum degree one, or
/// `None` on `u128` overflow.
pub fn xi_space_size(n_a: usize, n_b: usize) -> Option<u128> {
    // term(k) = C(nA,k) C(nB,k) k!; term(k+1)/term(k) = (nA-k)(nB-k)/(k+1)
    let mut term: u128 = 1;
    let mut total: u128 = 1;
    for k in 0..n_a.min(n_b) {
        let num = term
            .checked_mul((n_a - k) as u128)?
            .checked_mul((n_b - k) as u128)?;
        term = num / (k as u128 + 1);
        total = total.checked_add(term)?;
    }
    Some(total)
}

/// `log10 |Xi(A,B)|`, safe for any sizes.
pub fn log10_xi_space_size(n_a: usize, n_b: usize) -> f64 {
    let lf = |n: usize| libm::lgamma(n as f64 + 1.0);
    let logs: Vec<f64> = (0..=n_a.min(n_b))
        .map(|k| lf(n_a) - lf(k) - lf(n_a - k) + lf(n_b) - lf(n_b - k) - lf(k) + lf(k))
        .collect();
    crate::special::log_sum_exp(&logs) / core::f64::consts::LN_10
}
