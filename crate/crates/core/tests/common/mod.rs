//! Independent reference implementations used by the integration tests.
//! Nothing here calls the library's numerics; crate types are only used to
//! carry data.
#![allow(dead_code)]

use std::f64::consts::PI;

use fpmatch_core::model::{FixedParams, LatentParams};
use fpmatch_core::{Complex64, Minutia, MinutiaConfig, MinutiaType};

// ---------------------------------------------------------------------------
// Quadrature

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        // The floor keeps the recursion finite once roundoff dominates.
        if depth == 0 || diff.abs() <= 15.0 * tol.max(1e-15 * (left + right).abs()) {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Composite Simpson split into `pieces` adaptive panels; robust for
/// integrands that are nearly zero over most of the range.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| simpson(f, a + k as f64 * h, a + (k + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

/// `log ∫ exp(g(v)) dv` over the real line for a unimodal log integrand,
/// located by golden section on `[lo, hi]` and integrated over ±`half`.
pub fn log_integrate_unimodal<F: Fn(f64) -> f64>(g: &F, lo: f64, hi: f64, half: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = b - r * (b - a);
        let m2 = a + r * (b - a);
        if g(m1) > g(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let mode = 0.5 * (a + b);
    let peak = g(mode);
    let f = |v: f64| {
        let x = (g(v) - peak).exp();
        if x.is_nan() {
            0.0
        } else {
            x
        }
    };
    peak + simpson_panels(&f, mode - half, mode + half, 64, 1e-13).ln()
}

// ---------------------------------------------------------------------------
// Special functions

pub fn log_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `I0(x) = (1/pi) ∫_0^pi exp(x cos t) dt`, returned as a log.
pub fn log_i0(x: f64) -> f64 {
    let f = |t: f64| (x * (t.cos() - 1.0)).exp();
    x + (simpson_panels(&f, 0.0, PI, 16, 1e-15) / PI).ln()
}

// ---------------------------------------------------------------------------
// Small dense linear algebra

/// Determinant and inverse of a real square matrix by Gauss-Jordan with
/// partial pivoting.
pub fn det_inv(m: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if p != c {
            a.swap(p, c);
            inv.swap(p, c);
            det = -det;
        }
        let d = a[c][c];
        det *= d;
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for i in 0..n {
            if i != c {
                let f = a[i][c];
                for j in 0..n {
                    a[i][j] -= f * a[c][j];
                    inv[i][j] -= f * inv[c][j];
                }
            }
        }
    }
    (det, inv)
}

/// Real 4-d normal log density of `x` with covariance `cov`.
pub fn log_normal4(x: [f64; 4], cov: &[Vec<f64>]) -> f64 {
    let (det, inv) = det_inv(cov);
    let mut q = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            q += x[i] * inv[i][j] * x[j];
        }
    }
    -2.0 * (2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q
}

/// Covariance of `(Re x_a, Re x_b, Im x_a, Im x_b)` for a circular complex
/// normal pair with Hermitian covariance `[[s, c], [conj c, s]]`.
pub fn real_cov(s: f64, c: Complex64) -> Vec<Vec<f64>> {
    // Γ = G + iH  ->  ½ [[G, -H], [H, G]]
    let g = [[s, c.re], [c.re, s]];
    let h = [[0.0, c.im], [-c.im, 0.0]];
    let mut out = vec![vec![0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = 0.5 * g[i][j];
            out[i][j + 2] = -0.5 * h[i][j];
            out[i + 2][j] = 0.5 * h[i][j];
            out[i + 2][j + 2] = 0.5 * g[i][j];
        }
    }
    out
}

/// `log ∫_{R^4} exp(f(t)) dt` for `f` quadratic and concave: the gradient
/// and Hessian are taken by central differences (exact for quadratics).
pub fn log_gaussian_integral4<F: Fn([f64; 4]) -> f64>(f: &F, h: f64) -> f64 {
    let at = |t: [f64; 4], i: usize, d: f64| {
        let mut u = t;
        u[i] += d;
        u
    };
    let t0 = [0.0; 4];
    let f0 = f(t0);
    let mut grad = [0.0; 4];
    let mut hess = vec![vec![0.0; 4]; 4];
    for i in 0..4 {
        let (fp, fm) = (f(at(t0, i, h)), f(at(t0, i, -h)));
        grad[i] = (fp - fm) / (2.0 * h);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = f(at(at(t0, i, h), j, h));
            let fpm = f(at(at(t0, i, h), j, -h));
            let fmp = f(at(at(t0, i, -h), j, h));
            let fmm = f(at(at(t0, i, -h), j, -h));
            hess[i][j] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[j][i] = hess[i][j];
        }
    }
    let neg: Vec<Vec<f64>> = hess.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let (det, inv) = det_inv(&neg);
    let mut t_hat = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            t_hat[i] += inv[i][j] * grad[j];
        }
    }
    let v = f(t_hat) + 2.0 * (2.0 * PI).ln() - 0.5 * det.ln();
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

// ---------------------------------------------------------------------------
// Matchings

/// Every partial matching of `n_a` and `n_b` items, as sorted edge lists.
pub fn all_matchings(n_a: usize, n_b: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(b: usize, n_a: usize, n_b: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if b == n_b {
            out.push(cur.clone());
            return;
        }
        rec(b + 1, n_a, n_b, used, cur, out);
        for a in 0..n_a {
            if !used[a] {
                used[a] = true;
                cur.push((a, b));
                rec(b + 1, n_a, n_b, used, cur, out);
                cur.pop();
                used[a] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n_a, n_b, &mut vec![false; n_a], &mut Vec::new(), &mut out);
    out
}

/// Calls `visit` with the total weight of every matching (no allocation per
/// matching); returns the best total and its edges.
pub fn brute_force_best(w: &[f64], n_a: usize, n_b: usize) -> (f64, Vec<(usize, usize)>) {
    fn rec(b: usize, n_a: usize, n_b: usize, w: &[f64], used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, acc: f64, best: &mut (f64, Vec<(usize, usize)>)) {
        if b == n_b {
            if acc > best.0 {
                *best = (acc, cur.clone());
            }
            return;
        }
        rec(b + 1, n_a, n_b, w, used, cur, acc, best);
        for a in 0..n_a {
            let x = w[a * n_b + b];
            if !used[a] && x > f64::NEG_INFINITY {
                used[a] = true;
                cur.push((a, b));
                rec(b + 1, n_a, n_b, w, used, cur, acc + x, best);
                cur.pop();
                used[a] = false;
            }
        }
    }
    let mut best = (0.0, Vec::new());
    rec(0, n_a, n_b, w, &mut vec![false; n_a], &mut Vec::new(), 0.0, &mut best);
    best
}

// ---------------------------------------------------------------------------
// Model, written as a product over the marked point process

fn type_prob(t: MinutiaType, chi: f64) -> f64 {
    match t {
        MinutiaType::Bifurcation => chi,
        MinutiaType::RidgeEnding => 1.0 - chi,
        MinutiaType::Unobserved => 1.0,
    }
}

/// Latent type probability of a matched pair; zero for a contradiction.
fn pair_type_prob(ta: MinutiaType, tb: MinutiaType, chi: f64) -> f64 {
    match (ta, tb) {
        (MinutiaType::Unobserved, t) | (t, MinutiaType::Unobserved) => type_prob(t, chi),
        (x, y) if x == y => type_prob(x, chi),
        _ => 0.0,
    }
}

fn log_phi(r: Complex64, tau: Complex64, s2: f64) -> f64 {
    -(r - tau).norm_sqr() / s2 - (PI * s2).ln()
}

/// Parts of `log pr(A, B, xi | theta, H_p)` (without the dropped `c~`
/// factors): the thinning factor, the type factor and the geometric factor.
pub struct JointParts {
    pub thinning: f64,
    pub types: f64,
    pub geometry: f64,
}

pub fn joint_parts(a: &MinutiaConfig, b: &MinutiaConfig, edges: &[(usize, usize)], th: &LatentParams, f: &FixedParams, log_i0_kappa: f64) -> JointParts {
    let (am, bm) = (a.minutiae(), b.minutiae());
    let ma: Vec<Option<usize>> = (0..am.len()).map(|i| edges.iter().find(|e| e.0 == i).map(|e| e.1)).collect();
    let mb: Vec<Option<usize>> = (0..bm.len()).map(|j| edges.iter().find(|e| e.1 == j).map(|e| e.0)).collect();
    let (da, db, rho) = (th.delta_a, th.delta_b, f.rho0);
    let mut thinning = -rho * (1.0 - (1.0 - da) * (1.0 - db));
    let mut types = 0.0;
    let mut geometry = 0.0;
    let s2 = th.sigma * th.sigma;
    for (i, m) in am.iter().enumerate() {
        if ma[i].is_none() {
            thinning += (rho * da * (1.0 - db)).ln();
            types += type_prob(m.mtype(), f.chi).ln();
            geometry += log_phi(m.location(), th.tau_a, s2);
        }
    }
    for (j, m) in bm.iter().enumerate() {
        if mb[j].is_none() {
            thinning += (rho * db * (1.0 - da)).ln();
            types += type_prob(m.mtype(), f.chi).ln();
            geometry += log_phi(m.location(), th.tau_b, s2);
        }
    }
    let q = 1.0 + f.omega * f.omega;
    let cov = real_cov(s2, th.psi * (s2 / q));
    for &(i, j) in edges {
        let (x, y) = (&am[i], &bm[j]);
        thinning += (rho * da * db).ln();
        types += pair_type_prob(x.mtype(), y.mtype(), f.chi).ln();
        let xa = x.location() - th.tau_a;
        let xb = y.location() - th.tau_b;
        geometry += log_normal4([xa.re, xb.re, xa.im, xb.im], &cov);
        let rel = x.orientation() * (th.psi * y.orientation()).conj();
        geometry += f.kappa * rel.re - log_i0_kappa;
    }
    JointParts { thinning, types, geometry }
}

pub fn log_joint(a: &MinutiaConfig, b: &MinutiaConfig, edges: &[(usize, usize)], th: &LatentParams, f: &FixedParams) -> f64 {
    let p = joint_parts(a, b, edges, th, f, log_i0(f.kappa));
    p.thinning + p.types + p.geometry
}

fn log_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() + log_gamma(a + b) - log_gamma(a) - log_gamma(b)
}

/// `log ∫∫ exp(thinning) Beta(delta_A) d delta_A d delta_B` for the given
/// counts, by nested adaptive Simpson.
pub fn log_thinning_integral(n_a: usize, n_b: usize, n_xi: usize, f: &FixedParams, hp: bool) -> f64 {
    let (na, nb, nx, rho) = (n_a as f64, n_b as f64, n_xi as f64, f.rho0);
    let log_kernel = |da: f64, db: f64| -> f64 {
        if hp {
            -rho * (da + db - da * db) + (na + nb - nx) * rho.ln() + na * da.ln() + nb * db.ln()
                + (nb - nx) * (1.0 - da).ln()
                + (na - nx) * (1.0 - db).ln()
        } else {
            -rho * (da + db) + (na + nb) * rho.ln() + na * da.ln() + nb * db.ln()
        }
    };
    // Scale by the maximum on a grid so the tolerance is relative.
    let mut peak = f64::NEG_INFINITY;
    for i in 1..200 {
        for j in 1..200 {
            let (x, y) = (i as f64 / 200.0, j as f64 / 200.0);
            peak = peak.max(log_kernel(x, y) + log_beta_pdf(x, f.alpha_delta, f.beta_delta));
        }
    }
    let inner = |da: f64| -> f64 {
        if da <= 0.0 || da >= 1.0 {
            return 0.0;
        }
        let lb = log_beta_pdf(da, f.alpha_delta, f.beta_delta);
        let g = |db: f64| if db <= 0.0 || db >= 1.0 { 0.0 } else { (log_kernel(da, db) + lb - peak).exp() };
        simpson_panels(&g, 0.0, 1.0, 16, 1e-14)
    };
    peak + simpson_panels(&inner, 0.0, 1.0, 32, 1e-14).ln()
}

/// `log ∫∫∫ exp(geometry) sigma^-5 d tau d sigma` at fixed `psi`, with the
/// Gaussian `tau` integral done by [`log_gaussian_integral4`] and `sigma`
/// by quadrature in `log sigma`.
pub fn log_geometry_integral(a: &MinutiaConfig, b: &MinutiaConfig, edges: &[(usize, usize)], psi: Complex64, f: &FixedParams, log_i0_kappa: f64) -> f64 {
    let tau_part = |v: f64| -> f64 {
        let sigma = v.exp();
        let g = |t: [f64; 4]| {
            let th = LatentParams {
                delta_a: 0.5,
                delta_b: 0.5,
                tau_a: Complex64::new(t[0], t[1]),
                tau_b: Complex64::new(t[2], t[3]),
                sigma,
                psi,
            };
            joint_parts(a, b, edges, &th, f, log_i0_kappa).geometry
        };
        // dsigma = sigma dv
        log_gaussian_integral4(&g, 1.0) - 5.0 * v + v
    };
    log_integrate_unimodal(&tau_part, -12.0, 6.0, 12.0)
}

/// Same with the different-source model: independent `tau_A, tau_B`,
/// shared `sigma`, no matched pairs.
pub fn log_hd_geometry_integral(a: &MinutiaConfig, b: &MinutiaConfig) -> f64 {
    let tau_part = |v: f64| -> f64 {
        let s2 = (2.0 * v).exp();
        let g = |t: [f64; 4]| {
            let (ta, tb) = (Complex64::new(t[0], t[1]), Complex64::new(t[2], t[3]));
            a.minutiae().iter().map(|m| log_phi(m.location(), ta, s2)).sum::<f64>()
                + b.minutiae().iter().map(|m| log_phi(m.location(), tb, s2)).sum::<f64>()
        };
        log_gaussian_integral4(&g, 1.0) - 4.0 * v
    };
    log_integrate_unimodal(&tau_part, -12.0, 6.0, 12.0)
}

/// `log pr(A, B | H_d)` by quadrature.
pub fn oracle_log_hd(a: &MinutiaConfig, b: &MinutiaConfig, f: &FixedParams) -> f64 {
    let types: f64 = a.minutiae().iter().chain(b.minutiae()).map(|m| type_prob(m.mtype(), f.chi).ln()).sum();
    log_thinning_integral(a.len(), b.len(), 0, f, false) + types + log_hd_geometry_integral(a, b)
}

/// Same integral as [`log_geometry_integral`] but with the `sigma` step done
/// in closed form. At fixed `psi` the geometric factor has the shape
/// `K - Q(tau)/sigma^2 - N log sigma^2`, so the `tau` integral evaluated at
/// `sigma = 1` and `sigma = 2` pins down `min Q` and `K`, and
/// `∫ sigma^(-2N-1) exp(-Q/sigma^2) dsigma = Gamma(N) Q^(-N) / 2`.
pub fn log_geometry_integral_closed(a: &MinutiaConfig, b: &MinutiaConfig, edges: &[(usize, usize)], psi: Complex64, f: &FixedParams, log_i0_kappa: f64) -> f64 {
    let n = (a.len() + b.len()) as f64;
    let at = |sigma: f64| {
        let g = |t: [f64; 4]| {
            let th = LatentParams {
                delta_a: 0.5,
                delta_b: 0.5,
                tau_a: Complex64::new(t[0], t[1]),
                tau_b: Complex64::new(t[2], t[3]),
                sigma,
                psi,
            };
            joint_parts(a, b, edges, &th, f, log_i0_kappa).geometry
        };
        log_gaussian_integral4(&g, 1.0)
    };
    // With L(s) = log ∫ dtau at sigma = s: L(s) = K' - Q/s^2 - (N-2) log s^2.
    let (l1, l2) = (at(1.0), at(2.0));
    let q = (l2 - l1 + (n - 2.0) * 4f64.ln()) * 4.0 / 3.0;
    let k = l1 + q;
    k + log_gamma(n) - n * q.ln() - 2f64.ln()
}

/// `log pr(A, B | H_p)` by enumeration over matchings and quadrature over
/// `theta`: closed-form `tau`/`sigma` steps, 2-d Simpson over the deltas and
/// the trapezoid rule on the circle for `psi`.
pub fn oracle_log_hp(a: &MinutiaConfig, b: &MinutiaConfig, f: &FixedParams, psi_points: usize) -> f64 {
    let terms: Vec<f64> = oracle_hp_terms(a, b, f, psi_points).into_iter().map(|t| t.1).collect();
    log_mean_exp(&terms) + (terms.len() as f64).ln()
}

/// `log pr(A, B, xi | H_p)` for every type-compatible matching `xi`.
pub fn oracle_hp_terms(a: &MinutiaConfig, b: &MinutiaConfig, f: &FixedParams, psi_points: usize) -> Vec<(Vec<(usize, usize)>, f64)> {
    let li0 = log_i0(f.kappa);
    let mut thin_cache: Vec<Option<f64>> = vec![None; a.len().min(b.len()) + 1];
    let mut terms = Vec::new();
    for edges in all_matchings(a.len(), b.len()) {
        let th0 = LatentParams {
            delta_a: 0.5,
            delta_b: 0.5,
            tau_a: Complex64::new(0.0, 0.0),
            tau_b: Complex64::new(0.0, 0.0),
            sigma: 1.0,
            psi: Complex64::new(1.0, 0.0),
        };
        let types = joint_parts(a, b, &edges, &th0, f, li0).types;
        if types == f64::NEG_INFINITY {
            continue;
        }
        let thin = *thin_cache[edges.len()]
            .get_or_insert_with(|| log_thinning_integral(a.len(), b.len(), edges.len(), f, true));
        let geo = if edges.is_empty() {
            log_geometry_integral_closed(a, b, &edges, Complex64::new(1.0, 0.0), f, li0)
        } else {
            let vals: Vec<f64> = (0..psi_points)
                .map(|k| {
                    let psi = Complex64::cis(2.0 * PI * k as f64 / psi_points as f64);
                    log_geometry_integral_closed(a, b, &edges, psi, f, li0)
                })
                .collect();
            log_mean_exp(&vals)
        };
        terms.push((edges, thin + types + geo));
    }
    terms
}

pub fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}

// ---------------------------------------------------------------------------
// Instances

pub fn minutia(x: f64, y: f64, angle: f64, t: i64) -> Minutia {
    Minutia::new(Complex64::new(x, y), angle, MinutiaType::from_code(t).unwrap()).unwrap()
}

/// Deterministic pseudo-random stream for building instances (splitmix).
pub struct Stream(pub u64);

impl Stream {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let (u, v) = (self.next_f64().max(1e-300), self.next_f64());
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    }

    pub fn mtype(&mut self) -> i64 {
        [-1, 0, 1][(self.next_f64() * 3.0) as usize % 3]
    }

    pub fn config(&mut self, id: &str, n: usize) -> MinutiaConfig {
        let v = (0..n)
            .map(|_| minutia(self.normal(), self.normal(), PI * (2.0 * self.next_f64() - 1.0), self.mtype()))
            .collect();
        MinutiaConfig::new(id, v)
    }
}

// ---------------------------------------------------------------------------
// Goodness of fit

/// Kolmogorov-Smirnov p-value of `xs` against `cdf` (asymptotic law with
/// Stephens' small-sample correction).
pub fn ks_p_value<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max((i as f64 + 1.0) / n - c).max(c - i as f64 / n);
    }
    let l = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * l * l).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Tabulated CDF of an unnormalized density on `[lo, hi]`, by Simpson on a
/// fine grid and linear interpolation.
pub struct GridCdf {
    lo: f64,
    h: f64,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn new<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, cells: usize) -> Self {
        let h = (hi - lo) / cells as f64;
        let mut cum = vec![0.0];
        for k in 0..cells {
            let a = lo + k as f64 * h;
            let v = simpson(&density, a, a + h, 1e-16);
            cum.push(cum[k] + v);
        }
        let total = *cum.last().unwrap();
        for c in &mut cum {
            *c /= total;
        }
        GridCdf { lo, h, cum }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k + 1 >= self.cum.len() {
            return 1.0;
        }
        let w = t - k as f64;
        self.cum[k] * (1.0 - w) + self.cum[k + 1] * w
    }
}

// ---------------------------------------------------------------------------
// Matching posteriors

pub fn edge_key(xi: &fpmatch_core::Matching) -> Vec<(usize, usize)> {
    let mut e: Vec<_> = xi.edges().collect();
    e.sort();
    e
}

/// Total variation between visit counts and exact probabilities.
pub fn total_variation(counts: &std::collections::HashMap<Vec<(usize, usize)>, u64>, exact: &[(Vec<(usize, usize)>, f64)], n: u64) -> f64 {
    let mut tv = 0.0;
    for (k, p) in exact {
        let q = *counts.get(k).unwrap_or(&0) as f64 / n as f64;
        tv += (p - q).abs();
    }
    let stray: u64 = counts.iter().filter(|(k, _)| !exact.iter().any(|(e, _)| e == *k)).map(|(_, c)| c).sum();
    0.5 * (tv + stray as f64 / n as f64)
}

/// Normalizes log weights to probabilities and sorts each key.
pub fn normalize(terms: Vec<(Vec<(usize, usize)>, f64)>) -> Vec<(Vec<(usize, usize)>, f64)> {
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = terms.iter().map(|t| (t.1 - m).exp()).sum();
    terms
        .into_iter()
        .map(|(mut k, v)| {
            k.sort();
            (k, (v - m).exp() / z)
        })
        .collect()
}

/// A 3x3 instance and parameters under which several matchings carry mass.
pub fn stationarity_instance() -> (MinutiaConfig, MinutiaConfig, LatentParams, FixedParams) {
    let f = FixedParams { rho0: 3.0, omega: 0.9, kappa: 0.5, chi: 0.38, epsilon: 0.1, alpha_delta: 4.0, beta_delta: 2.0 };
    let m = minutia;
    let a = MinutiaConfig::new("a", vec![m(0.0, 0.0, 0.1, 1), m(0.8, 0.3, 1.2, 0), m(-0.5, 0.9, -2.0, -1)]);
    let b = MinutiaConfig::new("b", vec![m(0.1, -0.1, 0.3, 0), m(0.6, 0.5, 1.0, 1), m(-0.2, 0.7, -1.5, 0)]);
    let th = LatentParams {
        delta_a: 0.6,
        delta_b: 0.5,
        tau_a: Complex64::new(0.0, 0.0),
        tau_b: Complex64::new(0.0, 0.0),
        sigma: 1.0,
        psi: Complex64::new(1.0, 0.0),
    };
    (a, b, th, f)
}


/// `pr(xi | theta, A, B)` by enumeration of the product-form joint.
pub fn exact_xi_posterior(a: &MinutiaConfig, b: &MinutiaConfig, th: &LatentParams, f: &FixedParams) -> Vec<(Vec<(usize, usize)>, f64)> {
    normalize(
        all_matchings(a.len(), b.len())
            .into_iter()
            .map(|e| {
                let v = log_joint(a, b, &e, th, f);
                (e, v)
            })
            .filter(|t| t.1.is_finite())
            .collect(),
    )
}
