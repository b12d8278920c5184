//! Maximum-weight bipartite matching via the Hungarian algorithm.

use alloc::vec;
use alloc::vec::Vec;

/// Maximum-weight matching of degree at most one.
///
/// `weights` is row-major `n_a x n_b`. Only edges with strictly positive
/// weight are ever used; `-inf` and non-positive weights mean "never match".
/// Returns edges `(a, b)` sorted by `a`.
pub fn max_weight_matching(weights: &[f64], n_a: usize, n_b: usize) -> Vec<(usize, usize)> {
    assert_eq!(weights.len(), n_a * n_b, "weight matrix has wrong size");
    let usable = |w: f64| w > 0.0 && w.is_finite();
    // Rows and columns without a usable edge are never matched; drop them.
    let rows: Vec<usize> = (0..n_a).filter(|&i| (0..n_b).any(|j| usable(weights[i * n_b + j]))).collect();
    let cols: Vec<usize> = (0..n_b).filter(|&j| (0..n_a).any(|i| usable(weights[i * n_b + j]))).collect();
    let mut edges: Vec<(usize, usize)> = hungarian(weights, n_b, &rows, &cols)
        .into_iter()
        .map(|(i, j)| (rows[i], cols[j]))
        .collect();
    edges.sort_unstable();
    edges
}

/// Assignment on the `rows x cols` submatrix; returns submatrix indices of
/// the edges with positive gain.
fn hungarian(weights: &[f64], n_b: usize, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize)> {
    let (n_a, n_b_sub) = (rows.len(), cols.len());
    let n = n_a.max(n_b_sub);
    if n == 0 {
        return Vec::new();
    }
    let gain = |i: usize, j: usize| -> f64 {
        if i < n_a && j < n_b_sub {
            let w = weights[rows[i] * n_b + cols[j]];
            if w > 0.0 && w.is_finite() {
                return w;
            }
        }
        0.0
    };
    // Shortest augmenting paths with potentials on the cost -gain, 1-based
    // with column 0 as the virtual start.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = -gain(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = (1..=n)
        .filter_map(|j| {
            let (i, jj) = (p[j] - 1, j - 1);
            (gain(i, jj) > 0.0).then_some((i, jj))
        })
        .collect();
    edges.sort_unstable();
    edges
}
