//! Score summaries for batch experiments: ROC curves, AUC and histograms.

use alloc::vec::Vec;

// Unused when a dependency links std and the inherent methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    /// Scores `>= threshold` are called same-source.
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

fn check_scores(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        bail!(InvalidParameter, "empty score set");
    }
    if s.iter().any(|x| x.is_nan()) {
        bail!(InvalidParameter, "NaN score");
    }
    Ok(())
}

/// ROC points for every distinct threshold, from `(0, 0)` at `+inf` to
/// `(1, 1)` at the smallest score. Both rates are non-decreasing.
pub fn roc_points(true_scores: &[f64], false_scores: &[f64]) -> Result<Vec<RocPoint>> {
    check_scores(true_scores)?;
    check_scores(false_scores)?;
    let mut all: Vec<(f64, bool)> = true_scores
        .iter()
        .map(|&s| (s, true))
        .chain(false_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (nt, nf) = (true_scores.len() as f64, false_scores.len() as f64);
    let mut out = alloc::vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint {
            threshold: t,
            false_positive_rate: fp as f64 / nf,
            true_positive_rate: tp as f64 / nt,
        });
    }
    Ok(out)
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(T > F) + P(T = F)/2`.
pub fn auc(true_scores: &[f64], false_scores: &[f64]) -> Result<f64> {
    check_scores(true_scores)?;
    check_scores(false_scores)?;
    let mut f = false_scores.to_vec();
    f.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for &t in true_scores {
        let below = f.partition_point(|&x| x < t);
        let not_above = f.partition_point(|&x| x <= t);
        total += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(total / (true_scores.len() as f64 * f.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Fixed-width histogram; bins are `[lower, upper)` except the last, which
/// also holds `hi`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub bins: Vec<Bin>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.underflow + self.overflow + self.bins.iter().map(|b| b.count).sum::<usize>()
    }
}

/// Range used for log10 likelihood-ratio histograms.
pub const HISTOGRAM_RANGE: (f64, f64) = (-63.0, 103.0);

pub fn histogram(scores: &[f64], lo: f64, hi: f64, width: f64) -> Result<Histogram> {
    if !(lo < hi) || !(width > 0.0) || !lo.is_finite() || !hi.is_finite() {
        bail!(InvalidParameter, "histogram needs lo < hi and width > 0");
    }
    let n = ((hi - lo) / width).ceil() as usize;
    let mut bins: Vec<Bin> = (0..n)
        .map(|k| Bin {
            lower: lo + k as f64 * width,
            upper: (lo + (k + 1) as f64 * width).min(hi),
            count: 0,
        })
        .collect();
    let (mut underflow, mut overflow) = (0, 0);
    for &s in scores {
        if s.is_nan() {
            bail!(InvalidParameter, "NaN score");
        }
        if s < lo {
            underflow += 1;
        } else if s > hi {
            overflow += 1;
        } else {
            let k = (((s - lo) / width).floor() as usize).min(n - 1);
            bins[k].count += 1;
        }
    }
    Ok(Histogram {
        bins,
        underflow,
        overflow,
    })
}
