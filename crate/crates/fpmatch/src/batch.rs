//! Parallel scoring of many comparisons and the CSV summaries of a batch.
//!
//! Each comparison draws its random numbers from a seed derived from the
//! master seed and the two configuration ids, so results do not depend on
//! the number of threads or on scheduling order.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use fpmatch_core::chib::{log10_lr, ChibConfig, LrResult};
use fpmatch_core::eval::{auc, histogram, roc_points, HISTOGRAM_RANGE};
use fpmatch_core::model::FixedParams;
use fpmatch_core::sampling::{derive_seed, rng_from_seed};
use fpmatch_core::simulate::Subset;
use fpmatch_core::MinutiaConfig;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::LoadedPair;
use crate::formats::write_json;

pub const THREADS_ENV: &str = "FPMATCH_THREADS";
pub const SUMMARY_SCHEMA: &str = "fpmatch/batch-summary/v1";

/// Print `a` (index into the pair list) against mark `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Task {
    pub a: usize,
    pub b: usize,
}

/// All `n x n` comparisons, or, with `false_per_mark = Some(k)`, each mark
/// against its own print and `k` other prints drawn without replacement.
pub fn select_tasks(n: usize, false_per_mark: Option<usize>, seed: u64) -> Vec<Task> {
    let mut out = Vec::new();
    for b in 0..n {
        match false_per_mark {
            None => out.extend((0..n).map(|a| Task { a, b })),
            Some(k) => {
                let mut others: Vec<usize> = (0..n).filter(|&a| a != b).collect();
                let mut rng = rng_from_seed(derive_seed(seed, format!("false-{b}").as_bytes()));
                others.shuffle(&mut rng);
                out.push(Task { a: b, b });
                out.extend(others.into_iter().take(k).map(|a| Task { a, b }));
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn comparison_seed(master: u64, a: &MinutiaConfig, b: &MinutiaConfig) -> u64 {
    let mut key = Vec::with_capacity(a.id().len() + b.id().len() + 1);
    key.extend_from_slice(a.id().as_bytes());
    key.push(0);
    key.extend_from_slice(b.id().as_bytes());
    derive_seed(master, &key)
}

#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub a_id: String,
    pub b_id: String,
    pub same_source: bool,
    /// Subset of the mark.
    pub subset: Subset,
    pub seed: u64,
    pub outcome: std::result::Result<LrResult, String>,
}

/// Scores `tasks` on a pool of `threads` workers. Rows come back in task
/// order; failures are kept as rows with an error message.
pub fn score(
    pairs: &[LoadedPair],
    tasks: &[Task],
    fixed: &FixedParams,
    chib: &ChibConfig,
    master_seed: u64,
    threads: usize,
) -> Result<Vec<ScoreRow>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let (a, b) = (&pairs[t.a].a, &pairs[t.b].b);
                let seed = comparison_seed(master_seed, a, b);
                let cfg = ChibConfig { seed, ..*chib };
                ScoreRow {
                    a_id: a.id().into(),
                    b_id: b.id().into(),
                    same_source: t.a == t.b,
                    subset: pairs[t.b].subset,
                    seed,
                    outcome: log10_lr(a, b, fixed, &cfg).map_err(|e| e.to_string()),
                }
            })
            .collect()
    });
    Ok(rows)
}

/// Subsets reported by a batch, `None` meaning all comparisons.
pub const REPORT_SUBSETS: [Option<Subset>; 4] = [None, Some(Subset::Good), Some(Subset::Bad), Some(Subset::Ugly)];

pub fn subset_name(s: Option<Subset>) -> &'static str {
    s.map_or("full", Subset::name)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetSummary {
    pub subset: &'static str,
    pub n_true: usize,
    pub n_false: usize,
    pub failures: usize,
    pub auc: Option<f64>,
    pub min_true: Option<f64>,
    pub max_false: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub schema: &'static str,
    pub seed: u64,
    pub comparisons: usize,
    pub subsets: Vec<SubsetSummary>,
}

/// True and false scores of the successful rows in a subset.
pub fn split_scores(rows: &[ScoreRow], subset: Option<Subset>) -> (Vec<f64>, Vec<f64>) {
    let (mut t, mut f) = (Vec::new(), Vec::new());
    for r in rows.iter().filter(|r| subset.is_none_or(|s| r.subset == s)) {
        if let Ok(lr) = &r.outcome {
            if r.same_source {
                t.push(lr.log10_lr);
            } else {
                f.push(lr.log10_lr);
            }
        }
    }
    (t, f)
}

fn summarize(rows: &[ScoreRow], subset: Option<Subset>) -> Result<SubsetSummary> {
    let (t, f) = split_scores(rows, subset);
    let failures = rows
        .iter()
        .filter(|r| subset.is_none_or(|s| r.subset == s) && r.outcome.is_err())
        .count();
    let both = !t.is_empty() && !f.is_empty();
    Ok(SubsetSummary {
        subset: subset_name(subset),
        n_true: t.len(),
        n_false: f.len(),
        failures,
        auc: if both { Some(auc(&t, &f)?) } else { None },
        min_true: t.iter().copied().reduce(f64::min),
        max_false: f.iter().copied().reduce(f64::max),
    })
}

fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "a_id", "b_id", "same_source", "subset", "seed", "status", "log10_lr", "mc_se", "log_hp", "log_hd", "error",
    ])?;
    for r in rows {
        let common = [r.a_id.clone(), r.b_id.clone(), r.same_source.to_string(), r.subset.name().into(), r.seed.to_string()];
        let rest = match &r.outcome {
            Ok(lr) => [
                "ok".into(),
                lr.log10_lr.to_string(),
                lr.mc_se.to_string(),
                lr.log_hp.to_string(),
                lr.log_hd.to_string(),
                String::new(),
            ],
            Err(e) => ["error".into(), String::new(), String::new(), String::new(), String::new(), e.clone()],
        };
        w.write_record(common.iter().chain(rest.iter()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_histogram(path: &Path, t: &[f64], f: &[f64], width: f64) -> Result<()> {
    let (lo, hi) = HISTOGRAM_RANGE;
    let (ht, hf) = (histogram(t, lo, hi, width)?, histogram(f, lo, hi, width)?);
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["lower", "upper", "n_true", "n_false"])?;
    let row = |l: f64, u: f64, a: usize, b: usize| [l.to_string(), u.to_string(), a.to_string(), b.to_string()];
    w.write_record(row(f64::NEG_INFINITY, lo, ht.underflow, hf.underflow))?;
    for (bt, bf) in ht.bins.iter().zip(&hf.bins) {
        w.write_record(row(bt.lower, bt.upper, bt.count, bf.count))?;
    }
    w.write_record(row(hi, f64::INFINITY, ht.overflow, hf.overflow))?;
    w.flush()?;
    Ok(())
}

fn write_roc(path: &Path, t: &[f64], f: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["threshold", "false_positive_rate", "true_positive_rate"])?;
    if !t.is_empty() && !f.is_empty() {
        for p in roc_points(t, f)? {
            w.write_record([p.threshold.to_string(), p.false_positive_rate.to_string(), p.true_positive_rate.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `scores.csv`, `histogram_<subset>.csv`, `roc_<subset>.csv` and
/// `summary.json` into `out`.
pub fn write_outputs(out: &Path, rows: &[ScoreRow], seed: u64, bin_width: f64) -> Result<BatchSummary> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_scores(&out.join("scores.csv"), rows)?;
    let mut subsets = Vec::new();
    for s in REPORT_SUBSETS {
        let (t, f) = split_scores(rows, s);
        let name = subset_name(s);
        write_histogram(&out.join(format!("histogram_{name}.csv")), &t, &f, bin_width)?;
        write_roc(&out.join(format!("roc_{name}.csv")), &t, &f)?;
        subsets.push(summarize(rows, s)?);
    }
    let summary = BatchSummary {
        schema: SUMMARY_SCHEMA,
        seed,
        comparisons: rows.len(),
        subsets,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
