//! Command-line interface.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fpmatch_core::chib::{log10_lr, ChibConfig};
use fpmatch_core::estimation::{fit, FitConfig, FitStage};
use fpmatch_core::model::FixedParams;
use fpmatch_core::simulate::{make_dataset, Hypothesis, SimConfig};

use crate::batch::{score, select_tasks, write_outputs, THREADS_ENV};
use crate::dataset::{load_manifest, training_corpus, write_dataset};
use crate::formats::{read_config, read_params, write_json, FitFile, ResultFile, FIT_SCHEMA, RESULT_SCHEMA};

#[derive(Debug, Parser)]
#[command(name = "fpmatch", version, about = "Likelihood ratios for minutia configurations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset of print/mark pairs.
    Simulate(SimulateArgs),
    /// Fit the fixed parameters from a dataset with ground-truth matchings.
    Fit(FitArgs),
    /// Score one print against one mark.
    Compare(CompareArgs),
    /// Score every print against every mark of a dataset.
    Batch(BatchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HypothesisArg {
    Hp,
    Hd,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameter file; defaults to the built-in fitted values.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hp")]
    pub hypothesis: HypothesisArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    All,
    DeltaRho,
    Chi,
    OmegaKappa,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub stage: StageArg,
    /// Starting values for the stages that are not run or need one.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cap on stochastic EM iterations before averaging.
    #[arg(long, default_value_t = 5000)]
    pub sem_max_burn: usize,
    /// Stochastic EM iterations averaged after stabilization.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub sem_average: u64,
    /// Optional CSV of the stochastic EM trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write the fitted parameters as a parameter file.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChibArgs {
    #[arg(long, default_value_t = 5000)]
    pub burn: usize,
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 500)]
    pub burn_reduced: usize,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub nxi: u64,
    /// Batches for the Monte Carlo standard error.
    #[arg(long, default_value_t = 10)]
    pub batches: usize,
}

impl ChibArgs {
    fn config(&self, seed: u64) -> ChibConfig {
        ChibConfig {
            n_burn: self.burn,
            n_samples: self.samples as usize,
            n_burn_reduced: self.burn_reduced,
            n_xi: self.nxi as usize,
            n_batches: self.batches,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub chib: ChibArgs,
    /// Output result (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = THREADS_ENV, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Parameters; defaults to the ones stored in the manifest.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub chib: ChibArgs,
    /// Histogram bin width in log10 units.
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    /// Score each mark against its own print and this many others instead
    /// of against every print.
    #[arg(long)]
    pub false_per_mark: Option<usize>,
}

fn params_or_default(path: &Option<PathBuf>) -> Result<FixedParams> {
    match path {
        Some(p) => read_params(p),
        None => Ok(FixedParams::default()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit_cmd(&a),
        Command::Compare(a) => compare(&a),
        Command::Batch(a) => batch(&a),
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = SimConfig {
        fixed: params_or_default(&args.params)?,
        n_pairs: args.n_pairs as usize,
        hypothesis: match args.hypothesis {
            HypothesisArg::Hp => Hypothesis::Hp,
            HypothesisArg::Hd => Hypothesis::Hd,
        },
        seed: args.seed,
    };
    let d = make_dataset(&cfg)?;
    let path = write_dataset(&args.out, &d)?;
    eprintln!("wrote {} pairs to {}", d.pairs.len(), path.display());
    Ok(())
}

fn fit_cmd(args: &FitArgs) -> Result<()> {
    let m = load_manifest(&args.manifest)?;
    let corpus = training_corpus(&m)?;
    let start = match &args.params {
        Some(p) => read_params(p)?,
        None => m.manifest.params,
    };
    let stage = match args.stage {
        StageArg::All => FitStage::All,
        StageArg::DeltaRho => FitStage::DeltaRho,
        StageArg::Chi => FitStage::Chi,
        StageArg::OmegaKappa => FitStage::OmegaKappa,
    };
    let mut cfg = FitConfig::default();
    cfg.delta_rho.seed = args.seed;
    cfg.sem.seed = args.seed;
    cfg.sem.max_burn = args.sem_max_burn;
    cfg.sem.n_average = args.sem_average as usize;
    eprintln!("fitting {:?} on {} pairs", stage, corpus.len());
    let report = fit(&corpus, &start, stage, &cfg)?;
    if let Some(f) = &report.delta_rho {
        eprintln!(
            "delta/rho: alpha {:.4} beta {:.4} rho0 {:.4} (converged {})",
            f.alpha_delta, f.beta_delta, f.rho0, f.converged
        );
    }
    if let Some(f) = &report.chi {
        eprintln!("chi: {:.4} (boundary {})", f.chi, f.boundary);
    }
    if let Some(f) = &report.omega_kappa {
        eprintln!(
            "omega/kappa: {:.5} {:.3} (stabilized {} at {})",
            f.omega, f.kappa, f.stabilized, f.stabilized_at
        );
        if let Some(t) = &args.trace {
            write_trace(t, &f.omega_trace, &f.kappa_trace)?;
        }
    }
    if let Some(p) = &args.params_out {
        write_json(p, &crate::formats::ParamsFile::new(report.params))?;
    }
    write_json(
        &args.out,
        &FitFile {
            schema: FIT_SCHEMA.into(),
            report,
        },
    )
}

fn write_trace(path: &Path, omega: &[f64], kappa: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["iteration", "omega", "kappa"])?;
    for (i, (o, k)) in omega.iter().zip(kappa).enumerate() {
        w.write_record([i.to_string(), o.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let a = read_config(&args.a)?;
    let b = read_config(&args.b)?;
    let fixed = params_or_default(&args.params)?;
    let r = log10_lr(&a, &b, &fixed, &args.chib.config(args.seed))
        .with_context(|| format!("comparing {} with {}", a.id(), b.id()))?;
    println!("log10_lr {} mc_se {}", r.log10_lr, r.mc_se);
    if let Some(out) = &args.out {
        write_json(
            out,
            &ResultFile {
                schema: RESULT_SCHEMA.into(),
                result: r,
            },
        )?;
    }
    Ok(())
}

fn batch(args: &BatchArgs) -> Result<()> {
    let m = load_manifest(&args.manifest)?;
    let fixed = match &args.params {
        Some(p) => read_params(p)?,
        None => m.manifest.params,
    };
    let threads = match args.threads {
        Some(t) => t as usize,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let tasks = select_tasks(m.pairs.len(), args.false_per_mark, args.seed);
    eprintln!("scoring {} comparisons on {} threads", tasks.len(), threads);
    let rows = score(&m.pairs, &tasks, &fixed, &args.chib.config(0), args.seed, threads)?;
    let summary = write_outputs(&args.out, &rows, args.seed, args.bin_width)?;
    for s in &summary.subsets {
        eprintln!(
            "{}: {} true, {} false, {} failed, AUC {}",
            s.subset,
            s.n_true,
            s.n_false,
            s.failures,
            s.auc.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(())
}
