use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jtiv::cluster::Pipeline;
use jtiv_cli::commands;
use jtiv_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "jtiv", version, about = "Low-rank graph-tensor recovery for incomplete multiview clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    rho_mult: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use features as stored instead of unit-norm sample columns.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Clone, Default)]
struct GridArgs {
    /// Missing ratios, comma separated.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Masks drawn per ratio.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Recovery errors of every mode combination on synthetic mixtures.
    BenchModes {
        #[command(flatten)]
        common: Common,
        /// Tensor dims, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        rank_frac: Option<f64>,
        #[arg(long)]
        sparsity: Option<f64>,
        #[arg(long)]
        lambda_scale: Option<f64>,
    },
    /// Recovery error against inter-slice mutual information.
    BenchMi {
        #[command(flatten)]
        common: Common,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Mode combinations, comma separated (e.g. 1,23,123).
        #[arg(long, value_delimiter = ',')]
        combos: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<usize>>,
        #[arg(long)]
        lambda_scale: Option<f64>,
    },
    /// Fit a dataset, cluster the consensus affinity and save the results.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Mask file (JSON) applied after loading.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Draw a missing-view mask for a dataset.
    Mask {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Fraction of samples that lose at least one view.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Score every ablation variant across missing ratios.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Vary one weight at a time over the parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Weight values, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Score predicted labels, or cluster a saved affinity.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        affinity: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Embed with spectral clustering or cluster affinity rows directly.
        #[arg(long, value_parser = ["spectral", "row-kmeans"])]
        pipeline: Option<String>,
    },
    /// Write a planted multiview dataset with ground-truth labels.
    GenPlanted {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Defaults, then the config file, then flags. Solver flags target the
/// graph solver, or the tensor robust PCA solver for the benchmarks.
fn base_config(common: &Common, trpca: bool) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    set(&mut cfg.seed, common.seed);
    set(&mut cfg.jobs, common.jobs);
    if common.clusters.is_some() {
        cfg.clusters = common.clusters;
    }
    let solver = if trpca { &mut cfg.trpca } else { &mut cfg.solver };
    set(&mut solver.lambda1, common.lambda1);
    set(&mut solver.lambda2, common.lambda2);
    set(&mut solver.lambda3, common.lambda3);
    set(&mut solver.rho0, common.rho0);
    set(&mut solver.rho_mult, common.rho_mult);
    set(&mut solver.rho_max, common.rho_max);
    set(&mut solver.tol, common.tol);
    set(&mut solver.max_iter, common.max_iter);
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, data: &DataArgs) {
    if data.data.is_some() {
        cfg.data = data.data.clone();
    }
    if data.no_normalize {
        cfg.normalize = false;
    }
}

fn apply_grid(cfg: &mut RunConfig, grid: &GridArgs) {
    set(&mut cfg.ratios, grid.ratios.clone());
    set(&mut cfg.repeats, grid.repeats);
}

fn run(cli: Cli) -> CliResult<i32> {
    let (cfg, action): (RunConfig, fn(&RunConfig) -> CliResult<i32>) = match cli.command {
        Command::BenchModes { common, dims, trials, rank_frac, sparsity, lambda_scale } => {
            let mut cfg = base_config(&common, true)?;
            if let Some(d) = dims {
                cfg.mixture.dims = d
                    .try_into()
                    .map_err(|d: Vec<usize>| CliError::invalid(format!("--dims needs 3 values, got {}", d.len())))?;
            }
            set(&mut cfg.mixture.trials, trials);
            set(&mut cfg.mixture.rank_frac, rank_frac);
            set(&mut cfg.mixture.sparsity, sparsity);
            set(&mut cfg.trpca_lambda_scale, lambda_scale);
            (cfg, commands::cmd_bench_modes)
        }
        Command::BenchMi { common, seeds, combos, windows, lambda_scale } => {
            let mut cfg = base_config(&common, true)?;
            set(&mut cfg.mi.seeds, seeds);
            set(&mut cfg.mi.combos, combos);
            set(&mut cfg.mi.windows, windows);
            set(&mut cfg.trpca_lambda_scale, lambda_scale);
            (cfg, commands::cmd_bench_mi)
        }
        Command::Fit { common, data, mask } => {
            let mut cfg = base_config(&common, false)?;
            apply_data(&mut cfg, &data);
            if mask.is_some() {
                cfg.mask = mask;
            }
            (cfg, commands::cmd_fit)
        }
        Command::Mask { common, data, ratio } => {
            let mut cfg = base_config(&common, false)?;
            apply_data(&mut cfg, &data);
            set(&mut cfg.ratio, ratio);
            (cfg, commands::cmd_mask)
        }
        Command::Ablate { common, data, grid } => {
            let mut cfg = base_config(&common, false)?;
            apply_data(&mut cfg, &data);
            apply_grid(&mut cfg, &grid);
            (cfg, commands::cmd_ablate)
        }
        Command::Sweep { common, data, grid, values } => {
            let mut cfg = base_config(&common, false)?;
            apply_data(&mut cfg, &data);
            apply_grid(&mut cfg, &grid);
            set(&mut cfg.lambda_grid, values);
            (cfg, commands::cmd_sweep)
        }
        Command::Eval { common, pred, affinity, truth, pipeline } => {
            let mut cfg = base_config(&common, false)?;
            if pred.is_some() {
                cfg.pred = pred;
            }
            if affinity.is_some() {
                cfg.affinity = affinity;
            }
            if truth.is_some() {
                cfg.truth = truth;
            }
            match pipeline.as_deref() {
                Some("row-kmeans") => cfg.pipeline = Pipeline::RowKmeans,
                Some(_) => cfg.pipeline = Pipeline::Spectral,
                None => {}
            }
            (cfg, commands::cmd_eval)
        }
        Command::GenPlanted { common, n, noise } => {
            let mut cfg = base_config(&common, false)?;
            set(&mut cfg.planted.n, n);
            set(&mut cfg.planted.noise, noise);
            (cfg, commands::cmd_gen_planted)
        }
    };
    cfg.validate()?;
    action(&cfg)
}

fn main() -> ExitCode {
    // Usage errors share the invalid-input code; 2 is reserved for max_iter.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { jtiv_cli::error::EXIT_INVALID as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("jtiv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
