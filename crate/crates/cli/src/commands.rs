//! Experiment routines and the subcommands that drive them. Routines return
//! rows; subcommands validate inputs, run routines and write artifacts.

use std::fs;
use std::path::Path;

use jtiv::cluster::{cluster_affinity, evaluate, ClusterMetrics, Pipeline};
use jtiv::io::{
    apply_mask, load_viewset, read_labels, read_mask, read_matrix, save_result, save_viewset, write_labels, write_mask,
    MaskFile, RunResult,
};
use jtiv::recovery::{
    default_trpca_lambda, jtiv_lrr_fit, reconstruction_errors, trpca_fit, JtivFit, SolverParams, Status, ViewSet,
};
use jtiv::synth::{
    gen_mi_sequence, gen_missing_mask, gen_mode_mixture, gen_planted_multiview, gen_sparse_noise, mutual_information,
    MixtureSpec, PlantedSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_combo, RunConfig, COMBOS};
use crate::error::{CliError, CliResult, EXIT_CONVERGED, EXIT_MAX_ITER};

/// Runs `f` on a pool of `jobs` threads (0 = pool default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn annotate(context: String) -> impl FnOnce(jtiv::Error) -> CliError {
    move |e| {
        if e.is_io() {
            CliError::Core(e)
        } else {
            CliError::invalid(format!("{context}: {e}"))
        }
    }
}

fn rms(x: &jtiv::tensor::Tensor3) -> f64 {
    x.frobenius_norm() / (x.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeRow {
    pub combo: String,
    pub trial: usize,
    pub l_er: f64,
    pub s_er: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSummary {
    pub combo: String,
    pub trials: usize,
    pub l_er_mean: f64,
    pub l_er_std: f64,
    pub s_er_mean: f64,
    pub s_er_std: f64,
}

/// Trial `t` draws its mixture from seed `cfg.seed + t`; every combination
/// sees the same mixture.
pub fn bench_modes(cfg: &RunConfig) -> CliResult<Vec<ModeRow>> {
    let mc = &cfg.mixture;
    let base = MixtureSpec { dims: mc.dims, rank_frac: mc.rank_frac, sparsity: mc.sparsity, seed: cfg.seed };
    base.validate()?;
    let combos: Vec<_> = COMBOS.iter().map(|c| parse_combo(c).map(|m| (*c, m))).collect::<CliResult<_>>()?;
    let per_trial: Vec<Vec<ModeRow>> = with_jobs(cfg.jobs, || {
        (0..mc.trials)
            .into_par_iter()
            .map(|trial| {
                let spec = MixtureSpec { seed: cfg.seed.wrapping_add(trial as u64), ..base.clone() };
                let mix = gen_mode_mixture(&spec)?;
                combos
                    .iter()
                    .map(|(name, modes)| {
                        let lambda = cfg.trpca_lambda_scale * default_trpca_lambda(mc.dims, modes);
                        let fit = trpca_fit(&mix.x, modes, lambda, &cfg.trpca)
                            .map_err(annotate(format!("combo {name}, trial {trial}")))?;
                        let (l_er, s_er) = reconstruction_errors(&mix.l, &fit.l, &mix.s, &fit.s)?;
                        Ok(ModeRow { combo: name.to_string(), trial, l_er, s_er })
                    })
                    .collect::<CliResult<Vec<_>>>()
            })
            .collect::<CliResult<Vec<_>>>()
    })??;
    let mut rows: Vec<ModeRow> = per_trial.into_iter().flatten().collect();
    let order = |c: &str| COMBOS.iter().position(|x| *x == c).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (order(&r.combo), r.trial));
    Ok(rows)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-combination means and sample standard deviations, in row order.
pub fn summarize_modes(rows: &[ModeRow]) -> Vec<ModeSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.combo.as_str()) {
            names.push(&r.combo);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let of = |f: fn(&ModeRow) -> f64| -> Vec<f64> { rows.iter().filter(|r| r.combo == name).map(f).collect() };
            let l = of(|r| r.l_er);
            let s = of(|r| r.s_er);
            let (l_er_mean, l_er_std) = mean_std(&l);
            let (s_er_mean, s_er_std) = mean_std(&s);
            ModeSummary { combo: name.to_string(), trials: l.len(), l_er_mean, l_er_std, s_er_mean, s_er_std }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MiRow {
    pub seed: u64,
    pub w: usize,
    pub mi: f64,
    pub combo: String,
    pub l_er: f64,
    pub s_er: f64,
}

/// Seed `s` (of `mi.seeds`) and window `w` draw from
/// `(cfg.seed + s) * 1000 + w`. Rows are ordered by seed, combination, window.
pub fn bench_mi(cfg: &RunConfig) -> CliResult<Vec<MiRow>> {
    let mc = &cfg.mi;
    let combos: Vec<_> = mc.combos.iter().map(|c| parse_combo(c).map(|m| (c.clone(), m))).collect::<CliResult<_>>()?;
    let tasks: Vec<(u64, usize)> =
        (0..mc.seeds as u64).flat_map(|s| mc.windows.iter().map(move |&w| (cfg.seed.wrapping_add(s), w))).collect();
    let per_task: Vec<Vec<MiRow>> = with_jobs(cfg.jobs, || {
        tasks
            .par_iter()
            .map(|&(seed, w)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(w as u64));
                let l = gen_mi_sequence(mc.views, mc.size, w, &mut rng)?;
                let mi = mutual_information(&l, mc.bins)?;
                let s = gen_sparse_noise(l.dims(), mc.sparsity, rms(&l), &mut rng)?;
                let x = l.add(&s)?;
                combos
                    .iter()
                    .map(|(name, modes)| {
                        let lambda = cfg.trpca_lambda_scale * default_trpca_lambda(x.dims(), modes);
                        let fit = trpca_fit(&x, modes, lambda, &cfg.trpca)
                            .map_err(annotate(format!("combo {name}, window {w}, seed {seed}")))?;
                        let (l_er, s_er) = reconstruction_errors(&l, &fit.l, &s, &fit.s)?;
                        Ok(MiRow { seed, w, mi, combo: name.clone(), l_er, s_er })
                    })
                    .collect::<CliResult<Vec<_>>>()
            })
            .collect::<CliResult<Vec<_>>>()
    })??;
    let mut rows: Vec<MiRow> = per_task.into_iter().flatten().collect();
    let order = |c: &str| mc.combos.iter().position(|x| x == c).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.seed, order(&r.combo), r.w));
    Ok(rows)
}

/// Ablation variants in reporting order. `L123` keeps every mode but pins
/// the sparse part to zero; `full` is the complete model.
pub const VARIANTS: [&str; 8] = ["L1", "L2", "L3", "L12", "L13", "L23", "L123", "full"];

pub fn variant_params(base: &SolverParams, variant: &str) -> CliResult<SolverParams> {
    let mut p = base.clone();
    match variant {
        "full" => return Ok(p),
        "L123" => {
            p.sparse_term = false;
            return Ok(p);
        }
        _ => {}
    }
    let modes = variant
        .strip_prefix('L')
        .ok_or_else(|| CliError::invalid(format!("unknown variant `{variant}`")))
        .and_then(parse_combo)?;
    let keep = |m: usize| modes.iter().any(|x| x.number() == m);
    if !keep(1) {
        p.lambda1 = 0.0;
    }
    if !keep(2) {
        p.lambda2 = 0.0;
    }
    if !keep(3) {
        p.lambda3 = 0.0;
    }
    Ok(p)
}

/// Number of clusters: the configured value, else one per distinct label.
pub fn resolve_clusters(cfg: &RunConfig, labels: Option<&[usize]>) -> Option<usize> {
    cfg.clusters.or_else(|| labels.map(|l| l.iter().max().map_or(0, |m| m + 1)))
}

/// One masked solve scored against the view set's labels.
pub struct Scored {
    pub fit: JtivFit,
    pub labels: Vec<usize>,
    pub metrics: ClusterMetrics,
}

pub fn fit_and_score(vs: &ViewSet, params: &SolverParams, clusters: usize, pipeline: Pipeline) -> CliResult<Scored> {
    let truth = vs.labels().ok_or_else(|| CliError::invalid("scoring needs a labels file"))?;
    let fit = jtiv_lrr_fit(vs, params)?;
    let clustering = cluster_affinity(&fit.c, clusters, pipeline, params.seed, Some(truth))?;
    Ok(Scored { labels: clustering.labels, metrics: clustering.metrics.expect("truth supplied"), fit })
}

/// Mask for repeat `r`: `gen_missing_mask` driven by seed `seed + r`.
pub fn repeat_mask(vs: &ViewSet, p: f64, seed: u64) -> CliResult<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(gen_missing_mask(vs.n(), vs.num_views(), p, &mut rng)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

fn mean_scores(scores: &[ClusterMetrics]) -> ScoreRow {
    let n = scores.len() as f64;
    ScoreRow {
        acc: scores.iter().map(|m| m.acc).sum::<f64>() / n,
        nmi: scores.iter().map(|m| m.nmi).sum::<f64>() / n,
        ari: scores.iter().map(|m| m.ari).sum::<f64>() / n,
    }
}

/// Mean scores of each parameter setting at each missing ratio, averaged
/// over `cfg.repeats` masks. `vs` should already be normalized.
fn score_grid(vs: &ViewSet, cfg: &RunConfig, settings: &[SolverParams]) -> CliResult<Vec<Vec<ScoreRow>>> {
    let clusters =
        resolve_clusters(cfg, vs.labels()).ok_or_else(|| CliError::invalid("scoring needs a labels file"))?;
    let tasks: Vec<(usize, usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..cfg.ratios.len()).flat_map(move |p| (0..cfg.repeats).map(move |r| (s, p, r))))
        .collect();
    let scores: Vec<ClusterMetrics> = with_jobs(cfg.jobs, || {
        tasks
            .par_iter()
            .map(|&(s, p, r)| {
                let keep = repeat_mask(vs, cfg.ratios[p], cfg.seed.wrapping_add(r as u64))?;
                let masked = vs.restrict(&keep)?;
                Ok(fit_and_score(&masked, &settings[s], clusters, cfg.pipeline)?.metrics)
            })
            .collect::<CliResult<Vec<_>>>()
    })??;
    Ok(scores
        .chunks(cfg.repeats)
        .collect::<Vec<_>>()
        .chunks(cfg.ratios.len())
        .map(|per_ratio| per_ratio.iter().map(|c| mean_scores(c)).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblateRow {
    pub variant: String,
    pub p: f64,
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn ablate(vs: &ViewSet, cfg: &RunConfig) -> CliResult<Vec<AblateRow>> {
    let mut solver = cfg.solver.clone();
    solver.seed = cfg.seed;
    let settings: Vec<SolverParams> = VARIANTS.iter().map(|v| variant_params(&solver, v)).collect::<CliResult<_>>()?;
    let grid = score_grid(vs, cfg, &settings)?;
    Ok(VARIANTS
        .iter()
        .zip(grid)
        .flat_map(|(v, per_ratio)| {
            cfg.ratios.iter().zip(per_ratio).map(move |(&p, s)| AblateRow {
                variant: v.to_string(),
                p,
                acc: s.acc,
                nmi: s.nmi,
                ari: s.ari,
            })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub p: f64,
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

/// Varies one weight at a time over the grid, holding the others at their
/// configured values.
pub fn sweep(vs: &ViewSet, cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let mut solver = cfg.solver.clone();
    solver.seed = cfg.seed;
    let mut labels = Vec::new();
    let mut settings = Vec::new();
    for param in ["lambda1", "lambda2", "lambda3"] {
        for &value in &cfg.lambda_grid {
            let mut p = solver.clone();
            match param {
                "lambda1" => p.lambda1 = value,
                "lambda2" => p.lambda2 = value,
                _ => p.lambda3 = value,
            }
            labels.push((param, value));
            settings.push(p);
        }
    }
    let grid = score_grid(vs, cfg, &settings)?;
    Ok(labels
        .into_iter()
        .zip(grid)
        .flat_map(|((param, value), per_ratio)| {
            cfg.ratios.iter().zip(per_ratio).map(move |(&p, s)| SweepRow {
                param: param.to_string(),
                value,
                p,
                acc: s.acc,
                nmi: s.nmi,
                ari: s.ari,
            })
        })
        .collect())
}

// ---- subcommands ----

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `run.json`: command, config, its SHA-256 and the files written.
fn write_run_record(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    outputs: &[&str],
    extra: serde_json::Value,
) -> CliResult<()> {
    let mut record = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "config_sha256": cfg.sha256(),
        "outputs": outputs,
    });
    if let (Some(map), serde_json::Value::Object(more)) = (record.as_object_mut(), extra) {
        map.extend(more);
    }
    write_json(&dir.join("run.json"), &record)
}

pub fn cmd_bench_modes(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let rows = bench_modes(cfg)?;
    let summary = summarize_modes(&rows);
    create_out(out)?;
    write_csv(&out.join("bench_modes.csv"), &rows)?;
    write_csv(&out.join("bench_modes_summary.csv"), &summary)?;
    write_run_record(out, "bench-modes", cfg, &["bench_modes.csv", "bench_modes_summary.csv"], json!({}))?;
    Ok(EXIT_CONVERGED)
}

pub fn cmd_bench_mi(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let rows = bench_mi(cfg)?;
    create_out(out)?;
    write_csv(&out.join("bench_mi.csv"), &rows)?;
    write_run_record(out, "bench-mi", cfg, &["bench_mi.csv"], json!({}))?;
    Ok(EXIT_CONVERGED)
}

fn load_input(cfg: &RunConfig) -> CliResult<ViewSet> {
    let vs = load_viewset(cfg.data_path()?, cfg.normalize)?;
    match &cfg.mask {
        Some(path) => Ok(apply_mask(&vs, &read_mask(path)?)?),
        None => Ok(vs),
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let vs = load_input(cfg)?;
    let mut params = cfg.solver.clone();
    params.seed = cfg.seed;
    let fit = jtiv_lrr_fit(&vs, &params)?;
    let clusters = resolve_clusters(cfg, vs.labels());
    let clustering =
        clusters.map(|k| cluster_affinity(&fit.c, k, cfg.pipeline, params.seed, vs.labels())).transpose()?;
    let metrics = clustering.as_ref().and_then(|c| c.metrics);
    create_out(out)?;
    let paths = save_result(
        &RunResult {
            l: &fit.l,
            s: &fit.s,
            c: &fit.c,
            trace: &fit.trace,
            metrics: metrics.as_ref(),
            labels: clustering.as_ref().map(|c| c.labels.as_slice()),
        },
        out,
    )?;
    let mut outputs = vec!["L.t3d", "S.t3d", "C.m2d", "trace.csv"];
    if paths.metrics.is_some() {
        outputs.push("metrics.json");
    }
    if paths.labels.is_some() {
        outputs.push("labels.csv");
    }
    let last = fit.trace.last().map(|r| r.max_residual());
    write_run_record(
        out,
        "fit",
        cfg,
        &outputs,
        json!({ "status": fit.status, "iterations": fit.iterations(), "max_residual": last }),
    )?;
    Ok(match fit.status {
        Status::Converged => EXIT_CONVERGED,
        Status::MaxIter => EXIT_MAX_ITER,
    })
}

pub fn cmd_mask(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let vs = load_viewset(cfg.data_path()?, false)?;
    let keep = repeat_mask(&vs, cfg.ratio, cfg.seed)?;
    let mask = MaskFile::new(cfg.ratio, cfg.seed, keep);
    apply_mask(&vs, &mask)?;
    create_out(out)?;
    write_mask(&out.join("mask.json"), &mask)?;
    write_run_record(out, "mask", cfg, &["mask.json"], json!({}))?;
    Ok(EXIT_CONVERGED)
}

pub fn cmd_ablate(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let vs = load_viewset(cfg.data_path()?, cfg.normalize)?;
    let rows = ablate(&vs, cfg)?;
    create_out(out)?;
    write_csv(&out.join("ablate.csv"), &rows)?;
    write_run_record(out, "ablate", cfg, &["ablate.csv"], json!({}))?;
    Ok(EXIT_CONVERGED)
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let vs = load_viewset(cfg.data_path()?, cfg.normalize)?;
    let rows = sweep(&vs, cfg)?;
    create_out(out)?;
    write_csv(&out.join("sweep.csv"), &rows)?;
    write_run_record(out, "sweep", cfg, &["sweep.csv"], json!({}))?;
    Ok(EXIT_CONVERGED)
}

/// Scores predicted labels (`pred`) or clusters an affinity (`affinity`),
/// optionally against reference labels (`truth`).
pub fn cmd_eval(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let truth = cfg.truth.as_deref().map(read_labels).transpose()?;
    let (pred, cluster_labels) = match (&cfg.pred, &cfg.affinity) {
        (Some(pred), None) => (read_labels(pred)?, false),
        (None, Some(affinity)) => {
            let c = read_matrix(affinity)?;
            let k = resolve_clusters(cfg, truth.as_deref())
                .ok_or_else(|| CliError::invalid("--clusters or --truth is required with --affinity"))?;
            (cluster_affinity(&c, k, cfg.pipeline, cfg.seed, None)?.labels, true)
        }
        _ => return Err(CliError::invalid("exactly one of --pred and --affinity is required")),
    };
    let metrics = truth.as_deref().map(|t| evaluate(&pred, t)).transpose()?;
    if metrics.is_none() && !cluster_labels {
        return Err(CliError::invalid("--truth is required with --pred"));
    }
    create_out(out)?;
    let mut outputs = Vec::new();
    if let Some(m) = &metrics {
        write_json(&out.join("metrics.json"), &serde_json::to_value(m).expect("metrics serialize"))?;
        outputs.push("metrics.json");
        println!("acc {:.6} nmi {:.6} ari {:.6}", m.acc, m.nmi, m.ari);
    }
    if cluster_labels {
        write_labels(&out.join("labels.csv"), &pred)?;
        outputs.push("labels.csv");
    }
    write_run_record(out, "eval", cfg, &outputs, json!({}))?;
    Ok(EXIT_CONVERGED)
}

pub fn cmd_gen_planted(cfg: &RunConfig) -> CliResult<i32> {
    let out = cfg.out_dir()?;
    let pc = &cfg.planted;
    let spec = PlantedSpec {
        n: pc.n,
        clusters: cfg.clusters.unwrap_or(3),
        view_dims: pc.view_dims.clone(),
        subspace_dim: pc.subspace_dim,
        noise: pc.noise,
        seed: cfg.seed,
    };
    let vs = gen_planted_multiview(&spec)?;
    create_out(out)?;
    save_viewset(&vs, "planted", out)?;
    let mut outputs: Vec<String> = (0..vs.num_views()).map(|v| format!("view_{v}.m2d")).collect();
    outputs.push("labels.csv".into());
    outputs.push("manifest.json".into());
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_run_record(out, "gen-planted", cfg, &names, json!({}))?;
    Ok(EXIT_CONVERGED)
}
