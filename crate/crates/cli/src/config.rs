//! Run configuration: defaults, then an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use jtiv::cluster::Pipeline;
use jtiv::recovery::SolverParams;
use jtiv::tensor::ModeId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Parameter grid for the sensitivity sweep.
pub const LAMBDA_GRID: [f64; 15] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 20.0, 30.0, 40.0, 50.0, 100.0];
pub const MISSING_RATIOS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Mode combinations in reporting order.
pub const COMBOS: [&str; 7] = ["1", "2", "3", "12", "13", "23", "123"];

pub fn parse_combo(name: &str) -> CliResult<Vec<ModeId>> {
    let mut modes = Vec::new();
    for ch in name.chars() {
        let mode = ch
            .to_digit(10)
            .and_then(|d| ModeId::from_number(d as usize))
            .ok_or_else(|| CliError::invalid(format!("mode combination `{name}`: `{ch}` is not 1, 2 or 3")))?;
        if modes.contains(&mode) {
            return Err(CliError::invalid(format!("mode combination `{name}` repeats mode {ch}")));
        }
        modes.push(mode);
    }
    if modes.is_empty() {
        return Err(CliError::invalid("empty mode combination"));
    }
    Ok(modes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureConfig {
    pub dims: [usize; 3],
    pub rank_frac: f64,
    pub sparsity: f64,
    pub trials: usize,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self { dims: [50, 50, 20], rank_frac: 0.1, sparsity: 0.05, trials: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiConfig {
    pub views: usize,
    pub size: usize,
    pub windows: Vec<usize>,
    pub bins: usize,
    pub sparsity: f64,
    pub seeds: usize,
    pub combos: Vec<String>,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            views: 20,
            size: 40,
            windows: (1..20).collect(),
            bins: 16,
            sparsity: 0.05,
            seeds: 5,
            combos: COMBOS.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedConfig {
    pub n: usize,
    pub view_dims: Vec<usize>,
    pub subspace_dim: usize,
    pub noise: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self { n: 100, view_dims: vec![20, 25, 30], subspace_dim: 3, noise: 0.05 }
    }
}

/// Everything a subcommand may read. `out` and `jobs` do not affect
/// results and are left out of the recorded config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Graph solver parameters (`fit`, `ablate`, `sweep`).
    pub solver: SolverParams,
    /// Tensor robust PCA parameters (`bench-modes`, `bench-mi`).
    pub trpca: SolverParams,
    /// Multiplier on the default sparse weight for tensor robust PCA.
    pub trpca_lambda_scale: f64,
    pub clusters: Option<usize>,
    pub pipeline: Pipeline,
    pub normalize: bool,
    pub data: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    /// Inputs of `eval`: predicted labels, reference labels, affinity.
    pub pred: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub affinity: Option<PathBuf>,
    pub ratio: f64,
    pub ratios: Vec<f64>,
    pub repeats: usize,
    pub lambda_grid: Vec<f64>,
    pub mixture: MixtureConfig,
    pub mi: MiConfig,
    pub planted: PlantedConfig,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    #[serde(skip_serializing)]
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            solver: SolverParams::default(),
            trpca: SolverParams::trpca(),
            trpca_lambda_scale: 2.0,
            clusters: None,
            pipeline: Pipeline::Spectral,
            normalize: true,
            data: None,
            mask: None,
            pred: None,
            truth: None,
            affinity: None,
            ratio: 0.3,
            ratios: MISSING_RATIOS.to_vec(),
            repeats: 1,
            lambda_grid: LAMBDA_GRID.to_vec(),
            mixture: MixtureConfig::default(),
            mi: MiConfig::default(),
            planted: PlantedConfig::default(),
            out: None,
            jobs: 0,
        }
    }
}

fn check_ratio(p: f64) -> CliResult<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(CliError::invalid(format!("missing ratio {p} not in [0, 1)")))
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }

    /// Checks shared by every subcommand; per-command requirements are
    /// checked where they are used.
    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        self.trpca.validate()?;
        if !(self.trpca_lambda_scale > 0.0 && self.trpca_lambda_scale.is_finite()) {
            return Err(CliError::invalid("trpca_lambda_scale must be positive"));
        }
        if self.clusters == Some(0) {
            return Err(CliError::invalid("clusters must be at least 1"));
        }
        check_ratio(self.ratio)?;
        if self.ratios.is_empty() {
            return Err(CliError::invalid("ratio grid is empty"));
        }
        self.ratios.iter().try_for_each(|&p| check_ratio(p))?;
        if self.repeats == 0 {
            return Err(CliError::invalid("repeats must be at least 1"));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(CliError::invalid("lambda grid must be nonempty and nonnegative"));
        }
        if self.mixture.trials == 0 {
            return Err(CliError::invalid("trials must be at least 1"));
        }
        if self.mi.seeds == 0 || self.mi.windows.is_empty() {
            return Err(CliError::invalid("mutual-information bench needs seeds and windows"));
        }
        if let Some(w) = self.mi.windows.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CliError::invalid(format!("windows must increase, got {} then {}", w[0], w[1])));
        }
        self.mi.combos.iter().try_for_each(|c| parse_combo(c).map(|_| ()))?;
        Ok(())
    }

    pub fn out_dir(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::invalid("--out is required"))
    }

    pub fn data_path(&self) -> CliResult<&Path> {
        self.data.as_deref().ok_or_else(|| CliError::invalid("--data is required"))
    }

    /// Canonical JSON of the recorded fields.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
