//! Dataset manifests, mask files, label files and solver result bundles.
//!
//! Numeric payloads always live in binary containers; JSON and CSV carry
//! only structure, indices and scalars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::container::{read_matrix, write_matrix, write_tensor};
use crate::cluster::ClusterMetrics;
use crate::error::{Error, Result};
use crate::recovery::{IterRecord, SolverTrace, View, ViewSet};
use crate::tensor::{Matrix, Tensor3};

const MEMORY: &str = "<memory>";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestView {
    pub id: usize,
    pub d: usize,
    /// Relative paths resolve against the manifest's directory.
    pub data_file: PathBuf,
    pub observed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub n: usize,
    pub views: Vec<ManifestView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_file: Option<PathBuf>,
}

fn check_index_list(view: usize, observed: &[usize], n: usize) -> Result<()> {
    if let Some(w) = observed.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidView {
            view,
            reason: format!("observed indices not strictly increasing at {} -> {}", w[0], w[1]),
        });
    }
    if let Some(&i) = observed.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidView { view, reason: format!("observed index {i} out of range for n = {n}") });
    }
    Ok(())
}

/// View ids must be exactly `0..V` in order; ids name positions.
fn check_ids(ids: impl Iterator<Item = usize>) -> Result<()> {
    for (pos, id) in ids.enumerate() {
        if id != pos {
            return Err(Error::InvalidView { view: pos, reason: format!("id {id} where {pos} was expected") });
        }
    }
    Ok(())
}

impl DatasetManifest {
    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam("manifest declares n = 0".into()));
        }
        if self.views.is_empty() {
            return Err(Error::InvalidParam("manifest lists no views".into()));
        }
        check_ids(self.views.iter().map(|v| v.id))?;
        // `n` is untrusted; an uncovered sample exists below total + 1
        let total: usize = self.views.iter().map(|v| v.observed.len()).sum();
        let mut covered = vec![false; self.n.min(total.saturating_add(1))];
        for (v, view) in self.views.iter().enumerate() {
            if view.d == 0 {
                return Err(Error::InvalidView { view: v, reason: "feature dimension d = 0".into() });
            }
            check_index_list(v, &view.observed, self.n)?;
            for &i in &view.observed {
                if let Some(c) = covered.get_mut(i) {
                    *c = true;
                }
            }
        }
        if let Some(sample) = covered.iter().position(|c| !c) {
            return Err(Error::UnobservedSample { sample });
        }
        Ok(())
    }
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("plain data serializes");
    out.push(b'\n');
    out
}

/// Parses and structurally validates a manifest.
pub fn parse_manifest(bytes: &[u8]) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = parse_json(bytes, Path::new(MEMORY))?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = parse_json(&read_bytes(path)?, path)?;
    manifest.validate()?;
    Ok(manifest)
}

fn resolve(base: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.join(file)
    }
}

/// Loads the views named by a manifest. With `normalize`, every sample
/// column is scaled to unit norm.
pub fn load_viewset(manifest_path: &Path, normalize: bool) -> Result<ViewSet> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let mut views = Vec::with_capacity(manifest.views.len());
    for (v, entry) in manifest.views.iter().enumerate() {
        let data = read_matrix(&resolve(base, &entry.data_file))?;
        let expected = (entry.d, entry.observed.len());
        if data.shape() != expected {
            return Err(Error::DimMismatch {
                view: v,
                declared: format!("{} x {}", expected.0, expected.1),
                actual: format!("{} x {}", data.nrows(), data.ncols()),
            });
        }
        views.push(View { data, observed: entry.observed.clone() });
    }
    let labels = match &manifest.labels_file {
        Some(file) => Some(read_labels(&resolve(base, file))?),
        None => None,
    };
    let vs = ViewSet::new(manifest.n, views, labels)?;
    Ok(if normalize { vs.normalized() } else { vs })
}

/// Writes `view_<v>.m2d`, `labels.csv` (when present) and `manifest.json`
/// into `dir`, returning the manifest path.
pub fn save_viewset(vs: &ViewSet, name: &str, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::with_capacity(vs.num_views());
    for (v, view) in vs.views().iter().enumerate() {
        let file = PathBuf::from(format!("view_{v}.m2d"));
        write_matrix(&dir.join(&file), &view.data)?;
        views.push(ManifestView { id: v, d: view.dim(), data_file: file, observed: view.observed.clone() });
    }
    let labels_file = match vs.labels() {
        Some(labels) => {
            let file = PathBuf::from("labels.csv");
            write_labels(&dir.join(&file), labels)?;
            Some(file)
        }
        None => None,
    };
    let manifest = DatasetManifest { name: name.to_string(), n: vs.n(), views, labels_file };
    let path = dir.join("manifest.json");
    write_bytes(&path, &to_json(&manifest))?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskView {
    pub id: usize,
    pub observed: Vec<usize>,
}

/// Replayable missing-view pattern: the ratio and seed that produced it
/// plus the resulting per-view observed lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskFile {
    pub ratio: f64,
    pub seed: u64,
    pub views: Vec<MaskView>,
}

impl MaskFile {
    pub fn new(ratio: f64, seed: u64, observed: Vec<Vec<usize>>) -> Self {
        Self {
            ratio,
            seed,
            views: observed.into_iter().enumerate().map(|(id, observed)| MaskView { id, observed }).collect(),
        }
    }

    pub fn observed(&self) -> Vec<Vec<usize>> {
        self.views.iter().map(|v| v.observed.clone()).collect()
    }

    /// Checks ids and index lists; `n` bounds the indices.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::InvalidParam(format!("mask ratio {} not in [0, 1)", self.ratio)));
        }
        check_ids(self.views.iter().map(|v| v.id))?;
        for (v, view) in self.views.iter().enumerate() {
            check_index_list(v, &view.observed, n)?;
        }
        Ok(())
    }
}

/// Parses a mask file and checks what can be checked without the data:
/// ids and strictly increasing index lists.
pub fn parse_mask(bytes: &[u8]) -> Result<MaskFile> {
    let mask: MaskFile = parse_json(bytes, Path::new(MEMORY))?;
    mask.validate(usize::MAX)?;
    Ok(mask)
}

pub fn read_mask(path: &Path) -> Result<MaskFile> {
    let mask: MaskFile = parse_json(&read_bytes(path)?, path)?;
    mask.validate(usize::MAX)?;
    Ok(mask)
}

pub fn write_mask(path: &Path, mask: &MaskFile) -> Result<()> {
    write_bytes(path, &to_json(mask))
}

/// Intersects each view's observed samples with the mask's and re-validates
/// that every sample remains observed somewhere.
pub fn apply_mask(vs: &ViewSet, mask: &MaskFile) -> Result<ViewSet> {
    mask.validate(vs.n())?;
    vs.restrict(&mask.observed())
}

/// Labels CSV: a `label` header, then one nonnegative integer per sample.
pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    labels_from_reader(bytes, Path::new(MEMORY))
}

fn labels_from_reader<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<usize>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let headers = rdr.headers().map_err(csv_err)?;
    if headers.len() != 1 || &headers[0] != "label" {
        return Err(Error::Format(format!("{}: expected a single `label` column", path.display())));
    }
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = record[0].trim();
        let label = field
            .parse()
            .map_err(|_| Error::Format(format!("{}: row {}: `{field}` is not a label", path.display(), row + 1)))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Format(format!("{}: no labels", path.display())));
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    labels_from_reader(read_bytes(path)?.as_slice(), path)
}

pub fn encode_labels(labels: &[usize]) -> Vec<u8> {
    let mut out = String::with_capacity(6 + 3 * labels.len());
    out.push_str("label\n");
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write_bytes(path, &encode_labels(labels))
}

pub const TRACE_HEADER: &str = "iter,er1,er2,er3,er4,er5,objective,rho";

pub fn encode_trace(trace: &SolverTrace) -> Vec<u8> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        out.push_str(&r.iter.to_string());
        for v in r.er.iter().chain([&r.objective, &r.rho]) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_trace(bytes: &[u8]) -> Result<SolverTrace> {
    trace_from(bytes, Path::new(MEMORY))
}

pub fn read_trace(path: &Path) -> Result<SolverTrace> {
    trace_from(&read_bytes(path)?, path)
}

fn trace_from(bytes: &[u8], path: &Path) -> Result<SolverTrace> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    if rdr.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(Error::Format(format!("{}: unexpected trace header", path.display())));
    }
    let mut records = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            record[i].parse().map_err(|_| Error::Format(format!("{}: bad number `{}`", path.display(), &record[i])))
        };
        let iter = record[0]
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad iteration `{}`", path.display(), &record[0])))?;
        records.push(IterRecord {
            iter,
            er: [num(1)?, num(2)?, num(3)?, num(4)?, num(5)?],
            objective: num(6)?,
            rho: num(7)?,
        });
    }
    Ok(SolverTrace { records })
}

/// Artifacts of one solver run.
pub struct RunResult<'a> {
    pub l: &'a Tensor3,
    pub s: &'a Tensor3,
    pub c: &'a Matrix,
    pub trace: &'a SolverTrace,
    pub metrics: Option<&'a ClusterMetrics>,
    pub labels: Option<&'a [usize]>,
}

/// Paths written by [`save_result`]; optional entries are absent when the
/// run had nothing to write for them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultPaths {
    pub l: PathBuf,
    pub s: PathBuf,
    pub c: PathBuf,
    pub trace: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

/// Writes `L.t3d`, `S.t3d`, `C.m2d`, `trace.csv` and, when available,
/// `metrics.json` and `labels.csv` into `dir`.
pub fn save_result(result: &RunResult<'_>, dir: &Path) -> Result<ResultPaths> {
    let n = result.c.nrows();
    if !result.c.is_square() || result.l.dims() != result.s.dims() || result.l.dims()[..2] != [n, n] {
        return Err(Error::ShapeMismatch(format!(
            "L {:?}, S {:?}, C {:?}",
            result.l.dims(),
            result.s.dims(),
            result.c.shape()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ResultPaths {
        l: dir.join("L.t3d"),
        s: dir.join("S.t3d"),
        c: dir.join("C.m2d"),
        trace: dir.join("trace.csv"),
        metrics: result.metrics.map(|_| dir.join("metrics.json")),
        labels: result.labels.map(|_| dir.join("labels.csv")),
    };
    write_tensor(&paths.l, result.l)?;
    write_tensor(&paths.s, result.s)?;
    write_matrix(&paths.c, result.c)?;
    write_bytes(&paths.trace, &encode_trace(result.trace))?;
    if let (Some(path), Some(metrics)) = (&paths.metrics, result.metrics) {
        write_bytes(path, &to_json(metrics))?;
    }
    if let (Some(path), Some(labels)) = (&paths.labels, result.labels) {
        write_labels(path, labels)?;
    }
    Ok(paths)
}

pub fn read_metrics(path: &Path) -> Result<ClusterMetrics> {
    parse_json(&read_bytes(path)?, path)
}
