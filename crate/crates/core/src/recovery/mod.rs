//! Low-rank graph-tensor recovery: the joint tensor / inter-view solver for
//! incomplete multiview data, and mode-combination tensor robust PCA.

mod admm;
mod graph;
mod trpca;

pub use admm::{jtiv_lrr_fit, l_update, multiplier_update, residuals, s_update, z_update, JtivFit, JtivSolver};
pub use graph::{graph_subproblem, GraphSolver};
pub use trpca::{default_trpca_lambda, trpca_fit, TrpcaFit, TrpcaSolver};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

/// One view: a `d x n_v` feature matrix whose columns are the samples
/// listed (by global index) in `observed`.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub data: Matrix,
    pub observed: Vec<usize>,
}

impl View {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.len()
    }
}

/// Per-view features plus the incompleteness structure.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSet {
    n: usize,
    views: Vec<View>,
    labels: Option<Vec<usize>>,
}

impl ViewSet {
    pub fn new(n: usize, views: Vec<View>, labels: Option<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("a view set needs at least one sample".into()));
        }
        if views.is_empty() {
            return Err(Error::InvalidParam("a view set needs at least one view".into()));
        }
        let mut covered = vec![false; n];
        for (v, view) in views.iter().enumerate() {
            if view.data.ncols() != view.observed.len() {
                return Err(Error::InvalidView {
                    view: v,
                    reason: format!("{} data columns but {} observed indices", view.data.ncols(), view.observed.len()),
                });
            }
            if let Some(w) = view.observed.windows(2).find(|w| w[0] >= w[1]) {
                return Err(Error::InvalidView {
                    view: v,
                    reason: format!("observed indices not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
            for &i in &view.observed {
                if i >= n {
                    return Err(Error::InvalidView {
                        view: v,
                        reason: format!("observed index {i} out of range for n = {n}"),
                    });
                }
                covered[i] = true;
            }
        }
        if let Some(sample) = covered.iter().position(|c| !c) {
            return Err(Error::UnobservedSample { sample });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidParam(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Self { n, views, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Copy with every sample column scaled to unit Euclidean norm.
    /// All-zero columns are left alone.
    pub fn normalized(&self) -> Self {
        let views = self
            .views
            .iter()
            .map(|v| {
                let mut data = v.data.clone();
                for mut col in data.column_iter_mut() {
                    let norm = col.norm();
                    if norm > 0.0 {
                        col /= norm;
                    }
                }
                View { data, observed: v.observed.clone() }
            })
            .collect();
        Self { n: self.n, views, labels: self.labels.clone() }
    }

    /// Keeps, in each view, only the samples listed in `keep[v]`.
    pub fn restrict(&self, keep: &[Vec<usize>]) -> Result<Self> {
        if keep.len() != self.views.len() {
            return Err(Error::ShapeMismatch(format!("mask has {} views, data has {}", keep.len(), self.views.len())));
        }
        let views = self
            .views
            .iter()
            .zip(keep)
            .map(|(view, allowed)| {
                let cols: Vec<usize> = view
                    .observed
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| allowed.binary_search(g).is_ok())
                    .map(|(c, _)| c)
                    .collect();
                View {
                    data: view.data.select_columns(cols.iter()),
                    observed: cols.iter().map(|&c| view.observed[c]).collect(),
                }
            })
            .collect();
        Self::new(self.n, views, self.labels.clone())
    }
}

fn default_lambda() -> f64 {
    10.0
}
// Faster growth lets the sparse part swallow the graph before the low-rank
// part forms; a smaller start cannot reach tol within max_iter.
fn default_rho0() -> f64 {
    0.3
}
fn default_rho_mult() -> f64 {
    1.1
}
fn default_rho_max() -> f64 {
    1e10
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    200
}
fn default_true() -> bool {
    true
}

/// ADMM hyperparameters shared by both solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    #[serde(default = "default_lambda")]
    pub lambda1: f64,
    #[serde(default = "default_lambda")]
    pub lambda2: f64,
    #[serde(default = "default_lambda")]
    pub lambda3: f64,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_rho_mult")]
    pub rho_mult: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    /// When false the sparse component is pinned to zero (ablation).
    #[serde(default = "default_true")]
    pub sparse_term: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda1: default_lambda(),
            lambda2: default_lambda(),
            lambda3: default_lambda(),
            rho0: default_rho0(),
            rho_mult: default_rho_mult(),
            rho_max: default_rho_max(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: 0,
            sparse_term: true,
        }
    }
}

impl SolverParams {
    /// Defaults for tensor robust PCA: a smaller starting penalty and a
    /// tighter tolerance, which matter for exact low-rank recovery.
    pub fn trpca() -> Self {
        Self { rho0: 1e-3, tol: 1e-7, max_iter: 500, ..Self::default() }
    }

    pub fn lambdas(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(what.to_string()));
        if self.lambdas().iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("lambdas must be finite and nonnegative");
        }
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return bad("rho0 must be positive");
        }
        if !(self.rho_mult >= 1.0) || !self.rho_mult.is_finite() {
            return bad("rho_mult must be at least 1");
        }
        if !(self.rho_max >= self.rho0) {
            return bad("rho_max must be at least rho0");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }
}

/// All ADMM variables of the graph-tensor solver.
///
/// `z[m]` is held in mode-`m+1` orientation; `j[0]` pairs with the
/// `G = L + S` constraint and `j[m+1]` with `Z_{m+1}`.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub g: Tensor3,
    pub l: Tensor3,
    pub s: Tensor3,
    pub z: [Tensor3; 3],
    pub j: [Tensor3; 4],
    pub f: Vec<Matrix>,
    pub rho: f64,
}

impl SolverState {
    /// Zero initialization for `n` samples and the given views.
    pub fn zeros(views: &ViewSet, rho: f64) -> Self {
        let n = views.n();
        let nv = views.num_views();
        let base = Tensor3::zeros(n, n, nv);
        let z2 = Tensor3::zeros(n, nv, n);
        let z3 = Tensor3::zeros(nv, n, n);
        Self {
            g: base.clone(),
            l: base.clone(),
            s: base.clone(),
            z: [base.clone(), z2.clone(), z3.clone()],
            j: [base.clone(), base, z2, z3],
            f: views.views().iter().map(|v| Matrix::zeros(v.dim(), v.observed_count())).collect(),
            rho,
        }
    }
}

/// Residuals and objective of one ADMM iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    /// One-based iteration number.
    pub iter: usize,
    pub er: [f64; 5],
    pub objective: f64,
    /// Penalty used during this iteration.
    pub rho: f64,
}

impl IterRecord {
    pub fn max_residual(&self) -> f64 {
        self.er.iter().fold(0.0, |m, v| m.max(*v))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
}

/// Stacks `n x n` graphs as the frontal slices of an `n x n x V` tensor.
pub fn stack_graph_tensor(graphs: &[Matrix]) -> Result<Tensor3> {
    if let Some(g) = graphs.iter().find(|g| !g.is_square()) {
        return Err(Error::ShapeMismatch(format!("graph of shape {:?} is not square", g.shape())));
    }
    Tensor3::from_frontal_slices(graphs)
}

/// `C = (1/V) sum_v (|L_v| + |L_v^T|) / 2`, exactly symmetric.
pub fn consistency_matrix(l: &Tensor3) -> Matrix {
    let [n, n2, nv] = l.dims();
    assert_eq!(n, n2, "graph tensor slices must be square");
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for v in 0..nv {
                acc += (l.get(i, j, v).abs() + l.get(j, i, v).abs()) / 2.0;
            }
            let value = acc / nv as f64;
            c[(i, j)] = value;
            c[(j, i)] = value;
        }
    }
    c
}

/// Relative Frobenius errors of recovered low-rank and sparse parts. A
/// zero ground truth falls back to the absolute error.
pub fn reconstruction_errors(
    l_true: &Tensor3,
    l_hat: &Tensor3,
    s_true: &Tensor3,
    s_hat: &Tensor3,
) -> Result<(f64, f64)> {
    let rel = |truth: &Tensor3, hat: &Tensor3| -> Result<f64> {
        let err = truth.sub(hat)?.frobenius_norm();
        let norm = truth.frobenius_norm();
        Ok(if norm == 0.0 { err } else { err / norm })
    };
    Ok((rel(l_true, l_hat)?, rel(s_true, s_hat)?))
}
