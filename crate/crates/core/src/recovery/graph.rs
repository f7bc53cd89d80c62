use nalgebra::{Cholesky, Dyn};

use super::View;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Solves the per-view graph subproblem
///
/// `argmin_G |Q - X G_oo|_F^2 + |G - P|_F^2`
///
/// where `G_oo` is the observed-by-observed block of the `n x n` graph `G`.
/// Entries outside that block equal `P`; the block itself is
/// `(X^T X + I)^{-1} (X^T Q + P_oo)`. The Cholesky factor depends only on the
/// view data, so it is computed once.
pub struct GraphSolver {
    observed: Vec<usize>,
    data: Matrix,
    chol: Cholesky<f64, Dyn>,
}

impl GraphSolver {
    pub fn new(view: &View) -> Result<Self> {
        let gram = view.data.tr_mul(&view.data);
        let system = gram + Matrix::identity(view.observed_count(), view.observed_count());
        let chol =
            Cholesky::new(system).ok_or_else(|| Error::Factorization("X^T X + I is not positive definite".into()))?;
        Ok(Self { observed: view.observed.clone(), data: view.data.clone(), chol })
    }

    pub fn solve(&self, q: &Matrix, p: &Matrix) -> Result<Matrix> {
        let nv = self.observed.len();
        if q.shape() != self.data.shape() {
            return Err(Error::ShapeMismatch(format!("target {:?} vs view data {:?}", q.shape(), self.data.shape())));
        }
        if !p.is_square() || p.nrows() < nv {
            return Err(Error::ShapeMismatch(format!("prior graph {:?}", p.shape())));
        }
        let mut rhs = self.data.tr_mul(q);
        for (a, &ga) in self.observed.iter().enumerate() {
            for (b, &gb) in self.observed.iter().enumerate() {
                rhs[(a, b)] += p[(ga, gb)];
            }
        }
        let block = self.chol.solve(&rhs);
        let mut g = p.clone();
        for (a, &ga) in self.observed.iter().enumerate() {
            for (b, &gb) in self.observed.iter().enumerate() {
                g[(ga, gb)] = block[(a, b)];
            }
        }
        Ok(g)
    }

    /// `X - X G_oo`, the self-expression residual of this view under `g`.
    pub fn residual(&self, g: &Matrix) -> Matrix {
        let block = observed_block(g, &self.observed);
        &self.data - &self.data * block
    }
}

pub(crate) fn observed_block(g: &Matrix, observed: &[usize]) -> Matrix {
    let nv = observed.len();
    Matrix::from_fn(nv, nv, |a, b| g[(observed[a], observed[b])])
}

/// One-shot form of [`GraphSolver::solve`].
pub fn graph_subproblem(view: &View, q: &Matrix, p: &Matrix) -> Result<Matrix> {
    GraphSolver::new(view)?.solve(q, p)
}
