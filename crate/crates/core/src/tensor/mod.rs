//! Dense order-3 tensors and the t-algebra built on the mode-3 DFT.
//!
//! Values are stored slice-major: frontal slice `k` is a contiguous
//! row-major `I x J` block, so entry `(i, j, k)` lives at
//! `k * I * J + i * J + j`. This is also the on-disk order of the T3D1
//! container.

mod fourier;
mod tsvd;

pub use fourier::{mode3_dft, mode3_idft, FourierTensor3};
pub use tsvd::{tnn, tprod, tsvd, tsvt, tsvt_with_norm, tubal_rank, TsvdFactors};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    /// All-zero tensor. Panics on a zero dimension.
    pub fn zeros(i: usize, j: usize, k: usize) -> Self {
        assert!(i > 0 && j > 0 && k > 0, "tensor dims must be positive");
        Self { dims: [i, j, k], data: vec![0.0; i * j * k] }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let count = dims[0] * dims[1] * dims[2];
        if data.len() != count {
            return Err(Error::InvalidDims(format!("{:?} needs {} values, got {}", dims, count, data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims[0], dims[1], dims[2]);
        for k in 0..dims[2] {
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    /// The t-identity: identity first frontal slice, zeros elsewhere.
    pub fn identity(n: usize, k: usize) -> Self {
        let mut t = Self::zeros(n, n, k);
        for i in 0..n {
            t.set(i, i, 0, 1.0);
        }
        t
    }

    /// Stacks equally-shaped matrices as frontal slices, in order.
    pub fn from_frontal_slices(slices: &[Matrix]) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::InvalidDims("no slices to stack".into()))?;
        let (rows, cols) = first.shape();
        let mut t = Self::from_vec([rows, cols, slices.len()], vec![0.0; rows * cols * slices.len()])?;
        for (k, m) in slices.iter().enumerate() {
            if m.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch(format!("slice {k} is {:?}, expected {:?}", m.shape(), (rows, cols))));
            }
            t.set_frontal(k, m);
        }
        Ok(t)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (k * self.dims[0] + i) * self.dims[1] + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Frontal slice `k` as an `I x J` matrix.
    pub fn frontal(&self, k: usize) -> Matrix {
        let [i, j, _] = self.dims;
        Matrix::from_row_slice(i, j, self.frontal_raw(k))
    }

    /// Row-major values of frontal slice `k`.
    pub fn frontal_raw(&self, k: usize) -> &[f64] {
        let n = self.dims[0] * self.dims[1];
        &self.data[k * n..(k + 1) * n]
    }

    pub fn set_frontal(&mut self, k: usize, m: &Matrix) {
        let [rows, cols, _] = self.dims;
        assert_eq!(m.shape(), (rows, cols));
        for i in 0..rows {
            for j in 0..cols {
                self.set(i, j, k, m[(i, j)]);
            }
        }
    }

    /// Horizontal slice `i` as a `J x K` matrix.
    pub fn horizontal(&self, i: usize) -> Matrix {
        let [_, cols, depth] = self.dims;
        Matrix::from_fn(cols, depth, |j, k| self.get(i, j, k))
    }

    /// Lateral slice `j` as an `I x K` matrix.
    pub fn lateral(&self, j: usize) -> Matrix {
        let [rows, _, depth] = self.dims;
        Matrix::from_fn(rows, depth, |i, k| self.get(i, j, k))
    }

    pub fn frontal_slices(&self) -> Vec<Matrix> {
        (0..self.dims[2]).map(|k| self.frontal(k)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`, elementwise.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self { dims: self.dims, data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// In-place `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    /// Tensor transpose: every frontal slice transposed, slices `2..K`
    /// reversed (slice 1 stays first).
    pub fn t_transpose(&self) -> Self {
        let [rows, cols, depth] = self.dims;
        let mut out = Self::zeros(cols, rows, depth);
        for k in 0..depth {
            let src = (depth - k) % depth;
            for i in 0..rows {
                for j in 0..cols {
                    out.set(j, i, k, self.get(i, j, src));
                }
            }
        }
        out
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidDims(format!("{dims:?}: every dimension must be positive")));
    }
    dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]))
        .ok_or_else(|| Error::InvalidDims(format!("{dims:?} overflows")))?;
    Ok(())
}

/// Axis orientation used by the mode-permuted nuclear norms.
///
/// `Mode1` is the identity `[1,2,3]`, `Mode2` is `[1,3,2]` and `Mode3` is
/// `[3,2,1]`. Both non-trivial permutations are involutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeId {
    Mode1,
    Mode2,
    Mode3,
}

impl ModeId {
    pub const ALL: [ModeId; 3] = [ModeId::Mode1, ModeId::Mode2, ModeId::Mode3];

    /// Zero-based position in `ALL`.
    pub fn index(self) -> usize {
        match self {
            ModeId::Mode1 => 0,
            ModeId::Mode2 => 1,
            ModeId::Mode3 => 2,
        }
    }

    /// One-based mode number.
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_number(n: usize) -> Option<Self> {
        match n {
            1 => Some(ModeId::Mode1),
            2 => Some(ModeId::Mode2),
            3 => Some(ModeId::Mode3),
            _ => None,
        }
    }

    /// Dims after applying the permutation to `dims`.
    pub fn permuted_dims(self, [i, j, k]: [usize; 3]) -> [usize; 3] {
        match self {
            ModeId::Mode1 => [i, j, k],
            ModeId::Mode2 => [i, k, j],
            ModeId::Mode3 => [k, j, i],
        }
    }
}

/// Reorders axes according to `mode`. Since every mode is an involution,
/// `inverse` selects the same map; it is kept so call sites read naturally.
pub fn permute(x: &Tensor3, mode: ModeId, inverse: bool) -> Tensor3 {
    let _ = inverse;
    let [ni, nj, nk] = x.dims();
    match mode {
        ModeId::Mode1 => x.clone(),
        ModeId::Mode2 => {
            let mut out = Tensor3::zeros(ni, nk, nj);
            for k in 0..nk {
                for i in 0..ni {
                    for j in 0..nj {
                        out.set(i, k, j, x.get(i, j, k));
                    }
                }
            }
            out
        }
        ModeId::Mode3 => {
            let mut out = Tensor3::zeros(nk, nj, ni);
            for k in 0..nk {
                for i in 0..ni {
                    for j in 0..nj {
                        out.set(k, j, i, x.get(i, j, k));
                    }
                }
            }
            out
        }
    }
}

/// `sign(x) * max(|x| - tau, 0)`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding.
pub fn soft_threshold(x: &Tensor3, tau: f64) -> Result<Tensor3> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParam(format!("threshold must be nonnegative, got {tau}")));
    }
    Ok(x.map(|v| shrink(v, tau)))
}

/// Block-circulant embedding, `IK x JK`. Block `(r, c)` holds frontal slice
/// `(r - c) mod K`.
pub fn bcirc(x: &Tensor3) -> Matrix {
    let [ni, nj, nk] = x.dims();
    let mut m = Matrix::zeros(ni * nk, nj * nk);
    for r in 0..nk {
        for c in 0..nk {
            let k = (r + nk - c) % nk;
            for i in 0..ni {
                for j in 0..nj {
                    m[(r * ni + i, c * nj + j)] = x.get(i, j, k);
                }
            }
        }
    }
    m
}

/// Stacks the frontal slices vertically into an `IK x J` matrix.
pub fn unfold(x: &Tensor3) -> Matrix {
    let [ni, nj, nk] = x.dims();
    Matrix::from_fn(ni * nk, nj, |r, j| x.get(r % ni, j, r / ni))
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, k: usize) -> Result<Tensor3> {
    let (rows, cols) = m.shape();
    if k == 0 || rows % k != 0 || rows == 0 || cols == 0 {
        return Err(Error::InvalidDims(format!("cannot fold a {rows}x{cols} matrix into {k} slices")));
    }
    let ni = rows / k;
    Ok(Tensor3::from_fn([ni, cols, k], |i, j, kk| m[(kk * ni + i, j)]))
}
