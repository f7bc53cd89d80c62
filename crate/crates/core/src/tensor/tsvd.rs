use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::fourier::{independent_slices, is_self_conjugate};
use super::{mode3_dft, mode3_idft, FourierTensor3, Tensor3};
use crate::error::{Error, Result};

type CMatrix = DMatrix<Complex64>;

/// Thin SVD of one Fourier slice: `(U, sigma, V^H)` with `sigma` sorted
/// descending. Self-conjugate slices are real and go through the real
/// solver so that their singular vectors stay real.
struct SliceSvd {
    u: CMatrix,
    sigma: DVector<f64>,
    v_t: CMatrix,
}

fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

fn slice_svd(m: &CMatrix, k: usize, depth: usize, vectors: bool) -> Result<SliceSvd> {
    const MAX_SWEEPS: usize = 0; // no cap
    if is_self_conjugate(k, depth) {
        let svd =
            real_part(m).try_svd(vectors, vectors, f64::EPSILON, MAX_SWEEPS).ok_or(Error::SvdFailure { slice: k })?;
        Ok(SliceSvd {
            u: svd.u.as_ref().map(to_complex).unwrap_or_else(|| CMatrix::zeros(0, 0)),
            v_t: svd.v_t.as_ref().map(to_complex).unwrap_or_else(|| CMatrix::zeros(0, 0)),
            sigma: svd.singular_values,
        })
    } else {
        let svd =
            m.clone().try_svd(vectors, vectors, f64::EPSILON, MAX_SWEEPS).ok_or(Error::SvdFailure { slice: k })?;
        Ok(SliceSvd {
            u: svd.u.unwrap_or_else(|| CMatrix::zeros(0, 0)),
            v_t: svd.v_t.unwrap_or_else(|| CMatrix::zeros(0, 0)),
            sigma: svd.singular_values,
        })
    }
}

fn singular_values(m: &CMatrix, k: usize, depth: usize) -> Result<DVector<f64>> {
    Ok(slice_svd(m, k, depth, false)?.sigma)
}

/// Weight of slice `k` when summing over the full spectrum using only the
/// independent half.
fn mirror_weight(k: usize, depth: usize) -> f64 {
    if is_self_conjugate(k, depth) {
        1.0
    } else {
        2.0
    }
}

/// t-product `x * y` computed slice-wise in the Fourier domain.
pub fn tprod(x: &Tensor3, y: &Tensor3) -> Result<Tensor3> {
    let [ni, nj, nk] = x.dims();
    let [yj, nl, yk] = y.dims();
    if nj != yj || nk != yk {
        return Err(Error::ShapeMismatch(format!("t-product of {:?} and {:?}", x.dims(), y.dims())));
    }
    let fx = mode3_dft(x);
    let fy = mode3_dft(y);
    let mut out = FourierTensor3::zeros([ni, nl, nk]);
    for k in 0..independent_slices(nk) {
        let prod = fx.slice_matrix(k) * fy.slice_matrix(k);
        out.set_slice_mirrored(k, &prod);
    }
    mode3_idft(&out)
}

/// Factors of a t-SVD `x = U * S * V^T`.
#[derive(Clone, Debug)]
pub struct TsvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    /// Fourier-domain singular values, one descending vector per slice.
    pub spectrum: Vec<Vec<f64>>,
}

impl TsvdFactors {
    pub fn reconstruct(&self) -> Result<Tensor3> {
        tprod(&tprod(&self.u, &self.s)?, &self.v.t_transpose())
    }
}

/// Extends orthonormal columns `q` (m x r) to a full m x m unitary basis.
fn complete_basis(q: &CMatrix, m: usize) -> CMatrix {
    let mut cols: Vec<DVector<Complex64>> = Vec::with_capacity(m);
    let push = |cols: &mut Vec<DVector<Complex64>>, mut v: DVector<Complex64>| {
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for c in cols.iter() {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / Complex64::new(norm, 0.0));
        }
    };
    for c in q.column_iter() {
        if cols.len() == m {
            break;
        }
        push(&mut cols, c.into_owned());
    }
    for e in 0..m {
        if cols.len() == m {
            break;
        }
        let mut v = DVector::<Complex64>::zeros(m);
        v[e] = Complex64::new(1.0, 0.0);
        push(&mut cols, v);
    }
    CMatrix::from_columns(&cols)
}

/// Tensor SVD with full orthogonal factors.
pub fn tsvd(x: &Tensor3) -> Result<TsvdFactors> {
    let [ni, nj, nk] = x.dims();
    let fx = mode3_dft(x);
    let mut fu = FourierTensor3::zeros([ni, ni, nk]);
    let mut fs = FourierTensor3::zeros([ni, nj, nk]);
    let mut fv = FourierTensor3::zeros([nj, nj, nk]);
    let mut spectrum = vec![Vec::new(); nk];
    for k in 0..independent_slices(nk) {
        let svd = slice_svd(&fx.slice_matrix(k), k, nk, true)?;
        let u = complete_basis(&svd.u, ni);
        let v = complete_basis(&svd.v_t.adjoint(), nj);
        let mut s = CMatrix::zeros(ni, nj);
        for (l, &sigma) in svd.sigma.iter().enumerate() {
            s[(l, l)] = Complex64::new(sigma, 0.0);
        }
        fu.set_slice_mirrored(k, &u);
        fs.set_slice_mirrored(k, &s);
        fv.set_slice_mirrored(k, &v);
        spectrum[k] = svd.sigma.iter().copied().collect();
        let mirror = (nk - k) % nk;
        spectrum[mirror] = spectrum[k].clone();
    }
    Ok(TsvdFactors { u: mode3_idft(&fu)?, s: mode3_idft(&fs)?, v: mode3_idft(&fv)?, spectrum })
}

/// Tensor nuclear norm: the sum of the nuclear norms of all Fourier
/// slices, without a `1/K` factor.
pub fn tnn(x: &Tensor3) -> Result<f64> {
    let nk = x.dims()[2];
    let fx = mode3_dft(x);
    let mut total = 0.0;
    for k in 0..independent_slices(nk) {
        let sigma = singular_values(&fx.slice_matrix(k), k, nk)?;
        total += mirror_weight(k, nk) * sigma.sum();
    }
    Ok(total)
}

/// Number of tubes on the diagonal of `S` that are nonzero, treating
/// singular values below `1e-12` times the largest as zero.
pub fn tubal_rank(x: &Tensor3) -> Result<usize> {
    let nk = x.dims()[2];
    let fx = mode3_dft(x);
    let mut per_index: Vec<f64> = Vec::new();
    for k in 0..independent_slices(nk) {
        let sigma = singular_values(&fx.slice_matrix(k), k, nk)?;
        if per_index.len() < sigma.len() {
            per_index.resize(sigma.len(), 0.0);
        }
        for (l, s) in sigma.iter().enumerate() {
            per_index[l] = per_index[l].max(*s);
        }
    }
    let largest = per_index.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(per_index.iter().filter(|&&s| s > 1e-12 * largest).count())
}

/// Tensor singular value thresholding: every Fourier slice has its
/// singular values soft-thresholded by `tau`.
pub fn tsvt(x: &Tensor3, tau: f64) -> Result<Tensor3> {
    Ok(tsvt_with_norm(x, tau)?.0)
}

/// [`tsvt`] that also returns the tensor nuclear norm of the result, which
/// falls out of the thresholded singular values for free.
pub fn tsvt_with_norm(x: &Tensor3, tau: f64) -> Result<(Tensor3, f64)> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParam(format!("t-SVT threshold must be nonnegative, got {tau}")));
    }
    let [ni, nj, nk] = x.dims();
    let fx = mode3_dft(x);
    let mut out = FourierTensor3::zeros([ni, nj, nk]);
    let mut norm = 0.0;
    for k in 0..independent_slices(nk) {
        let slice = fx.slice_matrix(k);
        let svd = slice_svd(&slice, k, nk, true)?;
        let keep = svd.sigma.iter().take_while(|&&s| s > tau).count();
        if keep == 0 {
            continue;
        }
        let shrunk: Vec<f64> = svd.sigma.iter().take(keep).map(|s| s - tau).collect();
        norm += mirror_weight(k, nk) * shrunk.iter().sum::<f64>();
        let mut left = svd.u.columns(0, keep).into_owned();
        for (l, s) in shrunk.iter().enumerate() {
            left.column_mut(l).scale_mut(*s);
        }
        let recomposed = left * svd.v_t.rows(0, keep);
        out.set_slice_mirrored(k, &recomposed);
    }
    Ok((mode3_idft(&out)?, norm))
}
