use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Tensor3;
use crate::error::{Error, Result};

/// Complex tensor holding the mode-3 spectrum of a real tensor. Same
/// slice-major layout as [`Tensor3`].
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl FourierTensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, data: vec![Complex64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]] }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<Complex64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) || data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidDims(format!("{dims:?} with {} values", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Length of the mode-3 transform.
    pub fn origin_length(&self) -> usize {
        self.dims[2]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[(k * self.dims[0] + i) * self.dims[1] + j]
    }

    pub fn slice_matrix(&self, k: usize) -> DMatrix<Complex64> {
        let n = self.dims[0] * self.dims[1];
        DMatrix::from_row_slice(self.dims[0], self.dims[1], &self.data[k * n..(k + 1) * n])
    }

    pub fn set_slice(&mut self, k: usize, m: &DMatrix<Complex64>) {
        let [rows, cols, _] = self.dims;
        assert_eq!(m.shape(), (rows, cols));
        let base = k * rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                self.data[base + i * cols + j] = m[(i, j)];
            }
        }
    }

    /// Sets slice `k` to `m` and slice `K - k` to its conjugate, which keeps
    /// the spectrum of a real tensor consistent.
    pub fn set_slice_mirrored(&mut self, k: usize, m: &DMatrix<Complex64>) {
        self.set_slice(k, m);
        let depth = self.dims[2];
        let mirror = (depth - k) % depth;
        if mirror != k {
            self.set_slice(mirror, &m.map(|z| z.conj()));
        }
    }

    /// Sum of squared moduli.
    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Number of leading Fourier slices that determine the spectrum of a real
/// tensor; the rest are conjugate mirrors.
pub(crate) fn independent_slices(depth: usize) -> usize {
    depth / 2 + 1
}

/// True when slice `k` of a real tensor's spectrum is its own mirror, i.e.
/// purely real.
pub(crate) fn is_self_conjugate(k: usize, depth: usize) -> bool {
    k == 0 || 2 * k == depth
}

fn transform(dims: [usize; 3], data: &mut [Complex64], inverse: bool) {
    let [ni, nj, nk] = dims;
    if nk == 1 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(nk) } else { planner.plan_fft_forward(nk) };
    let plane = ni * nj;
    let mut fibers = vec![Complex64::new(0.0, 0.0); plane * nk];
    for k in 0..nk {
        for p in 0..plane {
            fibers[p * nk + k] = data[k * plane + p];
        }
    }
    fft.process(&mut fibers);
    for k in 0..nk {
        for p in 0..plane {
            data[k * plane + p] = fibers[p * nk + k];
        }
    }
}

/// Length-K DFT of every mode-3 fiber.
pub fn mode3_dft(x: &Tensor3) -> FourierTensor3 {
    let dims = x.dims();
    let mut data: Vec<Complex64> = x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(dims, &mut data, false);
    FourierTensor3 { dims, data }
}

/// Normalized inverse DFT along mode 3. Imaginary parts are discarded; a
/// residue larger than `1e-6` (relative to the output scale) means the input
/// was not the spectrum of a real tensor.
pub fn mode3_idft(f: &FourierTensor3) -> Result<Tensor3> {
    let dims = f.dims;
    let mut data = f.data.clone();
    transform(dims, &mut data, true);
    let scale = 1.0 / dims[2] as f64;
    let mut residue = 0.0f64;
    let mut magnitude = 0.0f64;
    let values: Vec<f64> = data
        .iter()
        .map(|z| {
            let re = z.re * scale;
            residue = residue.max((z.im * scale).abs());
            magnitude = magnitude.max(re.abs());
            re
        })
        .collect();
    if residue > 1e-6 * magnitude.max(1.0) {
        return Err(Error::CorruptSpectrum { residue });
    }
    Tensor3::from_vec(dims, values)
}
