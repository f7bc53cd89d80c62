//! Synthetic data: tubal-low-rank tensors and their mode mixtures, sparse
//! corruption, graded inter-slice correlation, planted multiview clusters
//! and missing-view masks. Every generator is a pure function of its RNG.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::{View, ViewSet};
use crate::tensor::{permute, tprod, Matrix, ModeId, Tensor3};

/// `ceil(frac * n)`, robust to products such as `0.3 * 10` landing a hair
/// above an integer.
pub fn ceil_count(frac: f64, n: usize) -> usize {
    let x = frac * n as f64;
    let rounded = x.round();
    if (x - rounded).abs() <= 1e-9 * x.abs().max(1.0) {
        rounded as usize
    } else {
        x.ceil() as usize
    }
}

fn gaussian<R: Rng>(dims: [usize; 3], rng: &mut R) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.sample(StandardNormal))
}

fn default_rank_frac() -> f64 {
    0.1
}
fn default_sparsity() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dims: [usize; 3],
    #[serde(default = "default_rank_frac")]
    pub rank_frac: f64,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MixtureSpec {
    pub fn new(dims: [usize; 3], seed: u64) -> Self {
        Self { dims, rank_frac: default_rank_frac(), sparsity: default_sparsity(), seed }
    }

    pub fn rank(&self) -> usize {
        ceil_count(self.rank_frac, self.dims[0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDims(format!("{:?}", self.dims)));
        }
        if !(self.rank_frac > 0.0 && self.rank_frac <= 1.0) {
            return Err(Error::InvalidParam(format!("rank_frac {} not in (0, 1]", self.rank_frac)));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::InvalidParam(format!("sparsity {} not in [0, 1]", self.sparsity)));
        }
        let r = self.rank();
        for mode in ModeId::ALL {
            let [a, b, _] = mode.permuted_dims(self.dims);
            if r > a.min(b) {
                return Err(Error::InvalidParam(format!(
                    "rank {r} exceeds the {a}x{b} slices of mode {}",
                    mode.number()
                )));
            }
        }
        Ok(())
    }
}

/// Product of two standard-normal factors with inner tubal dimension `r`,
/// built in `mode` orientation and returned in original orientation.
pub fn gen_lowrank_mode_tensor<R: Rng>(dims: [usize; 3], r: usize, mode: ModeId, rng: &mut R) -> Result<Tensor3> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidDims(format!("{dims:?}")));
    }
    let [a, b, c] = mode.permuted_dims(dims);
    if r == 0 || r > a.min(b) {
        return Err(Error::InvalidParam(format!("rank {r} must lie in 1..={}", a.min(b))));
    }
    let left = gaussian([a, r, c], rng);
    let right = gaussian([r, b, c], rng);
    Ok(permute(&tprod(&left, &right)?, mode, true))
}

/// Sparse corruption with exactly `ceil(sparsity * len)` nonzeros at uniform
/// positions, values uniform on `[-scale, scale]`.
pub fn gen_sparse_noise<R: Rng>(dims: [usize; 3], sparsity: f64, scale: f64, rng: &mut R) -> Result<Tensor3> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::InvalidParam(format!("sparsity {sparsity} not in [0, 1]")));
    }
    let mut s = Tensor3::zeros(dims[0], dims[1], dims[2]);
    let total = s.len();
    let count = ceil_count(sparsity, total).min(total);
    if count == 0 || scale == 0.0 {
        return Ok(s);
    }
    let mut positions = sample(rng, total, count).into_vec();
    positions.sort_unstable();
    let data = s.as_mut_slice();
    for p in positions {
        let mut v = 0.0;
        while v == 0.0 {
            v = rng.random_range(-1.0..=1.0);
        }
        data[p] = v * scale;
    }
    Ok(s)
}

fn rms(t: &Tensor3) -> f64 {
    t.frobenius_norm() / (t.len() as f64).sqrt()
}

/// Low-rank tensor mixed over all three modes plus sparse corruption.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub l: Tensor3,
    pub s: Tensor3,
    pub x: Tensor3,
}

pub fn gen_mode_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = spec.rank();
    let mut l = gen_lowrank_mode_tensor(spec.dims, r, ModeId::Mode1, &mut rng)?;
    for mode in [ModeId::Mode2, ModeId::Mode3] {
        l.add_scaled(1.0, &gen_lowrank_mode_tensor(spec.dims, r, mode, &mut rng)?)?;
    }
    let noise = gen_sparse_noise(spec.dims, spec.sparsity, rms(&l), &mut rng)?;
    let x = l.add(&noise)?;
    // Recomputing S from the rounded sum makes X - L - S vanish exactly.
    let mut s = x.sub(&l)?;
    for (sv, nv) in s.as_mut_slice().iter_mut().zip(noise.as_slice()) {
        if *nv == 0.0 {
            *sv = 0.0;
        }
    }
    Ok(Mixture { l, s, x })
}

/// `m x m x num_views` tensor whose slice `v` is the mean of the `window`
/// base matrices `v, v+1, ...` (indices taken cyclically). Base entries are
/// uniform on `(0, 1)`; wider windows give more strongly correlated slices.
pub fn gen_mi_sequence<R: Rng>(num_views: usize, m: usize, window: usize, rng: &mut R) -> Result<Tensor3> {
    if m == 0 || num_views < 2 {
        return Err(Error::InvalidParam(format!("need m >= 1 and at least 2 views, got m={m}, views={num_views}")));
    }
    if window == 0 || window >= num_views {
        return Err(Error::InvalidParam(format!("window {window} must lie in 1..={}", num_views - 1)));
    }
    let base: Vec<Vec<f64>> = (0..num_views).map(|_| (0..m * m).map(|_| rng.random::<f64>()).collect()).collect();
    let mut out = Tensor3::zeros(m, m, num_views);
    let plane = m * m;
    let data = out.as_mut_slice();
    for v in 0..num_views {
        let slice = &mut data[v * plane..(v + 1) * plane];
        for t in 0..window {
            for (o, b) in slice.iter_mut().zip(&base[(v + t) % num_views]) {
                *o += b;
            }
        }
        if window > 1 {
            slice.iter_mut().for_each(|o| *o /= window as f64);
        }
    }
    Ok(out)
}

fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = hi - lo;
    values
        .iter()
        .map(|&v| if width > 0.0 { (((v - lo) / width * bins as f64) as usize).min(bins - 1) } else { 0 })
        .collect()
}

fn pair_mi(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * bins + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..bins {
        for y in 0..bins {
            let c = joint[x * bins + y];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            mi += pxy * (c as f64 * n / (pa[x] as f64 * pb[y] as f64)).ln();
        }
    }
    mi
}

/// Histogram estimate of mutual information between frontal slices,
/// averaged over all unordered slice pairs. Natural log.
pub fn mutual_information(x: &Tensor3, bins: usize) -> Result<f64> {
    let k = x.dims()[2];
    if bins < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 bins, got {bins}")));
    }
    if k < 2 {
        return Err(Error::InvalidParam("need at least 2 slices".into()));
    }
    let binned: Vec<Vec<usize>> = (0..k).map(|v| bin_indices(x.frontal_raw(v), bins)).collect();
    let mut total = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            total += pair_mi(&binned[a], &binned[b], bins);
        }
    }
    Ok(total / (k * (k - 1) / 2) as f64)
}

fn default_view_dims() -> Vec<usize> {
    vec![20, 25, 30]
}
fn default_subspace_dim() -> usize {
    3
}
fn default_noise() -> f64 {
    0.05
}

/// Union-of-subspaces multiview data with balanced clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n: usize,
    pub clusters: usize,
    #[serde(default = "default_view_dims")]
    pub view_dims: Vec<usize>,
    #[serde(default = "default_subspace_dim")]
    pub subspace_dim: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PlantedSpec {
    pub fn new(n: usize, clusters: usize, seed: u64) -> Self {
        Self {
            n,
            clusters,
            view_dims: default_view_dims(),
            subspace_dim: default_subspace_dim(),
            noise: default_noise(),
            seed,
        }
    }
}

/// Balanced contiguous labels: `i * clusters / n`.
pub fn balanced_labels(n: usize, clusters: usize) -> Vec<usize> {
    (0..n).map(|i| i * clusters / n).collect()
}

fn orthonormal_basis<R: Rng>(d: usize, k: usize, rng: &mut R) -> Matrix {
    let raw = Matrix::from_fn(d, k, |_, _| rng.sample(StandardNormal));
    raw.qr().q().columns(0, k).into_owned()
}

/// Fully observed planted data; each view places every cluster in its own
/// random `subspace_dim`-dimensional subspace.
pub fn gen_planted_multiview(spec: &PlantedSpec) -> Result<ViewSet> {
    let PlantedSpec { n, clusters, ref view_dims, subspace_dim, noise, seed } = *spec;
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidParam(format!("clusters {clusters} must lie in 1..={n}")));
    }
    if view_dims.is_empty() {
        return Err(Error::InvalidParam("at least one view is required".into()));
    }
    if subspace_dim == 0 || view_dims.iter().any(|&d| d < subspace_dim) {
        return Err(Error::InvalidParam(format!(
            "subspace dimension {subspace_dim} must be positive and fit every view {view_dims:?}"
        )));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidParam(format!("noise {noise} must be nonnegative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = balanced_labels(n, clusters);
    let mut views = Vec::with_capacity(view_dims.len());
    for &d in view_dims {
        let bases: Vec<Matrix> = (0..clusters).map(|_| orthonormal_basis(d, subspace_dim, &mut rng)).collect();
        let mut data = Matrix::zeros(d, n);
        for (i, &c) in labels.iter().enumerate() {
            let coef = nalgebra::DVector::from_fn(subspace_dim, |_, _| rng.sample(StandardNormal));
            let mut col = &bases[c] * coef;
            if noise > 0.0 {
                col += nalgebra::DVector::from_fn(d, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
            }
            data.set_column(i, &col);
        }
        views.push(View { data, observed: (0..n).collect() });
    }
    ViewSet::new(n, views, Some(labels))
}

/// Per-view observed sample indices (sorted). `ceil(p * n)` samples are
/// each dropped from a uniformly chosen nonempty proper subset of views.
pub fn gen_missing_mask<R: Rng>(n: usize, num_views: usize, p: f64, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParam(format!("missing ratio {p} not in [0, 1)")));
    }
    if num_views == 0 || num_views > 63 {
        return Err(Error::InvalidParam(format!("view count {num_views} not in 1..=63")));
    }
    let count = ceil_count(p, n);
    if count > 0 && num_views < 2 {
        return Err(Error::InvalidParam("a single view cannot lose samples".into()));
    }
    let mut removed = vec![0u64; n];
    if count > 0 {
        let upper = (1u64 << num_views) - 2;
        let mut chosen = sample(rng, n, count).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            removed[i] = rng.random_range(1..=upper);
        }
    }
    Ok((0..num_views).map(|v| (0..n).filter(|&i| removed[i] & (1 << v) == 0).collect()).collect())
}
