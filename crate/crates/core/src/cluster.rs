//! Consensus affinity to labels (spectral embedding + k-means) and the
//! external clustering scores ACC, NMI and ARI.

use nalgebra::SymmetricEigen;
use pathfinding::prelude::{kuhn_munkres, Matrix as WeightMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITERS: usize = 300;
const SHIFT_TOL: f64 = 1e-8;

fn check_affinity(c: &Matrix, k: usize) -> Result<()> {
    let n = c.nrows();
    if !c.is_square() || n == 0 {
        return Err(Error::ShapeMismatch(format!("affinity {:?} must be square and nonempty", c.shape())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!("cluster count {k} not in 1..={n}")));
    }
    let scale = c.amax().max(1.0);
    for i in 0..n {
        for j in 0..n {
            let v = c[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParam(format!("affinity entry ({i},{j}) = {v}")));
            }
            if (v - c[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParam(format!("affinity not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Eigenvectors of the `k` largest eigenvalues of `D^{-1/2} C D^{-1/2}`,
/// before row normalization.
fn leading_eigenvectors(c: &Matrix, k: usize) -> Matrix {
    let n = c.nrows();
    let inv_sqrt: Vec<f64> = c
        .row_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut a = Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * c[(i, j)] * inv_sqrt[j]);
    // exact symmetry for the eigensolver
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    Matrix::from_fn(n, k, |i, j| eig.eigenvectors[(i, order[j])])
}

/// Row-normalized spectral embedding (`n x k`) of a symmetric nonnegative
/// affinity. Zero-degree and zero rows stay zero.
pub fn spectral_embed(c: &Matrix, k: usize) -> Result<Matrix> {
    check_affinity(c, k)?;
    let mut emb = leading_eigenvectors(c, k);
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

fn sq_dist(points: &Matrix, i: usize, centroids: &Matrix, c: usize) -> f64 {
    points.row(i).iter().zip(centroids.row(c).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn nearest(points: &Matrix, i: usize, centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.nrows();
    let mut centroids = Matrix::zeros(k, points.ncols());
    centroids.set_row(0, &points.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, mut centroids: Matrix) -> KMeansResult {
    let (n, dim) = points.shape();
    let k = centroids.nrows();
    let mut labels = vec![0usize; n];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points, i, &centroids);
            labels[i] = c;
            dists[i] = d;
        }
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let mut row = sums.row_mut(labels[i]);
            row += points.row(i);
            counts[labels[i]] += 1;
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next.set_row(c, &(sums.row(c) / counts[c] as f64));
            } else {
                // empty cluster: move it to the worst-served point
                let far = (0..n).fold(0, |b, i| if dists[i] > dists[b] { i } else { b });
                next.set_row(c, &points.row(far));
                dists[far] = 0.0;
            }
        }
        let shift = (0..k).map(|c| (next.row(c) - centroids.row(c)).norm()).fold(0.0, f64::max);
        centroids = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        let (c, d) = nearest(points, i, &centroids);
        labels[i] = c;
        inertia += d;
    }
    KMeansResult { labels, centroids, inertia }
}

/// k-means with k-means++ seeding; restart `r` draws from stream `r` of the
/// seeded generator, so adding restarts never worsens the best inertia.
pub fn kmeans(points: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!("cluster count {k} not in 1..={n}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidParam("restarts must be at least 1".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("points contain non-finite values".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let result = lloyd(points, seed_plus_plus(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

/// Contingency counts, `pred` clusters by `truth` classes.
fn contingency(pred: &[usize], truth: &[usize]) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} predicted labels vs {} true labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParam("empty labeling".into()));
    }
    let (p, np) = compact(pred);
    let (t, nt) = compact(truth);
    let mut table = vec![vec![0u64; nt]; np];
    for (a, b) in p.into_iter().zip(t) {
        table[a][b] += 1;
    }
    Ok(table)
}

/// Best one-to-one matching accuracy.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let size = table.len().max(table[0].len());
    let weights = WeightMatrix::from_fn(size, size, |(r, c)| {
        table.get(r).and_then(|row| row.get(c)).copied().unwrap_or(0) as i64
    });
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    // Equivalent partitions: a permutation matrix pattern.
    let rows_single = table.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
    if rows_single && table.len() == table[0].len() {
        return Ok(1.0);
    }
    let n = pred.len() as f64;
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let hp = entropy(row_sums.iter().copied(), n);
    let ht = entropy(col_sums.iter().copied(), n);
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count > 0 {
                let joint = count as f64;
                mi += joint / n * (joint * n / (row_sums[r] as f64 * col_sums[c] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (hp + ht))).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> i128 {
    let c = c as i128;
    c * (c - 1) / 2
}

/// Adjusted Rand index. Computed from integer pair counts, so a single
/// final division is the only rounding.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let total = pairs(pred.len() as u64);
    let index: i128 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let a: i128 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let b: i128 = (0..table[0].len()).map(|c| pairs(table.iter().map(|r| r[c]).sum())).sum();
    let num = 2 * total * index - 2 * a * b;
    let den = total * (a + b) - 2 * a * b;
    if den == 0 {
        // only when both partitions are all-singletons or one block
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<ClusterMetrics> {
    Ok(ClusterMetrics { acc: acc(pred, truth)?, nmi: nmi(pred, truth)?, ari: ari(pred, truth)? })
}

/// How labels are derived from the consensus affinity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    #[default]
    Spectral,
    /// k-means directly on the rows of the affinity.
    RowKmeans,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub metrics: Option<ClusterMetrics>,
    pub embedding: Option<Matrix>,
}

pub fn cluster_affinity(
    c: &Matrix,
    k: usize,
    pipeline: Pipeline,
    seed: u64,
    truth: Option<&[usize]>,
) -> Result<ClusteringResult> {
    let (points, embedding) = match pipeline {
        Pipeline::Spectral => {
            let e = spectral_embed(c, k)?;
            (e.clone(), Some(e))
        }
        Pipeline::RowKmeans => {
            check_affinity(c, k)?;
            (c.clone(), None)
        }
    };
    let labels = kmeans(&points, k, DEFAULT_RESTARTS, seed)?.labels;
    let metrics = truth.map(|t| evaluate(&labels, t)).transpose()?;
    Ok(ClusteringResult { labels, metrics, embedding })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn block_affinity(sizes: &[usize]) -> (Matrix, Vec<usize>) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let n = labels.len();
        (Matrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 }), labels)
    }

    #[test]
    fn acc_examples() {
        assert_eq!(acc(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(acc(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(acc(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap(), 0.75);
        assert!(acc(&[0], &[0, 1]).is_err());
        assert!(acc(&[], &[]).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[2, 2, 5], &[0, 0, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[3, 3, 3], &[1, 1, 1]).unwrap(), 1.0);
        // hand contingency table: rows {2,0},{1,1},{0,2}
        let n = 6.0f64;
        let hp = -3.0 * (2.0 / n) * (2.0f64 / n).ln();
        let ht = -2.0 * 0.5 * 0.5f64.ln();
        let mi = 2.0 * (2.0 / n) * ((2.0 / n) / ((2.0 / n) * 0.5)).ln()
            + 2.0 * (1.0 / n) * ((1.0 / n) / ((2.0 / n) * 0.5)).ln();
        let expected = mi / (0.5 * (hp + ht));
        assert!((nmi(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 1]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        // 6 pairs: no agreeing same-cluster pair; index 0, a = b = 2, expected 4/6
        let expected = (0.0 - 4.0 / 6.0) / (2.0 - 4.0 / 6.0);
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() - expected).abs() < 1e-15);
        assert_eq!(ari(&[0, 1, 2], &[2, 1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn kmeans_examples() {
        let pts = Matrix::from_row_slice(6, 2, &[0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 50.0, 50.0, 50.1, 50.0, 50.0, 50.1]);
        let r = kmeans(&pts, 2, 5, 1).unwrap();
        assert_eq!(acc(&r.labels, &[0, 0, 0, 1, 1, 1]).unwrap(), 1.0);

        let r = kmeans(&pts, 6, 3, 2).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.labels.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 6);

        let dup = Matrix::from_fn(12, 2, |i, j| pts[(i / 2, j)]);
        let r = kmeans(&dup, 3, 5, 3).unwrap();
        for i in 0..6 {
            assert_eq!(r.labels[2 * i], r.labels[2 * i + 1]);
        }
        assert!(kmeans(&pts, 7, 1, 0).is_err());
        assert!(kmeans(&pts, 2, 0, 0).is_err());
    }

    #[test]
    fn kmeans_restarts_monotone_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = Matrix::from_fn(60, 3, |_, _| rng.random::<f64>());
        let mut prev = f64::INFINITY;
        for restarts in 1..8 {
            let r = kmeans(&pts, 5, restarts, 42).unwrap();
            assert!(r.inertia <= prev);
            prev = r.inertia;
        }
        assert_eq!(kmeans(&pts, 5, 4, 1).unwrap(), kmeans(&pts, 5, 4, 1).unwrap());
    }

    #[test]
    fn spectral_recovers_blocks() {
        let (c, labels) = block_affinity(&[4, 3, 5]);
        let res = cluster_affinity(&c, 3, Pipeline::Spectral, 0, Some(&labels)).unwrap();
        assert_eq!(res.metrics.unwrap(), ClusterMetrics { acc: 1.0, nmi: 1.0, ari: 1.0 });
        let emb = res.embedding.unwrap();
        for i in 0..4 {
            assert!((emb.row(i) - emb.row(0)).norm() < 1e-10);
        }
        let rows = cluster_affinity(&c, 3, Pipeline::RowKmeans, 0, Some(&labels)).unwrap();
        assert_eq!(rows.metrics.unwrap().acc, 1.0);
    }

    #[test]
    fn identity_embedding_is_orthonormal() {
        let emb = spectral_embed(&Matrix::identity(5, 5), 5).unwrap();
        assert!((emb.tr_mul(&emb) - Matrix::identity(5, 5)).amax() < 1e-12);
    }

    #[test]
    fn eigenvectors_orthogonal_for_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = Matrix::from_fn(12, 12, |_, _| rng.random::<f64>());
        let c = &b * b.transpose();
        let v = leading_eigenvectors(&c, 4);
        assert!((v.tr_mul(&v) - Matrix::identity(4, 4)).amax() < 1e-8);
    }

    #[test]
    fn embed_rejects_bad_affinity() {
        let mut c = Matrix::identity(3, 3);
        c[(0, 1)] = 0.5;
        assert!(spectral_embed(&c, 2).is_err());
        c[(1, 0)] = 0.5;
        assert!(spectral_embed(&c, 2).is_ok());
        assert!(spectral_embed(&c, 4).is_err());
        c[(2, 2)] = -1.0;
        assert!(spectral_embed(&c, 2).is_err());
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_relabeling(
            pred in proptest::collection::vec(0usize..4, 1..30),
            perm_seed in 0u64..1000,
        ) {
            let truth: Vec<usize> = pred.iter().enumerate().map(|(i, p)| (i * 7 + p) % 3).collect();
            let mut perm = vec![10, 11, 12, 13];
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            for i in (1..4).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let relabeled: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
            prop_assert_eq!(acc(&pred, &truth).unwrap(), acc(&relabeled, &truth).unwrap());
            prop_assert_eq!(ari(&pred, &truth).unwrap(), ari(&relabeled, &truth).unwrap());
            prop_assert!((nmi(&pred, &truth).unwrap() - nmi(&relabeled, &truth).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&pred, &truth).unwrap() - nmi(&truth, &pred).unwrap()).abs() < 1e-12);
            prop_assert_eq!(ari(&pred, &truth).unwrap(), ari(&truth, &pred).unwrap());
            let collapsed = vec![0; truth.len()];
            let mut counts = [0usize; 3];
            truth.iter().for_each(|&t| counts[t] += 1);
            let freq = *counts.iter().max().unwrap() as f64 / truth.len() as f64;
            prop_assert!(acc(&collapsed, &truth).unwrap() >= freq);
        }
    }
}
