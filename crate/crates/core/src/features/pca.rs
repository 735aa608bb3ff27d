//! Principal component basis fitted on raw patch vectors.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Mean-centred orthonormal projection basis.
///
/// `basis` is stored row-major as `dim x rank`; projections are zero-padded
/// to `out_dims` when the fit set had lower rank than requested.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub tag: String,
    dim: usize,
    out_dims: usize,
    mean: Vec<f64>,
    basis: Vec<f64>,
    rank: usize,
    /// Sample-covariance eigenvalues of the kept components, descending.
    eigenvalues: Vec<f64>,
    total_variance: f64,
}

/// Fit the top-`k` principal directions of `raw` (sample covariance, n-1).
pub fn fit_pca(raw: &[Vec<f64>], k: usize, tag: &str) -> Result<PcaBasis> {
    let n = raw.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let dim = raw[0].len();
    if let Some(bad) = raw.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let mut mean = vec![0.0; dim];
    for r in raw {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| raw[i][j] - mean[j]);
    // Gram trick: eigenvectors of X X^T (n x n) map to those of X^T X.
    let gram = &centered * centered.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues[order[0]];
    let total_variance = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum::<f64>() / (n - 1) as f64;
    if !(top > 0.0) || top <= 1e-12 * dim as f64 {
        return Err(Error::ZeroVariance);
    }
    let cutoff = top * 1e-10;
    let rank = order.iter().take(k).take_while(|&&i| eig.eigenvalues[i] > cutoff).count();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut eigenvalues = Vec::with_capacity(rank);
    for &idx in order.iter().take(rank) {
        let lambda = eig.eigenvalues[idx];
        let u = eig.eigenvectors.column(idx);
        let v = centered.tr_mul(&u) / lambda.sqrt();
        columns.push(v.iter().copied().collect());
        eigenvalues.push(lambda / (n - 1) as f64);
    }
    orthonormalize(&mut columns);
    for col in &mut columns {
        // sign convention: largest-magnitude entry positive
        let (_, &pivot) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .expect("non-empty column");
        if pivot < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut basis = vec![0.0; dim * rank];
    for (c, col) in columns.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            basis[r * rank + c] = *x;
        }
    }
    Ok(PcaBasis { tag: tag.to_owned(), dim, out_dims: k, mean, basis, rank, eigenvalues, total_variance })
}

/// Two rounds of modified Gram-Schmidt.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for i in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(i);
            let ci = &mut rest[0];
            for prev in done.iter() {
                let d: f64 = prev.iter().zip(ci.iter()).map(|(a, b)| a * b).sum();
                ci.iter_mut().zip(prev).for_each(|(x, p)| *x -= d * p);
            }
            let norm = ci.iter().map(|x| x * x).sum::<f64>().sqrt();
            ci.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

impl PcaBasis {
    /// Rebuild from stored parts (used by the binary reader).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        tag: String,
        dim: usize,
        out_dims: usize,
        rank: usize,
        mean: Vec<f64>,
        basis: Vec<f64>,
        eigenvalues: Vec<f64>,
        total_variance: f64,
    ) -> Result<Self> {
        if mean.len() != dim || basis.len() != dim * rank || eigenvalues.len() != rank || rank > out_dims {
            return Err(Error::Format("inconsistent pca dimensions".into()));
        }
        Ok(Self { tag, dim, out_dims, mean, basis, rank, eigenvalues, total_variance })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn out_dims(&self) -> usize {
        self.out_dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major `dim x rank` matrix.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Fraction of fit-set variance captured by the kept components.
    pub fn explained_variance_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.eigenvalues.iter().sum::<f64>() / self.total_variance
        } else {
            0.0
        }
    }

    /// `B^T (raw - mean)`, zero-padded to `out_dims`.
    pub fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: raw.len() });
        }
        let mut out = vec![0.0; self.out_dims];
        let coords = &mut out[..self.rank];
        for ((row, x), m) in self.basis.chunks_exact(self.rank.max(1)).zip(raw).zip(&self.mean) {
            let c = x - m;
            if self.rank > 0 {
                coords.iter_mut().zip(row).for_each(|(o, b)| *o += b * c);
            }
        }
        Ok(out)
    }

    /// Map projected coordinates back to raw space.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        self.basis
            .chunks_exact(self.rank.max(1))
            .zip(&self.mean)
            .map(|(row, m)| m + row.iter().zip(coords).map(|(b, c)| b * c).sum::<f64>())
            .collect()
    }

    /// `max |B^T B - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rank;
        let mut worst: f64 = 0.0;
        for a in 0..r {
            for b in a..r {
                let dot: f64 = self.basis.chunks_exact(r).map(|row| row[a] * row[b]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::{stream, Stream};

    fn random_data(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, Stream::Dataset);
        (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn identical_vectors_are_rejected() {
        let v = vec![vec![0.5; 10]; 4];
        assert!(matches!(fit_pca(&v, 3, "t"), Err(Error::ZeroVariance)));
        assert!(matches!(fit_pca(&v[..1], 3, "t"), Err(Error::TooFewSamples(1))));
    }

    #[test]
    fn affine_plane_is_reconstructed_exactly() {
        let mut rng = stream(4, Stream::Dataset);
        let origin: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        let a: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|_| {
                let (s, t): (f64, f64) = (rng.random(), rng.random());
                (0..20).map(|i| origin[i] + s * a[i] + t * b[i]).collect()
            })
            .collect();
        let pca = fit_pca(&pts, 5, "plane").unwrap();
        assert_eq!(pca.rank(), 2);
        for p in &pts {
            let proj = pca.project(p).unwrap();
            assert_eq!(proj.len(), 5);
            assert!(proj[2..].iter().all(|x| *x == 0.0));
            let back = pca.reconstruct(&proj);
            let err: f64 = back.iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum();
            assert!(err < 1e-20);
        }
    }

    #[test]
    fn mean_projects_to_zero_and_basis_is_orthonormal() {
        let data = random_data(30, 60, 1);
        let pca = fit_pca(&data, 10, "r").unwrap();
        let z = pca.project(pca.mean()).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-12));
        assert!(pca.orthonormality_error() < 1e-8);
        assert!(pca.project(&[1.0; 3]).is_err());
    }

    #[test]
    fn reconstruction_error_non_increasing_in_k() {
        let data = random_data(25, 40, 2);
        let mut last = f64::INFINITY;
        for k in 1..=24 {
            let pca = fit_pca(&data, k, "k").unwrap();
            let err: f64 = data
                .iter()
                .map(|x| {
                    let r = pca.reconstruct(&pca.project(x).unwrap());
                    r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                })
                .sum();
            assert!(err <= last + 1e-9, "k={k}: {err} > {last}");
            last = err;
        }
    }
}
