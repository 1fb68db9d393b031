use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SvqError};
use crate::matrix::Matrix;

/// Relative eigenvalue threshold below which a covariance direction counts
/// as null.
const RANK_TOL: f64 = 1e-10;

/// Affine map x ↦ W (x − μ) with W the symmetric inverse square root of the
/// fitted covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    pub mean: Vec<f64>,
    pub transform: Matrix,
}

impl Whitening {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.transform
            .iter_rows()
            .map(|row| row.iter().zip(&centred).map(|(w, c)| w * c).sum())
            .collect()
    }
}

/// Fits a whitening transform to `batch` (population covariance) and
/// applies it.
pub fn whiten(batch: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Whitening)> {
    let first = batch.first().ok_or_else(|| SvqError::config("cannot whiten an empty batch"))?;
    let dim = first.len();
    let count = batch.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in batch {
        if x.len() != dim {
            return Err(SvqError::DimensionMismatch {
                what: "whitening sample",
                expected: dim,
                got: x.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / count;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for x in batch {
        let c = DVector::from_iterator(dim, x.iter().zip(&mean).map(|(a, m)| a - m));
        cov += &c * c.transpose();
    }
    cov /= count;
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let null_dims = eig
        .eigenvalues
        .iter()
        .filter(|&&l| !(l > RANK_TOL * max) || max <= 0.0)
        .count();
    if null_dims > 0 {
        return Err(SvqError::RankDeficient { null_dims });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let transform = Matrix::from_fn(dim, dim, |r, c| w[(r, c)]);
    let whitening = Whitening { mean, transform };
    let out = batch.iter().map(|x| whitening.apply(x)).collect();
    Ok((out, whitening))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn covariance(batch: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = batch[0].len();
        let n = batch.len() as f64;
        let mean: Vec<f64> = (0..d).map(|k| batch.iter().map(|x| x[k]).sum::<f64>() / n).collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| batch.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / n)
                    .collect()
            })
            .collect()
    }

    fn correlated_batch(count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, 0);
        (0..count)
            .map(|_| {
                let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                vec![2.0 * z[0] + 1.0, z[0] + 0.5 * z[1] - 3.0, 0.3 * z[0] - z[1] + 0.2 * z[2]]
            })
            .collect()
    }

    #[test]
    fn one_dimensional_scale() {
        let batch: Vec<Vec<f64>> = [-2.0, 2.0, -2.0, 2.0].iter().map(|&v| vec![v + 1.0]).collect();
        let (_, w) = whiten(&batch).unwrap();
        assert!((w.transform[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((w.mean[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn output_covariance_is_identity() {
        let (out, _) = whiten(&correlated_batch(10_000, 1)).unwrap();
        let c = covariance(&out);
        for (i, row) in c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn held_out_covariance_close_to_identity() {
        let (_, w) = whiten(&correlated_batch(10_000, 2)).unwrap();
        let held: Vec<Vec<f64>> = correlated_batch(10_000, 3).iter().map(|x| w.apply(x)).collect();
        for (i, row) in covariance(&held).iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn whitening_twice_is_idempotent() {
        let (once, _) = whiten(&correlated_batch(5_000, 4)).unwrap();
        let (_, second) = whiten(&once).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((second.transform[(i, j)] - target).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let batch: Vec<Vec<f64>> = (0..50).map(|i| {
            let t = i as f64;
            vec![t, 2.0 * t, 5.0]
        }).collect();
        match whiten(&batch) {
            Err(SvqError::RankDeficient { null_dims }) => assert_eq!(null_dims, 2),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
