//! Stochastic encoding (n categorical draws) and decoding.

use rand::Rng;

use crate::error::{Result, SvqError};
use crate::matrix::axpy;
use crate::model::Codebook;
use crate::posterior::PosteriorVector;

/// The n code indices drawn for one input. Indices are 0-based internally;
/// use [`CodeSample::one_based`] for reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSample(Vec<usize>);

impl CodeSample {
    pub fn new(codes: Vec<usize>) -> Result<Self> {
        if codes.is_empty() {
            return Err(SvqError::config("code sample must contain at least one code"));
        }
        Ok(Self(codes))
    }

    pub fn codes(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inverse-CDF draw over codes in ascending order.
pub fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (y, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = y;
        }
        acc += p;
        if u < acc {
            return y;
        }
    }
    // u fell in the rounding gap above the cumulative sum
    last_positive
}

/// n independent draws from the posterior.
pub fn encode(posterior: &PosteriorVector, n: usize, rng: &mut impl Rng) -> Result<CodeSample> {
    if n == 0 {
        return Err(SvqError::config("sample count n must be at least 1"));
    }
    CodeSample::new((0..n).map(|_| sample_categorical(posterior.probs(), rng)).collect())
}

/// x'(y) = (1/n) Σ_i x'(y_i)
pub fn reconstruct(codebook: &Codebook, sample: &CodeSample) -> Result<Vec<f64>> {
    let mut out = vec![0.0; codebook.dim()];
    for &c in sample.codes() {
        if c >= codebook.num_codes() {
            return Err(SvqError::config(format!("code {} out of range", c + 1)));
        }
        axpy(&mut out, 1.0, codebook.row(c));
    }
    let inv = 1.0 / sample.len() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// Σ_y Pr(y|x) x'(y)
pub fn mean_reconstruction(codebook: &Codebook, posterior: &PosteriorVector) -> Result<Vec<f64>> {
    if posterior.len() != codebook.num_codes() {
        return Err(SvqError::DimensionMismatch {
            what: "posterior length",
            expected: codebook.num_codes(),
            got: posterior.len(),
        });
    }
    Ok(mix_rows(codebook, posterior.probs()))
}

pub(crate) fn mix_rows(codebook: &Codebook, probs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; codebook.dim()];
    for (y, &p) in probs.iter().enumerate() {
        if p != 0.0 {
            axpy(&mut out, p, codebook.row(y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn codebook(rows: &[Vec<f64>]) -> Codebook {
        Codebook::new(Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn point_mass_always_draws_its_code() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = encode(&PosteriorVector::point_mass(4, 0), 5, &mut rng).unwrap();
        assert_eq!(s.one_based(), vec![1; 5]);
    }

    #[test]
    fn uniform_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = encode(&PosteriorVector::uniform(4), 100_000, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        s.codes().iter().for_each(|&c| counts[c] += 1);
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn single_draw_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = PosteriorVector::new(vec![0.3, 0.7]).unwrap();
        let hits = (0..100_000)
            .filter(|_| encode(&p, 1, &mut rng).unwrap().codes()[0] == 1)
            .count();
        assert!((hits as f64 / 1e5 - 0.7).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_sample() {
        let p = PosteriorVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let a = encode(&p, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = encode(&p, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_samples_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(encode(&PosteriorVector::uniform(2), 0, &mut rng).is_err());
    }

    #[test]
    fn reconstruct_is_the_mean_of_rows() {
        let cb = codebook(&[vec![0.0, 0.0], vec![2.0, 4.0]]);
        assert_eq!(reconstruct(&cb, &CodeSample::new(vec![1]).unwrap()).unwrap(), vec![2.0, 4.0]);
        assert_eq!(reconstruct(&cb, &CodeSample::new(vec![0, 1]).unwrap()).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            reconstruct(&cb, &CodeSample::new(vec![1, 0, 1]).unwrap()).unwrap(),
            reconstruct(&cb, &CodeSample::new(vec![1, 1, 0]).unwrap()).unwrap()
        );
    }

    #[test]
    fn mean_reconstruction_limits() {
        let cb = codebook(&[vec![1.0, 0.0], vec![0.0, 3.0], vec![-1.0, 0.0]]);
        assert_eq!(mean_reconstruction(&cb, &PosteriorVector::point_mass(3, 1)).unwrap(), vec![0.0, 3.0]);
        let c = mean_reconstruction(&cb, &PosteriorVector::uniform(3)).unwrap();
        assert!((c[0]).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_reconstruction_converges_to_mean() {
        let cb = codebook(&[vec![1.0, 0.0], vec![0.0, 3.0], vec![-1.0, 2.0], vec![0.5, -1.0]]);
        let p = PosteriorVector::new(vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let target = mean_reconstruction(&cb, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000;
        let n = 3;
        let mut sum = [0.0; 2];
        let mut sum_sq = [0.0; 2];
        for _ in 0..draws {
            let r = reconstruct(&cb, &encode(&p, n, &mut rng).unwrap()).unwrap();
            for k in 0..2 {
                sum[k] += r[k];
                sum_sq[k] += r[k] * r[k];
            }
        }
        for k in 0..2 {
            let mean = sum[k] / draws as f64;
            let var = sum_sq[k] / draws as f64 - mean * mean;
            let se = (var / draws as f64).sqrt();
            assert!((mean - target[k]).abs() < 3.0 * se, "component {k}: {mean} vs {}", target[k]);
        }
    }
}
