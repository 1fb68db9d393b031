//! Codebook, sigmoid response model and the assembled encoder.

use rand::Rng;

use crate::error::{Result, SvqError};
use crate::leakage::LeakageKernel;
use crate::matrix::{dot, Matrix};
use crate::posterior::{self, Forward, PosteriorVector};
use crate::topology::{Layout, Topology};

/// Reconstruction vectors x'(y), one row per code.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    recon: Matrix,
}

impl Codebook {
    pub fn new(recon: Matrix) -> Result<Self> {
        if recon.rows() == 0 || recon.cols() == 0 {
            return Err(SvqError::config("codebook needs at least one code and one dimension"));
        }
        if !recon.is_finite() {
            return Err(SvqError::config("codebook contains non-finite entries"));
        }
        Ok(Self { recon })
    }

    pub fn num_codes(&self) -> usize {
        self.recon.rows()
    }

    pub fn dim(&self) -> usize {
        self.recon.cols()
    }

    pub fn row(&self, y: usize) -> &[f64] {
        self.recon.row(y)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.recon
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.recon
    }
}

/// Per-code weight vector w(y) and bias b(y) of Q(x|y) = σ(w(y)·x + b(y)).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseModel {
    weights: Matrix,
    biases: Vec<f64>,
}

impl ResponseModel {
    pub fn new(weights: Matrix, biases: Vec<f64>) -> Result<Self> {
        if weights.rows() != biases.len() {
            return Err(SvqError::DimensionMismatch {
                what: "response biases",
                expected: weights.rows(),
                got: biases.len(),
            });
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(SvqError::config("response model needs at least one code and one dimension"));
        }
        if !weights.is_finite() || biases.iter().any(|b| !b.is_finite()) {
            return Err(SvqError::config("response model contains non-finite entries"));
        }
        Ok(Self { weights, biases })
    }

    pub fn num_codes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Pre-sigmoid activation w(y)·x + b(y).
    pub fn activation(&self, y: usize, x: &[f64]) -> f64 {
        dot(self.weights.row(y), x) + self.biases[y]
    }

    /// Q(x|y), strictly inside (0, 1) for finite activations (up to f64
    /// rounding at saturation).
    pub fn response(&self, y: usize, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(SvqError::DimensionMismatch {
                what: "response input",
                expected: self.dim(),
                got: x.len(),
            });
        }
        if y >= self.num_codes() {
            return Err(SvqError::config(format!("code {} out of range 1..{}", y + 1, self.num_codes())));
        }
        Ok(sigmoid(self.activation(y, x)))
    }
}

/// Logistic function, evaluated without overflow for large |a|.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// A complete stochastic vector quantiser: decoder, encoder, lateral
/// inhibition neighbourhoods, leakage, and the number of samples `n` drawn
/// per input.
#[derive(Debug, Clone, PartialEq)]
pub struct Svq {
    pub codebook: Codebook,
    pub response: ResponseModel,
    pub topology: Topology,
    pub leakage: LeakageKernel,
    pub n: usize,
}

impl Svq {
    pub fn new(
        codebook: Codebook,
        response: ResponseModel,
        topology: Topology,
        leakage: LeakageKernel,
        n: usize,
    ) -> Result<Self> {
        let m = codebook.num_codes();
        for (what, got) in [
            ("response codes", response.num_codes()),
            ("topology codes", topology.num_codes()),
            ("leakage codes", leakage.num_codes()),
        ] {
            if got != m {
                return Err(SvqError::DimensionMismatch { what, expected: m, got });
            }
        }
        if response.dim() != codebook.dim() {
            return Err(SvqError::DimensionMismatch {
                what: "response dimension",
                expected: codebook.dim(),
                got: response.dim(),
            });
        }
        if n == 0 {
            return Err(SvqError::config("sample count n must be at least 1"));
        }
        Ok(Self {
            codebook,
            response,
            topology,
            leakage,
            n,
        })
    }

    /// Randomly initialised model: every reconstruction entry, weight and
    /// bias drawn uniformly from [−scale, scale].
    pub fn init(
        dim: usize,
        topology: Topology,
        leakage: LeakageKernel,
        n: usize,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (codebook, response) = init_model(dim, topology.num_codes(), scale, rng)?;
        Self::new(codebook, response, topology, leakage, n)
    }

    pub fn num_codes(&self) -> usize {
        self.codebook.num_codes()
    }

    pub fn dim(&self) -> usize {
        self.codebook.dim()
    }

    pub fn layout(&self) -> Layout {
        self.topology.layout()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(SvqError::DimensionMismatch {
                what: "input vector",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Full forward pass with the intermediates needed for gradients.
    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        posterior::forward(&self.response, &self.topology, &self.leakage, x)
    }

    /// Leakage-smoothed finite-neighbourhood posterior Pr(y|x).
    pub fn posterior(&self, x: &[f64]) -> Result<PosteriorVector> {
        Ok(PosteriorVector::new_unchecked(self.forward(x)?.posterior))
    }
}

/// Draws reconstruction rows, weights and biases i.i.d. uniform in
/// [−scale, scale].
pub fn init_model(
    dim: usize,
    num_codes: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<(Codebook, ResponseModel)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SvqError::config(format!("init scale must be positive, got {scale}")));
    }
    let mut draw = || rng.random_range(-scale..=scale);
    let recon = Matrix::from_fn(num_codes, dim, |_, _| draw());
    let weights = Matrix::from_fn(num_codes, dim, |_, _| draw());
    let biases = (0..num_codes).map(|_| draw()).collect();
    Ok((Codebook::new(recon)?, ResponseModel::new(weights, biases)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: Vec<f64>, b: f64) -> ResponseModel {
        let d = w.len();
        ResponseModel::new(Matrix::from_vec(1, d, w), vec![b]).unwrap()
    }

    #[test]
    fn zero_parameters_give_half() {
        let m = single(vec![0.0, 0.0], 0.0);
        assert_eq!(m.response(0, &[3.0, -7.0]).unwrap(), 0.5);
    }

    #[test]
    fn sigmoid_of_ln3_is_three_quarters() {
        let m = single(vec![1.0, 0.0], 0.0);
        let q = m.response(0, &[3f64.ln(), 7.0]).unwrap();
        assert!((q - 0.75).abs() < 1e-15);
    }

    #[test]
    fn saturation_stays_finite() {
        let m = single(vec![1.0], 0.0);
        assert!((m.response(0, &[30.0]).unwrap() - 1.0).abs() < 1e-12);
        let low = m.response(0, &[-700.0]).unwrap();
        assert!(low > 0.0 && low.is_finite());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = single(vec![1.0, 2.0], 0.0);
        assert!(matches!(
            m.response(0, &[1.0]),
            Err(SvqError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn init_respects_scale_and_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (cb, rm) = init_model(2, 4, 0.01, &mut rng).unwrap();
        assert!(cb.matrix().max_abs() <= 0.01);
        assert!(rm.weights().max_abs() <= 0.01);
        assert!(rm.biases().iter().all(|b| b.abs() <= 0.01));

        let again = init_model(2, 4, 0.01, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!((cb.clone(), rm.clone()), again);
        let other = init_model(2, 4, 0.01, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_ne!((cb, rm), other);
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (cb, rm) = init_model(3, 4, 0.1, &mut rng).unwrap();
        let topo = Topology::global(Layout::Ring(5)).unwrap();
        let err = Svq::new(cb, rm, topo, LeakageKernel::identity(5), 2).unwrap_err();
        assert!(matches!(err, SvqError::DimensionMismatch { .. }));
    }
}
