//! The D1 + D2 upper bound on the n-sample reconstruction distortion, its
//! Monte-Carlo counterpart, and hand-coded gradients.
//!
//! For each input x with posterior Pr(y|x) (finite neighbourhood, then
//! leakage) and mean reconstruction x̂ = Σ_y Pr(y|x) x'(y):
//!
//! ```text
//! D1 = (2/n)      avg_x Σ_y Pr(y|x) ‖x − x'(y)‖²
//! D2 = (2(n−1)/n) avg_x ‖x − x̂‖²
//! ```
//!
//! Gradients are propagated backwards through the leakage kernel and the
//! neighbourhood normalisation. Writing L for the leak table, P for the
//! per-context conditionals Pr(y|x;y') and g for the sensitivity of the
//! objective to the final posterior, the activation gradient of code k is
//!
//! ```text
//! (1/M) (1 − Q(x|k)) Σ_{y'∈N⁻¹(k)} P_{k,y'} ((Lᵀg)_k − Σ_{y∈N(y')} P_{y,y'} (Lᵀg)_y)
//! ```
//!
//! which with g_y = (2/n) e_y is the familiar p_y(Le)_y − (PᵀPLe)_y form, and
//! with g_y = (4(n−1)/n) d_y·(x − x̂) gives the D2 term.

use rand::Rng;

use crate::error::{Result, SvqError};
use crate::matrix::{axpy, dot, sq_dist, Matrix};
use crate::model::Svq;
use crate::posterior::Forward;
use crate::sampling::{mix_rows, sample_categorical};

/// Samples standing in for the input density, with optional weights.
#[derive(Debug, Clone)]
pub struct Batch {
    samples: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl Batch {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let dim = samples.first().map(Vec::len).ok_or_else(|| SvqError::config("batch must be non-empty"))?;
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(SvqError::DimensionMismatch {
                what: "batch sample",
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { samples, weights: None })
    }

    pub fn weighted(samples: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let mut b = Self::new(samples)?;
        if weights.len() != b.samples.len() {
            return Err(SvqError::DimensionMismatch {
                what: "batch weights",
                expected: b.samples.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(SvqError::config("batch weights must be non-negative and not all zero"));
        }
        b.weights = Some(weights);
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Normalised averaging weights (sum to 1).
    pub fn normalized_weights(&self) -> Vec<f64> {
        match &self.weights {
            None => vec![1.0 / self.samples.len() as f64; self.samples.len()],
            Some(w) => {
                let total: f64 = w.iter().sum();
                w.iter().map(|v| v / total).collect()
            }
        }
    }

    pub fn iter_weighted(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.samples
            .iter()
            .map(Vec::as_slice)
            .zip(self.normalized_weights())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub d1: f64,
    pub d2: f64,
    pub total: f64,
}

impl ObjectiveValue {
    fn new(d1: f64, d2: f64) -> Self {
        Self { d1, d2, total: d1 + d2 }
    }
}

/// Gradients of a (weighted) objective with respect to every trainable
/// parameter of one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub recon: Matrix,
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros(num_codes: usize, dim: usize) -> Self {
        Self {
            recon: Matrix::zeros(num_codes, dim),
            weights: Matrix::zeros(num_codes, dim),
            biases: vec![0.0; num_codes],
        }
    }

    pub fn for_model(svq: &Svq) -> Self {
        Self::zeros(svq.num_codes(), svq.dim())
    }
}

/// Per-sample quantities shared by the objective and its gradients: the
/// forward pass plus d_y = x − x'(y), e_y = ‖d_y‖², x̂ and the residual
/// x − x̂ (which equals d̄/M).
#[derive(Debug, Clone)]
pub struct Workspace {
    pub forward: Forward,
    pub diffs: Matrix,
    pub sq_errors: Vec<f64>,
    pub mean_recon: Vec<f64>,
    pub residual: Vec<f64>,
}

impl Workspace {
    pub fn new(svq: &Svq, x: &[f64]) -> Result<Self> {
        let forward = svq.forward(x)?;
        let m = svq.num_codes();
        let dim = svq.dim();
        let mut diffs = Matrix::zeros(m, dim);
        let mut sq_errors = vec![0.0; m];
        for y in 0..m {
            let row = diffs.row_mut(y);
            let xr = svq.codebook.row(y);
            for k in 0..dim {
                row[k] = x[k] - xr[k];
            }
            sq_errors[y] = dot(row, row);
        }
        let mean_recon = mix_rows(&svq.codebook, &forward.posterior);
        let residual = x.iter().zip(&mean_recon).map(|(a, b)| a - b).collect();
        Ok(Self {
            forward,
            diffs,
            sq_errors,
            mean_recon,
            residual,
        })
    }

    /// (L^T p)_y: M times the final posterior.
    pub fn leaked_mass(&self) -> Vec<f64> {
        let m = self.forward.posterior.len() as f64;
        self.forward.posterior.iter().map(|p| p * m).collect()
    }

    /// d̄ = Σ_y (Lᵀp)_y d_y = M (x − x̂)
    pub fn dbar(&self) -> Vec<f64> {
        let m = self.forward.posterior.len() as f64;
        self.residual.iter().map(|r| r * m).collect()
    }

    pub fn value(&self, n: usize) -> ObjectiveValue {
        let nf = n as f64;
        let d1: f64 = self
            .forward
            .posterior
            .iter()
            .zip(&self.sq_errors)
            .map(|(p, e)| p * e)
            .sum::<f64>()
            * 2.0
            / nf;
        let d2 = 2.0 * (nf - 1.0) / nf * dot(&self.residual, &self.residual);
        ObjectiveValue::new(d1, d2)
    }

    /// Sensitivity of the per-sample objective to each posterior entry, up
    /// to an additive constant (which the unit-sum constraint annihilates).
    pub fn posterior_sensitivity(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        let c1 = 2.0 / nf;
        let c2 = 4.0 * (nf - 1.0) / nf;
        (0..self.sq_errors.len())
            .map(|y| c1 * self.sq_errors[y] + c2 * dot(self.diffs.row(y), &self.residual))
            .collect()
    }
}

/// Propagates a posterior sensitivity back to the pre-sigmoid activations.
pub fn activation_gradient(svq: &Svq, fwd: &Forward, post_sens: &[f64]) -> Vec<f64> {
    let m = svq.num_codes();
    let g = if svq.leakage.is_identity() {
        post_sens.to_vec()
    } else {
        let mut g = vec![0.0; m];
        svq.leakage.gather(post_sens, &mut g);
        g
    };
    // T_{y'} = Σ_{y∈N(y')} P_{y,y'} g_y
    let t: Vec<f64> = (0..m)
        .map(|ctx| {
            svq.topology
                .neighbourhood(ctx)
                .iter()
                .map(|&y| fwd.conditional(y, ctx) * g[y])
                .sum()
        })
        .collect();
    let inv_m = 1.0 / m as f64;
    (0..m)
        .map(|k| {
            let s: f64 = svq
                .topology
                .inverse(k)
                .iter()
                .map(|&(ctx, _)| fwd.conditional(k, ctx) * (g[k] - t[ctx]))
                .sum();
            inv_m * (1.0 - fwd.q[k]) * s
        })
        .collect()
}

/// Accumulates `scale` × the gradient of one sample's objective into
/// `grads`, with an extra upstream sensitivity on this encoder's posterior
/// (from a downstream stage). Returns the gradient with respect to the
/// input `x` when requested.
pub(crate) fn accumulate_sample(
    svq: &Svq,
    ws: &Workspace,
    x: &[f64],
    own_weight: f64,
    upstream: Option<&[f64]>,
    scale: f64,
    grads: &mut Gradients,
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let m = svq.num_codes();
    let nf = svq.n as f64;
    let mut sens = ws.posterior_sensitivity(svq.n);
    sens.iter_mut().for_each(|s| *s *= own_weight);
    if let Some(up) = upstream {
        for (s, u) in sens.iter_mut().zip(up) {
            *s += u;
        }
    }
    let ga = activation_gradient(svq, &ws.forward, &sens);

    let post = &ws.forward.posterior;
    let c1 = -4.0 / nf * own_weight * scale;
    let c2 = -4.0 * (nf - 1.0) / nf * own_weight * scale;
    for y in 0..m {
        if own_weight != 0.0 {
            let gr = grads.recon.row_mut(y);
            axpy(gr, c1 * post[y], ws.diffs.row(y));
            axpy(gr, c2 * post[y], &ws.residual);
        }
        axpy(grads.weights.row_mut(y), scale * ga[y], x);
        grads.biases[y] += scale * ga[y];
    }

    want_input_grad.then(|| {
        let mut gx: Vec<f64> = ws.residual.iter().map(|r| 4.0 * own_weight * r).collect();
        for y in 0..m {
            axpy(&mut gx, ga[y], svq.response.weights().row(y));
        }
        gx
    })
}

fn check_batch(svq: &Svq, batch: &Batch) -> Result<()> {
    if batch.dim() != svq.dim() {
        return Err(SvqError::DimensionMismatch {
            what: "batch dimension",
            expected: svq.dim(),
            got: batch.dim(),
        });
    }
    Ok(())
}

/// D1, D2 and their sum as batch averages.
pub fn eval_objective(svq: &Svq, batch: &Batch) -> Result<ObjectiveValue> {
    check_batch(svq, batch)?;
    let (mut d1, mut d2) = (0.0, 0.0);
    for (x, w) in batch.iter_weighted() {
        let v = Workspace::new(svq, x)?.value(svq.n);
        d1 += w * v.d1;
        d2 += w * v.d2;
    }
    Ok(ObjectiveValue::new(d1, d2))
}

/// Objective value together with the full gradient.
pub fn gradients(svq: &Svq, batch: &Batch) -> Result<(ObjectiveValue, Gradients)> {
    check_batch(svq, batch)?;
    let mut grads = Gradients::for_model(svq);
    let (mut d1, mut d2) = (0.0, 0.0);
    for (x, w) in batch.iter_weighted() {
        let ws = Workspace::new(svq, x)?;
        let v = ws.value(svq.n);
        d1 += w * v.d1;
        d2 += w * v.d2;
        accumulate_sample(svq, &ws, x, 1.0, None, w, &mut grads, false);
    }
    Ok((ObjectiveValue::new(d1, d2), grads))
}

/// ∂(D1+D2)/∂x'(y) for every code.
pub fn grad_recon(svq: &Svq, batch: &Batch) -> Result<Matrix> {
    Ok(gradients(svq, batch)?.1.recon)
}

/// ∂(D1+D2)/∂w(y) and ∂(D1+D2)/∂b(y).
pub fn grad_response(svq: &Svq, batch: &Batch) -> Result<(Matrix, Vec<f64>)> {
    let g = gradients(svq, batch)?.1;
    Ok((g.weights, g.biases))
}

/// Monte-Carlo estimate of the true n-sample distortion
/// D = 2 avg_x E‖x − (1/n) Σ_i x'(y_i)‖².
///
/// Each draw encodes every batch sample once and averages its squared error
/// over the batch; the returned standard error is across draws.
pub fn estimate_true_distortion(
    svq: &Svq,
    batch: &Batch,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    check_batch(svq, batch)?;
    if draws == 0 {
        return Err(SvqError::config("draws must be at least 1"));
    }
    let weights = batch.normalized_weights();
    let posteriors = batch
        .samples()
        .iter()
        .map(|x| svq.forward(x).map(|f| f.posterior))
        .collect::<Result<Vec<_>>>()?;
    let dim = svq.dim();
    let inv_n = 1.0 / svq.n as f64;
    let mut recon = vec![0.0; dim];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let mut value = 0.0;
        for ((x, probs), w) in batch.samples().iter().zip(&posteriors).zip(&weights) {
            recon.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..svq.n {
                let y = sample_categorical(probs, rng);
                axpy(&mut recon, inv_n, svq.codebook.row(y));
            }
            value += w * 2.0 * sq_dist(x, &recon);
        }
        sum += value;
        sum_sq += value * value;
    }
    let d = draws as f64;
    let mean = sum / d;
    let var = if draws > 1 {
        ((sum_sq - d * mean * mean) / (d - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / d).sqrt()))
}
