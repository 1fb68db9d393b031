//! Posterior probabilities Pr(y|x): unrestricted, finite-neighbourhood, and
//! leakage-smoothed.

use crate::error::{Result, SvqError};
use crate::leakage::LeakageKernel;
use crate::model::{sigmoid, ResponseModel};
use crate::topology::Topology;

/// A probability vector over the M codes.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector(Vec<f64>);

impl PosteriorVector {
    /// Validates non-negativity and unit sum (within 1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(SvqError::config("posterior must be non-empty"));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(SvqError::config("posterior entries must be finite and non-negative"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(SvqError::config(format!("posterior sums to {s}, expected 1")));
        }
        Ok(Self(probs))
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn point_mass(m: usize, y: usize) -> Self {
        let mut p = vec![0.0; m];
        p[y] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn responses(model: &ResponseModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(SvqError::DimensionMismatch {
            what: "input vector",
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok((0..model.num_codes()).map(|y| sigmoid(model.activation(y, x))).collect())
}

/// Pr(y|x) = Q(x|y) / Σ_{y'} Q(x|y').
pub fn posterior_infinite(model: &ResponseModel, x: &[f64]) -> Result<PosteriorVector> {
    let q = responses(model, x)?;
    let z: f64 = q.iter().sum();
    if !(z > 0.0) {
        return Err(SvqError::DegenerateResponse { context: None });
    }
    Ok(PosteriorVector(q.into_iter().map(|v| v / z).collect()))
}

/// Pr(y|x) = (1/M) Σ_{y'∈N⁻¹(y)} Q(x|y) / Σ_{y''∈N(y')} Q(x|y''), with no
/// leakage.
pub fn posterior_finite(
    model: &ResponseModel,
    topology: &Topology,
    x: &[f64],
) -> Result<PosteriorVector> {
    if topology.num_codes() != model.num_codes() {
        return Err(SvqError::DimensionMismatch {
            what: "topology codes",
            expected: model.num_codes(),
            got: topology.num_codes(),
        });
    }
    let q = responses(model, x)?;
    let z = context_sums(topology, &q)?;
    Ok(PosteriorVector(inhibit(topology, &q, &z)))
}

/// Smears probability across nearby codes: out[y] = Σ_{y'} Pr(y|y') in[y'].
pub fn apply_leakage(kernel: &LeakageKernel, posterior: &PosteriorVector) -> Result<PosteriorVector> {
    if kernel.num_codes() != posterior.len() {
        return Err(SvqError::DimensionMismatch {
            what: "leakage kernel codes",
            expected: posterior.len(),
            got: kernel.num_codes(),
        });
    }
    let mut out = vec![0.0; posterior.len()];
    kernel.spread(posterior.probs(), &mut out);
    Ok(PosteriorVector(out))
}

fn context_sums(topology: &Topology, q: &[f64]) -> Result<Vec<f64>> {
    (0..topology.num_codes())
        .map(|ctx| {
            let z: f64 = topology.neighbourhood(ctx).iter().map(|&y| q[y]).sum();
            if z > 0.0 {
                Ok(z)
            } else {
                Err(SvqError::DegenerateResponse { context: Some(ctx) })
            }
        })
        .collect()
}

fn inhibit(topology: &Topology, q: &[f64], z: &[f64]) -> Vec<f64> {
    let m = topology.num_codes() as f64;
    (0..topology.num_codes())
        .map(|y| {
            let s: f64 = topology.inverse(y).iter().map(|&(ctx, _)| q[y] / z[ctx]).sum();
            s / m
        })
        .collect()
}

/// Forward-pass intermediates for one input.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Q(x|y)
    pub q: Vec<f64>,
    /// Σ_{y''∈N(y')} Q(x|y'') for every context y'
    pub z: Vec<f64>,
    /// Posterior before leakage, (1/M) p_y
    pub pre_leak: Vec<f64>,
    /// Final posterior Pr(y|x)
    pub posterior: Vec<f64>,
}

impl Forward {
    /// P_{y,y'} = Pr(y|x;y') for y ∈ N(y').
    pub fn conditional(&self, y: usize, context: usize) -> f64 {
        self.q[y] / self.z[context]
    }
}

pub(crate) fn forward(
    model: &ResponseModel,
    topology: &Topology,
    kernel: &LeakageKernel,
    x: &[f64],
) -> Result<Forward> {
    let q = responses(model, x)?;
    let z = context_sums(topology, &q)?;
    let pre_leak = inhibit(topology, &q, &z);
    let posterior = if kernel.is_identity() {
        pre_leak.clone()
    } else {
        let mut out = vec![0.0; pre_leak.len()];
        kernel.spread(&pre_leak, &mut out);
        out
    };
    Ok(Forward {
        q,
        z,
        pre_leak,
        posterior,
    })
}
