//! Finite-difference verification of the analytic gradients.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::leakage::LeakageKernel;
use crate::model::Svq;
use crate::objective::{eval_objective, gradients, Batch};
use crate::topology::{Layout, Topology};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Denominator floor for blocks whose gradients are essentially zero.
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Recon,
    Weights,
    Biases,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::Recon => "recon",
            Block::Weights => "weights",
            Block::Biases => "biases",
        })
    }
}

/// Explicit shape of one checked instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub num_codes: usize,
    pub dim: usize,
    pub n: usize,
    pub neighbourhood_radius: usize,
    pub leakage_radius: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub instances: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Check exactly this shape instead of the random family.
    pub single: Option<InstanceShape>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            instances: 24,
            seed: 2024,
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            single: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub instance_id: usize,
    pub shape: InstanceShape,
    pub block: Block,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_rel_err(&self, block: Block) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.block == block)
            .fold(0.0f64, |m, e| m.max(e.max_rel_err))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance_id,block,max_rel_err,pass\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{:e},{}\n", e.instance_id, e.block, e.max_rel_err, e.pass));
        }
        out
    }
}

/// Block relative error: max |analytic − numeric| over the block, divided
/// by the largest magnitude in either (floored at [`ABS_FLOOR`]).
pub fn block_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(ABS_FLOOR, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()))
        / scale
}

/// Central finite differences of `f` with respect to each entry of `params`.
pub fn central_differences(
    params: &mut [f64],
    step: f64,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + step;
        let plus = f(params)?;
        params[i] = orig - step;
        let minus = f(params)?;
        params[i] = orig;
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Numerical gradient of D1+D2 for each parameter block.
pub fn numeric_gradients(svq: &Svq, batch: &Batch, step: f64) -> Result<[Vec<f64>; 3]> {
    let mut work = svq.clone();
    let mut recon = svq.codebook.matrix().as_slice().to_vec();
    let g_recon = central_differences(&mut recon, step, |p| {
        work.codebook.matrix_mut().as_mut_slice().copy_from_slice(p);
        Ok(eval_objective(&work, batch)?.total)
    })?;
    let mut work = svq.clone();
    let mut weights = svq.response.weights().as_slice().to_vec();
    let g_weights = central_differences(&mut weights, step, |p| {
        work.response.weights_mut().as_mut_slice().copy_from_slice(p);
        Ok(eval_objective(&work, batch)?.total)
    })?;
    let mut work = svq.clone();
    let mut biases = svq.response.biases().to_vec();
    let g_biases = central_differences(&mut biases, step, |p| {
        work.response.biases_mut().copy_from_slice(p);
        Ok(eval_objective(&work, batch)?.total)
    })?;
    Ok([g_recon, g_weights, g_biases])
}

fn random_shape(rng: &mut impl Rng, instance: usize) -> InstanceShape {
    let num_codes = rng.random_range(1..=8);
    InstanceShape {
        num_codes,
        dim: rng.random_range(1..=6),
        n: [1, 2, 5][rng.random_range(0..3)],
        neighbourhood_radius: rng.random_range(0..=2),
        // alternate with and without leakage
        leakage_radius: instance % 2,
        batch_size: rng.random_range(1..=6),
    }
}

/// Random model and batch of the given shape, parameters O(1).
pub fn random_instance(shape: &InstanceShape, rng: &mut impl Rng) -> Result<(Svq, Batch)> {
    let layout = Layout::Ring(shape.num_codes);
    let topology = Topology::new(layout, shape.neighbourhood_radius)?;
    let leakage = if shape.leakage_radius == 0 {
        LeakageKernel::identity(shape.num_codes)
    } else {
        LeakageKernel::gaussian(layout, shape.leakage_radius, 1.0)?
    };
    let svq = Svq::init(shape.dim, topology, leakage, shape.n, 1.0, rng)?;
    let samples = (0..shape.batch_size)
        .map(|_| (0..shape.dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    Ok((svq, Batch::new(samples)?))
}

pub fn check_instance(
    svq: &Svq,
    batch: &Batch,
    step: f64,
    tolerance: f64,
    instance_id: usize,
    shape: InstanceShape,
) -> Result<Vec<GradCheckEntry>> {
    let (_, analytic) = gradients(svq, batch)?;
    let numeric = numeric_gradients(svq, batch, step)?;
    let blocks = [
        (Block::Recon, analytic.recon.as_slice()),
        (Block::Weights, analytic.weights.as_slice()),
        (Block::Biases, analytic.biases.as_slice()),
    ];
    Ok(blocks
        .into_iter()
        .zip(numeric.iter())
        .map(|((block, a), f)| {
            let err = block_rel_err(a, f);
            GradCheckEntry {
                instance_id,
                shape,
                block,
                max_rel_err: err,
                pass: err <= tolerance,
            }
        })
        .collect())
}

/// Runs the finite-difference comparison over the configured instances.
pub fn check_gradients(config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport::default();
    let count = if config.single.is_some() { 1 } else { config.instances };
    for id in 0..count {
        let shape = config.single.unwrap_or_else(|| random_shape(&mut rng, id));
        let (svq, batch) = random_instance(&shape, &mut rng)?;
        report
            .entries
            .extend(check_instance(&svq, &batch, config.step, config.tolerance, id, shape)?);
    }
    Ok(report)
}
