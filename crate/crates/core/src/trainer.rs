//! Plain stochastic gradient descent for a single encoder or a chain of
//! encoders, where each stage encodes the posterior output of the previous
//! one and the objective is a weighted sum of the per-stage objectives.

use crate::datagen::{stream_rng, DataSource, SvqRng};
use crate::error::{Result, SvqError};
use crate::model::Svq;
use crate::objective::{accumulate_sample, Batch, Gradients, ObjectiveValue, Workspace};

/// Stream ids derived from the run seed.
pub const INIT_STREAM: u64 = 0;
pub const DATA_STREAM: u64 = 1;
pub const EVAL_STREAM: u64 = 2;

const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Linear interpolation from the initial rate to `final_rate` at the
    /// last step.
    Linear { final_rate: f64 },
    /// Multiply by `factor` every `every` steps.
    Step { factor: f64, every: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Training is sequential with a fixed reduction order, so runs are
    /// always bit-reproducible; the flag is kept for the run record.
    pub reproducible: bool,
    pub init_scale: f64,
    /// Size of the held-out batch scored before and after training.
    pub eval_size: usize,
    pub log_every: usize,
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            steps: 20_000,
            learning_rate: 0.05,
            schedule: LrSchedule::Linear { final_rate: 0.005 },
            seed: 0,
            reproducible: true,
            init_scale: 0.01,
            eval_size: 1000,
            log_every: 100,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(SvqError::config("steps must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(SvqError::config("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(SvqError::config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        match self.schedule {
            LrSchedule::Linear { final_rate } if !(final_rate >= 0.0) => {
                Err(SvqError::config("final learning rate must be non-negative"))
            }
            LrSchedule::Step { factor, every } if !(factor > 0.0) || every == 0 => {
                Err(SvqError::config("step schedule needs factor > 0 and every >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Learning rate used for the update at `step` (0-based).
    pub fn rate_at(&self, step: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Linear { final_rate } => {
                let f = fraction(step, self.steps);
                (1.0 - f) * self.learning_rate + f * final_rate
            }
            LrSchedule::Step { factor, every } => self.learning_rate * factor.powi((step / every) as i32),
        }
    }
}

/// Position of `step` within `steps` updates, 0 at the first and exactly 1
/// at the last.
fn fraction(step: usize, steps: usize) -> f64 {
    if steps <= 1 {
        0.0
    } else {
        step.min(steps - 1) as f64 / (steps - 1) as f64
    }
}

/// Encoders applied in sequence plus a linearly interpolated weight for
/// each stage's objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub stages: Vec<Svq>,
    pub weights_start: Vec<f64>,
    pub weights_end: Vec<f64>,
}

impl ChainSpec {
    pub fn single(svq: Svq) -> Self {
        Self {
            stages: vec![svq],
            weights_start: vec![1.0],
            weights_end: vec![1.0],
        }
    }

    pub fn new(stages: Vec<Svq>, weights_start: Vec<f64>, weights_end: Vec<f64>) -> Result<Self> {
        let spec = Self {
            stages,
            weights_start,
            weights_end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(SvqError::config("a chain needs at least one stage"));
        }
        for (k, pair) in self.stages.windows(2).enumerate() {
            if pair[1].dim() != pair[0].num_codes() {
                return Err(SvqError::config(format!(
                    "stage {} input dimension {} must equal stage {} code count {}",
                    k + 2,
                    pair[1].dim(),
                    k + 1,
                    pair[0].num_codes()
                )));
            }
        }
        for (what, w) in [("start", &self.weights_start), ("end", &self.weights_end)] {
            if w.len() != self.stages.len() {
                return Err(SvqError::DimensionMismatch {
                    what: "stage weights",
                    expected: self.stages.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || w.iter().all(|v| *v == 0.0) {
                return Err(SvqError::config(format!(
                    "{what} stage weights must be non-negative and not all zero"
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.stages[0].dim()
    }

    /// Stage weights at `step` of `steps`; exactly the start vector at step 0
    /// and the end vector at the last step.
    pub fn weights_at(&self, step: usize, steps: usize) -> Vec<f64> {
        let f = fraction(step, steps);
        if f == 0.0 {
            return self.weights_start.clone();
        }
        if f == 1.0 {
            return self.weights_end.clone();
        }
        self.weights_start
            .iter()
            .zip(&self.weights_end)
            .map(|(a, b)| (1.0 - f) * a + f * b)
            .collect()
    }

    /// Posterior output of every stage for input `x`; element 0 is `x`.
    pub fn propagate(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![x.to_vec()];
        for stage in &self.stages {
            let next = stage.forward(out.last().expect("non-empty"))?.posterior;
            out.push(next);
        }
        Ok(out)
    }
}

/// Per-stage objective values and gradients of Σ_k w_k (D1+D2)_k over a
/// batch, with stage-k gradients including the influence of every later
/// stage through the posterior it feeds forward.
pub fn chain_gradients(
    chain: &ChainSpec,
    weights: &[f64],
    batch: &Batch,
) -> Result<(Vec<ObjectiveValue>, Vec<Gradients>)> {
    if batch.dim() != chain.input_dim() {
        return Err(SvqError::DimensionMismatch {
            what: "batch dimension",
            expected: chain.input_dim(),
            got: batch.dim(),
        });
    }
    let depth = chain.stages.len();
    let mut grads: Vec<Gradients> = chain.stages.iter().map(Gradients::for_model).collect();
    let mut sums = vec![(0.0, 0.0); depth];
    for (x, w) in batch.iter_weighted() {
        let mut inputs = vec![x.to_vec()];
        let mut spaces = Vec::with_capacity(depth);
        for stage in &chain.stages {
            let ws = Workspace::new(stage, inputs.last().expect("non-empty"))?;
            inputs.push(ws.forward.posterior.clone());
            spaces.push(ws);
        }
        for (k, ws) in spaces.iter().enumerate() {
            let v = ws.value(chain.stages[k].n);
            sums[k].0 += w * v.d1;
            sums[k].1 += w * v.d2;
        }
        let mut upstream: Option<Vec<f64>> = None;
        for k in (0..depth).rev() {
            upstream = accumulate_sample(
                &chain.stages[k],
                &spaces[k],
                &inputs[k],
                weights[k],
                upstream.as_deref(),
                w,
                &mut grads[k],
                k > 0,
            );
        }
    }
    let values = sums
        .into_iter()
        .map(|(d1, d2)| ObjectiveValue { d1, d2, total: d1 + d2 })
        .collect();
    Ok((values, grads))
}

/// Σ_k w_k (D1+D2)_k over a batch.
pub fn chain_objective(chain: &ChainSpec, weights: &[f64], batch: &Batch) -> Result<f64> {
    Ok(stage_values(chain, batch)?
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v.total)
        .sum())
}

/// Unweighted objective of every stage over a batch.
pub fn stage_values(chain: &ChainSpec, batch: &Batch) -> Result<Vec<ObjectiveValue>> {
    let depth = chain.stages.len();
    let mut sums = vec![(0.0, 0.0); depth];
    for (x, w) in batch.iter_weighted() {
        let mut input = x.to_vec();
        for (k, stage) in chain.stages.iter().enumerate() {
            let ws = Workspace::new(stage, &input)?;
            let v = ws.value(stage.n);
            sums[k].0 += w * v.d1;
            sums[k].1 += w * v.d2;
            input = ws.forward.posterior;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(d1, d2)| ObjectiveValue { d1, d2, total: d1 + d2 })
        .collect())
}

fn apply_update(svq: &mut Svq, grads: &Gradients, rate: f64) {
    svq.codebook.matrix_mut().add_scaled(&grads.recon, -rate);
    svq.response.weights_mut().add_scaled(&grads.weights, -rate);
    for (b, g) in svq.response.biases_mut().iter_mut().zip(&grads.biases) {
        *b -= rate * g;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// 1-based stage index.
    pub stage: usize,
    pub value: ObjectiveValue,
    pub learning_rate: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub num_stages: usize,
    pub rows: Vec<TraceRow>,
    /// Weighted chain objective on the held-out batch before and after
    /// training.
    pub initial_eval: f64,
    pub final_eval: f64,
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,stage,d1,d2,total,learning_rate");
        for k in 1..=self.num_stages {
            out.push_str(&format!(",weight_{k}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                r.step, r.stage, r.value.d1, r.value.d2, r.value.total, r.learning_rate
            ));
            for w in &r.weights {
                out.push_str(&format!(",{w}"));
            }
            out.push('\n');
        }
        out
    }

    /// Logged totals of one stage, in step order.
    pub fn stage_totals(&self, stage: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.value.total)
            .collect()
    }
}

/// Trains a single encoder; identical to a one-stage chain with weight 1.
pub fn train(svq: &mut Svq, config: &TrainConfig, source: &dyn DataSource) -> Result<Trace> {
    let mut chain = ChainSpec::single(svq.clone());
    let trace = train_chain(&mut chain, config, source)?;
    *svq = chain.stages.pop().expect("one stage");
    Ok(trace)
}

pub fn train_chain(chain: &mut ChainSpec, config: &TrainConfig, source: &dyn DataSource) -> Result<Trace> {
    train_chain_with(chain, config, source, |_, _| Ok(()))
}

/// As [`train_chain`], calling `checkpoint(step, stages)` every
/// `config.checkpoint_every` steps (after the update) and once at the end.
pub fn train_chain_with(
    chain: &mut ChainSpec,
    config: &TrainConfig,
    source: &dyn DataSource,
    mut checkpoint: impl FnMut(usize, &[Svq]) -> Result<()>,
) -> Result<Trace> {
    config.validate()?;
    chain.validate()?;
    if source.dim() != chain.input_dim() {
        return Err(SvqError::DimensionMismatch {
            what: "data dimension",
            expected: chain.input_dim(),
            got: source.dim(),
        });
    }
    let mut data_rng: SvqRng = stream_rng(config.seed, DATA_STREAM);
    let eval_batch = Batch::new(source.batch(config.eval_size.max(1), &mut stream_rng(config.seed, EVAL_STREAM)))?;
    let initial_eval = chain_objective(chain, &chain.weights_at(0, config.steps), &eval_batch)?;

    let num_stages = chain.stages.len();
    let mut rows = Vec::new();
    let mut initial_total = None;
    let log_every = config.log_every.max(1);
    for step in 0..config.steps {
        let batch = Batch::new(source.batch(config.batch_size, &mut data_rng))?;
        let weights = chain.weights_at(step, config.steps);
        let rate = config.rate_at(step);
        let (values, grads) = chain_gradients(chain, &weights, &batch)?;

        let total: f64 = values.iter().map(|v| v.total).sum();
        let initial = *initial_total.get_or_insert(total);
        if !total.is_finite() || total > DIVERGENCE_FACTOR * initial {
            return Err(SvqError::Diverged { step, total, initial });
        }

        if step % log_every == 0 || step + 1 == config.steps {
            for (k, v) in values.iter().enumerate() {
                rows.push(TraceRow {
                    step,
                    stage: k + 1,
                    value: *v,
                    learning_rate: rate,
                    weights: weights.clone(),
                });
            }
        }

        if rate != 0.0 {
            for (stage, g) in chain.stages.iter_mut().zip(&grads) {
                apply_update(stage, g, rate);
            }
        }
        if let Some(every) = config.checkpoint_every {
            if every > 0 && (step + 1) % every == 0 && step + 1 != config.steps {
                checkpoint(step + 1, &chain.stages)?;
            }
        }
    }
    checkpoint(config.steps, &chain.stages)?;
    let final_eval = chain_objective(chain, &chain.weights_at(config.steps, config.steps), &eval_batch)?;
    Ok(Trace {
        num_stages,
        rows,
        initial_eval,
        final_eval,
    })
}
