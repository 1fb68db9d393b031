//! Joint versus factorial classification of encoders trained on the torus,
//! and the (M, n) stability sweep built on it.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::datagen::{stream_rng, Torus};
use crate::error::{Result, SvqError};
use crate::leakage::LeakageKernel;
use crate::model::Svq;
use crate::topology::{Layout, Topology};
use crate::trainer::{train, TrainConfig, INIT_STREAM};

pub const DEFAULT_GRID: usize = 64;
pub const FACTORIAL_RATIO: f64 = 0.25;
pub const FACTORIAL_MAJORITY: f64 = 0.75;
pub const JOINT_MAJORITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingClass {
    Joint,
    Factorial,
    Mixed,
}

impl fmt::Display for EncodingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingClass::Joint => "joint",
            EncodingClass::Factorial => "factorial",
            EncodingClass::Mixed => "mixed",
        })
    }
}

impl FromStr for EncodingClass {
    type Err = SvqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(EncodingClass::Joint),
            "factorial" => Ok(EncodingClass::Factorial),
            "mixed" => Ok(EncodingClass::Mixed),
            _ => Err(SvqError::config(format!("unknown encoding class {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingLabel {
    pub label: EncodingClass,
    /// Dependence ratio per code; `None` for inactive codes.
    pub ratios: Vec<Option<f64>>,
}

impl EncodingLabel {
    pub fn factorial_codes(&self) -> usize {
        self.ratios.iter().flatten().filter(|&&r| r < FACTORIAL_RATIO).count()
    }

    pub fn active_codes(&self) -> usize {
        self.ratios.iter().flatten().count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("code,ratio,type\n");
        for (y, r) in self.ratios.iter().enumerate() {
            match r {
                Some(r) => {
                    let kind = if *r < FACTORIAL_RATIO { "factorial" } else { "joint" };
                    out.push_str(&format!("{},{r},{kind}\n", y + 1));
                }
                None => out.push_str(&format!("{},,inactive\n", y + 1)),
            }
        }
        out.push_str(&format!("label,,{}\n", self.label));
        out
    }
}

/// Classifies from per-code posterior tables `grid[y][i * g + j]` sampled at
/// (θ1_i, θ2_j) on a g × g grid.
pub fn classify_grid(grid: &[Vec<f64>], g: usize) -> EncodingLabel {
    let m = grid.len();
    let floor = 1.0 / (10.0 * m as f64);
    let ratios: Vec<Option<f64>> = grid
        .iter()
        .map(|table| {
            let max = table.iter().cloned().fold(0.0, f64::max);
            if max < floor {
                return None;
            }
            let row_means: Vec<f64> = (0..g).map(|i| table[i * g..(i + 1) * g].iter().sum::<f64>() / g as f64).collect();
            let col_means: Vec<f64> = (0..g).map(|j| (0..g).map(|i| table[i * g + j]).sum::<f64>() / g as f64).collect();
            let v1 = variance(&row_means);
            let v2 = variance(&col_means);
            let hi = v1.max(v2);
            // a flat response depends on neither angle
            Some(if hi > 0.0 { v1.min(v2) / hi } else { 1.0 })
        })
        .collect();
    let active = ratios.iter().flatten().count();
    let factorial = ratios.iter().flatten().filter(|&&r| r < FACTORIAL_RATIO).count();
    let frac = if active == 0 { 0.0 } else { factorial as f64 / active as f64 };
    let label = if frac >= FACTORIAL_MAJORITY {
        EncodingClass::Factorial
    } else if frac <= JOINT_MAJORITY {
        EncodingClass::Joint
    } else {
        EncodingClass::Mixed
    };
    EncodingLabel { label, ratios }
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Posterior of every code on a g × g grid of torus angles.
pub fn torus_posterior_grid(svq: &Svq, g: usize) -> Result<Vec<Vec<f64>>> {
    if svq.dim() != 4 {
        return Err(SvqError::DimensionMismatch {
            what: "torus model dimension",
            expected: 4,
            got: svq.dim(),
        });
    }
    let m = svq.num_codes();
    let mut grid = vec![vec![0.0; g * g]; m];
    for i in 0..g {
        let (s1, c1) = (TAU * i as f64 / g as f64).sin_cos();
        for j in 0..g {
            let (s2, c2) = (TAU * j as f64 / g as f64).sin_cos();
            let post = svq.forward(&[c1, s1, c2, s2])?.posterior;
            for (y, p) in post.into_iter().enumerate() {
                grid[y][i * g + j] = p;
            }
        }
    }
    Ok(grid)
}

pub fn classify_encoding(svq: &Svq, g: usize) -> Result<EncodingLabel> {
    if g < 2 {
        return Err(SvqError::config("grid resolution must be at least 2"));
    }
    Ok(classify_grid(&torus_posterior_grid(svq, g)?, g))
}

/// Outcome of one (M, n) cell of a stability sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub num_codes: usize,
    pub n: usize,
    pub labels: Vec<Option<EncodingClass>>,
}

impl SweepCell {
    fn count(&self, class: EncodingClass) -> usize {
        self.labels.iter().filter(|l| **l == Some(class)).count()
    }

    pub fn failed(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Fraction of completed runs labelled factorial.
    pub fn factorial_fraction(&self) -> f64 {
        let done = self.labels.len() - self.failed();
        if done == 0 {
            0.0
        } else {
            self.count(EncodingClass::Factorial) as f64 / done as f64
        }
    }

    pub fn majority(&self) -> Option<EncodingClass> {
        let half = self.labels.len() / 2;
        [EncodingClass::Factorial, EncodingClass::Joint, EncodingClass::Mixed]
            .into_iter()
            .find(|&c| self.count(c) > half)
    }
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("M,n,seeds,joint,factorial,mixed,failed,factorial_fraction\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.num_codes,
            c.n,
            c.labels.len(),
            c.count(EncodingClass::Joint),
            c.count(EncodingClass::Factorial),
            c.count(EncodingClass::Mixed),
            c.failed(),
            c.factorial_fraction()
        ));
    }
    out
}

/// Torus encoder on a ring of codes with no leakage. `neighbourhood` is
/// the ring radius of each normalisation context; `None` makes it cover
/// every code.
pub fn torus_model(num_codes: usize, n: usize, neighbourhood: Option<usize>, config: &TrainConfig) -> Result<Svq> {
    let layout = Layout::Ring(num_codes);
    let topology = match neighbourhood {
        Some(r) if r < layout.extent() => Topology::new(layout, r)?,
        _ => Topology::global(layout)?,
    };
    Svq::init(
        4,
        topology,
        LeakageKernel::identity(num_codes),
        n,
        config.init_scale,
        &mut stream_rng(config.seed, INIT_STREAM),
    )
}

/// Trains and classifies one torus model; the run seed is `config.seed`.
pub fn torus_run(
    num_codes: usize,
    n: usize,
    neighbourhood: Option<usize>,
    config: &TrainConfig,
    g: usize,
) -> Result<(Svq, EncodingLabel)> {
    let mut svq = torus_model(num_codes, n, neighbourhood, config)?;
    train(&mut svq, config, &Torus)?;
    let label = classify_encoding(&svq, g)?;
    Ok((svq, label))
}

/// Trains `seeds` models per (M, n) cell with seeds `config.seed + s`.
/// Diverged runs are recorded as failed cells.
pub fn stability_sweep(
    ms: &[usize],
    ns: &[usize],
    neighbourhood: Option<usize>,
    seeds: usize,
    config: &TrainConfig,
    g: usize,
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for &m in ms {
        for &n in ns {
            let mut labels = Vec::with_capacity(seeds);
            for s in 0..seeds {
                let cfg = TrainConfig {
                    seed: config.seed + s as u64,
                    ..config.clone()
                };
                match torus_run(m, n, neighbourhood, &cfg, g) {
                    Ok((_, l)) => labels.push(Some(l.label)),
                    Err(SvqError::Diverged { .. }) | Err(SvqError::DegenerateResponse { .. }) => labels.push(None),
                    Err(e) => return Err(e),
                }
            }
            cells.push(SweepCell { num_codes: m, n, labels });
        }
    }
    Ok(cells)
}
