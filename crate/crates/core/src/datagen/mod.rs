//! Seeded synthetic data generators and preprocessing.

mod ecg;
mod image;
mod manifold;
mod signals;
mod whiten;

pub use ecg::{EcgRecording, EcgSynth};
pub use image::{
    filtered_noise, interdigitate, local_normalize, make_texture, patch_at, sample_patch, ImageData, PatchSource,
};
pub use manifold::{sample_circle, sample_torus, Circle, Torus};
pub use signals::{bump, CorrelatedPair, MultiTargets, Waveforms};
pub use whiten::{whiten, Whitening};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere for reproducible streams.
pub type SvqRng = ChaCha8Rng;

/// Master-seeded generator on a fixed stream, so independent consumers
/// (data, initialisation, evaluation) never share draws.
pub fn stream_rng(seed: u64, stream: u64) -> SvqRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Anything that yields i.i.d. training vectors.
pub trait DataSource {
    fn dim(&self) -> usize;

    fn sample(&self, rng: &mut SvqRng) -> Vec<f64>;

    fn batch(&self, count: usize, rng: &mut SvqRng) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Draws uniformly (with replacement) from a fixed set of vectors, e.g. a
/// whitened recording.
#[derive(Debug, Clone)]
pub struct Pool {
    rows: Vec<Vec<f64>>,
}

impl Pool {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        assert!(!rows.is_empty(), "empty pool");
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl DataSource for Pool {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        use rand::Rng;
        self.rows[rng.random_range(0..self.rows.len())].clone()
    }
}

/// Rows as CSV: one vector per line, shortest round-trip decimal form.
pub fn to_csv(header: Option<&[String]>, rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
