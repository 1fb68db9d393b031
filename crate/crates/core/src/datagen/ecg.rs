//! Synthetic multi-channel maternal + foetal ECG.
//!
//! Two latent periodic spike trains (maternal: period `maternal_period`,
//! amplitude 1; foetal: period `maternal_period / period_ratio`, amplitude
//! `foetal_amplitude`) are mixed into `channels` observations by a fixed
//! random matrix and corrupted with Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::matrix::Matrix;

#[derive(Debug, Clone)]
pub struct EcgSynth {
    pub channels: usize,
    pub maternal_period: f64,
    pub period_ratio: f64,
    pub foetal_amplitude: f64,
    pub noise_std: f64,
    /// Gaussian width of each spike, in samples.
    pub spike_width: f64,
}

impl Default for EcgSynth {
    fn default() -> Self {
        Self {
            channels: 8,
            maternal_period: 100.0,
            period_ratio: 1.8,
            foetal_amplitude: 0.25,
            noise_std: 0.1,
            spike_width: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EcgRecording {
    /// One channel vector per time step.
    pub observed: Vec<Vec<f64>>,
    pub maternal: Vec<f64>,
    pub foetal: Vec<f64>,
    /// channels × 2 mixing matrix; column 0 maternal, column 1 foetal.
    pub mixing: Matrix,
}

impl EcgSynth {
    pub fn foetal_period(&self) -> f64 {
        self.maternal_period / self.period_ratio
    }

    fn spike_train(&self, len: usize, period: f64, phase: f64, amplitude: f64) -> Vec<f64> {
        let two_w2 = 2.0 * self.spike_width * self.spike_width;
        (0..len)
            .map(|t| {
                let t = t as f64;
                // distance to the nearest spike time phase + k·period
                let k = ((t - phase) / period).round();
                let d = t - (phase + k * period);
                amplitude * (-d * d / two_w2).exp()
            })
            .collect()
    }

    pub fn generate(&self, len: usize, rng: &mut impl Rng) -> EcgRecording {
        assert!(self.channels >= 2, "ECG needs at least two channels");
        let mixing = Matrix::from_fn(self.channels, 2, |_, _| rng.random_range(-1.0..1.0));
        let maternal = self.spike_train(len, self.maternal_period, rng.random_range(0.0..self.maternal_period), 1.0);
        let fp = self.foetal_period();
        let foetal = self.spike_train(len, fp, rng.random_range(0.0..fp), self.foetal_amplitude);
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite noise std");
        let observed = (0..len)
            .map(|t| {
                (0..self.channels)
                    .map(|c| {
                        let mut v = mixing[(c, 0)] * maternal[t] + mixing[(c, 1)] * foetal[t];
                        if self.noise_std > 0.0 {
                            v += noise.sample(rng);
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        EcgRecording {
            observed,
            maternal,
            foetal,
            mixing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::stream_rng;
    use nalgebra::DMatrix;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn peak_count(x: &[f64]) -> usize {
        let max = x.iter().cloned().fold(0.0, f64::max);
        (1..x.len() - 1)
            .filter(|&t| x[t] > 0.5 * max && x[t] >= x[t - 1] && x[t] > x[t + 1])
            .count()
    }

    #[test]
    fn without_foetus_channels_are_scaled_copies() {
        let g = EcgSynth {
            foetal_amplitude: 0.0,
            noise_std: 0.0,
            ..Default::default()
        };
        let rec = g.generate(500, &mut stream_rng(1, 0));
        for c in 0..g.channels {
            let ch: Vec<f64> = rec.observed.iter().map(|v| v[c]).collect();
            for (t, v) in ch.iter().enumerate() {
                assert!((v - rec.mixing[(c, 0)] * rec.maternal[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_recovers_latent_trains() {
        let g = EcgSynth {
            noise_std: 0.0,
            ..Default::default()
        };
        let rec = g.generate(2000, &mut stream_rng(2, 0));
        let a = DMatrix::from_fn(g.channels, 2, |r, c| rec.mixing[(r, c)]);
        let pinv = a.pseudo_inverse(1e-12).unwrap();
        let mut m = Vec::new();
        let mut f = Vec::new();
        for obs in &rec.observed {
            let s = &pinv * nalgebra::DVector::from_column_slice(obs);
            m.push(s[0]);
            f.push(s[1]);
        }
        assert!(corr(&m, &rec.maternal) > 0.99);
        assert!(corr(&f, &rec.foetal) > 0.99);
    }

    #[test]
    fn spike_rate_ratio_is_as_configured() {
        let g = EcgSynth::default();
        let rec = g.generate(20_000, &mut stream_rng(3, 0));
        let ratio = peak_count(&rec.foetal) as f64 / peak_count(&rec.maternal) as f64;
        assert!((ratio - 1.8).abs() < 0.05, "ratio {ratio}");
    }
}
