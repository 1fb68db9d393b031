//! 1-D signal generators: Gaussian-bump targets and waveform mixtures.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DataSource, SvqRng};

/// Unit-height Gaussian bump centred on pixel `centre` of a periodic
/// `dim`-pixel line.
pub fn bump(dim: usize, centre: usize, sigma: f64) -> Vec<f64> {
    let two_s2 = 2.0 * sigma * sigma;
    (0..dim)
        .map(|i| {
            let d = (i as i64 - centre as i64).rem_euclid(dim as i64);
            let d = d.min(dim as i64 - d) as f64;
            (-d * d / two_s2).exp()
        })
        .collect()
}

/// Independent unit-height bumps (σ = 2) at uniform integer positions plus
/// i.i.d. uniform [0, noise_max] noise on every pixel.
#[derive(Debug, Clone)]
pub struct MultiTargets {
    pub dim: usize,
    pub num_targets: usize,
    pub sigma: f64,
    pub noise_max: f64,
}

impl MultiTargets {
    pub fn new(dim: usize, num_targets: usize) -> Self {
        Self {
            dim,
            num_targets,
            sigma: 2.0,
            noise_max: 0.5,
        }
    }
}

impl DataSource for MultiTargets {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for _ in 0..self.num_targets {
            let c = rng.random_range(0..self.dim);
            for (xi, b) in x.iter_mut().zip(bump(self.dim, c, self.sigma)) {
                *xi += b;
            }
        }
        if self.noise_max > 0.0 {
            for xi in x.iter_mut() {
                *xi += rng.random_range(0.0..=self.noise_max);
            }
        }
        x
    }
}

/// Two σ = 1.5 bumps whose separation is a uniform integer in
/// `[sep_min, sep_max]`; the first centre is uniform.
#[derive(Debug, Clone)]
pub struct CorrelatedPair {
    pub dim: usize,
    pub sep_min: usize,
    pub sep_max: usize,
    pub sigma: f64,
    pub noise_max: f64,
}

impl CorrelatedPair {
    pub fn new(dim: usize, sep_min: usize, sep_max: usize) -> Self {
        Self {
            dim,
            sep_min,
            sep_max,
            sigma: 1.5,
            noise_max: 0.0,
        }
    }

    /// Sample plus its (first centre, separation).
    pub fn sample_detailed(&self, rng: &mut SvqRng) -> (Vec<f64>, usize, usize) {
        let c = rng.random_range(0..self.dim);
        let s = rng.random_range(self.sep_min..=self.sep_max);
        let mut x = bump(self.dim, c, self.sigma);
        for (xi, b) in x.iter_mut().zip(bump(self.dim, (c + s) % self.dim, self.sigma)) {
            *xi += b;
        }
        if self.noise_max > 0.0 {
            for xi in x.iter_mut() {
                *xi += rng.random_range(0.0..=self.noise_max);
            }
        }
        (x, c, s)
    }
}

impl DataSource for CorrelatedPair {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        self.sample_detailed(rng).0
    }
}

/// Sinusoid (two cycles across the window) plus a square wave of period
/// dim/4, each cyclically shifted by an independent uniform phase, plus
/// Gaussian noise.
#[derive(Debug, Clone)]
pub struct Waveforms {
    pub dim: usize,
    pub sine_amplitude: f64,
    pub square_amplitude: f64,
    pub noise_std: f64,
}

impl Waveforms {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sine_amplitude: 1.0,
            square_amplitude: 0.5,
            noise_std: 0.05,
        }
    }

    /// Unshifted reference shapes (unit amplitude): [sinusoid, square].
    pub fn references(&self) -> [Vec<f64>; 2] {
        let d = self.dim as f64;
        let sine = (0..self.dim).map(|t| (TAU * 2.0 * t as f64 / d).sin()).collect();
        let period = (self.dim / 4).max(2);
        let square = (0..self.dim)
            .map(|t| if t % period < period / 2 { 1.0 } else { -1.0 })
            .collect();
        [sine, square]
    }
}

impl DataSource for Waveforms {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        let [sine, square] = self.references();
        let p1 = rng.random_range(0..self.dim);
        let p2 = rng.random_range(0..self.dim);
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite noise std");
        (0..self.dim)
            .map(|t| {
                let mut v = self.sine_amplitude * sine[(t + p1) % self.dim]
                    + self.square_amplitude * square[(t + p2) % self.dim];
                if self.noise_std > 0.0 {
                    v += noise.sample(rng);
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::stream_rng;

    #[test]
    fn noise_only_targets_stay_in_range() {
        let g = MultiTargets::new(32, 0);
        let mut rng = stream_rng(1, 0);
        for _ in 0..200 {
            assert!(g.sample(&mut rng).iter().all(|&v| (0.0..=0.5).contains(&v)));
        }
    }

    #[test]
    fn noise_free_single_target_is_a_bump() {
        let g = MultiTargets {
            noise_max: 0.0,
            ..MultiTargets::new(32, 1)
        };
        let mut rng = stream_rng(2, 0);
        let x = g.sample(&mut rng);
        let (c, &max) = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(max, 1.0);
        for k in 1..6usize {
            let v = x[(c + k) % 32];
            assert!((v - (-((k * k) as f64) / 8.0).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn multi_target_mean_matches_expectation() {
        let g = MultiTargets::new(32, 2);
        let mut rng = stream_rng(3, 0);
        let count = 10_000;
        let mut mean = vec![0.0; 32];
        for _ in 0..count {
            for (m, v) in mean.iter_mut().zip(g.sample(&mut rng)) {
                *m += v / count as f64;
            }
        }
        let mass: f64 = bump(32, 0, 2.0).iter().sum();
        let expect = 0.25 + 2.0 * mass / 32.0;
        for m in mean {
            assert!((m - expect).abs() < 0.03, "{m} vs {expect}");
        }
    }

    #[test]
    fn fixed_separation_places_maxima_apart() {
        let g = CorrelatedPair::new(32, 6, 6);
        let mut rng = stream_rng(4, 0);
        for _ in 0..50 {
            let (x, c, s) = g.sample_detailed(&mut rng);
            assert_eq!(s, 6);
            assert_eq!(x[c], x[(c + 6) % 32]);
            // closed-form midpoint of the two-bump superposition
            let mid = 2.0 * (-9.0f64 / (2.0 * 1.5 * 1.5)).exp();
            assert!((x[(c + 3) % 32] - mid).abs() < 1e-12);
            let peaks: Vec<usize> = (0..32)
                .filter(|&i| x[i] > x[(i + 1) % 32] && x[i] > x[(i + 31) % 32])
                .collect();
            assert_eq!(peaks.len(), 2);
        }
    }

    #[test]
    fn first_centre_is_uniform() {
        let g = CorrelatedPair::new(32, 3, 8);
        let mut rng = stream_rng(5, 0);
        let count = 10_000;
        let mut hist = [0usize; 32];
        for _ in 0..count {
            hist[g.sample_detailed(&mut rng).1] += 1;
        }
        let e = count as f64 / 32.0;
        let chi2: f64 = hist.iter().map(|&h| (h as f64 - e).powi(2) / e).sum();
        // 1% critical value with 31 degrees of freedom
        assert!(chi2 < 52.19, "chi2 = {chi2}");
    }

    #[test]
    fn pure_sinusoid_when_square_and_noise_removed() {
        let g = Waveforms {
            square_amplitude: 0.0,
            noise_std: 0.0,
            ..Waveforms::new(64)
        };
        let mut rng = stream_rng(6, 0);
        let x = g.sample(&mut rng);
        let max = x.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        let sine = &g.references()[0];
        let matched = (0..64).any(|s| (0..64).all(|t| (x[t] - sine[(t + s) % 64]).abs() < 1e-12));
        assert!(matched);
    }

    #[test]
    fn waveform_mean_is_zero() {
        let g = Waveforms::new(64);
        let mut rng = stream_rng(7, 0);
        let count = 10_000;
        let mut mean = vec![0.0; 64];
        for _ in 0..count {
            for (m, v) in mean.iter_mut().zip(g.sample(&mut rng)) {
                *m += v / count as f64;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02));
    }

    #[test]
    fn waveform_power_sits_on_generator_harmonics() {
        let dim = 64;
        let g = Waveforms::new(dim);
        let mut rng = stream_rng(8, 0);
        let draws = 500;
        let mut power = vec![0.0; dim / 2 + 1];
        for _ in 0..draws {
            let x = g.sample(&mut rng);
            for (k, p) in power.iter_mut().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let a = TAU * (k * t) as f64 / dim as f64;
                    re += v * a.cos();
                    im -= v * a.sin();
                }
                *p += (re * re + im * im) / draws as f64;
            }
        }
        // sinusoid at bin 2; square wave (period 16) at odd multiples of bin 4
        let signal_bins = [2usize, 4, 12, 20, 28];
        // white noise floor: dim * std²
        let floor = dim as f64 * 0.05 * 0.05;
        for (k, p) in power.iter().enumerate() {
            if signal_bins.contains(&k) {
                assert!(*p > 20.0 * floor, "bin {k}: {p}");
            } else {
                assert!(*p < 2.0 * floor, "bin {k}: {p} vs floor {floor}");
            }
        }
    }
}
