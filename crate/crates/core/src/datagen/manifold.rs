use std::f64::consts::TAU;

use rand::Rng;

use super::{DataSource, SvqRng};

/// (cos θ, sin θ) with θ uniform on [0, 2π).
pub fn sample_circle(rng: &mut impl Rng) -> Vec<f64> {
    let t = rng.random_range(0.0..TAU);
    vec![t.cos(), t.sin()]
}

/// (cos θ1, sin θ1, cos θ2, sin θ2) with independent uniform angles.
pub fn sample_torus(rng: &mut impl Rng) -> Vec<f64> {
    let a = rng.random_range(0.0..TAU);
    let b = rng.random_range(0.0..TAU);
    vec![a.cos(), a.sin(), b.cos(), b.sin()]
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Circle;

#[derive(Debug, Clone, Copy, Default)]
pub struct Torus;

impl DataSource for Circle {
    fn dim(&self) -> usize {
        2
    }
    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        sample_circle(rng)
    }
}

impl DataSource for Torus {
    fn dim(&self) -> usize {
        4
    }
    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        sample_torus(rng)
    }
}
