//! Probability leakage Pr(y|y') between nearby codes.

use crate::error::{Result, SvqError};
use crate::topology::Layout;

/// Sparse column-stochastic table of leak probabilities. Column `src` lists
/// every destination code that receives probability from `src`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageKernel {
    radius: usize,
    sigma: f64,
    columns: Vec<Vec<(usize, f64)>>,
    warning: Option<String>,
}

impl LeakageKernel {
    pub fn identity(num_codes: usize) -> Self {
        Self {
            radius: 0,
            sigma: 1.0,
            columns: (0..num_codes).map(|y| vec![(y, 1.0)]).collect(),
            warning: None,
        }
    }

    /// Discretised Gaussian leakage: Pr(y|y') ∝ exp(−‖pos(y)−pos(y')‖²/2σ²)
    /// for y within Chebyshev `radius` of y', renormalised per source.
    pub fn gaussian(layout: Layout, radius: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SvqError::config(format!("leakage sigma must be positive, got {sigma}")));
        }
        let m = layout.num_codes();
        let extent = layout.extent();
        let (radius, warning) = if radius > extent {
            (
                extent,
                Some(format!(
                    "leakage radius {radius} exceeds layout extent {extent}; clipped to {extent}"
                )),
            )
        } else {
            (radius, None)
        };
        let two_s2 = 2.0 * sigma * sigma;
        let columns = (0..m)
            .map(|src| {
                let mut col: Vec<(usize, f64)> = layout
                    .within(src, radius)
                    .into_iter()
                    .map(|dst| {
                        let (dr, dc) = layout.displacement(src, dst);
                        let r2 = (dr * dr + dc * dc) as f64;
                        (dst, (-r2 / two_s2).exp())
                    })
                    .collect();
                let total: f64 = col.iter().map(|&(_, w)| w).sum();
                col.iter_mut().for_each(|(_, w)| *w /= total);
                col
            })
            .collect();
        Ok(Self {
            radius,
            sigma,
            columns,
            warning,
        })
    }

    /// Builds a kernel from explicit per-source columns, checking unit mass.
    pub fn from_columns(columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let m = columns.len();
        for (src, col) in columns.iter().enumerate() {
            let mut total = 0.0;
            for &(dst, w) in col {
                if dst >= m || !(w >= 0.0) || !w.is_finite() {
                    return Err(SvqError::config(format!("invalid leak entry ({dst}, {w}) in column {src}")));
                }
                total += w;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(SvqError::config(format!("leak column {src} has mass {total}, expected 1")));
            }
        }
        Ok(Self {
            radius: 0,
            sigma: 1.0,
            columns,
            warning: None,
        })
    }

    pub fn num_codes(&self) -> usize {
        self.columns.len()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn column(&self, src: usize) -> &[(usize, f64)] {
        &self.columns[src]
    }

    pub fn is_identity(&self) -> bool {
        self.columns
            .iter()
            .enumerate()
            .all(|(src, col)| col.len() == 1 && col[0].0 == src && col[0].1 == 1.0)
    }

    /// Pr(y|y') as a dense value; zero outside the leakage neighbourhood.
    pub fn prob(&self, dst: usize, src: usize) -> f64 {
        self.columns[src]
            .iter()
            .find(|&&(d, _)| d == dst)
            .map_or(0.0, |&(_, w)| w)
    }

    /// out[y] = Σ_{y'} Pr(y|y') input[y']
    pub fn spread(&self, input: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (src, col) in self.columns.iter().enumerate() {
            let v = input[src];
            for &(dst, w) in col {
                out[dst] += w * v;
            }
        }
    }

    /// Transpose of [`spread`](Self::spread): out[y'] = Σ_y Pr(y|y') input[y].
    pub fn gather(&self, input: &[f64], out: &mut [f64]) {
        for (src, col) in self.columns.iter().enumerate() {
            out[src] = col.iter().map(|&(dst, w)| w * input[dst]).sum();
        }
    }
}
