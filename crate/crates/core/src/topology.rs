//! Code-array layouts and the neighbourhoods N(y), N⁻¹(y) used for lateral
//! inhibition.

use std::fmt;

use crate::error::{Result, SvqError};

/// Spatial arrangement of the M codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// 1-D periodic array.
    Ring(usize),
    /// 1-D array, truncated at both ends.
    Line(usize),
    Grid { rows: usize, cols: usize, wrap: bool },
}

impl Layout {
    pub fn num_codes(&self) -> usize {
        match *self {
            Layout::Ring(m) | Layout::Line(m) => m,
            Layout::Grid { rows, cols, .. } => rows * cols,
        }
    }

    pub fn wraps(&self) -> bool {
        match *self {
            Layout::Ring(_) => true,
            Layout::Line(_) => false,
            Layout::Grid { wrap, .. } => wrap,
        }
    }

    /// (rows, cols) of the array; 1-D layouts are a single row.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Layout::Ring(m) | Layout::Line(m) => (1, m),
            Layout::Grid { rows, cols, .. } => (rows, cols),
        }
    }

    pub fn coords(&self, y: usize) -> (usize, usize) {
        let (_, cols) = self.shape();
        (y / cols, y % cols)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        let (_, cols) = self.shape();
        row * cols + col
    }

    /// Signed displacement from `a` to `b` in layout coordinates, using the
    /// minimum image along wrapped axes.
    pub fn displacement(&self, a: usize, b: usize) -> (i64, i64) {
        let (rows, cols) = self.shape();
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let wrap = self.wraps();
        (
            axis_delta(ra, rb, rows, wrap),
            axis_delta(ca, cb, cols, wrap),
        )
    }

    pub fn chebyshev(&self, a: usize, b: usize) -> usize {
        let (dr, dc) = self.displacement(a, b);
        dr.unsigned_abs().max(dc.unsigned_abs()) as usize
    }

    /// Largest Chebyshev distance between any two codes.
    pub fn extent(&self) -> usize {
        let (rows, cols) = self.shape();
        let axis = |len: usize| if self.wraps() { len / 2 } else { len.saturating_sub(1) };
        axis(rows).max(axis(cols))
    }

    /// Codes within Chebyshev `radius` of `y`, in ascending index order.
    pub fn within(&self, y: usize, radius: usize) -> Vec<usize> {
        (0..self.num_codes())
            .filter(|&z| self.chebyshev(y, z) <= radius)
            .collect()
    }
}

fn axis_delta(a: usize, b: usize, len: usize, wrap: bool) -> i64 {
    let mut d = b as i64 - a as i64;
    if wrap && len > 0 {
        let len = len as i64;
        d = d.rem_euclid(len);
        if d > len / 2 {
            d -= len;
        }
    }
    d
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Layout::Ring(m) => write!(f, "ring {m}"),
            Layout::Line(m) => write!(f, "line {m}"),
            Layout::Grid { rows, cols, wrap } => write!(f, "grid {rows} {cols} {wrap}"),
        }
    }
}

/// A layout plus the lateral-inhibition radius, with N(y) and N⁻¹(y)
/// precomputed.
#[derive(Debug, Clone)]
pub struct Topology {
    layout: Layout,
    radius: usize,
    /// N(y') for every context y', ascending.
    neighbourhoods: Vec<Vec<usize>>,
    /// For each code y: the contexts y' with y ∈ N(y'), and the slot of y
    /// within N(y').
    inverse: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    pub fn new(layout: Layout, neighbourhood_radius: usize) -> Result<Self> {
        let m = layout.num_codes();
        if m == 0 {
            return Err(SvqError::config("layout must contain at least one code"));
        }
        let neighbourhoods: Vec<Vec<usize>> =
            (0..m).map(|y| layout.within(y, neighbourhood_radius)).collect();
        let mut inverse = vec![Vec::new(); m];
        for (ctx, members) in neighbourhoods.iter().enumerate() {
            for (slot, &y) in members.iter().enumerate() {
                inverse[y].push((ctx, slot));
            }
        }
        Ok(Self {
            layout,
            radius: neighbourhood_radius,
            neighbourhoods,
            inverse,
        })
    }

    /// Neighbourhood covering every code: the posterior reduces to plain
    /// normalisation over all responses.
    pub fn global(layout: Layout) -> Result<Self> {
        Self::new(layout, layout.extent())
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn num_codes(&self) -> usize {
        self.layout.num_codes()
    }

    pub fn neighbourhood(&self, context: usize) -> &[usize] {
        &self.neighbourhoods[context]
    }

    pub fn inverse(&self, y: usize) -> &[(usize, usize)] {
        &self.inverse[y]
    }

    pub fn covers_all(&self) -> bool {
        self.neighbourhoods.iter().all(|n| n.len() == self.num_codes())
    }
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.radius == other.radius
    }
}
