//! Diagnostics over a grid of codes: topographic order, sparse image coding
//! and dominance maps.

use rand::Rng;

use crate::datagen::{interdigitate, local_normalize, patch_at, stream_rng, ImageData, PatchSource};
use crate::error::{Result, SvqError};
use crate::matrix::dot;
use crate::model::{Codebook, Svq};
use crate::sampling::mix_rows;
use crate::topology::Layout;

pub const RANDOM_PAIRS: usize = 1000;
pub const DOMINANCE_PATCHES: usize = 2000;

/// One value per code, arranged as the code layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MapImage {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl MapImage {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        let (rows, cols) = layout.shape();
        if values.len() != rows * cols {
            return Err(SvqError::DimensionMismatch {
                what: "map values",
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    /// Greyscale PGM after linear rescaling to [0, 1].
    pub fn to_pgm(&self) -> Vec<u8> {
        ImageData {
            width: self.cols,
            height: self.rows,
            pixels: self.values.clone(),
        }
        .rescaled()
        .to_pgm()
    }

    /// PGM whose grey levels are the values themselves, for integer labels
    /// in 0..=255.
    pub fn to_label_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.values.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        out
    }
}

/// Pairs of codes one step apart along a row or column of the layout
/// (across the seam when the layout wraps), each listed once.
pub fn adjacent_pairs(layout: Layout) -> Vec<(usize, usize)> {
    let (rows, cols) = layout.shape();
    let wrap = layout.wraps();
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let a = layout.index(r, c);
            if c + 1 < cols || (wrap && cols > 2) {
                pairs.push((a, layout.index(r, (c + 1) % cols)));
            }
            if r + 1 < rows || (wrap && rows > 2) {
                pairs.push((a, layout.index((r + 1) % rows, c)));
            }
        }
    }
    pairs
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na > 0.0 && nb > 0.0 {
        dot(a, b) / (na * nb)
    } else {
        0.0
    }
}

/// Mean cosine similarity of (mean-removed) reconstruction rows over
/// adjacent codes minus the mean over `RANDOM_PAIRS` random non-adjacent
/// pairs drawn with `seed`.
pub fn topographic_order(codebook: &Codebook, layout: Layout, seed: u64) -> Result<f64> {
    let m = codebook.num_codes();
    if layout.num_codes() != m {
        return Err(SvqError::DimensionMismatch {
            what: "layout codes",
            expected: m,
            got: layout.num_codes(),
        });
    }
    let dim = codebook.dim();
    let mean: Vec<f64> = (0..dim)
        .map(|k| (0..m).map(|y| codebook.row(y)[k]).sum::<f64>() / m as f64)
        .collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|y| codebook.row(y).iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    let pairs = adjacent_pairs(layout);
    if pairs.is_empty() {
        return Err(SvqError::config("layout has no adjacent codes"));
    }
    let near = pairs.iter().map(|&(a, b)| cosine(&rows[a], &rows[b])).sum::<f64>() / pairs.len() as f64;
    let adjacent = |a: usize, b: usize| pairs.contains(&(a, b)) || pairs.contains(&(b, a));
    if (0..m).all(|a| (0..m).all(|b| a == b || adjacent(a, b))) {
        return Err(SvqError::config("layout has no non-adjacent pairs"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut far = 0.0;
    let mut drawn = 0;
    while drawn < RANDOM_PAIRS {
        let a = rng.random_range(0..m);
        let b = rng.random_range(0..m);
        if a == b || adjacent(a, b) {
            continue;
        }
        far += cosine(&rows[a], &rows[b]);
        drawn += 1;
    }
    Ok(near - far / RANDOM_PAIRS as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoding {
    /// Top-left corners of the window positions, row-major.
    pub positions: Vec<(usize, usize)>,
    /// Posterior at every position: `posteriors[p][y]`.
    pub posteriors: Vec<Vec<f64>>,
    /// Maximum posterior of each code over all positions.
    pub activity: MapImage,
    /// Average over positions of the fraction of codes above half the
    /// position's largest posterior.
    pub sparsity: f64,
    /// Overlap average of the mean reconstruction patches.
    pub reconstruction: ImageData,
    /// Number of windows covering each pixel.
    pub coverage: Vec<usize>,
}

impl ImageEncoding {
    /// Mean squared error against `img` over covered pixels.
    pub fn mse(&self, img: &ImageData) -> f64 {
        covered_mse(&self.coverage, &self.reconstruction.pixels, &img.pixels)
    }

    /// Mean squared error of the constant image equal to the mean of `img`
    /// over the covered pixels.
    pub fn baseline_mse(&self, img: &ImageData) -> f64 {
        let (sum, count) = self
            .coverage
            .iter()
            .zip(&img.pixels)
            .filter(|(c, _)| **c > 0)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        let mean = sum / count.max(1) as f64;
        let flat = vec![mean; img.pixels.len()];
        covered_mse(&self.coverage, &flat, &img.pixels)
    }
}

fn covered_mse(coverage: &[usize], a: &[f64], b: &[f64]) -> f64 {
    let (sum, count) = coverage
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(c, _)| **c > 0)
        .fold((0.0, 0usize), |(s, n), (_, (x, y))| (s + (x - y).powi(2), n + 1));
    sum / count.max(1) as f64
}

fn window_positions(len: usize, window: usize, stride: usize) -> Vec<usize> {
    (0..=len - window).step_by(stride).collect()
}

/// Slides a window over `img` with the given stride, encoding each patch.
pub fn encode_image(svq: &Svq, img: &ImageData, window: usize, stride: usize) -> Result<ImageEncoding> {
    if window == 0 || window > img.width.min(img.height) {
        return Err(SvqError::config(format!(
            "window {window} does not fit in {}x{} image",
            img.width, img.height
        )));
    }
    if stride == 0 {
        return Err(SvqError::config("stride must be positive"));
    }
    if window * window != svq.dim() {
        return Err(SvqError::DimensionMismatch {
            what: "window area",
            expected: svq.dim(),
            got: window * window,
        });
    }
    let m = svq.num_codes();
    let mut positions = Vec::new();
    let mut posteriors = Vec::new();
    let mut activity = vec![0.0f64; m];
    let mut sparsity = 0.0;
    let mut sum = vec![0.0; img.pixels.len()];
    let mut coverage = vec![0usize; img.pixels.len()];
    for r in window_positions(img.height, window, stride) {
        for c in window_positions(img.width, window, stride) {
            let patch = patch_at(img, r, c, window);
            let post = svq.forward(&patch)?.posterior;
            let max = post.iter().cloned().fold(0.0, f64::max);
            sparsity += post.iter().filter(|&&p| p > 0.5 * max).count() as f64 / m as f64;
            for (a, p) in activity.iter_mut().zip(&post) {
                *a = a.max(*p);
            }
            let recon = mix_rows(&svq.codebook, &post);
            for i in 0..window {
                for j in 0..window {
                    let idx = (r + i) * img.width + c + j;
                    sum[idx] += recon[i * window + j];
                    coverage[idx] += 1;
                }
            }
            positions.push((r, c));
            posteriors.push(post);
        }
    }
    sparsity /= positions.len() as f64;
    let pixels = sum
        .iter()
        .zip(&coverage)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    Ok(ImageEncoding {
        positions,
        posteriors,
        activity: MapImage::new(svq.layout(), activity)?,
        sparsity,
        reconstruction: ImageData {
            width: img.width,
            height: img.height,
            pixels,
        },
        coverage,
    })
}

/// Reconstruction part of [`encode_image`].
pub fn reconstruct_image(svq: &Svq, img: &ImageData, window: usize, stride: usize) -> Result<ImageData> {
    Ok(encode_image(svq, img, window, stride)?.reconstruction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceMap {
    /// 1 where the code responds more to the first image, else 0.
    pub labels: MapImage,
    /// Mean response to first-image pixels minus second-image pixels.
    pub preference: Vec<f64>,
    /// Fraction of adjacent code pairs sharing a label.
    pub contiguity: f64,
}

/// Label fraction shared by adjacent codes.
pub fn contiguity(labels: &[f64], layout: Layout) -> f64 {
    let pairs = adjacent_pairs(layout);
    pairs.iter().filter(|&&(a, b)| labels[a] == labels[b]).count() as f64 / pairs.len().max(1) as f64
}

/// Preprocessing applied to the interdigitated image before patches are
/// taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominancePrep {
    pub normalize_window: Option<usize>,
    pub epsilon: f64,
}

impl Default for DominancePrep {
    fn default() -> Self {
        Self {
            normalize_window: Some(9),
            epsilon: 1e-2,
        }
    }
}

/// Interdigitates and preprocesses a pair of images as for training.
pub fn dominance_input(a: &ImageData, b: &ImageData, prep: DominancePrep) -> Result<ImageData> {
    let mixed = interdigitate(a, b)?;
    match prep.normalize_window {
        Some(w) => local_normalize(&mixed, w, prep.epsilon),
        None => Ok(mixed),
    }
}

/// For each code, compares its mean posterior over patches that keep only
/// the first image's pixels (even row + column parity, the rest zeroed)
/// with patches that keep only the second image's pixels. Patches are
/// taken from the preprocessed interdigitated image at `patches` seeded
/// random even-parity corners, matching [`PatchSource`] training input.
pub fn dominance_map(
    svq: &Svq,
    a: &ImageData,
    b: &ImageData,
    prep: DominancePrep,
    window: usize,
    patches: usize,
    seed: u64,
) -> Result<DominanceMap> {
    if window * window != svq.dim() {
        return Err(SvqError::DimensionMismatch {
            what: "window area",
            expected: svq.dim(),
            got: window * window,
        });
    }
    let input = dominance_input(a, b, prep)?;
    if window > input.width.min(input.height) {
        return Err(SvqError::config("window does not fit in the images"));
    }
    let m = svq.num_codes();
    let mut rng = stream_rng(seed, 0);
    let mut pref = vec![0.0; m];
    let source = PatchSource::new(input, window, true)?;
    for _ in 0..patches {
        let (r, c) = source.corner(&mut rng);
        let patch = patch_at(&source.image, r, c, window);
        let keep = |first: bool| -> Vec<f64> {
            patch
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let even = (k / window + k % window) % 2 == 0;
                    if even == first {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let pa = svq.forward(&keep(true))?.posterior;
        let pb = svq.forward(&keep(false))?.posterior;
        for y in 0..m {
            pref[y] += (pa[y] - pb[y]) / patches as f64;
        }
    }
    let labels: Vec<f64> = pref.iter().map(|&p| if p > 0.0 { 1.0 } else { 0.0 }).collect();
    let layout = svq.layout();
    Ok(DominanceMap {
        contiguity: contiguity(&labels, layout),
        labels: MapImage::new(layout, labels)?,
        preference: pref,
    })
}
