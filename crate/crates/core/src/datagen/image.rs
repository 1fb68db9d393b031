//! Grey-scale images: synthetic textures, interdigitation, local contrast
//! normalisation, patch sampling and PGM encoding.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataSource, SvqRng};
use crate::error::{Result, SvqError};

const FLAT_TOLERANCE: f64 = 1e-9;

/// Row-major image; `pixels[row * width + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageData {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl ImageData {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(SvqError::config("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(SvqError::DimensionMismatch {
                what: "image pixels",
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self { width, height, pixels }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.pixels[row * self.width + col] = v;
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Linear rescale to [0, 1]; a flat image (up to round-off) maps to all
    /// zeros.
    pub fn rescaled(&self) -> ImageData {
        let min = self.pixels.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        let magnitude = max.abs().max(min.abs());
        let pixels = if range > FLAT_TOLERANCE * magnitude {
            self.pixels.iter().map(|v| (v - min) / range).collect()
        } else {
            vec![0.0; self.pixels.len()]
        };
        ImageData { pixels, ..*self }
    }

    /// Binary PGM (P5, maxval 255): values clamped to [0, 1], then rounded
    /// half-up.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&v| pgm_level(v)));
        out
    }

    /// Parses a P5 image written by [`to_pgm`](Self::to_pgm).
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| SvqError::Parse { line: 0, msg: format!("PGM: {msg}") };
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header not ASCII"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("not a P5 file"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        if fields[3] != "255" {
            return Err(bad("maxval must be 255"));
        }
        let data = &bytes[pos + 1..];
        if data.len() != width * height {
            return Err(bad("pixel count"));
        }
        Self::new(width, height, data.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

pub(crate) fn pgm_level(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

/// Periodic 2-D convolution of standard Gaussian noise with `kernel`
/// (odd-sized, centred), rescaled to [0, 1].
pub fn filtered_noise(width: usize, height: usize, kernel: &ImageData, rng: &mut impl Rng) -> ImageData {
    let noise: Vec<f64> = (0..width * height).map(|_| StandardNormal.sample(rng)).collect();
    convolve_periodic(width, height, &noise, |_, _| kernel).rescaled()
}

fn convolve_periodic<'k>(
    width: usize,
    height: usize,
    src: &[f64],
    kernel_at: impl Fn(usize, usize) -> &'k ImageData,
) -> ImageData {
    ImageData::from_fn(width, height, |r, c| {
        let k = kernel_at(r, c);
        let (hr, hc) = (k.height / 2, k.width / 2);
        let mut acc = 0.0;
        for kr in 0..k.height {
            let sr = (r + height * (hr + 1) + kr - hr) % height;
            let base = sr * width;
            for kc in 0..k.width {
                let w = k.pixels[kr * k.width + kc];
                if w != 0.0 {
                    let sc = (c + width * (hc + 1) + kc - hc) % width;
                    acc += w * src[base + sc];
                }
            }
        }
        acc
    })
}

/// Zero-DC difference of Gaussians: an (optionally elongated and rotated)
/// centre minus an isotropic surround four times wider.
fn band_pass_kernel(scale: f64, elongation: f64, angle: f64) -> ImageData {
    let surround = 4.0 * scale;
    let half = (3.0 * surround).ceil() as usize;
    let size = 2 * half + 1;
    let (sa, ca) = angle.sin_cos();
    let along = scale * elongation;
    let across = scale / elongation;
    let mut centre = ImageData::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64 - half as f64, c as f64 - half as f64);
        let u = x * ca + y * sa;
        let v = -x * sa + y * ca;
        (-(u * u) / (2.0 * along * along) - (v * v) / (2.0 * across * across)).exp()
    });
    let mut outer = ImageData::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64 - half as f64, c as f64 - half as f64);
        (-(x * x + y * y) / (2.0 * surround * surround)).exp()
    });
    let cs: f64 = centre.pixels.iter().sum();
    let os: f64 = outer.pixels.iter().sum();
    centre.pixels.iter_mut().for_each(|v| *v /= cs);
    outer.pixels.iter_mut().for_each(|v| *v /= os);
    for (a, b) in centre.pixels.iter_mut().zip(&outer.pixels) {
        *a -= b;
    }
    centre
}

/// Band-pass filtered Gaussian noise whose autocorrelation falls below 1/e
/// within `correlation_length` pixels. With `orientation_bands` the image is
/// split into four vertical bands, each filtered with an elongated kernel at
/// a different orientation (0°, 45°, 90°, 135°).
pub fn make_texture(
    width: usize,
    height: usize,
    correlation_length: f64,
    orientation_bands: bool,
    rng: &mut impl Rng,
) -> Result<ImageData> {
    if !(2.0..=20.0).contains(&correlation_length) {
        return Err(SvqError::config(format!(
            "correlation length must lie in [2, 20], got {correlation_length}"
        )));
    }
    let scale = 0.35 * correlation_length;
    let noise: Vec<f64> = (0..width * height).map(|_| StandardNormal.sample(rng)).collect();
    let img = if orientation_bands {
        let kernels: Vec<ImageData> = (0..4)
            .map(|b| band_pass_kernel(scale, 2.0, b as f64 * PI / 4.0))
            .collect();
        let band_width = width.div_ceil(4);
        convolve_periodic(width, height, &noise, |_, c| &kernels[(c / band_width).min(3)])
    } else {
        let k = band_pass_kernel(scale, 1.0, 0.0);
        convolve_periodic(width, height, &noise, |_, _| &k)
    };
    Ok(img.rescaled())
}

/// Chessboard merge: `a` on even (row + col), `b` on odd.
pub fn interdigitate(a: &ImageData, b: &ImageData) -> Result<ImageData> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(SvqError::config(format!(
            "interdigitated images differ in size: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(ImageData::from_fn(a.width, a.height, |r, c| {
        if (r + c) % 2 == 0 {
            a.get(r, c)
        } else {
            b.get(r, c)
        }
    }))
}

/// (x − local mean) / sqrt(local variance + ε) over a window × window patch
/// centred on each pixel, with edge-clamped sampling.
pub fn local_normalize(img: &ImageData, window: usize, epsilon: f64) -> Result<ImageData> {
    if window < 3 || window % 2 == 0 {
        return Err(SvqError::config(format!("normalisation window must be odd and >= 3, got {window}")));
    }
    let h = (window / 2) as i64;
    let clamp = |v: i64, len: usize| v.clamp(0, len as i64 - 1) as usize;
    let count = (window * window) as f64;
    Ok(ImageData::from_fn(img.width, img.height, |r, c| {
        let (mut s, mut s2) = (0.0, 0.0);
        for dr in -h..=h {
            let rr = clamp(r as i64 + dr, img.height);
            for dc in -h..=h {
                let v = img.get(rr, clamp(c as i64 + dc, img.width));
                s += v;
                s2 += v * v;
            }
        }
        let mean = s / count;
        let var = (s2 / count - mean * mean).max(0.0);
        (img.get(r, c) - mean) / (var + epsilon).sqrt()
    }))
}

/// Row-major window × window patch with top-left corner (row, col).
pub fn patch_at(img: &ImageData, row: usize, col: usize, window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(window * window);
    for r in row..row + window {
        out.extend_from_slice(&img.pixels[r * img.width + col..r * img.width + col + window]);
    }
    out
}

/// Uniformly positioned patch; returns the patch and its top-left corner.
pub fn sample_patch(img: &ImageData, window: usize, rng: &mut impl Rng) -> Result<(Vec<f64>, (usize, usize))> {
    if window == 0 || window > img.width.min(img.height) {
        return Err(SvqError::config(format!(
            "window {window} does not fit in {}x{} image",
            img.width, img.height
        )));
    }
    let r = rng.random_range(0..=img.height - window);
    let c = rng.random_range(0..=img.width - window);
    Ok((patch_at(img, r, c, window), (r, c)))
}

/// Patches of a fixed image as a training source. With `even_parity` only
/// corners with (row + col) even are used, so every patch sees the
/// interdigitation pattern in the same phase.
#[derive(Debug, Clone)]
pub struct PatchSource {
    pub image: ImageData,
    pub window: usize,
    pub even_parity: bool,
}

impl PatchSource {
    pub fn new(image: ImageData, window: usize, even_parity: bool) -> Result<Self> {
        if window == 0 || window > image.width.min(image.height) {
            return Err(SvqError::config(format!(
                "window {window} does not fit in {}x{} image",
                image.width, image.height
            )));
        }
        Ok(Self {
            image,
            window,
            even_parity,
        })
    }

    pub fn corner(&self, rng: &mut SvqRng) -> (usize, usize) {
        let r = rng.random_range(0..=self.image.height - self.window);
        let mut c = rng.random_range(0..=self.image.width - self.window);
        if self.even_parity && (r + c) % 2 == 1 {
            c = if c > 0 { c - 1 } else { c + 1 };
        }
        (r, c)
    }
}

impl DataSource for PatchSource {
    fn dim(&self) -> usize {
        self.window * self.window
    }

    fn sample(&self, rng: &mut SvqRng) -> Vec<f64> {
        let (r, c) = self.corner(rng);
        patch_at(&self.image, r, c, self.window)
    }
}
