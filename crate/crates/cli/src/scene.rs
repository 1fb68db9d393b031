//! Turns a generator spec into training data for one seed.

use svq_core::analysis::{dominance_input, DominancePrep};
use svq_core::datagen::{
    local_normalize, make_texture, stream_rng, whiten, Circle, DataSource, EcgRecording, ImageData, PatchSource, Pool,
    SvqRng, Torus,
};
use svq_core::Result;

use crate::spec::{Generator, ImageParams};

/// Stream for fixed scene content: the ECG recording and training images.
pub const SCENE_STREAM: u64 = 3;
/// Stream for held-out images.
pub const TEST_STREAM: u64 = 4;
/// Stream for analysis sample sets.
pub const ANALYSIS_STREAM: u64 = 5;

pub struct Ecg {
    pub recording: EcgRecording,
    /// Training inputs in time order (whitened when requested).
    pub inputs: Vec<Vec<f64>>,
}

pub struct Scene {
    pub source: Box<dyn DataSource>,
    pub ecg: Option<Ecg>,
    /// Source images: one texture, or the two interdigitated textures.
    pub images: Vec<ImageData>,
}

fn texture(p: &ImageParams, oriented: bool, rng: &mut SvqRng) -> Result<ImageData> {
    make_texture(p.width, p.height, p.correlation_length, oriented, rng)
}

pub fn prep(p: &ImageParams) -> DominancePrep {
    DominancePrep {
        normalize_window: p.normalize_window,
        epsilon: p.normalize_epsilon,
    }
}

/// Texture as used for training, after optional local normalisation.
pub fn training_texture(p: &ImageParams, rng: &mut SvqRng) -> Result<ImageData> {
    let img = texture(p, p.orientation_bands, rng)?;
    match p.normalize_window {
        Some(w) => local_normalize(&img, w, p.normalize_epsilon),
        None => Ok(img),
    }
}

/// A pair of textures drawn in order from `rng`.
pub fn texture_pair(p: &ImageParams, rng: &mut SvqRng) -> Result<(ImageData, ImageData)> {
    let a = texture(p, p.orientation_bands, rng)?;
    let b = texture(p, p.orientation_bands, rng)?;
    Ok((a, b))
}

pub fn build(generator: &Generator, seed: u64) -> Result<Scene> {
    let mut rng = stream_rng(seed, SCENE_STREAM);
    let plain = |source: Box<dyn DataSource>| Scene {
        source,
        ecg: None,
        images: Vec::new(),
    };
    Ok(match generator {
        Generator::Circle => plain(Box::new(Circle)),
        Generator::Torus => plain(Box::new(Torus)),
        Generator::MultiTargets(g) => plain(Box::new(g.clone())),
        Generator::CorrelatedPair(g) => plain(Box::new(g.clone())),
        Generator::Waveforms(g) => plain(Box::new(g.clone())),
        Generator::Ecg { synth, length, whiten: w } => {
            let recording = synth.generate(*length, &mut rng);
            let inputs = if *w {
                whiten(&recording.observed)?.0
            } else {
                recording.observed.clone()
            };
            Scene {
                source: Box::new(Pool::new(inputs.clone())),
                ecg: Some(Ecg { recording, inputs }),
                images: Vec::new(),
            }
        }
        Generator::Texture(p) => {
            let img = training_texture(p, &mut rng)?;
            Scene {
                source: Box::new(PatchSource::new(img.clone(), p.window, false)?),
                ecg: None,
                images: vec![img],
            }
        }
        Generator::Interdigitated(p) => {
            let (a, b) = texture_pair(p, &mut rng)?;
            let input = dominance_input(&a, &b, prep(p))?;
            Scene {
                source: Box::new(PatchSource::new(input, p.window, true)?),
                ecg: None,
                images: vec![a, b],
            }
        }
    })
}

/// Held-out image for the sparse-coding diagnostic, preprocessed like the
/// training input.
pub fn test_image(p: &ImageParams, interdigitated: bool, seed: u64) -> Result<ImageData> {
    let mut rng = stream_rng(seed, TEST_STREAM);
    if interdigitated {
        let (a, b) = texture_pair(p, &mut rng)?;
        dominance_input(&a, &b, prep(p))
    } else {
        training_texture(p, &mut rng)
    }
}
