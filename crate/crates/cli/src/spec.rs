//! Experiment spec files.
//!
//! A spec is flat `key = value` text. `#` starts a comment, blank lines are
//! ignored, and keys use dotted section prefixes:
//!
//! ```text
//! name = circle_m4_n10
//! seeds = 5
//! generator.kind = circle
//! model.codes = 4
//! model.n = 10
//! train.steps = 20000
//! analyses = arc_profiles, stationarity
//! ```
//!
//! Model keys take either one value for every stage or a comma list with
//! one value per stage of a chain. Unknown keys, repeated keys and keys
//! that do not apply to the chosen generator, layout or analyses are
//! rejected with the line they appear on.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use svq_core::datagen::{CorrelatedPair, EcgSynth, MultiTargets, Waveforms};
use svq_core::trainer::{LrSchedule, TrainConfig};
use svq_core::Layout;

use crate::error::Invalid;

const TOP_KEYS: &[&str] = &["name", "seed", "seeds", "output.dir", "analyses"];

const GENERATOR_KEYS: &[&str] = &[
    "generator.kind",
    "generator.dim",
    "generator.targets",
    "generator.noise_max",
    "generator.sep_min",
    "generator.sep_max",
    "generator.noise_std",
    "generator.channels",
    "generator.length",
    "generator.maternal_period",
    "generator.period_ratio",
    "generator.foetal_amplitude",
    "generator.spike_width",
    "generator.whiten",
    "generator.width",
    "generator.height",
    "generator.correlation_length",
    "generator.orientation_bands",
    "generator.window",
    "generator.normalize_window",
    "generator.normalize_epsilon",
];

const MODEL_KEYS: &[&str] = &[
    "model.dim",
    "model.layout",
    "model.codes",
    "model.rows",
    "model.cols",
    "model.wrap",
    "model.n",
    "model.neighbourhood",
    "model.leakage",
    "model.leakage_radius",
    "model.leakage_sigma",
    "model.init_scale",
];

const TRAIN_KEYS: &[&str] = &[
    "train.steps",
    "train.batch_size",
    "train.learning_rate",
    "train.schedule",
    "train.final_rate",
    "train.step_factor",
    "train.step_every",
    "train.reproducible",
    "train.eval_size",
    "train.log_every",
    "train.checkpoint_every",
    "train.weights_start",
    "train.weights_end",
];

const ANALYSIS_KEYS: &[&str] = &[
    "analysis.arc_resolution",
    "analysis.samples",
    "analysis.grid",
    "analysis.stride",
    "analysis.patches",
    "analysis.min_lag",
    "analysis.max_lag",
    "analysis.min_height",
    "analysis.period_tolerance",
    "analysis.compare_without_leakage",
];

fn is_known(key: &str) -> bool {
    [TOP_KEYS, GENERATOR_KEYS, MODEL_KEYS, TRAIN_KEYS, ANALYSIS_KEYS]
        .iter()
        .any(|set| set.contains(&key))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Circle,
    Torus,
    MultiTargets,
    CorrelatedPair,
    Waveforms,
    EcgSynth,
    Texture,
    Interdigitated,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 8] = [
        GeneratorKind::Circle,
        GeneratorKind::Torus,
        GeneratorKind::MultiTargets,
        GeneratorKind::CorrelatedPair,
        GeneratorKind::Waveforms,
        GeneratorKind::EcgSynth,
        GeneratorKind::Texture,
        GeneratorKind::Interdigitated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Circle => "circle",
            GeneratorKind::Torus => "torus",
            GeneratorKind::MultiTargets => "multi_targets",
            GeneratorKind::CorrelatedPair => "correlated_pair",
            GeneratorKind::Waveforms => "waveforms",
            GeneratorKind::EcgSynth => "ecg_synth",
            GeneratorKind::Texture => "texture",
            GeneratorKind::Interdigitated => "interdigitated",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown generator kind `{s}`"))
    }
}

/// Texture parameters shared by the image generators.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageParams {
    pub width: usize,
    pub height: usize,
    pub correlation_length: f64,
    pub orientation_bands: bool,
    pub window: usize,
    pub normalize_window: Option<usize>,
    pub normalize_epsilon: f64,
}

#[derive(Debug, Clone)]
pub enum Generator {
    Circle,
    Torus,
    MultiTargets(MultiTargets),
    CorrelatedPair(CorrelatedPair),
    Waveforms(Waveforms),
    Ecg { synth: EcgSynth, length: usize, whiten: bool },
    Texture(ImageParams),
    Interdigitated(ImageParams),
}

impl Generator {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            Generator::Circle => GeneratorKind::Circle,
            Generator::Torus => GeneratorKind::Torus,
            Generator::MultiTargets(_) => GeneratorKind::MultiTargets,
            Generator::CorrelatedPair(_) => GeneratorKind::CorrelatedPair,
            Generator::Waveforms(_) => GeneratorKind::Waveforms,
            Generator::Ecg { .. } => GeneratorKind::EcgSynth,
            Generator::Texture(_) => GeneratorKind::Texture,
            Generator::Interdigitated(_) => GeneratorKind::Interdigitated,
        }
    }

    /// Dimension of the vectors fed to the first stage.
    pub fn dim(&self) -> usize {
        match self {
            Generator::Circle => 2,
            Generator::Torus => 4,
            Generator::MultiTargets(g) => g.dim,
            Generator::CorrelatedPair(g) => g.dim,
            Generator::Waveforms(g) => g.dim,
            Generator::Ecg { synth, .. } => synth.channels,
            Generator::Texture(p) | Generator::Interdigitated(p) => p.window * p.window,
        }
    }

    pub fn image(&self) -> Option<&ImageParams> {
        match self {
            Generator::Texture(p) | Generator::Interdigitated(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakageSpec {
    Identity,
    Gaussian { radius: usize, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    pub layout: Layout,
    /// `None` means every context covers the whole array.
    pub neighbourhood: Option<usize>,
    pub leakage: LeakageSpec,
    pub n: usize,
}

impl StageSpec {
    pub fn num_codes(&self) -> usize {
        self.layout.num_codes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Analysis {
    ArcProfiles,
    Stationarity,
    Classification,
    Localization,
    WaveformMatch,
    Periods,
    Topographic,
    SparseCoding,
    Dominance,
}

impl Analysis {
    pub const ALL: [Analysis; 9] = [
        Analysis::ArcProfiles,
        Analysis::Stationarity,
        Analysis::Classification,
        Analysis::Localization,
        Analysis::WaveformMatch,
        Analysis::Periods,
        Analysis::Topographic,
        Analysis::SparseCoding,
        Analysis::Dominance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::ArcProfiles => "arc_profiles",
            Analysis::Stationarity => "stationarity",
            Analysis::Classification => "classification",
            Analysis::Localization => "localization",
            Analysis::WaveformMatch => "waveform_match",
            Analysis::Periods => "periods",
            Analysis::Topographic => "topographic",
            Analysis::SparseCoding => "sparse_coding",
            Analysis::Dominance => "dominance",
        }
    }

    /// Generator kinds the diagnostic makes sense for; `None` means any.
    fn generators(self) -> Option<&'static [GeneratorKind]> {
        use GeneratorKind::*;
        match self {
            Analysis::ArcProfiles => Some(&[Circle]),
            Analysis::Classification => Some(&[Torus]),
            Analysis::WaveformMatch => Some(&[Waveforms]),
            Analysis::Periods => Some(&[EcgSynth]),
            Analysis::SparseCoding => Some(&[Texture, Interdigitated]),
            Analysis::Dominance => Some(&[Interdigitated]),
            Analysis::Stationarity | Analysis::Localization | Analysis::Topographic => None,
        }
    }

    fn params(self) -> &'static [&'static str] {
        match self {
            Analysis::ArcProfiles => &["analysis.arc_resolution"],
            Analysis::Stationarity => &["analysis.samples"],
            Analysis::Classification => &["analysis.grid"],
            Analysis::Localization => &[],
            Analysis::WaveformMatch => &["analysis.samples"],
            Analysis::Periods => &[
                "analysis.min_lag",
                "analysis.max_lag",
                "analysis.min_height",
                "analysis.period_tolerance",
            ],
            Analysis::Topographic => &["analysis.compare_without_leakage"],
            Analysis::SparseCoding => &["analysis.stride"],
            Analysis::Dominance => &["analysis.patches"],
        }
    }
}

impl FromStr for Analysis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown analysis `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisParams {
    pub arc_resolution: usize,
    pub samples: usize,
    pub grid: usize,
    pub stride: usize,
    pub patches: usize,
    pub min_lag: usize,
    pub max_lag: usize,
    pub min_height: f64,
    pub period_tolerance: f64,
    pub compare_without_leakage: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            arc_resolution: svq_core::analysis::DEFAULT_ARC_RESOLUTION,
            samples: 1024,
            grid: svq_core::analysis::DEFAULT_GRID,
            stride: 3,
            patches: svq_core::analysis::DOMINANCE_PATCHES,
            min_lag: 20,
            max_lag: 150,
            min_height: 0.1,
            period_tolerance: 0.1,
            compare_without_leakage: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub seeds: usize,
    pub output_dir: Option<PathBuf>,
    pub generator: Generator,
    pub stages: Vec<StageSpec>,
    pub train: TrainConfig,
    pub weights_start: Vec<f64>,
    pub weights_end: Vec<f64>,
    pub analyses: Vec<Analysis>,
    pub params: AnalysisParams,
}

impl ExperimentSpec {
    /// Input dimension of every stage, in order.
    pub fn stage_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.generator.dim()];
        dims.extend(self.stages.iter().take(self.stages.len() - 1).map(|s| s.num_codes()));
        dims
    }

    pub fn runs(&self, analysis: Analysis) -> bool {
        self.analyses.contains(&analysis)
    }

    /// Per-run seeds, `seed .. seed + seeds`.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|s| self.seed + s).collect()
    }
}

struct Entry {
    line: usize,
    value: String,
}

/// Parsed `key = value` lines with use tracking, so leftovers can be
/// reported as not applicable.
pub struct Document {
    source: String,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

impl Document {
    pub fn parse(source: &str, text: &str) -> Result<Self, Invalid> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Invalid {
                source: source.into(),
                line: Some(line),
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let err = |msg: String| Invalid {
                source: source.into(),
                line: Some(line),
                msg,
            };
            if key.is_empty() {
                return Err(err("missing key before `=`".into()));
            }
            if !is_known(key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(err(format!("duplicate key `{key}` (first set on line {})", prev.line)));
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string() });
        }
        Ok(Self {
            source: source.into(),
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Builds a document from explicit pairs; used by subcommands that take
    /// parameters as flags.
    pub fn from_pairs<'a>(source: &str, pairs: impl IntoIterator<Item = (&'a str, String)>) -> Result<Self, Invalid> {
        let text: Vec<String> = pairs.into_iter().map(|(k, v)| format!("{k} = {v}")).collect();
        Self::parse(source, &text.join("\n"))
    }

    pub fn invalid(&self, line: Option<usize>, msg: impl Into<String>) -> Invalid {
        Invalid {
            source: self.source.clone(),
            line,
            msg: msg.into(),
        }
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.get(key);
        if e.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        e
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Invalid> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse_value(&e.value)
                .map(Some)
                .map_err(|m| self.invalid(Some(e.line), format!("invalid value for `{key}`: {m}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, Invalid> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, Invalid> {
        self.get(key)?
            .ok_or_else(|| self.invalid(None, format!("missing required key `{key}`")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, Invalid> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|v| {
                    parse_value(v.trim())
                        .map_err(|m| self.invalid(Some(e.line), format!("invalid value for `{key}`: {m}")))
                })
                .collect::<Result<Vec<T>, Invalid>>()
                .map(Some),
        }
    }

    /// Keys that were present but never read, with their lines.
    pub fn unused(&self) -> Vec<(String, usize)> {
        let used = self.used.borrow();
        self.entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, e)| (k.clone(), e.line))
            .collect()
    }
}

/// Booleans accept true/false, yes/no and 1/0.
struct Flag(bool);

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "true" | "yes" | "1" => Ok(Flag(true)),
            "false" | "no" | "0" => Ok(Flag(false)),
            _ => Err(format!("expected true or false, found `{s}`")),
        }
    }
}

fn parse_value<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse::<T>().map_err(|_| format!("`{s}`"))
}

fn flag(doc: &Document, key: &str, default: bool) -> Result<bool, Invalid> {
    match doc.raw(key) {
        None => Ok(default),
        Some(e) => e
            .value
            .parse::<Flag>()
            .map(|f| f.0)
            .map_err(|m| doc.invalid(Some(e.line), format!("invalid value for `{key}`: {m}"))),
    }
}

/// `none` or an integer.
fn optional_usize(doc: &Document, key: &str, default: Option<usize>) -> Result<Option<usize>, Invalid> {
    match doc.raw(key) {
        None => Ok(default),
        Some(e) if e.value == "none" => Ok(None),
        Some(e) => e
            .value
            .parse()
            .map(Some)
            .map_err(|_| doc.invalid(Some(e.line), format!("invalid value for `{key}`: `{}`", e.value))),
    }
}

fn check(doc: &Document, key: &str, ok: bool, msg: impl FnOnce() -> String) -> Result<(), Invalid> {
    if ok {
        Ok(())
    } else {
        Err(doc.invalid(doc.line_of(key), format!("`{key}`: {}", msg())))
    }
}

fn positive(doc: &Document, key: &str, v: f64) -> Result<f64, Invalid> {
    check(doc, key, v > 0.0 && v.is_finite(), || format!("must be positive, got {v}"))?;
    Ok(v)
}

fn at_least(doc: &Document, key: &str, v: usize, min: usize) -> Result<usize, Invalid> {
    check(doc, key, v >= min, || format!("must be at least {min}, got {v}"))?;
    Ok(v)
}

fn image_params(doc: &Document, kind: GeneratorKind) -> Result<ImageParams, Invalid> {
    let width = at_least(doc, "generator.width", doc.get_or("generator.width", 128)?, 1)?;
    let height = at_least(doc, "generator.height", doc.get_or("generator.height", 128)?, 1)?;
    let correlation_length: f64 = doc.get_or("generator.correlation_length", 6.0)?;
    check(doc, "generator.correlation_length", (2.0..=20.0).contains(&correlation_length), || {
        format!("must lie in [2, 20], got {correlation_length}")
    })?;
    let orientation_bands = flag(doc, "generator.orientation_bands", kind == GeneratorKind::Texture)?;
    let window = at_least(doc, "generator.window", doc.get_or("generator.window", 9)?, 1)?;
    check(doc, "generator.window", window <= width.min(height), || {
        format!("window {window} does not fit in a {width}x{height} image")
    })?;
    let normalize_window = optional_usize(doc, "generator.normalize_window", Some(9))?;
    if let Some(w) = normalize_window {
        check(doc, "generator.normalize_window", w >= 3 && w % 2 == 1, || {
            format!("must be odd and at least 3, got {w}")
        })?;
    }
    let normalize_epsilon = if normalize_window.is_some() {
        positive(doc, "generator.normalize_epsilon", doc.get_or("generator.normalize_epsilon", 1e-2)?)?
    } else {
        1e-2
    };
    Ok(ImageParams {
        width,
        height,
        correlation_length,
        orientation_bands,
        window,
        normalize_window,
        normalize_epsilon,
    })
}

pub fn parse_generator(doc: &Document) -> Result<Generator, Invalid> {
    let kind_text: String = doc.require("generator.kind")?;
    let kind: GeneratorKind = kind_text
        .parse()
        .map_err(|m: String| doc.invalid(doc.line_of("generator.kind"), m))?;
    Ok(match kind {
        GeneratorKind::Circle => Generator::Circle,
        GeneratorKind::Torus => Generator::Torus,
        GeneratorKind::MultiTargets => {
            let dim = at_least(doc, "generator.dim", doc.get_or("generator.dim", 32)?, 8)?;
            let mut g = MultiTargets::new(dim, doc.get_or("generator.targets", 2)?);
            g.noise_max = doc.get_or("generator.noise_max", g.noise_max)?;
            check(doc, "generator.noise_max", g.noise_max >= 0.0, || "must be non-negative".into())?;
            Generator::MultiTargets(g)
        }
        GeneratorKind::CorrelatedPair => {
            let dim = at_least(doc, "generator.dim", doc.get_or("generator.dim", 32)?, 4)?;
            let sep_min: usize = doc.get_or("generator.sep_min", 4)?;
            let sep_max: usize = doc.get_or("generator.sep_max", 8)?;
            check(doc, "generator.sep_min", sep_min > 0 && sep_min <= sep_max, || {
                format!("need 0 < sep_min <= sep_max, got {sep_min} and {sep_max}")
            })?;
            check(doc, "generator.sep_max", 2 * sep_max < dim, || {
                format!("sep_max must be below dim/2 = {}, got {sep_max}", dim / 2)
            })?;
            let mut g = CorrelatedPair::new(dim, sep_min, sep_max);
            g.noise_max = doc.get_or("generator.noise_max", g.noise_max)?;
            check(doc, "generator.noise_max", g.noise_max >= 0.0, || "must be non-negative".into())?;
            Generator::CorrelatedPair(g)
        }
        GeneratorKind::Waveforms => {
            let dim = at_least(doc, "generator.dim", doc.get_or("generator.dim", 64)?, 16)?;
            let mut g = Waveforms::new(dim);
            g.noise_std = doc.get_or("generator.noise_std", g.noise_std)?;
            check(doc, "generator.noise_std", g.noise_std >= 0.0, || "must be non-negative".into())?;
            Generator::Waveforms(g)
        }
        GeneratorKind::EcgSynth => {
            let d = EcgSynth::default();
            let synth = EcgSynth {
                channels: at_least(doc, "generator.channels", doc.get_or("generator.channels", d.channels)?, 2)?,
                maternal_period: positive(
                    doc,
                    "generator.maternal_period",
                    doc.get_or("generator.maternal_period", d.maternal_period)?,
                )?,
                period_ratio: positive(doc, "generator.period_ratio", doc.get_or("generator.period_ratio", d.period_ratio)?)?,
                foetal_amplitude: doc.get_or("generator.foetal_amplitude", d.foetal_amplitude)?,
                noise_std: doc.get_or("generator.noise_std", d.noise_std)?,
                spike_width: positive(doc, "generator.spike_width", doc.get_or("generator.spike_width", d.spike_width)?)?,
            };
            check(doc, "generator.noise_std", synth.noise_std >= 0.0, || "must be non-negative".into())?;
            let length = at_least(doc, "generator.length", doc.get_or("generator.length", 10_000)?, 2)?;
            Generator::Ecg {
                synth,
                length,
                whiten: flag(doc, "generator.whiten", true)?,
            }
        }
        GeneratorKind::Texture => Generator::Texture(image_params(doc, kind)?),
        GeneratorKind::Interdigitated => Generator::Interdigitated(image_params(doc, kind)?),
    })
}

/// Per-stage value: a single value broadcasts, otherwise one per stage.
fn per_stage<T: FromStr + Clone>(doc: &Document, key: &str, stages: usize) -> Result<Option<Vec<T>>, Invalid> {
    match doc.list::<T>(key)? {
        None => Ok(None),
        Some(v) if v.len() == 1 => Ok(Some(vec![v[0].clone(); stages])),
        Some(v) if v.len() == stages => Ok(Some(v)),
        Some(v) => Err(doc.invalid(
            doc.line_of(key),
            format!("`{key}` has {} values for {stages} stages", v.len()),
        )),
    }
}

fn stage_count(doc: &Document) -> usize {
    let mut count = 1;
    for key in MODEL_KEYS.iter().chain(["train.weights_start", "train.weights_end"].iter()) {
        if let Some(e) = doc.entries.get(*key) {
            count = count.max(e.value.split(',').count());
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LayoutKind {
    Ring,
    Line,
    Grid,
}

impl FromStr for LayoutKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "ring" => Ok(LayoutKind::Ring),
            "line" => Ok(LayoutKind::Line),
            "grid" => Ok(LayoutKind::Grid),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reach {
    Global,
    Radius(usize),
}

impl FromStr for Reach {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "global" {
            Ok(Reach::Global)
        } else {
            s.parse().map(Reach::Radius).map_err(|_| ())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeakKind {
    Identity,
    Gaussian,
}

impl FromStr for LeakKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "identity" => Ok(LeakKind::Identity),
            "gaussian" => Ok(LeakKind::Gaussian),
            _ => Err(()),
        }
    }
}

pub fn parse_stages(doc: &Document, input_dim: usize) -> Result<Vec<StageSpec>, Invalid> {
    let k = stage_count(doc);
    let layouts: Vec<LayoutKind> = per_stage(doc, "model.layout", k)?.unwrap_or_else(|| vec![LayoutKind::Ring; k]);
    let any_grid = layouts.contains(&LayoutKind::Grid);
    let any_flat = layouts.iter().any(|&l| l != LayoutKind::Grid);
    let codes: Option<Vec<usize>> = if any_flat { per_stage(doc, "model.codes", k)? } else { None };
    let (rows, cols, wraps): (Option<Vec<usize>>, Option<Vec<usize>>, Option<Vec<String>>) = if any_grid {
        (
            per_stage(doc, "model.rows", k)?,
            per_stage(doc, "model.cols", k)?,
            per_stage(doc, "model.wrap", k)?,
        )
    } else {
        (None, None, None)
    };
    let ns: Vec<usize> = per_stage(doc, "model.n", k)?
        .ok_or_else(|| doc.invalid(None, "missing required key `model.n`"))?;
    let reach: Vec<Reach> = per_stage(doc, "model.neighbourhood", k)?.unwrap_or_else(|| vec![Reach::Global; k]);
    let leaks: Vec<LeakKind> = per_stage(doc, "model.leakage", k)?.unwrap_or_else(|| vec![LeakKind::Identity; k]);
    let (leak_r, leak_s): (Option<Vec<usize>>, Option<Vec<f64>>) = if leaks.contains(&LeakKind::Gaussian) {
        (
            per_stage(doc, "model.leakage_radius", k)?,
            per_stage(doc, "model.leakage_sigma", k)?,
        )
    } else {
        (None, None)
    };

    let mut stages = Vec::with_capacity(k);
    for s in 0..k {
        let layout = match layouts[s] {
            LayoutKind::Ring | LayoutKind::Line => {
                let m = codes
                    .as_ref()
                    .map(|c| c[s])
                    .ok_or_else(|| doc.invalid(None, "missing required key `model.codes`"))?;
                at_least(doc, "model.codes", m, 1)?;
                if layouts[s] == LayoutKind::Ring {
                    Layout::Ring(m)
                } else {
                    Layout::Line(m)
                }
            }
            LayoutKind::Grid => {
                let r = rows
                    .as_ref()
                    .map(|v| v[s])
                    .ok_or_else(|| doc.invalid(None, "missing required key `model.rows`"))?;
                let c = cols
                    .as_ref()
                    .map(|v| v[s])
                    .ok_or_else(|| doc.invalid(None, "missing required key `model.cols`"))?;
                at_least(doc, "model.rows", r, 1)?;
                at_least(doc, "model.cols", c, 1)?;
                let wrap = match wraps.as_ref().map(|w| w[s].as_str()) {
                    None => false,
                    Some(w) => w
                        .parse::<Flag>()
                        .map_err(|m| doc.invalid(doc.line_of("model.wrap"), format!("invalid value for `model.wrap`: {m}")))?
                        .0,
                };
                Layout::Grid { rows: r, cols: c, wrap }
            }
        };
        let n = at_least(doc, "model.n", ns[s], 1)?;
        let neighbourhood = match reach[s] {
            Reach::Radius(r) if r < layout.extent() => Some(r),
            _ => None,
        };
        let leakage = match leaks[s] {
            LeakKind::Identity => LeakageSpec::Identity,
            LeakKind::Gaussian => {
                let radius = leak_r.as_ref().map_or(1, |v| v[s]);
                let sigma = leak_s.as_ref().map_or(1.0, |v| v[s]);
                positive(doc, "model.leakage_sigma", sigma)?;
                LeakageSpec::Gaussian { radius, sigma }
            }
        };
        stages.push(StageSpec {
            layout,
            neighbourhood,
            leakage,
            n,
        });
    }

    if let Some(dims) = per_stage::<usize>(doc, "model.dim", k)? {
        let mut expected = input_dim;
        for (s, (&d, stage)) in dims.iter().zip(&stages).enumerate() {
            if d != expected {
                let what = if s == 0 {
                    "the generator produces".to_string()
                } else {
                    format!("stage {s} has {expected} codes, so stage {} receives", s + 1)
                };
                return Err(doc.invalid(
                    doc.line_of("model.dim"),
                    format!("dimension mismatch: `model.dim` says {d} for stage {} but {what} {expected}", s + 1),
                ));
            }
            expected = stage.num_codes();
        }
    }
    Ok(stages)
}

fn normalized_weights(doc: &Document, key: &str, k: usize) -> Result<Vec<f64>, Invalid> {
    let w: Vec<f64> = per_stage(doc, key, k)?.unwrap_or_else(|| vec![1.0; k]);
    let line = doc.line_of(key);
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(doc.invalid(line, format!("`{key}`: weights must be finite and non-negative")));
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Err(doc.invalid(line, format!("`{key}`: weights must not all be zero")));
    }
    Ok(w.iter().map(|v| v / sum).collect())
}

pub fn parse_train(doc: &Document, stages: usize) -> Result<(TrainConfig, Vec<f64>, Vec<f64>), Invalid> {
    let d = TrainConfig::default();
    let steps = at_least(doc, "train.steps", doc.get_or("train.steps", d.steps)?, 1)?;
    let batch_size = at_least(doc, "train.batch_size", doc.get_or("train.batch_size", d.batch_size)?, 1)?;
    let learning_rate: f64 = doc.get_or("train.learning_rate", d.learning_rate)?;
    check(doc, "train.learning_rate", learning_rate >= 0.0 && learning_rate.is_finite(), || {
        format!("must be finite and non-negative, got {learning_rate}")
    })?;
    let schedule_name: String = doc.get_or("train.schedule", "linear".to_string())?;
    let schedule = match schedule_name.as_str() {
        "constant" => LrSchedule::Constant,
        "linear" => {
            let final_rate: f64 = doc.get_or("train.final_rate", 0.005)?;
            check(doc, "train.final_rate", final_rate >= 0.0, || "must be non-negative".into())?;
            LrSchedule::Linear { final_rate }
        }
        "step" => {
            let factor = positive(doc, "train.step_factor", doc.get_or("train.step_factor", 0.5)?)?;
            let every = at_least(doc, "train.step_every", doc.get_or("train.step_every", 5000)?, 1)?;
            LrSchedule::Step { factor, every }
        }
        other => {
            return Err(doc.invalid(
                doc.line_of("train.schedule"),
                format!("unknown schedule `{other}` (expected constant, linear or step)"),
            ))
        }
    };
    let init_scale = positive(doc, "model.init_scale", doc.get_or("model.init_scale", d.init_scale)?)?;
    let checkpoint_every: Option<usize> = doc.get("train.checkpoint_every")?;
    if let Some(c) = checkpoint_every {
        at_least(doc, "train.checkpoint_every", c, 1)?;
    }
    let config = TrainConfig {
        batch_size,
        steps,
        learning_rate,
        schedule,
        seed: 0,
        reproducible: flag(doc, "train.reproducible", true)?,
        init_scale,
        eval_size: at_least(doc, "train.eval_size", doc.get_or("train.eval_size", d.eval_size)?, 1)?,
        log_every: at_least(doc, "train.log_every", doc.get_or("train.log_every", d.log_every)?, 1)?,
        checkpoint_every,
    };
    let (start, end) = if stages > 1 {
        (
            normalized_weights(doc, "train.weights_start", stages)?,
            normalized_weights(doc, "train.weights_end", stages)?,
        )
    } else {
        (vec![1.0], vec![1.0])
    };
    Ok((config, start, end))
}

fn parse_analyses(doc: &Document, generator: &Generator, stages: &[StageSpec]) -> Result<Vec<Analysis>, Invalid> {
    let names: Vec<String> = doc.list("analyses")?.unwrap_or_default();
    let line = doc.line_of("analyses");
    let mut out: Vec<Analysis> = Vec::new();
    for name in names {
        let a: Analysis = name.parse().map_err(|m: String| doc.invalid(line, m))?;
        if out.contains(&a) {
            return Err(doc.invalid(line, format!("analysis `{name}` listed twice")));
        }
        if let Some(kinds) = a.generators() {
            if !kinds.contains(&generator.kind()) {
                let allowed: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
                return Err(doc.invalid(
                    line,
                    format!(
                        "analysis `{name}` needs generator {}, not {}",
                        allowed.join(" or "),
                        generator.kind()
                    ),
                ));
            }
        }
        let single = matches!(
            a,
            Analysis::ArcProfiles | Analysis::Stationarity | Analysis::Classification | Analysis::Topographic
        );
        if single && stages.len() > 1 {
            return Err(doc.invalid(line, format!("analysis `{name}` needs a single-stage model")));
        }
        if a == Analysis::Topographic && !matches!(stages[0].layout, Layout::Grid { .. }) {
            return Err(doc.invalid(line, "analysis `topographic` needs a grid layout"));
        }
        out.push(a);
    }
    Ok(out)
}

fn parse_params(doc: &Document, analyses: &[Analysis]) -> Result<AnalysisParams, Invalid> {
    let d = AnalysisParams::default();
    let wanted: BTreeSet<&str> = analyses.iter().flat_map(|a| a.params().iter().copied()).collect();
    let get = |key: &str| wanted.contains(key);
    let mut p = d.clone();
    if get("analysis.arc_resolution") {
        p.arc_resolution = at_least(doc, "analysis.arc_resolution", doc.get_or("analysis.arc_resolution", d.arc_resolution)?, 8)?;
    }
    if get("analysis.samples") {
        p.samples = at_least(doc, "analysis.samples", doc.get_or("analysis.samples", d.samples)?, 1)?;
    }
    if get("analysis.grid") {
        p.grid = at_least(doc, "analysis.grid", doc.get_or("analysis.grid", d.grid)?, 2)?;
    }
    if get("analysis.stride") {
        p.stride = at_least(doc, "analysis.stride", doc.get_or("analysis.stride", d.stride)?, 1)?;
    }
    if get("analysis.patches") {
        p.patches = at_least(doc, "analysis.patches", doc.get_or("analysis.patches", d.patches)?, 1)?;
    }
    if get("analysis.min_lag") {
        p.min_lag = at_least(doc, "analysis.min_lag", doc.get_or("analysis.min_lag", d.min_lag)?, 1)?;
        p.max_lag = doc.get_or("analysis.max_lag", d.max_lag)?;
        check(doc, "analysis.max_lag", p.max_lag > p.min_lag, || "must exceed `analysis.min_lag`".into())?;
        p.min_height = doc.get_or("analysis.min_height", d.min_height)?;
        p.period_tolerance = positive(doc, "analysis.period_tolerance", doc.get_or("analysis.period_tolerance", d.period_tolerance)?)?;
    }
    if get("analysis.compare_without_leakage") {
        p.compare_without_leakage = flag(doc, "analysis.compare_without_leakage", d.compare_without_leakage)?;
    }
    Ok(p)
}

impl ExperimentSpec {
    pub fn parse(source: &str, text: &str) -> Result<Self, Invalid> {
        let doc = Document::parse(source, text)?;
        let spec = Self::from_document(&doc)?;
        if let Some((key, line)) = doc.unused().into_iter().next() {
            return Err(doc.invalid(Some(line), not_applicable(&key, &spec)));
        }
        Ok(spec)
    }

    pub fn from_document(doc: &Document) -> Result<Self, Invalid> {
        let name: String = doc.require("name")?;
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(doc.invalid(doc.line_of("name"), format!("invalid experiment name `{name}`")));
        }
        let seed: u64 = doc.get_or("seed", 0)?;
        let seeds = at_least(doc, "seeds", doc.get_or("seeds", 1)?, 1)?;
        let output_dir: Option<PathBuf> = doc.get::<String>("output.dir")?.map(PathBuf::from);
        let generator = parse_generator(doc)?;
        let stages = parse_stages(doc, generator.dim())?;
        let (mut train, weights_start, weights_end) = parse_train(doc, stages.len())?;
        train.seed = seed;
        let analyses = parse_analyses(doc, &generator, &stages)?;
        let params = parse_params(doc, &analyses)?;
        Ok(Self {
            name,
            seed,
            seeds,
            output_dir,
            generator,
            stages,
            train,
            weights_start,
            weights_end,
            analyses,
            params,
        })
    }
}

fn not_applicable(key: &str, spec: &ExperimentSpec) -> String {
    if key == "generator.normalize_epsilon" && spec.generator.image().is_some() {
        return "`generator.normalize_epsilon` needs a normalisation window".into();
    }
    if key.starts_with("generator.") {
        return format!("`{key}` does not apply to generator {}", spec.generator.kind());
    }
    if key.starts_with("analysis.") {
        return format!("`{key}` does not apply to any listed analysis");
    }
    if key.starts_with("train.weights") {
        return format!("`{key}` needs a model with more than one stage");
    }
    match key {
        "model.codes" => "`model.codes` does not apply to grid layouts (use model.rows and model.cols)".into(),
        "model.rows" | "model.cols" | "model.wrap" => format!("`{key}` only applies to grid layouts"),
        "model.leakage_radius" | "model.leakage_sigma" => format!("`{key}` only applies to gaussian leakage"),
        "train.final_rate" => "`train.final_rate` only applies to the linear schedule".into(),
        "train.step_factor" | "train.step_every" => format!("`{key}` only applies to the step schedule"),
        _ => format!("`{key}` does not apply here"),
    }
}
