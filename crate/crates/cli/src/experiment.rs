//! Generator → training → analyses for every seed of a spec.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use svq_core::analysis::{
    active_codes, arc_profiles, arc_profiles_csv, classify_encoding, code_usage, dominance_map, dominant_period,
    encode_image, localization_metrics, match_waveforms, response_streams, stationarity_residual_posterior,
    stationarity_residual_recon, topographic_order, waveform_matches_csv, EncodingClass, MapImage,
};
use svq_core::datagen::{stream_rng, ImageData, SvqRng};
use svq_core::trainer::{train_chain_with, ChainSpec, Trace, TrainConfig, INIT_STREAM};
use svq_core::{persist, Batch, Codebook, LeakageKernel, Layout, Svq, Topology};

use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};
use crate::scene::{self, Scene, ANALYSIS_STREAM};
use crate::spec::{Analysis, ExperimentSpec, Generator, LeakageSpec, StageSpec};

/// One reported number (or label) of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub seed: u64,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub metrics: Vec<Metric>,
    /// Encoding label per seed, when classification ran.
    pub labels: Vec<(u64, EncodingClass)>,
}

impl Report {
    fn push(&mut self, seed: u64, name: &str, value: impl ToString) {
        self.metrics.push(Metric {
            seed,
            name: name.to_string(),
            value: value.to_string(),
        });
    }

    pub fn value(&self, seed: u64, name: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|m| m.seed == seed && m.name == name)
            .map(|m| m.value.as_str())
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("seed,metric,value\n");
        for m in &self.metrics {
            let _ = writeln!(out, "{},{},{}", m.seed, m.name, m.value);
        }
        out
    }

    /// Label held by more than half of the seeds, if any.
    pub fn majority(&self) -> Option<EncodingClass> {
        let half = self.labels.len() / 2;
        [EncodingClass::Factorial, EncodingClass::Joint, EncodingClass::Mixed]
            .into_iter()
            .find(|&c| self.labels.iter().filter(|(_, l)| *l == c).count() > half)
    }

    pub fn classification_text(&self) -> String {
        let mut out = format!("majority {}\n", self.majority().map_or("none".to_string(), |c| c.to_string()));
        for (s, l) in &self.labels {
            let _ = writeln!(out, "seed {s} {l}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Train, then run the analyses.
    Full,
    /// Train only.
    TrainOnly,
    /// Load trained models from a previous run and run the analyses.
    AnalyzeOnly,
}

pub fn kernel(stage: &StageSpec) -> svq_core::Result<LeakageKernel> {
    match stage.leakage {
        LeakageSpec::Identity => Ok(LeakageKernel::identity(stage.num_codes())),
        LeakageSpec::Gaussian { radius, sigma } => LeakageKernel::gaussian(stage.layout, radius, sigma),
    }
}

pub fn topology(stage: &StageSpec) -> svq_core::Result<Topology> {
    match stage.neighbourhood {
        Some(r) => Topology::new(stage.layout, r),
        None => Topology::global(stage.layout),
    }
}

/// Freshly initialised stages, drawn in order from the seed's init stream.
pub fn init_stages(spec: &ExperimentSpec, seed: u64) -> svq_core::Result<Vec<Svq>> {
    let mut rng = stream_rng(seed, INIT_STREAM);
    init_with(&spec.stages, &spec.stage_dims(), spec.train.init_scale, &mut rng)
}

fn init_with(stages: &[StageSpec], dims: &[usize], scale: f64, rng: &mut SvqRng) -> svq_core::Result<Vec<Svq>> {
    stages
        .iter()
        .zip(dims)
        .map(|(s, &d)| Svq::init(d, topology(s)?, kernel(s)?, s.n, scale, rng))
        .collect()
}

pub fn config_for(spec: &ExperimentSpec, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..spec.train.clone()
    }
}

pub fn model_names(stages: usize) -> Vec<String> {
    if stages == 1 {
        vec!["model.svq".into()]
    } else {
        (1..=stages).map(|k| format!("model_stage{k}.svq")).collect()
    }
}

fn seed_prefix(spec: &ExperimentSpec, seed: u64) -> String {
    if spec.seeds > 1 {
        format!("seed_{seed}/")
    } else {
        String::new()
    }
}

/// Directory holding one seed's files inside a run directory.
pub fn seed_dir(spec: &ExperimentSpec, run: &Path, seed: u64) -> std::path::PathBuf {
    run.join(seed_prefix(spec, seed))
}

fn train_stages(
    spec: &ExperimentSpec,
    stages: Vec<Svq>,
    config: &TrainConfig,
    scene: &Scene,
    out: &mut Artifacts,
    prefix: &str,
) -> CliResult<(Vec<Svq>, Trace)> {
    let mut chain = ChainSpec::new(stages, spec.weights_start.clone(), spec.weights_end.clone())?;
    let mut written: CliResult<()> = Ok(());
    let names = model_names(chain.stages.len());
    let trace = train_chain_with(&mut chain, config, scene.source.as_ref(), |step, models| {
        if step < config.steps {
            for (m, name) in models.iter().zip(&names) {
                let stem = name.trim_end_matches(".svq");
                if let Err(e) = out.write(&format!("{prefix}checkpoints/{stem}_step{step}.svq"), persist::to_text(m)) {
                    written = Err(e);
                }
            }
        }
        Ok(())
    })?;
    written?;
    Ok((chain.stages, trace))
}

/// Runs every seed of `spec` in `mode`, writing into `out`. `models_from`
/// is the run directory trained models are loaded from in
/// [`Mode::AnalyzeOnly`].
pub fn execute(spec: &ExperimentSpec, mode: Mode, models_from: Option<&Path>, out: &mut Artifacts) -> CliResult<Report> {
    let mut report = Report::default();
    for seed in spec.seed_list() {
        let prefix = seed_prefix(spec, seed);
        let scene = scene::build(&spec.generator, seed)?;
        let initial = init_stages(spec, seed)?;
        let config = config_for(spec, seed);
        let trained = match mode {
            Mode::AnalyzeOnly => {
                let dir = seed_dir(spec, models_from.expect("model directory"), seed);
                let loaded = model_names(spec.stages.len())
                    .iter()
                    .map(|n| {
                        let p = dir.join(n);
                        let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
                        persist::from_text(&text).map_err(|e| {
                            CliError::Usage(format!("{}: {e}", p.display()))
                        })
                    })
                    .collect::<CliResult<Vec<Svq>>>()?;
                check_loaded(spec, &loaded, &dir)?;
                loaded
            }
            Mode::Full | Mode::TrainOnly => {
                let (stages, trace) = train_stages(spec, initial.clone(), &config, &scene, out, &prefix)?;
                out.write(&format!("{prefix}trace.csv"), trace.to_csv())?;
                for (m, name) in stages.iter().zip(model_names(stages.len())) {
                    out.write(&format!("{prefix}{name}"), persist::to_text(m))?;
                }
                report.push(seed, "initial_eval", trace.initial_eval);
                report.push(seed, "final_eval", trace.final_eval);
                stages
            }
        };
        if mode != Mode::TrainOnly {
            analyze(spec, seed, &scene, &initial, &trained, out, &prefix, &mut report)?;
        }
    }
    out.write("summary.csv", report.summary_csv())?;
    if spec.runs(Analysis::Classification) {
        out.write("classification.txt", report.classification_text())?;
    }
    Ok(report)
}

fn check_loaded(spec: &ExperimentSpec, loaded: &[Svq], dir: &Path) -> CliResult<()> {
    for ((m, s), d) in loaded.iter().zip(&spec.stages).zip(spec.stage_dims()) {
        if m.dim() != d || m.layout() != s.layout || m.n != s.n {
            return Err(CliError::Usage(format!(
                "{}: saved model (dim {}, {} codes, n {}) does not match the spec (dim {d}, {} codes, n {})",
                dir.display(),
                m.dim(),
                m.num_codes(),
                m.n,
                s.num_codes(),
                s.n
            )));
        }
    }
    Ok(())
}

/// Inputs for the stationarity residuals: an evenly spaced angle grid for
/// circle data (the exact uniform measure), otherwise seeded draws.
fn stationarity_batch(spec: &ExperimentSpec, scene: &Scene, seed: u64) -> svq_core::Result<Batch> {
    let count = spec.params.samples;
    match spec.generator {
        Generator::Circle => Batch::new(
            (0..count)
                .map(|i| {
                    let t = TAU * i as f64 / count as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
        ),
        _ => Batch::new(scene.source.batch(count, &mut stream_rng(seed, ANALYSIS_STREAM))),
    }
}

fn max_residual(r: &[Option<f64>]) -> f64 {
    r.iter().flatten().cloned().fold(0.0, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Reconstruction rows drawn as square tiles on the code layout, each tile
/// rescaled on its own, with one-pixel gaps.
pub fn codebook_tiles(codebook: &Codebook, layout: Layout, window: usize) -> ImageData {
    let (rows, cols) = layout.shape();
    let w = cols * (window + 1) + 1;
    let h = rows * (window + 1) + 1;
    let mut img = ImageData::filled(w, h, 0.0);
    for y in 0..codebook.num_codes() {
        let (r, c) = layout.coords(y);
        let tile = ImageData {
            width: window,
            height: window,
            pixels: codebook.row(y).to_vec(),
        }
        .rescaled();
        for i in 0..window {
            for j in 0..window {
                img.set(1 + r * (window + 1) + i, 1 + c * (window + 1) + j, tile.get(i, j));
            }
        }
    }
    img
}

/// `img` mapped to [0, 1] with the value range of `reference`.
fn rescale_like(img: &ImageData, reference: &ImageData) -> ImageData {
    let min = reference.pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = reference.pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = (max - min).max(f64::MIN_POSITIVE);
    ImageData {
        pixels: img.pixels.iter().map(|v| (v - min) / range).collect(),
        ..*img
    }
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    spec: &ExperimentSpec,
    seed: u64,
    scene: &Scene,
    initial: &[Svq],
    trained: &[Svq],
    out: &mut Artifacts,
    prefix: &str,
    report: &mut Report,
) -> CliResult<()> {
    let p = &spec.params;
    let svq = &trained[0];
    for &a in &spec.analyses {
        match a {
            Analysis::ArcProfiles => {
                let profiles = arc_profiles(svq, p.arc_resolution)?;
                out.write(&format!("{prefix}arc_profiles.csv"), arc_profiles_csv(&profiles))?;
                let mut csv = String::from("code,norm,width,width_over_pi\n");
                let (mut min_norm, mut min_w, mut max_w) = (f64::INFINITY, f64::INFINITY, 0.0f64);
                for pr in &profiles {
                    let r = svq.codebook.row(pr.code);
                    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let _ = writeln!(csv, "{},{},{},{}", pr.code + 1, norm, pr.width, pr.width / PI);
                    min_norm = min_norm.min(norm);
                    min_w = min_w.min(pr.width);
                    max_w = max_w.max(pr.width);
                }
                out.write(&format!("{prefix}arc_summary.csv"), csv)?;
                report.push(seed, "min_norm", min_norm);
                report.push(seed, "min_arc_width", min_w);
                report.push(seed, "max_arc_width", max_w);
            }
            Analysis::Stationarity => {
                let batch = stationarity_batch(spec, scene, seed)?;
                let mut csv = String::from("phase,quantity,code,value\n");
                for (phase, model) in [("initial", &initial[0]), ("final", svq)] {
                    let recon = stationarity_residual_recon(model, &batch)?;
                    for (y, r) in recon.iter().enumerate() {
                        let v = r.map_or("NA".to_string(), |v| v.to_string());
                        let _ = writeln!(csv, "{phase},recon,{},{v}", y + 1);
                    }
                    let post = stationarity_residual_posterior(model, &batch)?;
                    let _ = writeln!(csv, "{phase},posterior,,{post}");
                    report.push(seed, &format!("recon_residual_{phase}"), max_residual(&recon));
                    report.push(seed, &format!("posterior_residual_{phase}"), post);
                }
                out.write(&format!("{prefix}stationarity.csv"), csv)?;
            }
            Analysis::Classification => {
                let label = classify_encoding(svq, p.grid)?;
                out.write(&format!("{prefix}classification.csv"), label.to_csv())?;
                report.push(seed, "label", label.label);
                report.push(seed, "factorial_codes", label.factorial_codes());
                report.push(seed, "active_codes", label.active_codes());
                report.labels.push((seed, label.label));
            }
            Analysis::Localization => {
                let mut csv = String::from("stage,code,participation,normalized,runs\n");
                for (k, stage) in trained.iter().enumerate() {
                    for (y, l) in localization_metrics(&stage.codebook).iter().enumerate() {
                        let _ = writeln!(csv, "{},{},{},{},{}", k + 1, y + 1, l.participation, l.normalized, l.runs);
                    }
                }
                out.write(&format!("{prefix}localization.csv"), csv)?;
                let loc = localization_metrics(&svq.codebook);
                report.push(seed, "single_run_codes", loc.iter().filter(|l| l.runs == 1).count());
                report.push(seed, "two_run_codes", loc.iter().filter(|l| l.runs == 2).count());
                report.push(seed, "median_participation", median(loc.iter().map(|l| l.participation).collect()));
            }
            Analysis::WaveformMatch => {
                let Generator::Waveforms(g) = &spec.generator else {
                    unreachable!("validated generator")
                };
                let refs = g.references().to_vec();
                let samples = scene.source.batch(p.samples, &mut stream_rng(seed, ANALYSIS_STREAM));
                let usage = code_usage(svq, &samples)?;
                let active = active_codes(&usage);
                let matches = match_waveforms(&svq.codebook, &refs)?;
                out.write(&format!("{prefix}waveform_matches.csv"), waveform_matches_csv(&matches))?;
                let mut csv = String::from("code,usage,active\n");
                for (y, u) in usage.iter().enumerate() {
                    let _ = writeln!(csv, "{},{u},{}", y + 1, active.contains(&y));
                }
                out.write(&format!("{prefix}usage.csv"), csv)?;
                let act: Vec<_> = matches.iter().filter(|m| active.contains(&m.code)).collect();
                let min_corr = act.iter().map(|m| m.correlation).fold(f64::INFINITY, f64::min);
                let covered = (0..refs.len()).filter(|&r| act.iter().any(|m| m.reference == r)).count();
                report.push(seed, "active_codes", act.len());
                report.push(seed, "min_active_correlation", min_corr);
                report.push(seed, "references_covered", covered);
            }
            Analysis::Periods => {
                let (Generator::Ecg { synth, .. }, Some(ecg)) = (&spec.generator, &scene.ecg) else {
                    unreachable!("validated generator")
                };
                let streams = response_streams(svq, &ecg.inputs)?;
                let targets = [("maternal", synth.maternal_period), ("foetal", synth.foetal_period())];
                let mut csv = String::from("code,period,matches\n");
                let mut counts = [0usize; 2];
                for (y, s) in streams.iter().enumerate() {
                    let period = dominant_period(s, p.min_lag, p.max_lag, p.min_height);
                    let hit = period.and_then(|q| {
                        targets
                            .iter()
                            .position(|(_, t)| (q as f64 - t).abs() <= p.period_tolerance * t)
                    });
                    if let Some(i) = hit {
                        counts[i] += 1;
                    }
                    let _ = writeln!(
                        csv,
                        "{},{},{}",
                        y + 1,
                        period.map_or("NA".to_string(), |q| q.to_string()),
                        hit.map_or("none", |i| targets[i].0)
                    );
                }
                out.write(&format!("{prefix}periods.csv"), csv)?;
                let mut dump = String::from("t");
                for y in 1..=svq.num_codes() {
                    let _ = write!(dump, ",q_{y}");
                }
                dump.push('\n');
                for (t, x) in ecg.inputs.iter().enumerate() {
                    let _ = write!(dump, "{t}");
                    for y in 0..svq.num_codes() {
                        let _ = write!(dump, ",{}", svq.response.response(y, x)?);
                    }
                    dump.push('\n');
                }
                out.write(&format!("{prefix}responses.csv"), dump)?;
                report.push(seed, "maternal_codes", counts[0]);
                report.push(seed, "foetal_codes", counts[1]);
            }
            Analysis::Topographic => {
                let layout = svq.layout();
                let score = topographic_order(&svq.codebook, layout, seed)?;
                let mut csv = format!("model,score\nleakage,{score}\n");
                report.push(seed, "topographic_leakage", score);
                if p.compare_without_leakage {
                    let plain = StageSpec {
                        leakage: LeakageSpec::Identity,
                        ..spec.stages[0]
                    };
                    let mut rng = stream_rng(seed, INIT_STREAM);
                    let start = init_with(&[plain], &spec.stage_dims(), spec.train.init_scale, &mut rng)?;
                    let mut chain = ChainSpec::single(start.into_iter().next().expect("one stage"));
                    train_chain_with(&mut chain, &config_for(spec, seed), scene.source.as_ref(), |_, _| Ok(()))?;
                    let off = &chain.stages[0];
                    out.write(&format!("{prefix}model_noleak.svq"), persist::to_text(off))?;
                    let s_off = topographic_order(&off.codebook, layout, seed)?;
                    let _ = writeln!(csv, "no_leakage,{s_off}");
                    report.push(seed, "topographic_no_leakage", s_off);
                }
                out.write(&format!("{prefix}topographic.csv"), csv)?;
                if let Some(img) = spec.generator.image() {
                    out.write(
                        &format!("{prefix}codebook.pgm"),
                        codebook_tiles(&svq.codebook, layout, img.window).to_pgm(),
                    )?;
                }
            }
            Analysis::SparseCoding => {
                let img = spec.generator.image().expect("validated generator");
                let interdigitated = matches!(spec.generator, Generator::Interdigitated(_));
                let test = scene::test_image(img, interdigitated, seed)?;
                let enc = encode_image(svq, &test, img.window, p.stride)?;
                out.write(&format!("{prefix}input.pgm"), rescale_like(&test, &test).to_pgm())?;
                out.write(
                    &format!("{prefix}reconstruction.pgm"),
                    rescale_like(&enc.reconstruction, &test).to_pgm(),
                )?;
                out.write(&format!("{prefix}activity.pgm"), enc.activity.to_pgm())?;
                let (mse, base) = (enc.mse(&test), enc.baseline_mse(&test));
                out.write(
                    &format!("{prefix}sparse_coding.csv"),
                    format!("metric,value\nmse,{mse}\nbaseline_mse,{base}\nsparsity,{}\n", enc.sparsity),
                )?;
                report.push(seed, "reconstruction_mse", mse);
                report.push(seed, "baseline_mse", base);
                report.push(seed, "sparsity", enc.sparsity);
            }
            Analysis::Dominance => {
                let img = spec.generator.image().expect("validated generator");
                let map = dominance_map(
                    svq,
                    &scene.images[0],
                    &scene.images[1],
                    scene::prep(img),
                    img.window,
                    p.patches,
                    seed,
                )?;
                let layout = svq.layout();
                let levels = MapImage {
                    values: map.labels.values.iter().map(|v| v * 255.0).collect(),
                    ..map.labels.clone()
                };
                out.write(&format!("{prefix}dominance.pgm"), levels.to_label_pgm())?;
                let mut csv = String::from("code,row,col,preference,label\n");
                for (y, pref) in map.preference.iter().enumerate() {
                    let (r, c) = layout.coords(y);
                    let _ = writeln!(csv, "{},{r},{c},{pref},{}", y + 1, map.labels.values[y]);
                }
                out.write(&format!("{prefix}dominance.csv"), csv)?;
                report.push(seed, "contiguity", map.contiguity);
            }
        }
    }
    Ok(())
}
