//! Shape diagnostics of individual codes: circle arcs, localisation of
//! reconstruction rows, waveform matching and periodicity of response
//! streams.

use std::f64::consts::TAU;

use crate::error::{Result, SvqError};
use crate::model::{Codebook, Svq};

pub const DEFAULT_ARC_RESOLUTION: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ArcProfile {
    pub code: usize,
    pub thetas: Vec<f64>,
    pub probs: Vec<f64>,
    /// Measure of {θ : Pr(y|θ) > ½ max}.
    pub width: f64,
}

/// Pr(y | (cos θ, sin θ)) on `resolution` uniformly spaced angles.
pub fn arc_profile(svq: &Svq, code: usize, resolution: usize) -> Result<ArcProfile> {
    Ok(arc_profiles(svq, resolution)?.swap_remove(code))
}

/// [`arc_profile`] for every code from one pass over the angle grid.
pub fn arc_profiles(svq: &Svq, resolution: usize) -> Result<Vec<ArcProfile>> {
    if svq.dim() != 2 {
        return Err(SvqError::DimensionMismatch {
            what: "circle model dimension",
            expected: 2,
            got: svq.dim(),
        });
    }
    if resolution == 0 {
        return Err(SvqError::config("arc resolution must be positive"));
    }
    let m = svq.num_codes();
    let thetas: Vec<f64> = (0..resolution).map(|i| TAU * i as f64 / resolution as f64).collect();
    let mut probs = vec![Vec::with_capacity(resolution); m];
    for t in &thetas {
        let post = svq.forward(&[t.cos(), t.sin()])?.posterior;
        for (y, p) in post.into_iter().enumerate() {
            probs[y].push(p);
        }
    }
    Ok(probs
        .into_iter()
        .enumerate()
        .map(|(code, p)| {
            let max = p.iter().cloned().fold(0.0, f64::max);
            let above = p.iter().filter(|&&v| v > 0.5 * max).count();
            ArcProfile {
                code,
                thetas: thetas.clone(),
                width: TAU * above as f64 / resolution as f64,
                probs: p,
            }
        })
        .collect())
}

pub fn arc_profiles_csv(profiles: &[ArcProfile]) -> String {
    let mut out = String::from("theta");
    for p in profiles {
        out.push_str(&format!(",code_{}", p.code + 1));
    }
    out.push('\n');
    if let Some(first) = profiles.first() {
        for (i, t) in first.thetas.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for p in profiles {
                out.push_str(&format!(",{}", p.probs[i]));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    /// (Σ v²)² / Σ v⁴: the effective number of significant components.
    pub participation: f64,
    /// Participation divided by the row length.
    pub normalized: f64,
    /// Disjoint circular runs above half height.
    pub runs: usize,
}

/// Participation ratio and half-height run count of every reconstruction
/// row. Runs are counted on the ring of components, above
/// min + ½(max − min); a flat row is one run.
pub fn localization_metrics(codebook: &Codebook) -> Vec<Localization> {
    codebook.matrix().iter_rows().map(localization).collect()
}

pub fn localization(v: &[f64]) -> Localization {
    let s2: f64 = v.iter().map(|x| x * x).sum();
    let s4: f64 = v.iter().map(|x| x.powi(4)).sum();
    let participation = if s4 > 0.0 { s2 * s2 / s4 } else { 0.0 };
    Localization {
        participation,
        normalized: participation / v.len() as f64,
        runs: half_height_runs(v),
    }
}

fn half_height_runs(v: &[f64]) -> usize {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return 1;
    }
    let threshold = min + 0.5 * (max - min);
    let above: Vec<bool> = v.iter().map(|&x| x > threshold).collect();
    let d = above.len();
    (0..d).filter(|&i| above[i] && !above[(i + d - 1) % d]).count().max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformMatch {
    pub code: usize,
    /// Index of the best-matching reference.
    pub reference: usize,
    pub correlation: f64,
    pub shift: usize,
    /// Best correlation against every reference.
    pub per_reference: Vec<f64>,
}

/// Pearson correlation between `a` and `b` cyclically advanced by `shift`.
pub fn cyclic_correlation(a: &[f64], b: &[f64], shift: usize) -> f64 {
    let d = a.len();
    let ma = a.iter().sum::<f64>() / d as f64;
    let mb = b.iter().sum::<f64>() / d as f64;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for t in 0..d {
        let x = a[t] - ma;
        let y = b[(t + shift) % d] - mb;
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa > 0.0 && bb > 0.0 {
        ab / (aa * bb).sqrt()
    } else {
        0.0
    }
}

/// For each reconstruction row, the best cyclic correlation with each
/// reference and the overall best match.
pub fn match_waveforms(codebook: &Codebook, references: &[Vec<f64>]) -> Result<Vec<WaveformMatch>> {
    if references.is_empty() {
        return Err(SvqError::config("no reference waveforms"));
    }
    if let Some(r) = references.iter().find(|r| r.len() != codebook.dim()) {
        return Err(SvqError::DimensionMismatch {
            what: "reference waveform",
            expected: codebook.dim(),
            got: r.len(),
        });
    }
    let d = codebook.dim();
    Ok(codebook
        .matrix()
        .iter_rows()
        .enumerate()
        .map(|(code, row)| {
            let best: Vec<(f64, usize)> = references
                .iter()
                .map(|r| {
                    (0..d)
                        .map(|s| (cyclic_correlation(row, r, s), s))
                        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
                })
                .collect();
            let (reference, &(correlation, shift)) = best
                .iter()
                .enumerate()
                .fold((0, &best[0]), |a, b| if b.1 .0 > a.1 .0 { b } else { a });
            WaveformMatch {
                code,
                reference,
                correlation,
                shift,
                per_reference: best.iter().map(|b| b.0).collect(),
            }
        })
        .collect())
}

pub fn waveform_matches_csv(matches: &[WaveformMatch]) -> String {
    let k = matches.first().map_or(0, |m| m.per_reference.len());
    let mut out = String::from("code,reference,correlation,shift");
    for r in 1..=k {
        out.push_str(&format!(",corr_ref_{r}"));
    }
    out.push('\n');
    for m in matches {
        out.push_str(&format!("{},{},{},{}", m.code + 1, m.reference + 1, m.correlation, m.shift));
        for c in &m.per_reference {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}

/// Average posterior of each code over `samples`.
pub fn code_usage(svq: &Svq, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut usage = vec![0.0; svq.num_codes()];
    for x in samples {
        for (u, p) in usage.iter_mut().zip(svq.forward(x)?.posterior) {
            *u += p / samples.len() as f64;
        }
    }
    Ok(usage)
}

/// Codes whose average posterior is at least 1/(10M).
pub fn active_codes(usage: &[f64]) -> Vec<usize> {
    let floor = 1.0 / (10.0 * usage.len() as f64);
    (0..usage.len()).filter(|&y| usage[y] >= floor).collect()
}

/// Per-code posterior streams over a sequence of inputs: `out[y][t]`.
pub fn response_streams(svq: &Svq, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(inputs.len()); svq.num_codes()];
    for x in inputs {
        for (s, p) in out.iter_mut().zip(svq.forward(x)?.posterior) {
            s.push(p);
        }
    }
    Ok(out)
}

/// Biased autocorrelation of the mean-removed signal at lags 0..=max_lag,
/// normalised so lag 0 is 1 (all zeros for a constant signal).
pub fn autocorrelation(signal: &[f64], max_lag: usize) -> Vec<f64> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n.max(1) as f64;
    let c: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let var: f64 = c.iter().map(|v| v * v).sum();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|lag| {
            if var > 0.0 {
                c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / var
            } else {
                0.0
            }
        })
        .collect()
}

/// Fraction of the highest peak that an earlier peak needs to be taken as
/// the fundamental rather than a harmonic.
const PEAK_FRACTION: f64 = 0.8;

/// Shortest-lag autocorrelation local maximum within [min_lag, max_lag]
/// that reaches `PEAK_FRACTION` of the highest one there, provided the
/// highest exceeds `min_height`.
pub fn dominant_period(signal: &[f64], min_lag: usize, max_lag: usize, min_height: f64) -> Option<usize> {
    let ac = autocorrelation(signal, max_lag + 1);
    let hi = max_lag.min(ac.len().saturating_sub(2));
    let peaks: Vec<usize> = (min_lag.max(1)..=hi)
        .filter(|&l| ac[l] >= ac[l - 1] && ac[l] > ac[l + 1])
        .collect();
    let top = peaks.iter().map(|&l| ac[l]).fold(f64::NEG_INFINITY, f64::max);
    if !(top > min_height) {
        return None;
    }
    peaks.into_iter().find(|&l| ac[l] >= PEAK_FRACTION * top)
}
