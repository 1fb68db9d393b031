//! Diagnostics that summarise trained encoders.

mod encoding;
mod maps;
mod profiles;
mod stationarity;

pub use encoding::{
    classify_encoding, classify_grid, stability_sweep, sweep_csv, torus_model, torus_posterior_grid, torus_run,
    EncodingClass, EncodingLabel, SweepCell, DEFAULT_GRID, FACTORIAL_MAJORITY, FACTORIAL_RATIO, JOINT_MAJORITY,
};
pub use maps::{
    adjacent_pairs, contiguity, dominance_input, dominance_map, encode_image, reconstruct_image, topographic_order,
    DominanceMap, DominancePrep, ImageEncoding, MapImage, DOMINANCE_PATCHES, RANDOM_PAIRS,
};
pub use profiles::{
    active_codes, arc_profile, arc_profiles, arc_profiles_csv, autocorrelation, code_usage, cyclic_correlation,
    dominant_period, localization, localization_metrics, match_waveforms, response_streams, waveform_matches_csv,
    ArcProfile, Localization, WaveformMatch, DEFAULT_ARC_RESOLUTION,
};
pub use stationarity::{stationarity_residual_posterior, stationarity_residual_recon, POSTERIOR_FLOOR};
