//! Specs compiled into the binary, one per reproduced experiment.

pub const BUNDLED: &[(&str, &str)] = &[
    ("circle_m4_n10", include_str!("../specs/circle_m4_n10.spec")),
    ("torus_m8_n5", include_str!("../specs/torus_m8_n5.spec")),
    ("torus_m8_n20", include_str!("../specs/torus_m8_n20.spec")),
    ("multi_targets_m10_n10", include_str!("../specs/multi_targets_m10_n10.spec")),
    ("pair_joint", include_str!("../specs/pair_joint.spec")),
    ("pair_factorial_2stage", include_str!("../specs/pair_factorial_2stage.spec")),
    ("pair_invariant_2stage", include_str!("../specs/pair_invariant_2stage.spec")),
    ("waveforms_m10_n20", include_str!("../specs/waveforms_m10_n20.spec")),
    ("ecg_m16_n20", include_str!("../specs/ecg_m16_n20.spec")),
    ("vicon_orientation", include_str!("../specs/vicon_orientation.spec")),
    ("vicon_dominance", include_str!("../specs/vicon_dominance.spec")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ExperimentSpec;

    #[test]
    fn every_bundled_spec_validates_and_is_named_after_itself() {
        for (name, text) in BUNDLED {
            let spec = ExperimentSpec::parse(name, text).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(spec.name, *name);
            assert!(spec.train.reproducible);
        }
    }
}
