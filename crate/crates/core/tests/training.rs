use svq_core::analysis::arc_profiles;
use svq_core::datagen::{stream_rng, Circle};
use svq_core::trainer::INIT_STREAM;
use svq_core::{train, LeakageKernel, Layout, LrSchedule, Svq, SvqError, Topology, TrainConfig};

fn circle_model(seed: u64) -> Svq {
    let layout = Layout::Ring(4);
    Svq::init(
        2,
        Topology::global(layout).unwrap(),
        LeakageKernel::identity(4),
        10,
        0.01,
        &mut stream_rng(seed, INIT_STREAM),
    )
    .unwrap()
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 3000,
        batch_size: 64,
        learning_rate: 0.05,
        schedule: LrSchedule::Linear { final_rate: 0.0 },
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn circle_training_lowers_the_objective_and_splits_the_circle() {
    let mut svq = circle_model(1);
    let trace = train(&mut svq, &config(1), &Circle).unwrap();
    assert!(trace.final_eval < 0.5 * trace.initial_eval, "{} -> {}", trace.initial_eval, trace.final_eval);
    let profiles = arc_profiles(&svq, 256).unwrap();
    let covered: f64 = profiles.iter().map(|p| p.width).sum();
    assert!(covered > 3.0, "codes cover only {covered} rad");
}

#[test]
fn training_is_bit_reproducible() {
    let run = || {
        let mut svq = circle_model(5);
        let trace = train(&mut svq, &TrainConfig { steps: 400, ..config(5) }, &Circle).unwrap();
        (svq_core::persist::to_text(&svq), trace.to_csv())
    };
    assert_eq!(run(), run());
}

#[test]
fn runaway_learning_rate_is_reported_as_divergence() {
    let mut svq = circle_model(2);
    let cfg = TrainConfig {
        learning_rate: 1e6,
        schedule: LrSchedule::Constant,
        ..config(2)
    };
    match train(&mut svq, &cfg, &Circle) {
        Err(SvqError::Diverged { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}
