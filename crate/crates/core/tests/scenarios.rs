use proptest::prelude::*;
use upsc_core::controller::FeedbackConfig;
use upsc_core::scenario::{build_black_start, build_power_ramp, detect_los, PRESET_NAMES};
use upsc_core::{compute_metrics, preset, run, SimConfig, Simulation};

fn feedback(bits: u8) -> FeedbackConfig {
    FeedbackConfig {
        sync_uses_virtual: bits & 1 != 0,
        qv_uses_virtual: bits & 2 != 0,
        pv_uses_virtual: bits & 4 != 0,
    }
}

#[test]
fn every_preset_validates_and_names_itself() {
    for name in PRESET_NAMES {
        let spec = preset(name).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.name, name);
    }
    assert!(preset("blackstart").is_none());
}

#[test]
fn symmetric_black_start_never_loses_sync() {
    for bits in 0..8 {
        let spec = build_black_start(0.0, feedback(bits));
        let record = run(&spec, &SimConfig::default()).unwrap();
        let m = compute_metrics(&record, &spec);
        assert!(!m.los_detected, "feedback {:?}", feedback(bits));
        assert!(m.reactive_imbalance < 1e-6);
        for v in &m.settled_voltage {
            assert!((v - 0.8).abs() < 0.02, "settled at {v}");
        }
    }
}

#[test]
fn energy_balance_closes_while_rectifier_blocks() {
    let mut spec = preset("blackstart-virtual").unwrap();
    // A charged link keeps the rectifier reverse biased during the ramp.
    spec.plant.v_dc_initial = 1.0;
    let mut sim = Simulation::new(
        &spec,
        &SimConfig {
            t_end: Some(1.5),
            ..SimConfig::default()
        },
    )
    .unwrap();
    let mut history = Vec::new();
    while !sim.is_finished() {
        sim.step_control().unwrap();
        assert_eq!(
            sim.plant_state().i_dc(),
            0.0,
            "rectifier conducted at t = {}",
            sim.time()
        );
        history.push((sim.time(), sim.energy_residual()));
    }
    // Drift of the residual over any one-second window.
    let mut worst = 0.0_f64;
    let mut j = 0;
    for i in 0..history.len() {
        while history[i].0 - history[j].0 > 1.0 {
            j += 1;
        }
        worst = worst.max((history[i].1 - history[j].1).abs());
    }
    assert!(worst < 1e-6, "residual drift {worst:e}");
}

#[test]
fn metrics_of_a_truncated_run_use_the_recorded_span() {
    let spec = preset("blackstart-measured-droop").unwrap();
    let full = run(&spec, &SimConfig::default()).unwrap();
    let short = run(
        &spec,
        &SimConfig {
            t_end: Some(0.9),
            ..SimConfig::default()
        },
    )
    .unwrap();
    // Same trajectory up to the shorter horizon.
    for (a, b) in full.data.iter().zip(&short.data) {
        assert_eq!(&a[..b.len()], &b[..]);
    }
    assert_eq!(detect_los(&short, &spec.los), None);
    assert!(detect_los(&full, &spec.los).is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builders_produce_valid_specs(delay in 0.0..2.0f64, bits in 0u8..8, p_min in prop::option::of(-1.0..=0.0f64)) {
        let bs = build_black_start(delay, feedback(bits));
        prop_assert!(bs.validate().is_ok());
        prop_assert_eq!(bs.strings[1].voltage_ramp_delay, delay);
        let pr = build_power_ramp(delay, p_min, feedback(bits));
        prop_assert!(pr.validate().is_ok());
        prop_assert_eq!(pr.limits.p_min, p_min);
        prop_assert!(pr.power_ramp_end() >= pr.profiles.p_ref.start + delay);
    }
}
