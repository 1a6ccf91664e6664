//! Library pipeline against the dense references in `common`.

mod common;

use cfmimo::airlink::FrameSet;
use cfmimo::detector::{run_coordinate_descent, stationarity, DetectorConfig};
use cfmimo::harness::{draw_trial, run_trials, simulate_trial};
use cfmimo::oracle::ml_cost as oracle_cost;
use cfmimo::{GeometryConfig, Scenario};
use common::*;

fn small() -> GeometryConfig {
    GeometryConfig {
        n_aps: 5,
        n_antennas: 3,
        n_devices: 50,
        seq_len: 12,
        ..Default::default()
    }
}

#[test]
fn oracle_cost_matches_independent_evaluation() {
    let cfg = small();
    let dcfg = DetectorConfig::default();
    let draw = draw_trial(&cfg, &dcfg, 3);
    let st = run_coordinate_descent(&draw.frames, &draw.scenario, &draw.book, &draw.detector_config(&dcfg)).unwrap();
    let lib = oracle_cost(&st.gamma_hat, &draw.frames, &draw.scenario, &draw.book).unwrap().total;
    let own = ml_cost(&draw.scenario, &draw.book, &draw.frames, &st.gamma_hat);
    assert!((lib - own).abs() < 1e-9 * own.abs(), "{lib} vs {own}");
}

#[test]
fn detector_step_matches_dense_reference() {
    let cfg = small();
    let dcfg = DetectorConfig {
        iterations: 3,
        ..Default::default()
    };
    let draw = draw_trial(&cfg, &dcfg, 1);
    let st = run_coordinate_descent(&draw.frames, &draw.scenario, &draw.book, &draw.detector_config(&dcfg)).unwrap();
    for s in stationarity(&st, &draw.book, &draw.frames, &draw.scenario) {
        let own = dominant_step(&draw.scenario, &draw.book, &draw.frames, &st.gamma_hat, s.device);
        assert!((s.d_star - own).abs() <= 1e-7 * own.abs().max(s.noise_scale), "{} vs {own}", s.d_star);
    }
}

#[test]
fn exported_artifacts_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let draw = draw_trial(&small(), &DetectorConfig::default(), 0);
    let sc_path = tmp.path().join("scenario.json");
    draw.scenario.write_json(&sc_path).unwrap();
    assert_eq!(Scenario::read_json(&sc_path).unwrap(), draw.scenario);
    let frames_path = tmp.path().join("frames.txt");
    draw.frames.write_text(&frames_path).unwrap();
    let back = FrameSet::read_text(&frames_path).unwrap();
    for m in 0..back.n_aps() {
        assert_eq!(back.block(m), draw.frames.block(m));
    }
}

#[test]
fn trial_outcomes_do_not_depend_on_batch() {
    let cfg = small();
    let dcfg = DetectorConfig::default();
    let nu = [0.1, 1.0];
    let rep = run_trials(&cfg, &dcfg, 4, &nu).unwrap();
    let alone = simulate_trial(&cfg, &dcfg, 2, &nu).unwrap();
    let strip = |o: &cfmimo::harness::TrialOutcome| {
        (o.draw_digest, o.n_active, o.metrics.iter().map(|m| (m.nu, m.p_md, m.p_fa)).collect::<Vec<_>>())
    };
    assert_eq!(strip(&rep.outcomes[2]), strip(&alone));
}
