//! One trial end to end: draw, detect, threshold, score.

use cfmimo::detector::{run_coordinate_descent_traced, threshold_decide, DetectorConfig};
use cfmimo::harness::{compute_metrics, draw_trial};
use cfmimo::GeometryConfig;

fn main() {
    let cfg = GeometryConfig::default();
    let dcfg = DetectorConfig::default();
    let draw = draw_trial(&cfg, &dcfg, 0);
    println!(
        "{} of {} devices active, L = {}, M = {}, N = {}",
        draw.activity.n_active(),
        cfg.n_devices,
        cfg.seq_len,
        cfg.n_aps,
        cfg.n_antennas
    );

    let start = std::time::Instant::now();
    let (state, trace) =
        run_coordinate_descent_traced(&draw.frames, &draw.scenario, &draw.book, &draw.detector_config(&dcfg)).unwrap();
    println!("detector: {:.3} s", start.elapsed().as_secs_f64());
    for it in &trace.iterations {
        println!(
            "iteration {:2}: cost {:12.4}, nonzero {:3}, skipped {}",
            it.iteration,
            it.cost.unwrap_or(f64::NAN),
            it.nonzero,
            it.skipped
        );
    }
    println!("dominant-block descent violations: {}", trace.descent_violations(1e-10));

    for nu in [0.01, 0.1, 1.0, 10.0] {
        let detected = threshold_decide(&state, &draw.scenario, nu).detected_set();
        let (p_md, p_fa) = compute_metrics(&draw.activity.active_set, &detected, cfg.n_devices).unwrap();
        println!("nu = {nu:<5}: {:3} detected, p_md = {p_md:.4}, p_fa = {p_fa:.4}", detected.len());
    }
}
