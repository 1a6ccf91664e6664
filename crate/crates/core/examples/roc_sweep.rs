//! Monte Carlo ROC sweep over the threshold multiplier.
//!
//! `cargo run --release --example roc_sweep -- 50` runs 50 trials.

use cfmimo::detector::{default_nu_sweep, DetectorConfig};
use cfmimo::harness::run_trials;
use cfmimo::GeometryConfig;

fn main() {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let cfg = GeometryConfig::default();
    let rep = run_trials(&cfg, &DetectorConfig::default(), trials, &default_nu_sweep()).unwrap();
    println!("{:>10} {:>10} {:>10}", "nu", "p_fa", "p_md");
    for p in rep.curve.points.iter().step_by(5) {
        println!("{:>10.4} {:>10.5} {:>10.5}", p.nu, p.mean_p_fa, p.mean_p_md);
    }
    println!(
        "{trials} trials, {} without active devices, monotone: {}",
        rep.excluded_from_md,
        rep.curve.is_monotone()
    );
    if let Some(p_md) = rep.curve.p_md_at_p_fa(0.1) {
        println!("p_md at p_fa = 0.1: {p_md:.5}");
    }
}
