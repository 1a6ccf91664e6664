//! Cell-free against co-located with the same total antenna count, sharing
//! device positions, signatures and activity trial by trial.
//!
//! `cargo run --release --example compare_architectures -- 100 500` runs
//! 100 trials on a 500 m cell.

use cfmimo::detector::{default_nu_sweep, DetectorConfig};
use cfmimo::harness::compare_architectures;
use cfmimo::GeometryConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let side = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000.0);
    let cfg = GeometryConfig {
        side_length: side,
        ..Default::default()
    };
    let cmp = compare_architectures(&cfg, &DetectorConfig::default(), trials, &default_nu_sweep()).unwrap();
    for (name, rep) in [("cell-free", &cmp.cell_free), ("co-located", &cmp.colocated)] {
        let at = rep.curve.p_md_at_p_fa(0.1);
        println!(
            "{name:>10}: p_md at p_fa = 0.1: {}",
            at.map_or("not reached".to_string(), |v| format!("{v:.5}"))
        );
    }
    println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "nu", "cf p_fa", "cf p_md", "co p_fa", "co p_md");
    for (a, b) in cmp.cell_free.curve.points.iter().zip(&cmp.colocated.curve.points).step_by(5) {
        println!(
            "{:>10.4} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            a.nu, a.mean_p_fa, a.mean_p_md, b.mean_p_fa, b.mean_p_md
        );
    }
}
