//! Detector against brute-force oracles on toy instances.

use cfmimo::detector::DetectorConfig;
use cfmimo::experiment::check_table;
use cfmimo::harness::oracle_cross_check;
use cfmimo::GeometryConfig;

fn main() {
    let cfg = GeometryConfig {
        n_aps: 2,
        n_antennas: 4,
        n_devices: 6,
        seq_len: 16,
        epsilon: 0.5,
        ..Default::default()
    };
    let dcfg = DetectorConfig {
        iterations: 50,
        ..Default::default()
    };
    let checks: Vec<_> = (0..10)
        .flat_map(|t| oracle_cross_check(&cfg, &dcfg, t).unwrap())
        .collect();
    for line in check_table(&checks) {
        println!("{line}");
    }
}
