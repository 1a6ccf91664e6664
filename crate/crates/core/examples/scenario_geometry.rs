//! Deployment geometry, path loss and power control of one realization.

use cfmimo::scenario::{
    build_scenario, linear_to_db, path_loss_db, torus_distance, GeometryConfig, Point, PowerPolicy,
};
use cfmimo::TrialSeeds;

fn main() {
    for d in [5.0, 10.0, 30.0, 50.0, 200.0, 700.0] {
        println!("path loss at {d:>5} m: {:8.2} dB (no shadowing)", path_loss_db(d, 0.0));
    }
    let side = 1000.0;
    println!(
        "wrap-around distance (10, 10) to (990, 990): {:.2} m",
        torus_distance(Point::new(10.0, 10.0), Point::new(990.0, 990.0), side)
    );

    let cfg = GeometryConfig::default();
    let sc = build_scenario(&cfg, &TrialSeeds::new(cfg.seed, 0));
    let snr_db: Vec<f64> = (0..sc.n_devices())
        .map(|k| linear_to_db(cfg.rho_max_mw * sc.dominant_gain(k) / sc.sigma2))
        .collect();
    let capped = sc.rho.iter().filter(|&&r| r < cfg.rho_max_mw).count();
    println!(
        "{} APs, {} devices, sigma^2 = {:.3e} mW",
        sc.n_aps(),
        sc.n_devices(),
        sc.sigma2
    );
    for k in 0..5 {
        println!(
            "device {k}: dominant AP {:2}, full-power SNR {:6.2} dB, power {:8.3} mW",
            sc.dominant_ap(k),
            snr_db[k],
            sc.rho[k]
        );
    }
    println!("{capped} of {} devices transmit below the maximum power", sc.n_devices());

    let full = GeometryConfig {
        snr_target: PowerPolicy::Full,
        ..cfg.clone()
    };
    let sc_full = build_scenario(&full, &TrialSeeds::new(cfg.seed, 0));
    assert!(sc_full.rho.iter().all(|&r| r == cfg.rho_max_mw));

    let path = std::env::temp_dir().join("cfmimo_scenario.json");
    sc.write_json(&path).unwrap();
    println!("scenario written to {}", path.display());
}
