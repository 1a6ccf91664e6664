//! Full-power received SNR of cell-free (dominant AP) and co-located
//! deployments for several cell sizes.

use cfmimo::harness::{quantile, snr_survey, SnrStatistic};
use cfmimo::GeometryConfig;

fn main() {
    let cfg = GeometryConfig::default();
    let sides = [250.0, 500.0, 1000.0, 2000.0];
    for statistic in [SnrStatistic::DominantAp, SnrStatistic::SumOverAps] {
        println!("{statistic:?}");
        for s in snr_survey(&cfg, 5, &sides, statistic).unwrap() {
            println!(
                "  side {:>6} m: cell-free median {:6.2} dB (5% {:6.2}), co-located median {:6.2} dB (5% {:6.2}), gap {:5.2} dB",
                s.cell_side,
                quantile(&s.cell_free_db, 0.5),
                quantile(&s.cell_free_db, 0.05),
                quantile(&s.colocated_db, 0.5),
                quantile(&s.colocated_db, 0.05),
                s.median_gap_db()
            );
        }
    }
}
