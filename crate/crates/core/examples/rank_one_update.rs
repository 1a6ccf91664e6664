//! Sherman-Morrison inverse and log-determinant updates against dense refactoring.

use cfmimo::cgmat::{dense_inverse, dense_log_det, log_det_rank_one_update, rank_one_inverse_update};
use cfmimo::HermitianMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 24;
    let mut q = HermitianMatrix::scaled_identity(n, 0.5);
    let mut q_inv = dense_inverse(&q).unwrap();
    let mut log_det = dense_log_det(&q).unwrap();

    println!("{:>4} {:>10} {:>14} {:>14}", "step", "c", "inverse err", "log-det err");
    for step in 1..=20 {
        let s: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        // alternate additions and partial removals
        let c = if step % 3 == 0 {
            let alpha = cfmimo::cgmat::quad_form(&q_inv, &s);
            -0.4 / alpha
        } else {
            rng.gen_range(0.1..5.0)
        };
        log_det = log_det_rank_one_update(log_det, &q_inv, &s, c).unwrap();
        q_inv = rank_one_inverse_update(&q_inv, &s, c).unwrap();
        q.add_rank_one(c, &s);

        let inv_err = q_inv.relative_distance(&dense_inverse(&q).unwrap());
        let ld_err = (log_det - dense_log_det(&q).unwrap()).abs();
        println!("{step:>4} {c:>10.4} {inv_err:>14.3e} {ld_err:>14.3e}");
    }
}
