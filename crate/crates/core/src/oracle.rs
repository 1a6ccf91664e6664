//! Brute-force reference evaluators for small instances.
//!
//! Everything here rebuilds covariances densely from `gamma` and factors
//! them from scratch, so it shares no state with the incremental detector.

use thiserror::Error;

use crate::airlink::{FrameSet, SignatureBook};
use crate::cgmat::{HermitianMatrix, LinalgError};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("covariance of AP {ap} is not positive definite: {source}")]
    Covariance { ap: usize, source: LinalgError },
    #[error("gamma[{0}] is negative or not finite")]
    InvalidGamma(usize),
}

/// ML cost split by access point.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub per_ap: Vec<f64>,
}

/// `Q_m = sum_k gamma_k beta_mk s_k s_k^H + sigma^2 I`.
pub fn assemble_covariance(sc: &Scenario, book: &SignatureBook, gamma: &[f64], m: usize) -> HermitianMatrix {
    let mut q = HermitianMatrix::scaled_identity(book.seq_len(), sc.sigma2);
    for (k, &g) in gamma.iter().enumerate() {
        if g != 0.0 {
            q.add_rank_one(g * sc.beta[m][k], book.column(k));
        }
    }
    q
}

/// Negative log-likelihood per antenna: `sum_m log|Q_m| + tr(Q_m^{-1} Q_Y_m)`.
pub fn ml_cost(
    gamma: &[f64],
    frames: &FrameSet,
    sc: &Scenario,
    book: &SignatureBook,
) -> Result<CostBreakdown, OracleError> {
    if let Some(k) = gamma.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(OracleError::InvalidGamma(k));
    }
    let per_ap = (0..sc.n_aps())
        .map(|m| {
            let q = assemble_covariance(sc, book, gamma, m);
            let chol = q
                .cholesky()
                .map_err(|source| OracleError::Covariance { ap: m, source })?;
            Ok(chol.log_det() + chol.inverse().trace_product(frames.sample_cov(m)))
        })
        .collect::<Result<Vec<f64>, OracleError>>()?;
    Ok(CostBreakdown {
        total: per_ap.iter().sum(),
        per_ap,
    })
}

pub const GRID_POINTS: usize = 25;
pub const GRID_ROUNDS: usize = 3;

/// Exact zero followed by `GRID_POINTS - 1` log-spaced values on
/// `[sigma2 * 1e-2, rho_max * 10]`.
pub fn default_grid(sigma2: f64, rho_max: f64) -> Vec<f64> {
    let lo = (sigma2 * 1e-2).log10();
    let hi = (rho_max * 10.0).log10();
    let steps = GRID_POINTS - 2;
    std::iter::once(0.0)
        .chain((0..=steps).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub gamma: Vec<f64>,
    pub cost: f64,
    pub rounds: usize,
}

/// Cyclic coordinate-wise exhaustive search over `grid`, starting from zero.
///
/// Every round visits each coordinate in order and moves it to the grid
/// value with the lowest total cost. Stops after a round without
/// improvement or after `max_rounds`.
pub fn grid_search_min(
    frames: &FrameSet,
    sc: &Scenario,
    book: &SignatureBook,
    grid: &[f64],
    max_rounds: usize,
) -> Result<GridSearchResult, OracleError> {
    let k_count = book.n_devices();
    let mut gamma = vec![0.0; k_count];
    let mut cost = ml_cost(&gamma, frames, sc, book)?.total;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let mut improved = false;
        for k in 0..k_count {
            let current = gamma[k];
            let mut best = (cost, current);
            for &g in grid {
                if g == current {
                    continue;
                }
                gamma[k] = g;
                let c = ml_cost(&gamma, frames, sc, book)?.total;
                if c < best.0 {
                    best = (c, g);
                }
            }
            gamma[k] = best.1;
            if best.1 != current {
                improved = true;
                cost = best.0;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(GridSearchResult { gamma, cost, rounds })
}
