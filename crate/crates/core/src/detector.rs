//! Dominant-AP coordinate-descent activity detector.
//!
//! The estimator minimizes the per-antenna negative log-likelihood
//! `sum_m log|Q_m| + tr(Q_m^{-1} Q_Y_m)` over `gamma >= 0`, one coordinate
//! at a time. For device `k` the step is the closed-form minimizer of the
//! cost seen by its strongest AP `m'` alone,
//!
//! ```text
//! d* = (s^H Q^{-1} Q_Y Q^{-1} s - s^H Q^{-1} s) / (beta_{m'k} (s^H Q^{-1} s)^2),
//! ```
//!
//! clamped to `-gamma_k` so the estimate stays non-negative. The step is
//! then pushed into every AP's inverse covariance with a Sherman-Morrison
//! update, which makes one step cost `O(M L^2)`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlink::{FrameSet, SignatureBook};
use crate::cgmat::{
    dense_inverse, dense_log_det, quad_and_sandwich, HermitianMatrix, LinalgError, PreparedUpdate,
    DENOMINATOR_FLOOR,
};
use crate::oracle::assemble_covariance;
use crate::scenario::{Scenario, ValidationError};

/// Signature length above which periodic dense re-factorization kicks in by default.
pub const AUTO_REFACTOR_MAX_LEN: usize = 64;
pub const AUTO_REFACTOR_EVERY: usize = 5;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("signature of device {device} is numerically annihilated (s^H Q^-1 s = {alpha:e})")]
    DegenerateDirection { device: usize, alpha: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Config(#[from] ValidationError),
}

/// Log-spaced default threshold sweep, `1e-4 ..= 1e3`, ten points per decade.
pub fn default_nu_sweep() -> Vec<f64> {
    (0..=70).map(|i| 10f64.powf(-4.0 + i as f64 / 10.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Outer iterations.
    #[serde(rename = "T")]
    pub iterations: usize,
    /// Dense re-inversion period in iterations; `0` disables it, absent
    /// selects it from the signature length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refactor_every: Option<usize>,
    pub permutation_seed: u64,
    /// Maintain log-determinants and record the global cost per iteration.
    pub track_cost: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            refactor_every: None,
            permutation_seed: 0,
            track_cost: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.iterations == 0 {
            return Err(ValidationError::new("detector.T", "must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_refactor_every(&self, seq_len: usize) -> usize {
        self.refactor_every.unwrap_or(if seq_len <= AUTO_REFACTOR_MAX_LEN {
            0
        } else {
            AUTO_REFACTOR_EVERY
        })
    }
}

#[derive(Debug, Clone)]
pub struct DetectorState {
    /// Estimate of `gamma_k = a_k rho_k`; never negative.
    pub gamma_hat: Vec<f64>,
    pub q_inv: Vec<HermitianMatrix>,
    /// `log|Q_m|`, kept only when cost tracking is on.
    pub log_det: Option<Vec<f64>>,
    pub dominant_ap: Vec<usize>,
}

impl DetectorState {
    /// Global cost from the maintained inverses; needs cost tracking.
    pub fn tracked_cost(&self, frames: &FrameSet) -> Option<f64> {
        let log_det = self.log_det.as_ref()?;
        Some(
            self.q_inv
                .iter()
                .zip(log_det)
                .enumerate()
                .map(|(m, (qi, ld))| ld + qi.trace_product(frames.sample_cov(m)))
                .sum(),
        )
    }
}

/// `Q_m^{-1} = I / sigma^2`, `gamma_hat = 0`, dominant APs from `beta`.
pub fn init_state(sc: &Scenario, seq_len: usize) -> DetectorState {
    assert!(sc.sigma2 > 0.0, "noise power must be positive");
    let m_count = sc.n_aps();
    DetectorState {
        gamma_hat: vec![0.0; sc.n_devices()],
        q_inv: vec![HermitianMatrix::scaled_identity(seq_len, 1.0 / sc.sigma2); m_count],
        log_det: None,
        dominant_ap: (0..sc.n_devices()).map(|k| sc.dominant_ap(k)).collect(),
    }
}

pub fn init_state_with_cost(sc: &Scenario, seq_len: usize) -> DetectorState {
    let mut st = init_state(sc, seq_len);
    st.log_det = Some(vec![seq_len as f64 * sc.sigma2.ln(); sc.n_aps()]);
    st
}

/// Change of the dominant-AP cost when `gamma_k` moves by `d`:
/// `log(1 + d b a) - d b mu / (1 + d b a)`.
pub fn dominant_block_cost(alpha: f64, mu: f64, beta: f64, d: f64) -> f64 {
    let x = d * beta;
    let den = 1.0 + x * alpha;
    (x * alpha).ln_1p() - x * mu / den
}

/// Unconstrained minimizer of [`dominant_block_cost`].
pub fn optimal_step(alpha: f64, mu: f64, beta: f64) -> f64 {
    (mu - alpha) / (beta * alpha * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub device: usize,
    pub dominant_ap: usize,
    /// `s^H Q^{-1} s` at the dominant AP.
    pub alpha: f64,
    /// `s^H Q^{-1} Q_Y Q^{-1} s` at the dominant AP.
    pub mu: f64,
    pub d_star: f64,
    /// Applied step `max(d*, -gamma_k)`.
    pub delta: f64,
}

impl StepOutcome {
    /// Dominant-AP cost change produced by the applied step (`0` at `delta = 0`).
    pub fn cost_change(&self, beta: f64) -> f64 {
        dominant_block_cost(self.alpha, self.mu, beta, self.delta)
    }
}

struct Scratch {
    v: Vec<num_complex::Complex64>,
    w: Vec<num_complex::Complex64>,
}

impl Scratch {
    fn new(l: usize) -> Self {
        let z = num_complex::Complex64::new(0.0, 0.0);
        Self {
            v: vec![z; l],
            w: vec![z; l],
        }
    }
}

fn step_with(
    st: &mut DetectorState,
    k: usize,
    book: &SignatureBook,
    frames: &FrameSet,
    sc: &Scenario,
    scratch: &mut Scratch,
) -> Result<StepOutcome, DetectorError> {
    let mp = st.dominant_ap[k];
    let s = book.column(k);
    let beta = sc.beta[mp][k];
    let (alpha, mu) = quad_and_sandwich(&st.q_inv[mp], frames.sample_cov(mp), s, &mut scratch.v, &mut scratch.w);
    if !(alpha > DENOMINATOR_FLOOR) {
        return Err(DetectorError::DegenerateDirection { device: k, alpha });
    }
    let d_star = optimal_step(alpha, mu, beta);
    let gamma = st.gamma_hat[k];
    let delta = d_star.max(-gamma);
    let outcome = StepOutcome {
        device: k,
        dominant_ap: mp,
        alpha,
        mu,
        d_star,
        delta,
    };
    if delta == 0.0 {
        return Ok(outcome);
    }

    // Check every denominator before touching any block.
    let updates = st
        .q_inv
        .iter()
        .enumerate()
        .map(|(m, qi)| PreparedUpdate::new(qi, s, delta * sc.beta[m][k]))
        .collect::<Result<Vec<_>, _>>()?;
    for (m, up) in updates.iter().enumerate() {
        up.apply(&mut st.q_inv[m]);
        if let Some(ld) = st.log_det.as_mut() {
            ld[m] += up.denominator().ln();
        }
    }
    st.gamma_hat[k] = if delta == -gamma { 0.0 } else { gamma + delta };
    Ok(outcome)
}

/// One clamped coordinate update of device `k`.
///
/// Returns [`DetectorError::DegenerateDirection`] without touching the
/// state when `s_k^H Q_{m'}^{-1} s_k` is at or below the denominator floor;
/// the full run treats that as a skipped coordinate.
pub fn coordinate_step(
    st: &mut DetectorState,
    k: usize,
    book: &SignatureBook,
    frames: &FrameSet,
    sc: &Scenario,
) -> Result<StepOutcome, DetectorError> {
    let mut scratch = Scratch::new(book.seq_len());
    step_with(st, k, book, frames, sc, &mut scratch)
}

/// One row of the step trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub device: usize,
    pub dominant_ap: usize,
    pub d_star: f64,
    pub delta: f64,
    /// Dominant-AP cost change `f(delta) - f(0)`; `None` for skipped coordinates.
    pub cost_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Global cost after the iteration, when tracked.
    pub cost: Option<f64>,
    pub nonzero: usize,
    pub skipped: usize,
}

/// Per-step and per-iteration diagnostics of one detector run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectorTrace {
    pub steps: Vec<StepRecord>,
    pub iterations: Vec<IterationRecord>,
}

impl DetectorTrace {
    /// Steps whose dominant-AP cost rose by more than `slack`.
    pub fn descent_violations(&self, slack: f64) -> usize {
        self.steps
            .iter()
            .filter(|r| r.cost_change.is_some_and(|c| !(c <= slack)))
            .count()
    }

    /// `iteration,device,dominant_ap,d_star,delta,cost_change`
    pub fn write_steps_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,device,dominant_ap,d_star,delta,cost_change")?;
        for r in &self.steps {
            let change = r.cost_change.map_or("NA".to_string(), |c| c.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration, r.device, r.dominant_ap, r.d_star, r.delta, change
            )?;
        }
        Ok(())
    }

    /// `iteration,cost,nonzero,skipped`
    pub fn write_iterations_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,cost,nonzero,skipped")?;
        for r in &self.iterations {
            let cost = r.cost.map_or("NA".to_string(), |c| c.to_string());
            writeln!(w, "{},{},{},{}", r.iteration, cost, r.nonzero, r.skipped)?;
        }
        Ok(())
    }
}

fn check_dims(frames: &FrameSet, sc: &Scenario, book: &SignatureBook) -> Result<(), DetectorError> {
    if frames.n_aps() != sc.n_aps() {
        return Err(DetectorError::Dimension(format!(
            "{} frame blocks for {} APs",
            frames.n_aps(),
            sc.n_aps()
        )));
    }
    if frames.seq_len() != book.seq_len() {
        return Err(DetectorError::Dimension(format!(
            "frames have L = {}, signatures L = {}",
            frames.seq_len(),
            book.seq_len()
        )));
    }
    if book.n_devices() != sc.n_devices() {
        return Err(DetectorError::Dimension(format!(
            "{} signatures for {} devices",
            book.n_devices(),
            sc.n_devices()
        )));
    }
    Ok(())
}

/// Rebuilds every `Q_m^{-1}` (and `log|Q_m|`) densely from `gamma_hat`.
pub fn refactor(st: &mut DetectorState, sc: &Scenario, book: &SignatureBook) -> Result<(), DetectorError> {
    for m in 0..st.q_inv.len() {
        let q = assemble_covariance(sc, book, &st.gamma_hat, m);
        st.q_inv[m] = dense_inverse(&q)?;
        if let Some(ld) = st.log_det.as_mut() {
            ld[m] = dense_log_det(&q)?;
        }
    }
    Ok(())
}

fn run_inner(
    frames: &FrameSet,
    sc: &Scenario,
    book: &SignatureBook,
    cfg: &DetectorConfig,
    mut trace: Option<&mut DetectorTrace>,
) -> Result<DetectorState, DetectorError> {
    cfg.validate()?;
    check_dims(frames, sc, book)?;
    let l = book.seq_len();
    let track = cfg.track_cost || trace.is_some();
    let mut st = if track {
        init_state_with_cost(sc, l)
    } else {
        init_state(sc, l)
    };
    let refactor_every = cfg.effective_refactor_every(l);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.permutation_seed);
    let mut order: Vec<usize> = (0..book.n_devices()).collect();
    let mut scratch = Scratch::new(l);

    for it in 0..cfg.iterations {
        order.shuffle(&mut rng);
        let mut skipped = 0;
        for &k in &order {
            match step_with(&mut st, k, book, frames, sc, &mut scratch) {
                Ok(out) => {
                    if let Some(t) = trace.as_deref_mut() {
                        t.steps.push(StepRecord {
                            iteration: it,
                            device: k,
                            dominant_ap: out.dominant_ap,
                            d_star: out.d_star,
                            delta: out.delta,
                            cost_change: Some(out.cost_change(sc.beta[out.dominant_ap][k])),
                        });
                    }
                }
                Err(DetectorError::DegenerateDirection { .. }) => {
                    skipped += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.steps.push(StepRecord {
                            iteration: it,
                            device: k,
                            dominant_ap: st.dominant_ap[k],
                            d_star: 0.0,
                            delta: 0.0,
                            cost_change: None,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if refactor_every > 0 && (it + 1) % refactor_every == 0 && it + 1 < cfg.iterations {
            refactor(&mut st, sc, book)?;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.iterations.push(IterationRecord {
                iteration: it,
                cost: st.tracked_cost(frames),
                nonzero: st.gamma_hat.iter().filter(|&&g| g > 0.0).count(),
                skipped,
            });
        }
    }
    Ok(st)
}

/// `T` sweeps of [`coordinate_step`] over a fresh random permutation of the
/// devices each sweep.
pub fn run_coordinate_descent(
    frames: &FrameSet,
    sc: &Scenario,
    book: &SignatureBook,
    cfg: &DetectorConfig,
) -> Result<DetectorState, DetectorError> {
    run_inner(frames, sc, book, cfg, None)
}

/// Same as [`run_coordinate_descent`], also recording a [`DetectorTrace`].
pub fn run_coordinate_descent_traced(
    frames: &FrameSet,
    sc: &Scenario,
    book: &SignatureBook,
    cfg: &DetectorConfig,
) -> Result<(DetectorState, DetectorTrace), DetectorError> {
    let mut trace = DetectorTrace::default();
    let st = run_inner(frames, sc, book, cfg, Some(&mut trace))?;
    Ok((st, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub gamma_hat: Vec<f64>,
    pub a_hat: Vec<bool>,
    /// Per-device thresholds `nu sigma^2 / beta_{m'k}`.
    pub thresholds: Vec<f64>,
}

impl DetectionResult {
    pub fn detected_set(&self) -> Vec<usize> {
        self.a_hat
            .iter()
            .enumerate()
            .filter_map(|(k, &a)| a.then_some(k))
            .collect()
    }
}

/// Declares device `k` active when `gamma_hat_k >= nu sigma^2 / beta_{m'k}`.
pub fn threshold_decide(st: &DetectorState, sc: &Scenario, nu: f64) -> DetectionResult {
    assert!(nu > 0.0, "threshold multiplier must be positive");
    let thresholds: Vec<f64> = st
        .dominant_ap
        .iter()
        .enumerate()
        .map(|(k, &m)| nu * sc.sigma2 / sc.beta[m][k])
        .collect();
    let a_hat = st
        .gamma_hat
        .iter()
        .zip(&thresholds)
        .map(|(g, th)| g >= th)
        .collect();
    DetectionResult {
        gamma_hat: st.gamma_hat.clone(),
        a_hat,
        thresholds,
    }
}

/// First-order optimality of one coordinate at the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub device: usize,
    pub d_star: f64,
    pub gamma: f64,
    /// `sigma^2 / beta_{m'k}`, the noise-equivalent scale of `gamma_k`.
    pub noise_scale: f64,
}

impl Stationarity {
    /// Either the free step is negligible or the coordinate sits on the
    /// boundary with the step pointing outward.
    pub fn holds(&self, tol_rel: f64) -> bool {
        self.d_star.abs() < tol_rel * (self.gamma + self.noise_scale)
            || (self.gamma == 0.0 && self.d_star <= 0.0)
    }
}

/// Evaluates `d*` for every device without moving the state.
pub fn stationarity(
    st: &DetectorState,
    book: &SignatureBook,
    frames: &FrameSet,
    sc: &Scenario,
) -> Vec<Stationarity> {
    let mut scratch = Scratch::new(book.seq_len());
    (0..book.n_devices())
        .map(|k| {
            let mp = st.dominant_ap[k];
            let beta = sc.beta[mp][k];
            let (alpha, mu) = quad_and_sandwich(
                &st.q_inv[mp],
                frames.sample_cov(mp),
                book.column(k),
                &mut scratch.v,
                &mut scratch.w,
            );
            Stationarity {
                device: k,
                d_star: optimal_step(alpha, mu, beta),
                gamma: st.gamma_hat[k],
                noise_scale: sc.sigma2 / beta,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{draw_signatures, sample_activity, synthesize_frames};
    use crate::cgmat::testutil::{random_pd, random_vector};
    use crate::oracle::{default_grid, grid_search_min, ml_cost};
    use crate::scenario::{build_scenario, GeometryConfig, Point};
    use crate::seeds::{Stream, TrialSeeds};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn scalar_scenario(beta: Vec<Vec<f64>>, sigma2: f64) -> Scenario {
        let m = beta.len();
        let k = beta[0].len();
        Scenario {
            side_length: 1.0,
            ap_positions: vec![Point::new(0.0, 0.0); m],
            device_positions: vec![Point::new(0.0, 0.0); k],
            shadow_db: vec![vec![0.0; k]; m],
            beta,
            rho: vec![1.0; k],
            sigma2,
            colocated: false,
            seed: 0,
            trial: 0,
        }
    }

    fn instance(cfg: &GeometryConfig, seed: u64) -> (Scenario, SignatureBook, FrameSet) {
        let seeds = TrialSeeds::new(seed, 0);
        let sc = build_scenario(cfg, &seeds);
        let book = draw_signatures(cfg.seq_len, cfg.n_devices, &mut seeds.rng(Stream::Signatures));
        let act = sample_activity(cfg.n_devices, cfg.epsilon, &mut seeds.rng(Stream::Activity));
        let frames = synthesize_frames(&sc, &book, &act, cfg.n_antennas, &seeds);
        (sc, book, frames)
    }

    fn toy_cfg() -> GeometryConfig {
        GeometryConfig {
            n_aps: 2,
            n_antennas: 4,
            n_devices: 6,
            seq_len: 16,
            epsilon: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn init_state_examples() {
        let sc = scalar_scenario(vec![vec![0.1, 0.5], vec![0.5, 0.2], vec![0.2, 0.5]], 1.0);
        let st = init_state(&sc, 3);
        for q in &st.q_inv {
            assert_eq!(*q, HermitianMatrix::identity(3));
        }
        assert_eq!(st.gamma_hat, vec![0.0, 0.0]);
        // column (0.1, 0.5, 0.2) -> AP 1; tie (0.5, 0.2, 0.5) -> lowest index
        assert_eq!(st.dominant_ap, vec![1, 0]);
    }

    #[test]
    fn silent_frames_clamp_to_zero() {
        let sc = scalar_scenario(vec![vec![0.5, 0.3]], 1.0);
        let book = SignatureBook::from_columns(vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
            vec![Complex64::new(0.5, 0.5), Complex64::new(1.0, 0.0)],
        ]);
        let frames = FrameSet::zeros(1, 2, 3);
        let mut st = init_state(&sc, 2);
        let before = st.q_inv.clone();
        let out = coordinate_step(&mut st, 0, &book, &frames, &sc).unwrap();
        assert_eq!(out.mu, 0.0);
        assert!(out.d_star < 0.0);
        assert_eq!(out.delta, 0.0);
        assert_eq!(st.q_inv, before);
        assert_eq!(st.gamma_hat, vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_step_closed_form() {
        // L = M = 1, s = 1, Q^{-1} = 1/q with q = 2, Q_Y = 3, beta = 0.5:
        // d* = (y - q) / beta = 2.
        let sc = scalar_scenario(vec![vec![0.5]], 2.0);
        let book = SignatureBook::from_columns(vec![vec![Complex64::new(1.0, 0.0)]]);
        let frames = FrameSet::from_sample_covariances(1, vec![HermitianMatrix::diagonal(&[3.0])]);
        let mut st = init_state(&sc, 1);
        let out = coordinate_step(&mut st, 0, &book, &frames, &sc).unwrap();
        assert!((out.d_star - 2.0).abs() < 1e-15);

        // central difference of the dominant-AP cost vanishes at d*
        let f = |d: f64| dominant_block_cost(out.alpha, out.mu, 0.5, d);
        let h = 1e-5;
        assert!(((f(2.0 + h) - f(2.0 - h)) / (2.0 * h)).abs() < 1e-8);
        assert!((st.gamma_hat[0] - 2.0).abs() < 1e-15);
        // Q = 2 + 2 * 0.5 = 3
        assert!((st.q_inv[0].get(0, 0).re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn step_never_raises_dominant_cost() {
        let cfg = toy_cfg();
        for seed in 0..10 {
            let (sc, book, frames) = instance(&cfg, seed);
            let mut st = init_state(&sc, 16);
            for round in 0..3 {
                for k in 0..6 {
                    let out = coordinate_step(&mut st, k, &book, &frames, &sc).unwrap();
                    let beta = sc.beta[out.dominant_ap][k];
                    let f0 = dominant_block_cost(out.alpha, out.mu, beta, 0.0);
                    let fd = dominant_block_cost(out.alpha, out.mu, beta, out.delta);
                    assert_eq!(f0, 0.0);
                    assert!(fd <= f0 + 1e-10, "seed {seed} round {round} k {k}: {fd}");
                }
            }
        }
    }

    #[test]
    fn single_iteration_single_device_is_one_step() {
        let sc = scalar_scenario(vec![vec![0.5]], 2.0);
        let book = SignatureBook::from_columns(vec![vec![Complex64::new(1.0, 0.0)]]);
        let frames = FrameSet::from_sample_covariances(1, vec![HermitianMatrix::diagonal(&[3.0])]);
        let cfg = DetectorConfig {
            iterations: 1,
            ..Default::default()
        };
        let (st, trace) = run_coordinate_descent_traced(&frames, &sc, &book, &cfg).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!((st.gamma_hat[0] - 2.0).abs() < 1e-15);
        assert!(DetectorConfig { iterations: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn zero_signal_run_returns_zero() {
        let cfg = toy_cfg();
        let (sc, book, _) = instance(&cfg, 1);
        let frames = FrameSet::zeros(2, 16, 4);
        let st = run_coordinate_descent(&frames, &sc, &book, &DetectorConfig::default()).unwrap();
        assert!(st.gamma_hat.iter().all(|&g| g == 0.0));
        let res = threshold_decide(&st, &sc, 1e-6);
        assert!(res.a_hat.iter().all(|&a| !a));
    }

    #[test]
    fn small_instance_reaches_grid_search_cost() {
        let cfg = toy_cfg();
        let (sc, book, frames) = instance(&cfg, 7);
        let dcfg = DetectorConfig {
            iterations: 50,
            ..Default::default()
        };
        let st = run_coordinate_descent(&frames, &sc, &book, &dcfg).unwrap();
        let det = ml_cost(&st.gamma_hat, &frames, &sc, &book).unwrap().total;
        let grid = grid_search_min(&frames, &sc, &book, &default_grid(sc.sigma2, 200.0), 10).unwrap();
        assert!(((det - grid.cost) / grid.cost).abs() < 0.01, "{det} vs {}", grid.cost);
    }

    #[test]
    fn tracked_cost_matches_dense_cost() {
        let cfg = toy_cfg();
        let (sc, book, frames) = instance(&cfg, 3);
        let dcfg = DetectorConfig {
            iterations: 10,
            track_cost: true,
            ..Default::default()
        };
        let (st, trace) = run_coordinate_descent_traced(&frames, &sc, &book, &dcfg).unwrap();
        let dense = ml_cost(&st.gamma_hat, &frames, &sc, &book).unwrap().total;
        let tracked = trace.iterations.last().unwrap().cost.unwrap();
        assert!(((tracked - dense) / dense).abs() < 1e-6, "{tracked} vs {dense}");
        assert_eq!(st.tracked_cost(&frames), Some(tracked));
    }

    #[test]
    fn incremental_inverses_match_dense() {
        let cfg = GeometryConfig {
            n_aps: 4,
            n_devices: 60,
            seq_len: 12,
            ..Default::default()
        };
        let (sc, book, frames) = instance(&cfg, 4);
        let st = run_coordinate_descent(&frames, &sc, &book, &DetectorConfig::default()).unwrap();
        for m in 0..4 {
            let dense = dense_inverse(&assemble_covariance(&sc, &book, &st.gamma_hat, m)).unwrap();
            assert!(st.q_inv[m].relative_distance(&dense) < 1e-6);
            assert!(st.q_inv[m].max_asymmetry() <= 1e-12 * st.q_inv[m].frobenius_norm());
            assert!(st.q_inv[m].cholesky().is_ok());
        }
    }

    #[test]
    fn refactoring_keeps_the_same_estimate_within_noise() {
        let cfg = GeometryConfig {
            n_aps: 3,
            n_devices: 40,
            seq_len: 10,
            ..Default::default()
        };
        let (sc, book, frames) = instance(&cfg, 8);
        let plain = run_coordinate_descent(&frames, &sc, &book, &DetectorConfig::default()).unwrap();
        let refac = run_coordinate_descent(
            &frames,
            &sc,
            &book,
            &DetectorConfig {
                refactor_every: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in plain.gamma_hat.iter().zip(&refac.gamma_hat) {
            assert!((a - b).abs() <= 1e-6 * (a.abs() + sc.sigma2 * 1e6));
        }
        assert_eq!(DetectorConfig::default().effective_refactor_every(40), 0);
        assert_eq!(DetectorConfig::default().effective_refactor_every(128), 5);
    }

    /// Single-AP covariance coordinate descent written against the combined
    /// variable `x_k = gamma_k beta_k`, without any dominant-AP bookkeeping.
    fn colocated_reference(frames: &FrameSet, sc: &Scenario, book: &SignatureBook, cfg: &DetectorConfig) -> Vec<f64> {
        let l = book.seq_len();
        let beta = &sc.beta[0];
        let mut x = vec![0.0; book.n_devices()];
        let mut sigma_inv = HermitianMatrix::scaled_identity(l, 1.0 / sc.sigma2);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.permutation_seed);
        let mut order: Vec<usize> = (0..book.n_devices()).collect();
        for _ in 0..cfg.iterations {
            order.shuffle(&mut rng);
            for &k in &order {
                let s = book.column(k);
                let u = sigma_inv.mul_vec(s);
                let alpha: f64 = s.iter().zip(&u).map(|(a, b)| (a.conj() * b).re).sum();
                let w = frames.sample_cov(0).mul_vec(&u);
                let mu: f64 = u.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
                let d = ((mu - alpha) / (alpha * alpha)).max(-x[k]);
                if d != 0.0 {
                    x[k] = (x[k] + d).max(0.0);
                    sigma_inv = crate::cgmat::rank_one_inverse_update(&sigma_inv, s, d).unwrap();
                }
            }
        }
        x.iter().zip(beta).map(|(x, b)| x / b).collect()
    }

    #[test]
    fn single_ap_reduces_to_colocated_method() {
        let cfg = GeometryConfig {
            n_devices: 50,
            seq_len: 12,
            n_antennas: 8,
            ..Default::default()
        }
        .colocated_twin();
        let (sc, book, frames) = instance(&cfg, 12);
        let dcfg = DetectorConfig {
            permutation_seed: 99,
            ..Default::default()
        };
        let st = run_coordinate_descent(&frames, &sc, &book, &dcfg).unwrap();
        assert!(st.dominant_ap.iter().all(|&m| m == 0));
        let reference = colocated_reference(&frames, &sc, &book, &dcfg);
        for k in 0..50 {
            let scale = sc.sigma2 / sc.beta[0][k];
            assert!(
                (st.gamma_hat[k] - reference[k]).abs() <= 1e-9 * (reference[k] + scale),
                "k {k}: {} vs {}",
                st.gamma_hat[k],
                reference[k]
            );
        }
    }

    #[test]
    fn threshold_examples() {
        let sc = scalar_scenario(vec![vec![0.5, 0.25], vec![0.1, 0.5]], 0.2);
        let mut st = init_state(&sc, 1);
        assert!(threshold_decide(&st, &sc, 1.0).a_hat.iter().all(|&a| !a));

        st.gamma_hat = vec![1e-300, 0.0];
        assert!(threshold_decide(&st, &sc, 1e-310).a_hat[0]);

        // gamma_0 = 2 sigma^2 / beta_{m'0}, dominant AP 0 with beta 0.5
        st.gamma_hat = vec![2.0 * 0.2 / 0.5, 0.0];
        let r1 = threshold_decide(&st, &sc, 1.0);
        assert!(r1.a_hat[0]);
        assert!((r1.thresholds[0] - 0.4).abs() < 1e-15);
        assert!((r1.thresholds[1] - 0.4).abs() < 1e-15);
        assert!(!threshold_decide(&st, &sc, 3.0).a_hat[0]);
    }

    #[test]
    fn stationarity_after_long_run() {
        let cfg = toy_cfg();
        let (sc, book, frames) = instance(&cfg, 5);
        let dcfg = DetectorConfig {
            iterations: 50,
            ..Default::default()
        };
        let st = run_coordinate_descent(&frames, &sc, &book, &dcfg).unwrap();
        for s in stationarity(&st, &book, &frames, &sc) {
            assert!(s.holds(1e-3), "{s:?}");
        }
    }

    #[test]
    fn degenerate_direction_is_reported_and_skipped() {
        let sc = scalar_scenario(vec![vec![0.5, 0.5]], 1.0);
        let book = SignatureBook::from_columns(vec![
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        ]);
        let frames = FrameSet::from_sample_covariances(1, vec![HermitianMatrix::diagonal(&[5.0, 1.0])]);
        let mut st = init_state(&sc, 2);
        assert!(matches!(
            coordinate_step(&mut st, 0, &book, &frames, &sc),
            Err(DetectorError::DegenerateDirection { device: 0, .. })
        ));
        let (st, trace) = run_coordinate_descent_traced(&frames, &sc, &book, &DetectorConfig::default()).unwrap();
        assert_eq!(st.gamma_hat[0], 0.0);
        assert!(st.gamma_hat[1] > 0.0);
        assert_eq!(trace.iterations[0].skipped, 1);
    }

    #[test]
    fn trace_csv_shapes() {
        let cfg = toy_cfg();
        let (sc, book, frames) = instance(&cfg, 6);
        let dcfg = DetectorConfig {
            iterations: 2,
            ..Default::default()
        };
        let (_, trace) = run_coordinate_descent_traced(&frames, &sc, &book, &dcfg).unwrap();
        let mut steps = Vec::new();
        trace.write_steps_csv(&mut steps).unwrap();
        assert_eq!(String::from_utf8(steps).unwrap().lines().count(), 1 + 12);
        let mut its = Vec::new();
        trace.write_iterations_csv(&mut its).unwrap();
        assert_eq!(String::from_utf8(its).unwrap().lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn decisions_shrink_as_nu_grows(seed in any::<u64>(), nu in 1e-3f64..1e3, factor in 1.0f64..100.0) {
            let cfg = toy_cfg();
            let (sc, _, _) = instance(&cfg, seed % 500);
            let mut st = init_state(&sc, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            st.gamma_hat = (0..6).map(|_| rand::Rng::gen::<f64>(&mut rng) * 1e-2).collect();
            let lo = threshold_decide(&st, &sc, nu).a_hat;
            let hi = threshold_decide(&st, &sc, nu * factor).a_hat;
            for k in 0..6 {
                prop_assert!(!hi[k] || lo[k]);
            }
        }

        #[test]
        fn random_steps_keep_gamma_nonnegative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = 4;
            let sc = scalar_scenario(vec![vec![0.3, 1.0, 0.05], vec![0.6, 0.2, 0.05]], 0.1);
            let book = SignatureBook::from_columns((0..3).map(|_| random_vector(&mut rng, l)).collect());
            let frames = FrameSet::from_sample_covariances(2, vec![random_pd(&mut rng, l), random_pd(&mut rng, l)]);
            let mut st = init_state(&sc, l);
            for _ in 0..40 {
                let k = rand::Rng::gen_range(&mut rng, 0..3);
                coordinate_step(&mut st, k, &book, &frames, &sc).unwrap();
                prop_assert!(st.gamma_hat.iter().all(|&g| g >= 0.0));
            }
        }
    }
}
