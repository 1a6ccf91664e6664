//! Monte Carlo experiments: trials, ROC sweeps, SNR surveys and the
//! cell-free versus co-located comparison.
//!
//! Trials are independent and run on the ambient rayon pool; results are
//! collected in trial order, so the output does not depend on the number
//! of workers.

use std::io::Write;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlink::{
    draw_digest, draw_signatures, sample_activity, synthesize_frames, ActivityPattern, FrameSet, SignatureBook,
};
use crate::cgmat::{dense_inverse, LinalgError};
use crate::detector::{
    run_coordinate_descent, run_coordinate_descent_traced, stationarity, threshold_decide, DetectorConfig,
    DetectorError,
};
use crate::oracle::{assemble_covariance, default_grid, grid_search_min, ml_cost, OracleError, GRID_ROUNDS};
use crate::scenario::{build_scenario, linear_to_db, GeometryConfig, Scenario, ValidationError};
use crate::seeds::{Stream, TrialSeeds};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Config(#[from] ValidationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("trial {trial}: architectures consumed different signature/activity draws")]
    CrnMismatch { trial: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("miss probability is undefined without active devices")]
    UndefinedMiss,
    #[error("false-alarm probability is undefined when every device is active")]
    UndefinedFalseAlarm,
}

/// `1 - |A ∩ Â| / |A|`, or `None` when `A` is empty. Both sets sorted.
pub fn miss_rate(active: &[usize], detected: &[usize]) -> Option<f64> {
    if active.is_empty() {
        return None;
    }
    let hits = active.iter().filter(|k| detected.binary_search(k).is_ok()).count();
    Some(1.0 - hits as f64 / active.len() as f64)
}

/// `|Â \ A| / (K - |A|)`, or `None` when every device is active. Both sets sorted.
pub fn false_alarm_rate(active: &[usize], detected: &[usize], n_devices: usize) -> Option<f64> {
    if active.len() >= n_devices {
        return None;
    }
    let false_alarms = detected.iter().filter(|k| active.binary_search(k).is_err()).count();
    Some(false_alarms as f64 / (n_devices - active.len()) as f64)
}

/// `(p_md, p_fa)` for one realization.
pub fn compute_metrics(active: &[usize], detected: &[usize], n_devices: usize) -> Result<(f64, f64), MetricsError> {
    let p_md = miss_rate(active, detected).ok_or(MetricsError::UndefinedMiss)?;
    let p_fa = false_alarm_rate(active, detected, n_devices).ok_or(MetricsError::UndefinedFalseAlarm)?;
    Ok((p_md, p_fa))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trial_id: u64,
    pub nu: f64,
    /// `None` when the trial had no active device.
    pub p_md: Option<f64>,
    /// `None` when every device was active.
    pub p_fa: Option<f64>,
    pub n_active: usize,
    /// Synthesis plus detection wall time of the trial, seconds.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub nu: f64,
    /// Mean over trials with a defined false-alarm rate; NaN if there are none.
    pub mean_p_fa: f64,
    /// Mean over trials with at least one active device; NaN if there are none.
    pub mean_p_md: f64,
}

/// Averaged ROC points, ordered by ascending `nu`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn monotone_column(values: impl Iterator<Item = f64> + Clone, ordered: impl Fn(f64, f64) -> bool) -> bool {
    if values.clone().all(f64::is_nan) {
        return true;
    }
    let v: Vec<f64> = values.collect();
    v.iter().all(|x| !x.is_nan()) && v.windows(2).all(|w| ordered(w[0], w[1]))
}

impl RocCurve {
    /// Mean false alarm non-increasing and mean miss non-decreasing in `nu`.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[0].nu < w[1].nu)
            && monotone_column(self.points.iter().map(|p| p.mean_p_fa), |a, b| b <= a)
            && monotone_column(self.points.iter().map(|p| p.mean_p_md), |a, b| b >= a)
    }

    /// Miss probability at the operating point where the mean false-alarm
    /// rate crosses `target`, linearly interpolated between the two
    /// bracketing thresholds. `None` if the sweep never brackets `target`.
    pub fn p_md_at_p_fa(&self, target: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            if a.mean_p_fa >= target && target >= b.mean_p_fa {
                if a.mean_p_fa == b.mean_p_fa {
                    return Some(a.mean_p_md);
                }
                let t = (a.mean_p_fa - target) / (a.mean_p_fa - b.mean_p_fa);
                Some(a.mean_p_md + t * (b.mean_p_md - a.mean_p_md))
            } else {
                None
            }
        })
    }
}

/// Result of one Monte Carlo trial, every threshold applied to the same estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_id: u64,
    pub n_active: usize,
    pub metrics: Vec<TrialMetrics>,
    /// Digest of the signature and activity draws.
    pub draw_digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub curve: RocCurve,
    pub outcomes: Vec<TrialOutcome>,
    /// Trials left out of the miss average (no active device).
    pub excluded_from_md: usize,
    /// Trials left out of the false-alarm average (every device active).
    pub excluded_from_fa: usize,
}

impl RocReport {
    pub fn n_trials(&self) -> usize {
        self.outcomes.len()
    }

    pub fn metrics(&self) -> impl Iterator<Item = &TrialMetrics> {
        self.outcomes.iter().flat_map(|o| o.metrics.iter())
    }
}

/// Rejects empty or non-positive threshold lists.
pub fn validate_nu_list(nu_list: &[f64]) -> Result<(), ValidationError> {
    if nu_list.is_empty() {
        return Err(ValidationError::new("nu_list", "needs at least one value"));
    }
    if let Some(bad) = nu_list.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(ValidationError::new(
            "nu_list",
            format!("threshold multipliers must be positive, got {bad}"),
        ));
    }
    Ok(())
}

fn sorted_nu(nu_list: &[f64]) -> Result<Vec<f64>, ValidationError> {
    validate_nu_list(nu_list)?;
    let mut nu = nu_list.to_vec();
    nu.sort_by(f64::total_cmp);
    nu.dedup();
    Ok(nu)
}

/// Everything drawn for one trial.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub scenario: Scenario,
    pub book: SignatureBook,
    pub activity: ActivityPattern,
    pub frames: FrameSet,
    /// Detector permutation seed for this trial.
    pub permutation_seed: u64,
}

impl TrialDraw {
    /// `dcfg` with the per-trial permutation seed.
    pub fn detector_config(&self, dcfg: &DetectorConfig) -> DetectorConfig {
        DetectorConfig {
            permutation_seed: self.permutation_seed,
            ..dcfg.clone()
        }
    }
}

/// Scenario, signatures, activity and received frames of trial `trial_id`.
/// The detector's base permutation seed is mixed with a per-trial draw.
pub fn draw_trial(cfg: &GeometryConfig, dcfg: &DetectorConfig, trial_id: u64) -> TrialDraw {
    let seeds = TrialSeeds::new(cfg.seed, trial_id);
    let scenario = build_scenario(cfg, &seeds);
    let mut book = draw_signatures(cfg.seq_len, cfg.n_devices, &mut seeds.rng(Stream::Signatures));
    if cfg.unit_norm_signatures {
        book.normalize_columns();
    }
    let activity = sample_activity(cfg.n_devices, cfg.epsilon, &mut seeds.rng(Stream::Activity));
    let frames = synthesize_frames(&scenario, &book, &activity, cfg.n_antennas, &seeds);
    TrialDraw {
        scenario,
        book,
        activity,
        frames,
        permutation_seed: dcfg.permutation_seed ^ seeds.rng(Stream::Permutation).next_u64(),
    }
}

/// Draws and detects one trial: one detector run, then every threshold in `nu_list`.
pub fn simulate_trial(
    cfg: &GeometryConfig,
    dcfg: &DetectorConfig,
    trial_id: u64,
    nu_list: &[f64],
) -> Result<TrialOutcome, DetectorError> {
    let start = Instant::now();
    let TrialDraw {
        scenario: sc,
        book,
        activity,
        frames,
        permutation_seed,
    } = draw_trial(cfg, dcfg, trial_id);
    let trial_cfg = DetectorConfig {
        permutation_seed,
        ..dcfg.clone()
    };
    let state = run_coordinate_descent(&frames, &sc, &book, &trial_cfg)?;
    let elapsed_s = start.elapsed().as_secs_f64();

    let metrics = nu_list
        .iter()
        .map(|&nu| {
            let detected = threshold_decide(&state, &sc, nu).detected_set();
            TrialMetrics {
                trial_id,
                nu,
                p_md: miss_rate(&activity.active_set, &detected),
                p_fa: false_alarm_rate(&activity.active_set, &detected, cfg.n_devices),
                n_active: activity.n_active(),
                elapsed_s,
            }
        })
        .collect();
    Ok(TrialOutcome {
        trial_id,
        n_active: activity.n_active(),
        metrics,
        draw_digest: draw_digest(&book, &activity),
    })
}

/// Averages trial outcomes per threshold, summing in trial order.
pub fn aggregate(nu_list: &[f64], outcomes: Vec<TrialOutcome>) -> RocReport {
    let points = nu_list
        .iter()
        .enumerate()
        .map(|(j, &nu)| {
            let mean = |f: &dyn Fn(&TrialMetrics) -> Option<f64>| {
                let vals: Vec<f64> = outcomes.iter().filter_map(|o| f(&o.metrics[j])).collect();
                if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            };
            RocPoint {
                nu,
                mean_p_fa: mean(&|m| m.p_fa),
                mean_p_md: mean(&|m| m.p_md),
            }
        })
        .collect();
    let excluded_from_md = outcomes.iter().filter(|o| o.metrics.first().is_some_and(|m| m.p_md.is_none())).count();
    let excluded_from_fa = outcomes.iter().filter(|o| o.metrics.first().is_some_and(|m| m.p_fa.is_none())).count();
    RocReport {
        curve: RocCurve { points },
        outcomes,
        excluded_from_md,
        excluded_from_fa,
    }
}

/// `n_trials` independent trials with one detector run each and a
/// threshold sweep over `nu_list` (sorted ascending, duplicates dropped).
pub fn run_trials(
    cfg: &GeometryConfig,
    dcfg: &DetectorConfig,
    n_trials: usize,
    nu_list: &[f64],
) -> Result<RocReport, HarnessError> {
    cfg.validate()?;
    dcfg.validate()?;
    let nu = sorted_nu(nu_list)?;
    let outcomes = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| simulate_trial(cfg, dcfg, t, &nu))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&nu, outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureComparison {
    pub cell_free: RocReport,
    pub colocated: RocReport,
}

/// Cell-free deployment against its co-located twin (same total antenna
/// count, single AP at the center). Both runs of a trial share the device
/// positions, signatures and activity; the shared draws are verified by
/// digest.
pub fn compare_architectures(
    cfg: &GeometryConfig,
    dcfg: &DetectorConfig,
    n_trials: usize,
    nu_list: &[f64],
) -> Result<ArchitectureComparison, HarnessError> {
    cfg.validate()?;
    dcfg.validate()?;
    let twin = cfg.colocated_twin();
    twin.validate()?;
    let nu = sorted_nu(nu_list)?;
    let pairs = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let cf = simulate_trial(cfg, dcfg, t, &nu)?;
            let co = simulate_trial(&twin, dcfg, t, &nu)?;
            if cf.draw_digest != co.draw_digest {
                return Err(HarnessError::CrnMismatch { trial: t });
            }
            Ok((cf, co))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let (cf, co): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(ArchitectureComparison {
        cell_free: aggregate(&nu, cf),
        colocated: aggregate(&nu, co),
    })
}

/// Received-SNR statistic for the cell-free architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrStatistic {
    /// `rho_max max_m beta_mk / sigma^2`.
    #[default]
    DominantAp,
    /// `rho_max sum_m beta_mk / sigma^2`.
    SumOverAps,
}

/// Single-antenna received SNRs (dB) at full power for one cell size.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSurvey {
    pub cell_side: f64,
    pub cell_free_db: Vec<f64>,
    pub colocated_db: Vec<f64>,
}

/// Linearly interpolated quantile of unsorted samples.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

impl SnrSurvey {
    pub fn median_gap_db(&self) -> f64 {
        quantile(&self.cell_free_db, 0.5) - quantile(&self.colocated_db, 0.5)
    }
}

/// Per-device full-power SNR samples for each cell side, cell-free and
/// co-located. Trial `t` of every side uses the same seeds, so the layouts
/// are scaled copies of one another.
pub fn snr_survey(
    cfg: &GeometryConfig,
    n_trials: usize,
    cell_sides: &[f64],
    statistic: SnrStatistic,
) -> Result<Vec<SnrSurvey>, HarnessError> {
    cfg.validate()?;
    if let Some(bad) = cell_sides.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(ValidationError::new("cell_sides", format!("cell side must be positive, got {bad}")).into());
    }
    let rho_max = cfg.rho_max_mw;
    let sigma2 = cfg.sigma2_mw();
    let to_db = |gain: f64| linear_to_db(rho_max * gain / sigma2);
    Ok(cell_sides
        .iter()
        .map(|&side| {
            let sized = GeometryConfig {
                side_length: side,
                colocated: false,
                ..cfg.clone()
            };
            let twin = sized.colocated_twin();
            let per_trial: Vec<(Vec<f64>, Vec<f64>)> = (0..n_trials as u64)
                .into_par_iter()
                .map(|t| {
                    let seeds = TrialSeeds::new(cfg.seed, t);
                    let cf = build_scenario(&sized, &seeds);
                    let co = build_scenario(&twin, &seeds);
                    let cf_db = (0..cf.n_devices())
                        .map(|k| match statistic {
                            SnrStatistic::DominantAp => to_db(cf.dominant_gain(k)),
                            SnrStatistic::SumOverAps => to_db(cf.beta.iter().map(|row| row[k]).sum()),
                        })
                        .collect();
                    let co_db = co.beta[0].iter().map(|&b| to_db(b)).collect();
                    (cf_db, co_db)
                })
                .collect();
            let (cf, co): (Vec<_>, Vec<_>) = per_trial.into_iter().unzip();
            SnrSurvey {
                cell_side: side,
                cell_free_db: cf.concat(),
                colocated_db: co.concat(),
            }
        })
        .collect())
}

/// Wall time of the detector alone on trial `trial_id`, best of `repeats`.
/// The minimum discards time lost to preemption and other load.
pub fn measure_detector_runtime(
    cfg: &GeometryConfig,
    dcfg: &DetectorConfig,
    trial_id: u64,
    repeats: usize,
) -> Result<f64, HarnessError> {
    let draw = draw_trial(cfg, dcfg, trial_id);
    let dcfg = draw.detector_config(dcfg);
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        run_coordinate_descent(&draw.frames, &draw.scenario, &draw.book, &dcfg)?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// One oracle comparison on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub trial_id: u64,
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(trial_id: u64, name: &'static str, value: f64, tolerance: f64) -> CrossCheck {
    CrossCheck {
        trial_id,
        name,
        value,
        tolerance,
        passed: value <= tolerance,
    }
}

/// Runs the detector on trial `trial_id` and compares it with the dense
/// oracles: maintained inverses, tracked cost, the grid-search minimum,
/// per-coordinate stationarity and dominant-block descent. Meant for toy
/// dimensions; the grid search is exhaustive per coordinate.
pub fn oracle_cross_check(
    cfg: &GeometryConfig,
    dcfg: &DetectorConfig,
    trial_id: u64,
) -> Result<Vec<CrossCheck>, HarnessError> {
    let draw = draw_trial(cfg, dcfg, trial_id);
    let (sc, book, frames) = (&draw.scenario, &draw.book, &draw.frames);
    let run_cfg = DetectorConfig {
        track_cost: true,
        ..draw.detector_config(dcfg)
    };
    let (st, trace) = run_coordinate_descent_traced(frames, sc, book, &run_cfg)?;

    let mut inverse_gap: f64 = 0.0;
    for (m, q_inv) in st.q_inv.iter().enumerate() {
        let dense = dense_inverse(&assemble_covariance(sc, book, &st.gamma_hat, m))?;
        inverse_gap = inverse_gap.max(q_inv.relative_distance(&dense));
    }
    let cost = ml_cost(&st.gamma_hat, frames, sc, book)?.total;
    let tracked = st.tracked_cost(frames).unwrap_or(f64::NAN);
    let grid = grid_search_min(frames, sc, book, &default_grid(sc.sigma2, cfg.rho_max_mw), GRID_ROUNDS)?;
    let not_stationary = stationarity(&st, book, frames, sc)
        .iter()
        .filter(|s| !s.holds(1e-3))
        .count();

    Ok(vec![
        check(trial_id, "inverse_consistency", inverse_gap, 1e-6),
        check(trial_id, "tracked_cost", (tracked - cost).abs() / cost.abs(), 1e-6),
        check(trial_id, "grid_search_gap", (cost - grid.cost) / grid.cost.abs(), 0.01),
        check(trial_id, "stationarity_violations", not_stationary as f64, 0.0),
        check(trial_id, "descent_violations", trace.descent_violations(1e-10) as f64, 0.0),
    ])
}

/// `trial_id,check,value,tolerance,passed`.
pub fn write_cross_checks_csv<W: Write>(mut w: W, checks: &[CrossCheck]) -> std::io::Result<()> {
    writeln!(w, "trial_id,check,value,tolerance,passed")?;
    for c in checks {
        writeln!(w, "{},{},{},{},{}", c.trial_id, c.name, c.value, c.tolerance, c.passed)?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// `trial_id,nu,p_md,p_fa,n_active,elapsed_s`; undefined rates print as `NA`,
/// and so does the time column unless `with_timing` is set.
pub fn write_trials_csv<'a, W: Write>(
    mut w: W,
    metrics: impl IntoIterator<Item = &'a TrialMetrics>,
    with_timing: bool,
) -> std::io::Result<()> {
    writeln!(w, "trial_id,nu,p_md,p_fa,n_active,elapsed_s")?;
    for m in metrics {
        let elapsed = if with_timing { m.elapsed_s.to_string() } else { "NA".to_string() };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.trial_id,
            m.nu,
            opt(m.p_md),
            opt(m.p_fa),
            m.n_active,
            elapsed
        )?;
    }
    Ok(())
}

/// `nu,mean_p_fa,mean_p_md`.
pub fn write_summary_csv<W: Write>(mut w: W, curve: &RocCurve) -> std::io::Result<()> {
    writeln!(w, "nu,mean_p_fa,mean_p_md")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", p.nu, p.mean_p_fa, p.mean_p_md)?;
    }
    Ok(())
}

/// `cell_side_m,architecture,device_id,snr_db`.
pub fn write_snr_csv<W: Write>(mut w: W, surveys: &[SnrSurvey]) -> std::io::Result<()> {
    writeln!(w, "cell_side_m,architecture,device_id,snr_db")?;
    for s in surveys {
        for (arch, samples) in [("cell-free", &s.cell_free_db), ("colocated", &s.colocated_db)] {
            for (id, snr) in samples.iter().enumerate() {
                writeln!(w, "{},{},{},{}", s.cell_side, arch, id, snr)?;
            }
        }
    }
    Ok(())
}

/// `cell_side_m,architecture,n_samples,median_db,p5_db`.
pub fn write_snr_summary_csv<W: Write>(mut w: W, surveys: &[SnrSurvey]) -> std::io::Result<()> {
    writeln!(w, "cell_side_m,architecture,n_samples,median_db,p5_db")?;
    for s in surveys {
        for (arch, samples) in [("cell-free", &s.cell_free_db), ("colocated", &s.colocated_db)] {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.cell_side,
                arch,
                samples.len(),
                quantile(samples, 0.5),
                quantile(samples, 0.05)
            )?;
        }
    }
    Ok(())
}
