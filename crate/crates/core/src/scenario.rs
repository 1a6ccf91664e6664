//! Network geometry, large-scale fading and transmit powers.
//!
//! Access points and devices live on a square torus; distances wrap around
//! the edges. Large-scale fading follows a three-slope path-loss law with
//! log-normal shadowing on the far slope. All powers are linear mW
//! internally; dB and dBm appear only in [`GeometryConfig`].

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds::{Stream, TrialSeeds};

/// Share of devices that must reach the SNR target under [`PowerPolicy::Auto95`], in percent.
pub const AUTO_TARGET_COVERAGE_PERCENT: usize = 95;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid value for `{field}`: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario file: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// How device transmit powers are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerPolicy {
    /// Target SNR set to the 5th percentile of the full-power dominant-AP SNR.
    Auto95,
    /// Fixed received-SNR target, dB.
    TargetDb(f64),
    /// Every device transmits at the maximum power.
    Full,
}

impl fmt::Display for PowerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerPolicy::Auto95 => f.write_str("auto95"),
            PowerPolicy::Full => f.write_str("full"),
            PowerPolicy::TargetDb(db) => write!(f, "{db} dB"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PowerPolicyRepr {
    Named(String),
    Db(f64),
}

impl Serialize for PowerPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            PowerPolicy::Auto95 => PowerPolicyRepr::Named("auto95".into()),
            PowerPolicy::Full => PowerPolicyRepr::Named("full".into()),
            PowerPolicy::TargetDb(db) => PowerPolicyRepr::Db(db),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PowerPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match PowerPolicyRepr::deserialize(deserializer)? {
            PowerPolicyRepr::Db(db) => Ok(PowerPolicy::TargetDb(db)),
            PowerPolicyRepr::Named(s) => match s.as_str() {
                "auto95" => Ok(PowerPolicy::Auto95),
                "full" => Ok(PowerPolicy::Full),
                other => other.parse::<f64>().map(PowerPolicy::TargetDb).map_err(|_| {
                    serde::de::Error::custom(format!(
                        "expected \"auto95\", \"full\" or a dB value, found {other:?}"
                    ))
                }),
            },
        }
    }
}

/// Deployment and signal-model parameters. Defaults are the 1 km² reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Side of the square area, meters.
    pub side_length: f64,
    #[serde(rename = "M")]
    pub n_aps: usize,
    /// Antennas per access point.
    #[serde(rename = "N")]
    pub n_antennas: usize,
    #[serde(rename = "K")]
    pub n_devices: usize,
    /// Activation probability.
    pub epsilon: f64,
    /// Signature length.
    #[serde(rename = "L")]
    pub seq_len: usize,
    pub rho_max_mw: f64,
    pub sigma2_dbm: f64,
    pub shadow_sigma_db: f64,
    pub snr_target: PowerPolicy,
    pub seed: u64,
    /// Single access point at the center of the area.
    pub colocated: bool,
    /// Antenna count of the co-located twin; `M * N` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colocated_antennas: Option<usize>,
    /// Scale every signature to unit norm (off: plain CN(0, I) draws).
    pub unit_norm_signatures: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            side_length: 1000.0,
            n_aps: 20,
            n_antennas: 2,
            n_devices: 400,
            epsilon: 0.1,
            seq_len: 40,
            rho_max_mw: 200.0,
            sigma2_dbm: -109.0,
            shadow_sigma_db: 8.0,
            snr_target: PowerPolicy::Auto95,
            seed: 1,
            colocated: false,
            colocated_antennas: None,
            unit_norm_signatures: false,
        }
    }
}

impl GeometryConfig {
    pub fn sigma2_mw(&self) -> f64 {
        db_to_linear(self.sigma2_dbm)
    }

    /// The same deployment with every antenna moved to one central AP.
    pub fn colocated_twin(&self) -> Self {
        let total = self
            .colocated_antennas
            .unwrap_or(self.n_aps * self.n_antennas);
        Self {
            n_aps: 1,
            n_antennas: total,
            colocated: true,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ValidationError::new(field, format!("must be a positive number, got {v}")))
            }
        };
        let count = |field: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(ValidationError::new(field, "must be at least 1"))
            }
        };
        positive("geometry.side_length", self.side_length)?;
        count("geometry.M", self.n_aps)?;
        count("geometry.N", self.n_antennas)?;
        count("geometry.K", self.n_devices)?;
        count("geometry.L", self.seq_len)?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ValidationError::new(
                "geometry.epsilon",
                format!("must lie in [0, 1], got {}", self.epsilon),
            ));
        }
        positive("geometry.rho_max_mw", self.rho_max_mw)?;
        if !self.sigma2_dbm.is_finite() {
            return Err(ValidationError::new("geometry.sigma2_dbm", "must be finite"));
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(ValidationError::new(
                "geometry.shadow_sigma_db",
                "must be a non-negative number",
            ));
        }
        if let PowerPolicy::TargetDb(db) = self.snr_target {
            if !db.is_finite() {
                return Err(ValidationError::new("geometry.snr_target", "must be finite"));
            }
        }
        if self.colocated && self.n_aps != 1 {
            return Err(ValidationError::new(
                "geometry.M",
                "a co-located deployment has exactly one AP",
            ));
        }
        if let Some(n) = self.colocated_antennas {
            count("geometry.colocated_antennas", n)?;
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A drawn deployment: positions, gains, powers and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub side_length: f64,
    pub ap_positions: Vec<Point>,
    pub device_positions: Vec<Point>,
    /// Linear large-scale fading, `beta[m][k]`.
    pub beta: Vec<Vec<f64>>,
    /// Shadowing draws in dB, `shadow_db[m][k]`.
    pub shadow_db: Vec<Vec<f64>>,
    /// Transmit powers, mW.
    pub rho: Vec<f64>,
    /// Noise power, mW.
    pub sigma2: f64,
    pub colocated: bool,
    pub seed: u64,
    pub trial: u64,
}

impl Scenario {
    pub fn n_aps(&self) -> usize {
        self.beta.len()
    }

    pub fn n_devices(&self) -> usize {
        self.rho.len()
    }

    /// Strongest AP for device `k`; ties go to the lowest index.
    pub fn dominant_ap(&self, k: usize) -> usize {
        let mut best = 0;
        for m in 1..self.n_aps() {
            if self.beta[m][k] > self.beta[best][k] {
                best = m;
            }
        }
        best
    }

    pub fn dominant_gain(&self, k: usize) -> f64 {
        self.beta[self.dominant_ap(k)][k]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioIoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ScenarioIoError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, ScenarioIoError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Shortest distance between two points of the `side x side` torus.
///
/// Equal to the minimum over the nine copies of `q` shifted by `0, ±side`
/// per axis; the per-axis form keeps the result exactly symmetric.
pub fn torus_distance(p: Point, q: Point, side: f64) -> f64 {
    let wrap = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(side - d)
    };
    wrap(p.x, q.x).hypot(wrap(p.y, q.y))
}

/// Three-slope large-scale gain in dB; shadowing enters the far slope only.
pub fn path_loss_db(d: f64, shadow_db: f64) -> f64 {
    if d < 10.0 {
        -81.2
    } else if d < 50.0 {
        -61.2 - 20.0 * d.log10()
    } else {
        -35.7 - 35.0 * d.log10() + shadow_db
    }
}

/// Draws a deployment for one trial.
///
/// Positions are uniform on the square and shadowing is i.i.d. Gaussian.
/// A co-located deployment, or a cell-free one with a single AP, puts the
/// AP at the center. Device positions and shadowing come from streams that
/// do not depend on the AP layout, so two configurations sharing a seed
/// see the same devices.
pub fn build_scenario(cfg: &GeometryConfig, seeds: &TrialSeeds) -> Scenario {
    let side = cfg.side_length;
    let center = Point::new(side / 2.0, side / 2.0);
    let ap_positions = if cfg.colocated || cfg.n_aps == 1 {
        vec![center; cfg.n_aps.max(1)]
    } else {
        let mut rng = seeds.rng(Stream::ApPositions);
        (0..cfg.n_aps)
            .map(|_| Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side))
            .collect()
    };
    let device_positions: Vec<Point> = {
        let mut rng = seeds.rng(Stream::DevicePositions);
        (0..cfg.n_devices)
            .map(|_| Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side))
            .collect()
    };

    let m_count = ap_positions.len();
    let shadow_db: Vec<Vec<f64>> = if cfg.shadow_sigma_db > 0.0 {
        let mut rng = seeds.rng(Stream::Shadowing);
        let normal = Normal::new(0.0, cfg.shadow_sigma_db).expect("finite shadow std");
        (0..m_count)
            .map(|_| (0..cfg.n_devices).map(|_| normal.sample(&mut rng)).collect())
            .collect()
    } else {
        vec![vec![0.0; cfg.n_devices]; m_count]
    };

    let beta: Vec<Vec<f64>> = ap_positions
        .iter()
        .zip(&shadow_db)
        .map(|(&ap, shadows)| {
            device_positions
                .iter()
                .zip(shadows)
                .map(|(&dev, &f)| db_to_linear(path_loss_db(torus_distance(ap, dev, side), f)))
                .collect()
        })
        .collect();

    let sigma2 = cfg.sigma2_mw();
    let rho = assign_powers(&beta, sigma2, cfg.rho_max_mw, cfg.snr_target);
    Scenario {
        side_length: side,
        ap_positions,
        device_positions,
        beta,
        shadow_db,
        rho,
        sigma2,
        colocated: cfg.colocated,
        seed: seeds.master,
        trial: seeds.trial,
    }
}

/// Dominant-AP gain `max_m beta[m][k]` for every device.
pub fn dominant_gains(beta: &[Vec<f64>]) -> Vec<f64> {
    let k_count = beta.first().map_or(0, Vec::len);
    (0..k_count)
        .map(|k| beta.iter().map(|row| row[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// SNR target (linear) of the auto policy: the `ceil(5% K)`-th smallest full-power SNR.
pub fn auto_snr_target(full_power_snr: &[f64]) -> f64 {
    let mut sorted = full_power_snr.to_vec();
    sorted.sort_by(f64::total_cmp);
    let miss = 100 - AUTO_TARGET_COVERAGE_PERCENT;
    let rank = (miss * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Transmit powers under `policy`, with dominant gain `b_k = max_m beta[m][k]`.
///
/// Power-controlled devices land exactly on the target received SNR; a
/// device whose full-power SNR does not exceed the target transmits at
/// `rho_max`.
pub fn assign_powers(beta: &[Vec<f64>], sigma2: f64, rho_max: f64, policy: PowerPolicy) -> Vec<f64> {
    let gains = dominant_gains(beta);
    let full_snr: Vec<f64> = gains.iter().map(|b| rho_max * b / sigma2).collect();
    let target = match policy {
        PowerPolicy::Full => return vec![rho_max; gains.len()],
        PowerPolicy::TargetDb(db) => db_to_linear(db),
        PowerPolicy::Auto95 => auto_snr_target(&full_snr),
    };
    gains
        .iter()
        .zip(&full_snr)
        .map(|(&b, &snr)| {
            if snr <= target {
                rho_max
            } else {
                target * sigma2 / b
            }
        })
        .collect()
}
