//! Uplink signal synthesis: signatures, activity and received blocks.
//!
//! Draw order within a trial is fixed: signatures (column by column),
//! activity (device by device), then for each AP its own stream yields the
//! `K x N` small-scale fading matrix row by row followed by the `L x N`
//! noise matrix row by row. Each quantity has a dedicated stream (see
//! [`crate::seeds`]), so replaying a trial needs only the master seed, the
//! trial id and the scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cgmat::HermitianMatrix;
use crate::scenario::Scenario;
use crate::seeds::{Stream, TrialSeeds};

/// Circularly symmetric complex Gaussian with the given variance.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Signature sequences, one length-`L` column per device.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureBook {
    seq_len: usize,
    columns: Vec<Vec<Complex64>>,
}

impl SignatureBook {
    pub fn from_columns(columns: Vec<Vec<Complex64>>) -> Self {
        let seq_len = columns.first().map_or(0, Vec::len);
        assert!(seq_len > 0, "signature book needs at least one non-empty column");
        assert!(columns.iter().all(|c| c.len() == seq_len), "ragged signature book");
        Self { seq_len, columns }
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn n_devices(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<Complex64>] {
        &self.columns
    }

    pub fn normalize_columns(&mut self) {
        for col in &mut self.columns {
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.iter_mut().for_each(|z| *z /= norm);
            }
        }
    }

    fn hash_into(&self, h: &mut Sha256) {
        for z in self.columns.iter().flatten() {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
    }
}

/// i.i.d. `CN(0, 1)` entries, drawn column by column.
pub fn draw_signatures<R: Rng + ?Sized>(seq_len: usize, n_devices: usize, rng: &mut R) -> SignatureBook {
    assert!(seq_len >= 1 && n_devices >= 1);
    let columns = (0..n_devices)
        .map(|_| (0..seq_len).map(|_| complex_gaussian(rng, 1.0)).collect())
        .collect();
    SignatureBook { seq_len, columns }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityPattern {
    pub active: Vec<bool>,
    /// Sorted indices of active devices.
    pub active_set: Vec<usize>,
}

impl ActivityPattern {
    pub fn from_flags(active: Vec<bool>) -> Self {
        let active_set = active
            .iter()
            .enumerate()
            .filter_map(|(k, &a)| a.then_some(k))
            .collect();
        Self { active, active_set }
    }

    pub fn n_devices(&self) -> usize {
        self.active.len()
    }

    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }
}

/// Independent Bernoulli(`epsilon`) activity per device.
pub fn sample_activity<R: Rng + ?Sized>(n_devices: usize, epsilon: f64, rng: &mut R) -> ActivityPattern {
    assert!((0.0..=1.0).contains(&epsilon), "activation probability out of range");
    ActivityPattern::from_flags((0..n_devices).map(|_| rng.gen_bool(epsilon)).collect())
}

/// SHA-256 over the signature entries and the activity flags of a trial.
pub fn draw_digest(book: &SignatureBook, activity: &ActivityPattern) -> [u8; 32] {
    let mut h = Sha256::new();
    book.hash_into(&mut h);
    h.update(activity.active.iter().map(|&a| a as u8).collect::<Vec<_>>());
    h.finalize().into()
}

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame dump at line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Received blocks `Y_m` (row-major `L x N`) and their sample covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    seq_len: usize,
    n_antennas: usize,
    blocks: Vec<Vec<Complex64>>,
    sample_cov: Vec<HermitianMatrix>,
}

impl FrameSet {
    /// Wraps raw blocks and computes `Y_m Y_m^H / N` for each.
    pub fn from_blocks(seq_len: usize, n_antennas: usize, blocks: Vec<Vec<Complex64>>) -> Self {
        assert!(blocks.iter().all(|b| b.len() == seq_len * n_antennas));
        let sample_cov = blocks
            .iter()
            .map(|y| HermitianMatrix::gram(seq_len, n_antennas, y, n_antennas as f64))
            .collect();
        Self {
            seq_len,
            n_antennas,
            blocks,
            sample_cov,
        }
    }

    /// Builds a frame set straight from sample covariances (no raw blocks).
    pub fn from_sample_covariances(n_antennas: usize, sample_cov: Vec<HermitianMatrix>) -> Self {
        let seq_len = sample_cov[0].order();
        Self {
            seq_len,
            n_antennas,
            blocks: Vec::new(),
            sample_cov,
        }
    }

    pub fn zeros(n_aps: usize, seq_len: usize, n_antennas: usize) -> Self {
        Self::from_blocks(
            seq_len,
            n_antennas,
            vec![vec![Complex64::new(0.0, 0.0); seq_len * n_antennas]; n_aps],
        )
    }

    pub fn n_aps(&self) -> usize {
        self.sample_cov.len()
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn block(&self, m: usize) -> &[Complex64] {
        &self.blocks[m]
    }

    pub fn sample_cov(&self, m: usize) -> &HermitianMatrix {
        &self.sample_cov[m]
    }

    /// Plain-text dump: a `M L N` header line, then for every block `L` rows
    /// of `N` space-separated `re im` pairs. Blank lines separate blocks.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.blocks.len(), self.seq_len, self.n_antennas).unwrap();
        for block in &self.blocks {
            out.push('\n');
            for row in block.chunks(self.n_antennas) {
                let cells: Vec<String> = row.iter().map(|z| format!("{} {}", z.re, z.im)).collect();
                writeln!(out, "{}", cells.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FrameIoError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let bad = |line: usize, reason: &str| FrameIoError::Format {
            line: line + 1,
            reason: reason.to_string(),
        };
        let (hline, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad(hline, "header must be three integers"))?;
        let [m, l, n] = dims[..] else {
            return Err(bad(hline, "header must be three integers"));
        };
        let mut blocks = Vec::with_capacity(m);
        for _ in 0..m {
            let mut block = Vec::with_capacity(l * n);
            for _ in 0..l {
                let (ln, row) = lines.next().ok_or_else(|| bad(text.lines().count(), "truncated dump"))?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(ln, "non-numeric entry"))?;
                if vals.len() != 2 * n {
                    return Err(bad(ln, &format!("expected {} numbers, found {}", 2 * n, vals.len())));
                }
                block.extend(vals.chunks(2).map(|p| Complex64::new(p[0], p[1])));
            }
            blocks.push(block);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing data"));
        }
        Ok(Self::from_blocks(l, n, blocks))
    }

    pub fn write_text(&self, path: &Path) -> Result<(), FrameIoError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Self, FrameIoError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Received blocks `Y_m = S D_a D_rho^{1/2} G_m + W_m` for every AP.
pub fn synthesize_frames(
    sc: &Scenario,
    book: &SignatureBook,
    activity: &ActivityPattern,
    n_antennas: usize,
    seeds: &TrialSeeds,
) -> FrameSet {
    let l = book.seq_len();
    let k_count = book.n_devices();
    assert_eq!(k_count, sc.n_devices());
    assert_eq!(k_count, activity.n_devices());
    let noise_var = sc.sigma2;
    let blocks = (0..sc.n_aps())
        .map(|m| {
            let mut rng = seeds.rng(Stream::Channel(m));
            let fading: Vec<Complex64> = (0..k_count * n_antennas)
                .map(|_| complex_gaussian(&mut rng, 1.0))
                .collect();
            let mut y: Vec<Complex64> = (0..l * n_antennas)
                .map(|_| complex_gaussian(&mut rng, noise_var))
                .collect();
            for &k in &activity.active_set {
                let amp = (sc.rho[k] * sc.beta[m][k]).sqrt();
                let g = &fading[k * n_antennas..(k + 1) * n_antennas];
                for (i, s) in book.column(k).iter().enumerate() {
                    let coef = s * amp;
                    for (yv, h) in y[i * n_antennas..(i + 1) * n_antennas].iter_mut().zip(g) {
                        *yv += coef * h;
                    }
                }
            }
            y
        })
        .collect();
    FrameSet::from_blocks(l, n_antennas, blocks)
}
