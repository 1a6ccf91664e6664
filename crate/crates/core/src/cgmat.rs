//! Dense complex linear algebra for Hermitian positive-definite matrices.
//!
//! The detector keeps one inverse covariance per access point and touches it
//! only through rank-one updates, so the kernel is built around three
//! primitives: the Sherman-Morrison inverse update, the matching
//! log-determinant update, and the quadratic forms `s^H A s` and
//! `s^H A B A s`. A Cholesky factorization backs the dense paths
//! (re-factorization and the brute-force oracle).

use num_complex::Complex64;
use thiserror::Error;

/// Smallest admissible Sherman-Morrison denominator `1 + c s^H A s`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

pub type ComplexVector = Vec<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("rank-one denominator {0:e} is at or below the floor {DENOMINATOR_FLOOR:e}")]
    DenominatorNonPositive(f64),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Square complex matrix kept Hermitian, stored dense in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    order: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(order: usize) -> Self {
        assert!(order > 0, "matrix order must be positive");
        Self {
            order,
            data: vec![Complex64::new(0.0, 0.0); order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::scaled_identity(order, 1.0)
    }

    pub fn scaled_identity(order: usize, value: f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.data[i * order + i] = Complex64::new(value, 0.0);
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries and symmetrizes it.
    pub fn from_row_major(order: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != order * order {
            return Err(LinalgError::DimensionMismatch {
                expected: order * order,
                found: data.len(),
            });
        }
        let mut m = Self { order, data };
        m.symmetrize();
        Ok(m)
    }

    /// `B B^H / scale` for a row-major `order x cols` matrix `B`.
    pub fn gram(order: usize, cols: usize, b: &[Complex64], scale: f64) -> Self {
        assert_eq!(b.len(), order * cols);
        let mut m = Self::zeros(order);
        for i in 0..order {
            let ri = &b[i * cols..(i + 1) * cols];
            for j in i..order {
                let rj = &b[j * cols..(j + 1) * cols];
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, y) in ri.iter().zip(rj) {
                    acc += x * y.conj();
                }
                acc /= scale;
                m.data[i * order + j] = acc;
                m.data[j * order + i] = acc.conj();
            }
            m.data[i * order + i].im = 0.0;
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.order + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.order);
        debug_assert_eq!(out.len(), self.order);
        for (row, o) in self.data.chunks_exact(self.order).zip(out.iter_mut()) {
            *o = dot(row, x);
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> ComplexVector {
        let mut out = vec![Complex64::new(0.0, 0.0); self.order];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `self += c * s s^H`.
    pub fn add_rank_one(&mut self, c: f64, s: &[Complex64]) {
        self.hermitian_rank_one(c, s);
    }

    /// `self += c * u u^H`. Entry `(j, i)` gets `c * (u_j conj(u_i))`, which is
    /// bitwise the conjugate of entry `(i, j)`'s increment, so an exactly
    /// Hermitian matrix stays exactly Hermitian.
    fn hermitian_rank_one(&mut self, c: f64, u: &[Complex64]) {
        let n = self.order;
        for (i, row) in self.data.chunks_exact_mut(n).enumerate() {
            let ui = u[i];
            for (a, uj) in row.iter_mut().zip(u) {
                *a += (ui * uj.conj()) * c;
            }
            row[i].im = 0.0;
        }
    }

    pub fn add_scaled_identity(&mut self, value: f64) {
        for i in 0..self.order {
            self.data[i * self.order + i].re += value;
        }
    }

    /// `A <- (A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.order;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.order;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.order, other.order);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `||self - other||_F / ||other||_F`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        self.frobenius_distance(other) / other.frobenius_norm()
    }

    /// `trace(self * other)` for two Hermitian matrices (always real).
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.order, other.order);
        // tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i).re).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        Cholesky::factor(self)
    }
}

/// Lower-triangular factor `L` with `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    order: usize,
    lower: Vec<Complex64>,
}

impl Cholesky {
    pub fn factor(a: &HermitianMatrix) -> Result<Self, LinalgError> {
        let n = a.order;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = a.get(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut acc = a.get(i, j);
                for k in 0..j {
                    acc -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = acc / ljj;
            }
        }
        Ok(Self { order: n, lower: l })
    }

    pub fn log_det(&self) -> f64 {
        (0..self.order)
            .map(|i| 2.0 * self.lower[i * self.order + i].re.ln())
            .sum()
    }

    pub fn inverse(&self) -> HermitianMatrix {
        let n = self.order;
        let l = &self.lower;
        // W = L^{-1}, lower triangular
        let mut w = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            w[j * n + j] = Complex64::new(1.0 / l[j * n + j].re, 0.0);
            for i in (j + 1)..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in j..i {
                    acc += l[i * n + k] * w[k * n + j];
                }
                w[i * n + j] = -acc / l[i * n + i].re;
            }
        }
        // A^{-1} = W^H W
        let mut inv = HermitianMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in j..n {
                    acc += w[k * n + i].conj() * w[k * n + j];
                }
                inv.data[i * n + j] = acc;
                inv.data[j * n + i] = acc.conj();
            }
        }
        inv.symmetrize();
        inv
    }
}

/// Inverse of a Hermitian positive-definite matrix through its Cholesky factor.
pub fn dense_inverse(q: &HermitianMatrix) -> Result<HermitianMatrix, LinalgError> {
    Ok(q.cholesky()?.inverse())
}

pub fn dense_log_det(q: &HermitianMatrix) -> Result<f64, LinalgError> {
    Ok(q.cholesky()?.log_det())
}

/// `sum_i a_i b_i` with four independent partial sums.
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    let (a4, a_rest) = a.split_at(a.len() / 4 * 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (ca, cb) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for t in 0..4 {
            acc[t] += ca[t] * cb[t];
        }
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a_rest.iter().zip(b_rest) {
        total += x * y;
    }
    total
}

#[inline]
fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // a^H b
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// `s^H A s`, real part.
pub fn quad_form(q_inv: &HermitianMatrix, s: &[Complex64]) -> f64 {
    let u = q_inv.mul_vec(s);
    dot_conj(s, &u).re
}

/// `s^H A B A s` evaluated as `v^H B v` with `v = A s`.
pub fn sandwich_form(q_inv: &HermitianMatrix, q_y: &HermitianMatrix, s: &[Complex64]) -> f64 {
    let v = q_inv.mul_vec(s);
    let w = q_y.mul_vec(&v);
    dot_conj(&v, &w).re
}

/// Both `s^H A s` and `s^H A B A s` sharing one product `v = A s`.
///
/// `v` and `w` are caller-owned scratch buffers of length `order`.
pub fn quad_and_sandwich(
    q_inv: &HermitianMatrix,
    q_y: &HermitianMatrix,
    s: &[Complex64],
    v: &mut [Complex64],
    w: &mut [Complex64],
) -> (f64, f64) {
    q_inv.mul_vec_into(s, v);
    q_y.mul_vec_into(v, w);
    (dot_conj(s, v).re, dot_conj(v, w).re)
}

/// A rank-one update `A^{-1} -> (A + c s s^H)^{-1}` whose denominator has
/// already been checked; apply it with [`PreparedUpdate::apply`].
#[derive(Debug, Clone)]
pub struct PreparedUpdate {
    u: ComplexVector,
    coeff: f64,
    denominator: f64,
}

impl PreparedUpdate {
    pub fn new(q_inv: &HermitianMatrix, s: &[Complex64], c: f64) -> Result<Self, LinalgError> {
        if s.len() != q_inv.order {
            return Err(LinalgError::DimensionMismatch {
                expected: q_inv.order,
                found: s.len(),
            });
        }
        let u = q_inv.mul_vec(s);
        let denominator = 1.0 + c * dot_conj(s, &u).re;
        if !(denominator > DENOMINATOR_FLOOR) {
            return Err(LinalgError::DenominatorNonPositive(denominator));
        }
        Ok(Self {
            u,
            coeff: c / denominator,
            denominator,
        })
    }

    /// `1 + c s^H A^{-1} s`.
    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    pub fn apply(&self, q_inv: &mut HermitianMatrix) {
        if self.coeff == 0.0 {
            return;
        }
        q_inv.hermitian_rank_one(-self.coeff, &self.u);
    }
}

/// Sherman-Morrison: `(Q + c s s^H)^{-1}` from `Q^{-1}`.
pub fn rank_one_inverse_update(
    q_inv: &HermitianMatrix,
    s: &[Complex64],
    c: f64,
) -> Result<HermitianMatrix, LinalgError> {
    let mut out = q_inv.clone();
    PreparedUpdate::new(q_inv, s, c)?.apply(&mut out);
    Ok(out)
}

/// `log|Q + c s s^H| = log|Q| + log(1 + c s^H Q^{-1} s)`.
pub fn log_det_rank_one_update(
    log_det_q: f64,
    q_inv: &HermitianMatrix,
    s: &[Complex64],
    c: f64,
) -> Result<f64, LinalgError> {
    let x = c * quad_form(q_inv, s);
    let denominator = 1.0 + x;
    if !(denominator > DENOMINATOR_FLOOR) {
        return Err(LinalgError::DenominatorNonPositive(denominator));
    }
    Ok(log_det_q + x.ln_1p())
}
