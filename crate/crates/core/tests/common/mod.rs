//! Dense reference computations shared by the integration tests. Nothing
//! here calls into the crate's linear algebra.

#![allow(dead_code)]

use cfmimo::{FrameSet, Scenario, SignatureBook};
use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn zero() -> C {
    C::new(0.0, 0.0)
}

pub fn cn<R: Rng>(rng: &mut R) -> C {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C> {
    (0..n).map(|_| cn(rng)).collect()
}

/// `B B^H / n + ridge I` with `B` of size `n x (n + 4)`; row-major.
pub fn random_pd<R: Rng>(rng: &mut R, n: usize, ridge: f64) -> Vec<C> {
    let cols = n + 4;
    let b = random_vector(rng, n * cols);
    let mut a = vec![zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = zero();
            for t in 0..cols {
                acc += b[i * cols + t] * b[j * cols + t].conj();
            }
            a[i * n + j] = acc / n as f64;
        }
        a[i * n + i] += ridge;
    }
    a
}

/// Gauss-Jordan inversion with partial pivoting.
pub fn gj_inverse(n: usize, a: &[C]) -> Option<Vec<C>> {
    let mut m = a.to_vec();
    let mut inv = vec![zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = C::new(1.0, 0.0);
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x * n + col].norm().total_cmp(&m[y * n + col].norm()))?;
        if m[pivot * n + col].norm() == 0.0 {
            return None;
        }
        for j in 0..n {
            m.swap(col * n + j, pivot * n + j);
            inv.swap(col * n + j, pivot * n + j);
        }
        let p = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != zero() {
                    for j in 0..n {
                        let (mv, iv) = (m[col * n + j], inv[col * n + j]);
                        m[r * n + j] -= f * mv;
                        inv[r * n + j] -= f * iv;
                    }
                }
            }
        }
    }
    Some(inv)
}

/// `log |det A|` by LU with partial pivoting.
pub fn lu_log_abs_det(n: usize, a: &[C]) -> f64 {
    let mut m = a.to_vec();
    let mut total = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x * n + col].norm().total_cmp(&m[y * n + col].norm()))
            .unwrap();
        for j in 0..n {
            m.swap(col * n + j, pivot * n + j);
        }
        let p = m[col * n + col];
        total += p.norm().ln();
        for r in (col + 1)..n {
            let f = m[r * n + col] / p;
            for j in col..n {
                let v = m[col * n + j];
                m[r * n + j] -= f * v;
            }
        }
    }
    total
}

pub fn matvec(n: usize, a: &[C], x: &[C]) -> Vec<C> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

pub fn dot_h(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn rel_frob(a: &[C], b: &[C]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let base: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (diff / base).sqrt()
}

/// `sigma^2 I + sum_k gamma_k beta_mk s_k s_k^H`, row-major.
pub fn covariance(sc: &Scenario, book: &SignatureBook, gamma: &[f64], m: usize) -> Vec<C> {
    let n = book.seq_len();
    let mut q = vec![zero(); n * n];
    for i in 0..n {
        q[i * n + i] = C::new(sc.sigma2, 0.0);
    }
    for (k, &g) in gamma.iter().enumerate() {
        let c = g * sc.beta[m][k];
        if c == 0.0 {
            continue;
        }
        let s = book.column(k);
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] += s[i] * s[j].conj() * c;
            }
        }
    }
    q
}

/// `log|Q| + tr(Q^{-1} Q_Y)` summed over access points.
pub fn ml_cost(sc: &Scenario, book: &SignatureBook, frames: &FrameSet, gamma: &[f64]) -> f64 {
    let n = book.seq_len();
    (0..sc.n_aps())
        .map(|m| {
            let q = covariance(sc, book, gamma, m);
            let inv = gj_inverse(n, &q).expect("covariance is invertible");
            let qy = frames.sample_cov(m).as_slice();
            let tr: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (inv[i * n + j] * qy[j * n + i]).re)
                .sum();
            lu_log_abs_det(n, &q) + tr
        })
        .sum()
}

/// Unconstrained optimal step of device `k` on its dominant block at `gamma`.
pub fn dominant_step(sc: &Scenario, book: &SignatureBook, frames: &FrameSet, gamma: &[f64], k: usize) -> f64 {
    let n = book.seq_len();
    let mp = (0..sc.n_aps())
        .fold(0, |best, m| if sc.beta[m][k] > sc.beta[best][k] { m } else { best });
    let inv = gj_inverse(n, &covariance(sc, book, gamma, mp)).expect("covariance is invertible");
    let s = book.column(k);
    let v = matvec(n, &inv, s);
    let alpha = dot_h(s, &v).re;
    let mu = dot_h(&v, &matvec(n, frames.sample_cov(mp).as_slice(), &v)).re;
    let beta = sc.beta[mp][k];
    (mu - alpha) / (beta * alpha * alpha)
}
