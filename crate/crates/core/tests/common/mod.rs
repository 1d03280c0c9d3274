//! Slow reference implementations used only by the tests. Nothing here calls
//! into the library beyond its plain data types.
#![allow(dead_code)]

use std::f64::consts::PI;

use fig_core::data::{DistanceMatrix, Method};
use fig_core::fpca::Normalization;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n × d` matrix of uniform draws in `[-1, 1)`.
pub fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(n, d, |_, _| r.random::<f64>() * 2.0 - 1.0)
}

/// Random walk, so neighboring rows are correlated like real time series.
pub fn random_walk(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let steps = random_matrix(n, d, seed);
    let mut out = DMatrix::zeros(n, d);
    for c in 0..d {
        let mut acc = 0.0;
        for t in 0..n {
            acc += 0.3 * steps[(t, c)];
            out[(t, c)] = acc;
        }
    }
    out
}

/// Random symmetric positive-definite matrix with smallest eigenvalue at
/// least `floor`.
pub fn random_spd(m: usize, floor: f64, seed: u64) -> DMatrix<f64> {
    let a = random_matrix(m, m, seed);
    let mut s = &a * a.transpose();
    for i in 0..m {
        s[(i, i)] += floor;
    }
    s
}

/// Scalar Fourier functions on `[0, 1]`: `1, √2 cos 2πu, √2 sin 2πu, √2 cos 4πu, …`.
pub fn fourier(u: f64, b: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(b);
    for a in 0..b {
        if a == 0 {
            out.push(1.0);
        } else {
            let freq = ((a + 1) / 2) as f64;
            let angle = 2.0 * PI * freq * u;
            out.push(if a % 2 == 1 { 2f64.sqrt() * angle.cos() } else { 2f64.sqrt() * angle.sin() });
        }
    }
    out
}

/// Composite Simpson quadrature of `φ_a φ_b` over `[0, 1]`.
pub fn oracle_quadrature_gram(b: usize) -> DMatrix<f64> {
    assert!(b <= 15);
    let intervals = 10_000;
    let h = 1.0 / intervals as f64;
    let mut w = DMatrix::zeros(b, b);
    for k in 0..=intervals {
        let coef = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let phi = fourier(k as f64 * h, b);
        for a in 0..b {
            for c in 0..b {
                w[(a, c)] += coef * phi[a] * phi[c];
            }
        }
    }
    w * (h / 3.0)
}

/// Gauss-Jordan inverse with partial pivoting; `None` when singular.
pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::identity(n, n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[(x, col)].abs().total_cmp(&m[(y, col)].abs()))?;
        if m[(pivot, col)].abs() < 1e-300 {
            return None;
        }
        m.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = m[(col, col)];
        for c in 0..n {
            m[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[(r, col)];
                if f != 0.0 {
                    for c in 0..n {
                        m[(r, c)] -= f * m[(col, c)];
                        inv[(r, c)] -= f * inv[(col, c)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// `[(u − v)ᵀ(C_u⁻¹ + C_v⁻¹)(u − v)]^{1/2}` with explicit inverses.
pub fn oracle_direct_mahalanobis(u: &[f64], v: &[f64], cu: &DMatrix<f64>, cv: &DMatrix<f64>) -> Option<f64> {
    let q = gauss_jordan_inverse(cu)? + gauss_jordan_inverse(cv)?;
    let n = u.len();
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            total += (u[a] - v[a]) * q[(a, b)] * (u[b] - v[b]);
        }
    }
    Some(total.max(0.0).sqrt())
}

/// Cyclic Jacobi eigen-solver for symmetric matrices. Returns eigenvalues
/// and eigenvectors (as columns) in no particular order.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut total = 0.0;
        for p in 0..n {
            for q in 0..n {
                total += m[(p, q)] * m[(p, q)];
                if p != q {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
        }
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Centered window bounds `[i − ⌊L/2⌋, i + ⌈L/2⌉ − 1]` clipped to the series.
pub fn window(i: usize, n: usize, l: usize) -> (usize, usize) {
    let lo = i as i64 - (l / 2) as i64;
    let hi = i as i64 + l.div_ceil(2) as i64 - 1;
    (lo.max(0) as usize, hi.min(n as i64 - 1) as usize)
}

pub struct NaiveConfig {
    pub b: usize,
    pub l1: usize,
    pub l2: usize,
    pub normalization: Normalization,
}

/// Straight-line FIG: rescale, basis, `L₁` averages, `L₂` covariances with
/// ridge, full eigen-decomposition, normalized scores, two-sided distance.
pub fn oracle_naive_pipeline(x: &DMatrix<f64>, cfg: &NaiveConfig) -> DistanceMatrix {
    let (n, d) = x.shape();
    let m = cfg.b * d;

    let mut bounds = Vec::new();
    for c in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in 0..n {
            lo = lo.min(x[(t, c)]);
            hi = hi.max(x[(t, c)]);
        }
        if hi - lo == 0.0 {
            bounds.push((lo - 0.5, hi + 0.5));
        } else {
            let pad = 1e-9 * (hi - lo + 1.0);
            bounds.push((lo - pad, hi + pad));
        }
    }

    let mut phi = vec![vec![0.0; m]; n];
    for t in 0..n {
        for c in 0..d {
            let (lo, hi) = bounds[c];
            let u = ((x[(t, c)] - lo) / (hi - lo)).clamp(0.0, 1.0);
            let vals = fourier(u, cfg.b);
            for a in 0..cfg.b {
                phi[t][c * cfg.b + a] = vals[a];
            }
        }
    }

    let mut feats = vec![vec![0.0; m]; n];
    for i in 0..n {
        let (lo, hi) = window(i, n, cfg.l1);
        for j in lo..=hi {
            for a in 0..m {
                feats[i][a] += phi[j][a];
            }
        }
        let count = (hi - lo + 1) as f64;
        for a in 0..m {
            feats[i][a] /= count;
        }
    }

    // per index: eigenvalues and eigenvectors of the ridged covariance
    let mut models = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = window(i, n, cfg.l2);
        let count = (hi - lo + 1) as f64;
        let mut mean = vec![0.0; m];
        for j in lo..=hi {
            for a in 0..m {
                mean[a] += feats[j][a] / count;
            }
        }
        let mut cov = DMatrix::zeros(m, m);
        for j in lo..=hi {
            for a in 0..m {
                for b in 0..m {
                    cov[(a, b)] += (feats[j][a] - mean[a]) * (feats[j][b] - mean[b]) / count;
                }
            }
        }
        let trace: f64 = (0..m).map(|a| cov[(a, a)]).sum();
        for a in 0..m {
            cov[(a, a)] += 1e-10 * trace / m as f64;
        }
        let (vals, vecs) = jacobi_eigen(&cov);
        let vals: Vec<f64> = vals.into_iter().map(|v| if v < 0.0 && v >= -1e-8 { 0.0 } else { v }).collect();
        models.push((vals, vecs));
    }

    let omega = |model: &(Vec<f64>, DMatrix<f64>), a: &[f64], k: usize| -> f64 {
        let (vals, vecs) = model;
        let s: f64 = (0..m).map(|c| a[c] * vecs[(c, k)]).sum();
        match cfg.normalization {
            Normalization::Exp => s / vals[k].exp(),
            Normalization::InvSqrt => {
                if vals[k] > 1e-12 {
                    s / vals[k].sqrt()
                } else {
                    0.0
                }
            }
        }
    };

    let mut dm = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut total = 0.0;
            for k in 0..m {
                // the local mean cancels in each difference of scores
                let wi = omega(&models[i], &feats[i], k) - omega(&models[i], &feats[j], k);
                let wj = omega(&models[j], &feats[i], k) - omega(&models[j], &feats[j], k);
                total += wi * wi + wj * wj;
            }
            dm[(i, j)] = total.sqrt();
            dm[(j, i)] = total.sqrt();
        }
    }
    DistanceMatrix::from_matrix(&dm, Method::Fig).unwrap()
}

/// Pearson correlation of two equal-length vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn upper(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Orthogonal Procrustes residual `min_R ‖A R − B‖_F` after centering both.
pub fn procrustes_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for j in 0..m.ncols() {
            let mean = m.column(j).mean();
            c.column_mut(j).add_scalar_mut(-mean);
        }
        c
    };
    let (a, b) = (center(a), center(b));
    let svd = (a.transpose() * &b).svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    (a * r - b).norm()
}
