//! Histogram-based Mahalanobis baseline.
//!
//! Each index gets per-dimension histograms of the samples in its `L₁`
//! window; the distance is `(h_t − h_s)ᵀ (Ĉ_t + Ĉ_s)⁺ (h_t − h_s)` where the
//! `Ĉ` are local covariances of histogram rows over `L₂` windows.
//!
//! Short covariance windows make every `Ĉ_t` low rank, so `Ĉ_t = B_t B_tᵀ`
//! is stored as a thin factor and the pair pseudo-inverse is evaluated on
//! the `(r_t + r_s)`-dimensional Gram matrix of `[B_t B_s]` whenever that is
//! smaller than the histogram dimension.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::fit_domain;
use crate::data::{DistanceMatrix, Method, TimeSeries};
use crate::error::{invalid_config, invalid_data, Result};
use crate::features::{window_indices, WindowSpec};
use crate::fpca::{centered_window, ridge_for_trace};
use crate::linalg::sym_eigen;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Gram eigenvalues at or below this fraction of the largest are rank noise.
const RANK_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DigParams {
    pub bins: usize,
    pub l1: usize,
    pub l2: usize,
    pub stride: usize,
}

impl Default for DigParams {
    fn default() -> Self {
        Self { bins: 20, l1: 10, l2: 10, stride: 1 }
    }
}

/// Concatenated per-dimension probability histograms, one row per index.
#[derive(Clone, Debug)]
pub struct HistogramSet {
    values: DMatrix<f64>,
    bins: usize,
    /// Equal-width bin range per dimension.
    pub edges: Vec<(f64, f64)>,
}

impl HistogramSet {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self { values: self.values.select_rows(rows.iter()), bins: self.bins, edges: self.edges.clone() }
    }
}

/// Bin of `v` among `bins` equal-width bins over `[lo, hi]`, clamped.
pub fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let pos = ((v - lo) / (hi - lo) * bins as f64).floor();
    if pos <= 0.0 {
        0
    } else {
        (pos as usize).min(bins - 1)
    }
}

pub fn local_histograms(x: &TimeSeries, l1: WindowSpec, bins: usize) -> Result<HistogramSet> {
    if bins < 2 {
        return Err(invalid_config("histograms need at least two bins"));
    }
    let n = x.len();
    let d = x.dim();
    let edges = fit_domain(x, 1)?.bounds().to_vec();
    let data = x.data();
    let binned: Vec<usize> =
        (0..d).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| bin_index(data[(i, j)], edges[j].0, edges[j].1, bins)).collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let range = window_indices(i, n, l1.length());
            let weight = 1.0 / range.len() as f64;
            let mut row = vec![0.0; bins * d];
            for j in 0..d {
                for t in range.clone() {
                    row[j * bins + binned[j * n + t]] += weight;
                }
            }
            row
        })
        .collect();
    let values = DMatrix::from_fn(n, bins * d, |i, c| rows[i][c]);
    Ok(HistogramSet { values, bins, edges })
}

/// A local covariance stored as `B Bᵀ + ridge·I` with `B` thin.
#[derive(Clone, Debug)]
pub struct HistCovariance {
    factor: DMatrix<f64>,
    /// `Bᵀ B`
    gram: DMatrix<f64>,
    /// When `B = H[start..start + c]ᵀ E`, the pair `(start, E)`. Cross terms
    /// between two such factors then reduce to the row Gram matrix `H Hᵀ`.
    window: Option<(usize, DMatrix<f64>)>,
    pub ridge: f64,
}

impl HistCovariance {
    fn from_factor(factor: DMatrix<f64>, ridge: f64) -> Self {
        let gram = factor.tr_mul(&factor);
        Self { factor, gram, window: None, ridge }
    }

    /// Wraps an explicit positive semi-definite matrix (no extra ridge).
    pub fn from_matrix(c: &DMatrix<f64>) -> Self {
        let eig = sym_eigen(c);
        let top = eig.values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > RANK_EPS * top).collect();
        let mut factor = DMatrix::zeros(c.nrows(), keep.len());
        for (col, &k) in keep.iter().enumerate() {
            factor.set_column(col, &(eig.vectors.column(k) * eig.values[k].sqrt()));
        }
        Self::from_factor(factor, 0.0)
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.factor.nrows();
        &self.factor * self.factor.transpose() + DMatrix::identity(m, m) * self.ridge
    }
}

/// Population covariance of histogram rows in each `L₂` window, with the
/// same ridge convention as the functional local models.
pub fn local_hist_covariances(h: &HistogramSet, l2: WindowSpec) -> Vec<HistCovariance> {
    let m = h.values.ncols();
    (0..h.nrows())
        .into_par_iter()
        .map(|t| {
            let (z, _) = centered_window(&h.values, t, l2);
            let count = z.nrows() as f64;
            let eig = sym_eigen(&((&z * z.transpose()) / count));
            let top = eig.values.iter().copied().fold(0.0, f64::max);
            let trace: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
            let keep: Vec<usize> = (0..z.nrows()).filter(|&k| top > 0.0 && eig.values[k] > RANK_EPS * top).collect();
            let mut factor = DMatrix::zeros(m, keep.len());
            // zᵀv = H_Wᵀ (v − mean(v)·1), so the factor is a combination of raw window rows.
            let mut coef = DMatrix::zeros(z.nrows(), keep.len());
            for (col, &k) in keep.iter().enumerate() {
                let v = eig.vectors.column(k);
                factor.set_column(col, &(z.tr_mul(&v) / count.sqrt()));
                coef.set_column(col, &(v.add_scalar(-v.mean()) / count.sqrt()));
            }
            let mut cov = HistCovariance::from_factor(factor, ridge_for_trace(trace, m));
            cov.window = Some((l2.indices(t, h.nrows()).start, coef));
            cov
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// In-place lower Cholesky factor of a row-major `q×q` matrix.
fn cholesky(a: &mut [f64], q: usize) -> bool {
    for j in 0..q {
        let mut diag = a[j * q + j];
        for k in 0..j {
            diag -= a[j * q + k] * a[j * q + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * q + j] = ljj;
        for i in j + 1..q {
            let mut v = a[i * q + j];
            for k in 0..j {
                v -= a[i * q + k] * a[j * q + k];
            }
            a[i * q + j] = v / ljj;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`].
fn cholesky_solve(l: &[f64], q: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..q {
        for k in 0..i {
            y[i] -= l[i * q + k] * y[k];
        }
        y[i] /= l[i * q + i];
    }
    for i in (0..q).rev() {
        for k in i + 1..q {
            y[i] -= l[k * q + i] * y[k];
        }
        y[i] /= l[i * q + i];
    }
    y
}

/// `trace((L Lᵀ)⁻¹) = ‖L⁻¹‖²_F`.
fn inverse_trace(l: &[f64], q: usize) -> f64 {
    let mut total = 0.0;
    let mut col = vec![0.0; q];
    for e in 0..q {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[e] = 1.0;
        for i in e..q {
            let mut v = col[i];
            for k in e..i {
                v -= l[i * q + k] * col[k];
            }
            col[i] = v / l[i * q + i];
            total += col[i] * col[i];
        }
    }
    total
}

/// Cross Gram `B_tᵀ B_s` and projections `[B_t B_s]ᵀ (h_t − h_s)` read from
/// the row Gram matrix `k = H Hᵀ`.
fn cross_terms_from_rows(
    t: usize,
    s: usize,
    (st, et): (usize, &DMatrix<f64>),
    (ss, es): (usize, &DMatrix<f64>),
    k: &DMatrix<f64>,
) -> (DMatrix<f64>, Vec<f64>) {
    let block = k.view((st, ss), (et.nrows(), es.nrows()));
    let cross = et.tr_mul(&(block * es));
    let diff = |start: usize, len: usize| -> DVector<f64> {
        DVector::from_fn(len, |i, _| k[(start + i, t)] - k[(start + i, s)])
    };
    let mut y = et.tr_mul(&diff(st, et.nrows())).as_slice().to_vec();
    y.extend_from_slice(es.tr_mul(&diff(ss, es.nrows())).as_slice());
    (cross, y)
}

/// Squared distance between rows `t` and `s`. `rows_gram`, when given, is
/// `H Hᵀ` for the histogram rows.
fn pair_quadratic(
    t: usize,
    s: usize,
    h: &HistogramSet,
    covs: &[HistCovariance],
    rows_gram: Option<&DMatrix<f64>>,
) -> f64 {
    if t == s {
        return 0.0;
    }
    let (ct, cs) = (&covs[t], &covs[s]);
    let m = h.values.ncols();
    let eps = ct.ridge + cs.ridge;
    let delta: Vec<f64> = h.values.row(t).iter().zip(h.values.row(s).iter()).map(|(a, b)| a - b).collect();
    let (rt, rs) = (ct.rank(), cs.rank());
    let q = rt + rs;
    if q >= m {
        return dense_quadratic(&(ct.dense() + cs.dense()), &delta);
    }

    // Gram of [B_t B_s] and the projections y = [B_t B_s]ᵀ Δ.
    let mut g = vec![0.0; q * q];
    let mut y = vec![0.0; q];
    let col = |c: usize| -> &[f64] {
        if c < rt {
            &ct.factor.as_slice()[c * m..(c + 1) * m]
        } else {
            &cs.factor.as_slice()[(c - rt) * m..(c - rt + 1) * m]
        }
    };
    let from_rows = match (rows_gram, &ct.window, &cs.window) {
        (Some(k), Some((st, et)), Some((ss, es))) => Some(cross_terms_from_rows(t, s, (*st, et), (*ss, es), k)),
        _ => None,
    };
    match &from_rows {
        Some((_, ky)) => y.copy_from_slice(ky),
        None => (0..q).for_each(|a| y[a] = dot(col(a), &delta)),
    }
    for a in 0..rt {
        for b in 0..rt {
            g[a * q + b] = ct.gram[(a, b)];
        }
    }
    for a in 0..rs {
        for b in 0..rs {
            g[(rt + a) * q + rt + b] = cs.gram[(a, b)];
        }
    }
    for a in 0..rt {
        for b in 0..rs {
            let v = match &from_rows {
                Some((cross, _)) => cross[(a, b)],
                None => dot(col(a), col(rt + b)),
            };
            g[a * q + rt + b] = v;
            g[(rt + b) * q + a] = v;
        }
    }
    let delta_sq = || delta.iter().map(|v| v * v).sum::<f64>();
    if q == 0 {
        return if eps > 0.0 { delta_sq() / eps } else { 0.0 };
    }

    let trace: f64 = (0..q).map(|a| g[a * q + a]).sum();
    let mut l = g.clone();
    if cholesky(&mut l, q) {
        let min_lower = 1.0 / inverse_trace(&l, q);
        let range_kept = min_lower + eps > PINV_CUTOFF * (trace + eps);
        let complement_dropped = eps <= PINV_CUTOFF * (trace / q as f64 + eps);
        let complement_kept = eps > PINV_CUTOFF * (trace + eps);
        if range_kept && (complement_dropped || complement_kept) {
            let w = cholesky_solve(&l, q, &y);
            let u = if eps > 0.0 {
                let mut shifted = g.clone();
                (0..q).for_each(|a| shifted[a * q + a] += eps);
                if !cholesky(&mut shifted, q) {
                    return gram_eigen_quadratic(&g, q, &y, eps, delta_sq);
                }
                cholesky_solve(&shifted, q, &y)
            } else {
                w.clone()
            };
            let mut quad: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
            if complement_kept {
                let projected: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
                quad += (delta_sq() - projected).max(0.0) / eps;
            }
            return quad;
        }
    }
    gram_eigen_quadratic(&g, q, &y, eps, delta_sq)
}

fn gram_eigen_quadratic(g: &[f64], q: usize, y: &[f64], eps: f64, delta_sq: impl Fn() -> f64) -> f64 {
    let gm = DMatrix::from_row_slice(q, q, g);
    let eig = sym_eigen(&gm);
    let top = eig.values[0].max(0.0);
    let cutoff = PINV_CUTOFF * (top + eps);
    let yv = DVector::from_column_slice(y);
    let mut quad = 0.0;
    let mut projected = 0.0;
    for k in 0..q {
        let lambda = eig.values[k];
        if lambda <= RANK_EPS * top {
            continue;
        }
        let c = eig.vectors.column(k).dot(&yv);
        projected += c * c / lambda;
        if lambda + eps > cutoff {
            quad += c * c / (lambda * (lambda + eps));
        }
    }
    if eps > cutoff {
        quad += (delta_sq() - projected).max(0.0) / eps;
    }
    quad
}

fn dense_quadratic(c: &DMatrix<f64>, delta: &[f64]) -> f64 {
    let eig = sym_eigen(c);
    let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = PINV_CUTOFF * top;
    let dv = DVector::from_column_slice(delta);
    let mut quad = 0.0;
    for k in 0..eig.values.len() {
        let sigma = eig.values[k];
        if sigma > cutoff {
            let p = eig.vectors.column(k).dot(&dv);
            quad += p * p / sigma;
        }
    }
    quad
}

/// `[(h_t − h_s)ᵀ (Ĉ_t + Ĉ_s)⁺ (h_t − h_s)]^{1/2}`.
pub fn dig_pair_distance(t: usize, s: usize, h: &HistogramSet, covs: &[HistCovariance]) -> f64 {
    let (a, b) = if t <= s { (t, s) } else { (s, t) };
    pair_quadratic(a, b, h, covs, None).max(0.0).sqrt()
}

pub fn dig_histograms(x: &TimeSeries, params: &DigParams) -> Result<HistogramSet> {
    let h = local_histograms(x, WindowSpec::new(params.l1)?, params.bins)?;
    if params.stride == 0 {
        return Err(invalid_config("stride must be at least 1"));
    }
    if params.stride > 1 {
        let rows: Vec<usize> = (0..h.nrows()).step_by(params.stride).collect();
        Ok(h.select_rows(&rows))
    } else {
        Ok(h)
    }
}

pub fn dig_distance_matrix(x: &TimeSeries, params: &DigParams) -> Result<DistanceMatrix> {
    if x.len() < 2 {
        return Err(invalid_data("a distance matrix needs at least two samples"));
    }
    let h = dig_histograms(x, params)?;
    let mut d = dig_distance_from_histograms(&h, params.l2)?;
    d.metadata.insert("l1".into(), params.l1.to_string());
    Ok(d)
}

pub fn dig_distance_from_histograms(h: &HistogramSet, l2: usize) -> Result<DistanceMatrix> {
    let n = h.nrows();
    if n < 2 {
        return Err(invalid_data("a distance matrix needs at least two histogram rows"));
    }
    let covs = local_hist_covariances(h, WindowSpec::new(l2)?);
    let rows_gram = &h.values * h.values.transpose();
    let upper: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|t| {
            let (covs, rows_gram) = (&covs, &rows_gram);
            (t + 1..n).map(move |s| pair_quadratic(t, s, h, covs, Some(rows_gram)).max(0.0).sqrt())
        })
        .collect();
    let mut d = DistanceMatrix::from_upper(n, &upper, Method::Dig)?;
    d.metadata.insert("l2".into(), l2.to_string());
    d.metadata.insert("bins".into(), h.bins.to_string());
    Ok(d)
}
