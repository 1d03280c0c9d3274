//! Local functional principal components.
//!
//! For every index `i` the feature rows inside the `L₂` window give a local
//! mean `μ̂ᵢ` and covariance `Ãᵢ`. Eigen-pairs of `W^{-1/2} Ãᵢ W^{-1/2}`
//! define principal-component scores `s_{ijk} = (âⱼ − μ̂ᵢ)ᵀ W^{-1/2} u_{ik}`,
//! which are normalized by their eigenvalue before entering the distance.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::basis::GramMatrix;
use crate::error::{invalid_config, invalid_data, Result};
use crate::features::{window_mean, FeatureMatrix, WindowSpec};
use crate::linalg::{inv_sqrt_spd, pinv_sym, sym_eigen};

/// Eigenvalues at or below this are skipped by inverse-square-root scaling.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Negative eigenvalues within this distance of zero are rounding noise.
pub const NEGATIVE_EIG_TOL: f64 = 1e-8;

/// Ridge added to every local covariance, relative to `trace / M`.
pub const RIDGE_REL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    /// `ω = s / e^λ`
    #[default]
    Exp,
    /// `ω = s / √λ`
    InvSqrt,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exp" => Ok(Normalization::Exp),
            "inv_sqrt" => Ok(Normalization::InvSqrt),
            other => Err(format!("unknown normalization '{other}' (expected exp or inv_sqrt)")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Exp => "exp",
            Normalization::InvSqrt => "inv_sqrt",
        })
    }
}

/// Scales one score by its eigenvalue. `None` means the component is
/// skipped (inverse-square-root mode with `λ ≤ LAMBDA_FLOOR`).
pub fn normalize_score(s: f64, lambda: f64, mode: Normalization) -> Option<f64> {
    match mode {
        Normalization::Exp => Some(s / lambda.exp()),
        Normalization::InvSqrt if lambda > LAMBDA_FLOOR => Some(s / lambda.sqrt()),
        Normalization::InvSqrt => None,
    }
}

/// Squared normalization factor `1/ν(λ)²`, or `None` when skipped.
pub(crate) fn score_weight(lambda: f64, mode: Normalization) -> Option<f64> {
    match mode {
        Normalization::Exp => Some((-2.0 * lambda).exp()),
        Normalization::InvSqrt if lambda > LAMBDA_FLOOR => Some(lambda.recip()),
        Normalization::InvSqrt => None,
    }
}

pub fn local_mean(f: &FeatureMatrix, i: usize, l2: WindowSpec) -> DVector<f64> {
    DVector::from_vec(window_mean(f.values(), l2.indices(i, f.nrows())))
}

/// Rows of the window around `i`, centred on their mean.
pub(crate) fn centered_window(values: &DMatrix<f64>, i: usize, l2: WindowSpec) -> (DMatrix<f64>, Vec<f64>) {
    let range = l2.indices(i, values.nrows());
    let mean = window_mean(values, range.clone());
    let len = range.len();
    let start = range.start;
    let z = DMatrix::from_fn(len, values.ncols(), |r, c| values[(start + r, c)] - mean[c]);
    (z, mean)
}

pub(crate) fn ridge_for_trace(trace: f64, m: usize) -> f64 {
    RIDGE_REL * trace / m as f64
}

/// Population covariance of the window rows, symmetrized and ridge-stabilized.
pub fn local_covariance(f: &FeatureMatrix, i: usize, l2: WindowSpec) -> DMatrix<f64> {
    let (z, _) = centered_window(f.values(), i, l2);
    covariance_of_centered(&z)
}

fn covariance_of_centered(z: &DMatrix<f64>) -> DMatrix<f64> {
    let m = z.ncols();
    let count = z.nrows() as f64;
    let raw = z.tr_mul(z) / count;
    let mut cov = (&raw + raw.transpose()) * 0.5;
    let ridge = ridge_for_trace(cov.trace(), m);
    for k in 0..m {
        cov[(k, k)] += ridge;
    }
    cov
}

fn clamp_eigenvalue(v: f64) -> f64 {
    if v < 0.0 {
        if v < -NEGATIVE_EIG_TOL {
            warn!("eigenvalue {v:e} below tolerance; clamping to zero");
        }
        0.0
    } else {
        v
    }
}

/// Top-`k` eigen-pairs of `W^{-1/2} Ã W^{-1/2}`, descending, sign-fixed.
pub fn eigendecompose(cov: &DMatrix<f64>, w: &GramMatrix, k: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = cov.nrows();
    if k > m {
        return Err(invalid_config(format!("K = {k} exceeds feature count {m}")));
    }
    if w.dim() != m {
        return Err(invalid_config("Gram matrix size does not match covariance"));
    }
    let target = if w.is_identity() {
        cov.clone()
    } else {
        let root = inv_sqrt_spd(w.matrix())
            .ok_or_else(|| invalid_config("Gram matrix is not positive definite"))?;
        &root * cov * &root
    };
    let eig = sym_eigen(&target);
    let vals = DVector::from_iterator(k, eig.values.iter().take(k).map(|&v| clamp_eigenvalue(v)));
    let vecs = eig.vectors.columns(0, k).into_owned();
    Ok((vals, vecs))
}

/// Mean, covariance and truncated spectrum of the window around one index.
#[derive(Clone, Debug)]
pub struct LocalModel {
    pub index: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
    pub normalization: Normalization,
}

impl LocalModel {
    pub fn fit(
        f: &FeatureMatrix,
        i: usize,
        l2: WindowSpec,
        w: &GramMatrix,
        k: usize,
        normalization: Normalization,
    ) -> Result<Self> {
        if i >= f.nrows() {
            return Err(invalid_data(format!("index {i} out of range")));
        }
        let mean = local_mean(f, i, l2);
        let cov = local_covariance(f, i, l2);
        let (eigvals, eigvecs) = eigendecompose(&cov, w, k)?;
        Ok(Self { index: i, mean, cov, eigvals, eigvecs, normalization })
    }

    pub fn k(&self) -> usize {
        self.eigvals.len()
    }

    /// Scores and normalized scores of `a` against this model.
    pub fn scores(&self, a: &DVector<f64>, w: &GramMatrix) -> ScoreSet {
        let centered = a - &self.mean;
        let projected = if w.is_identity() {
            centered
        } else {
            let root = inv_sqrt_spd(w.matrix()).expect("Gram matrix validated at fit time");
            root * centered
        };
        let raw: Vec<f64> = self.eigvecs.tr_mul(&projected).iter().copied().collect();
        let mut skipped = 0;
        let normalized = raw
            .iter()
            .zip(self.eigvals.iter())
            .map(|(&s, &l)| {
                normalize_score(s, l, self.normalization).unwrap_or_else(|| {
                    skipped += 1;
                    0.0
                })
            })
            .collect();
        ScoreSet { raw, normalized, normalization: self.normalization, skipped }
    }
}

/// `s_{ijk} = (âⱼ − μ̂ᵢ)ᵀ W^{-1/2} u_{ik}`.
pub fn pc_score(a: &DVector<f64>, model: &LocalModel, w: &GramMatrix, k: usize) -> f64 {
    model.scores(a, w).raw[k]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    pub raw: Vec<f64>,
    /// Skipped components hold 0.
    pub normalized: Vec<f64>,
    pub normalization: Normalization,
    pub skipped: usize,
}

fn inverse_or_pinv(c: &DMatrix<f64>) -> DMatrix<f64> {
    match c.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            warn!("covariance is singular; using pseudo-inverse");
            pinv_sym(c, 1e-10)
        }
    }
}

/// `[(u − v)ᵀ (C_u⁻¹ + C_v⁻¹)(u − v)]^{1/2}` by direct inversion.
pub fn vector_mahalanobis_direct(
    u: &DVector<f64>,
    v: &DVector<f64>,
    cu: &DMatrix<f64>,
    cv: &DMatrix<f64>,
) -> f64 {
    let diff = u - v;
    let q = inverse_or_pinv(cu) + inverse_or_pinv(cv);
    diff.dot(&(q * &diff)).max(0.0).sqrt()
}

/// The same distance through principal-component scores of each covariance:
/// `(‖Λ_u^{-1/2}(s_uu − s_uv)‖² + ‖Λ_v^{-1/2}(s_vu − s_vv)‖²)^{1/2}` with all
/// components kept.
pub fn vector_mahalanobis_pc(
    u: &DVector<f64>,
    v: &DVector<f64>,
    cu: &DMatrix<f64>,
    cv: &DMatrix<f64>,
    mode: Normalization,
) -> Result<f64> {
    let m = u.len();
    let w = GramMatrix::identity(m);
    let mut total = 0.0;
    for cov in [cu, cv] {
        let (eigvals, eigvecs) = eigendecompose(cov, &w, m)?;
        let model = LocalModel {
            index: 0,
            mean: DVector::zeros(m),
            cov: cov.clone(),
            eigvals,
            eigvecs,
            normalization: mode,
        };
        let su = model.scores(u, &w).normalized;
        let sv = model.scores(v, &w).normalized;
        total += su.iter().zip(&sv).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Per-index quadratic form used by the distance assembly:
/// `term(Δ) = iso·‖Δ‖² + Σ_k weights[k]·(factors[:,k]ᵀ Δ)²`, which equals
/// `Σ_k (ω_{iik} − ω_{ijk})²` for `Δ = âᵢ − âⱼ`.
#[derive(Clone, Debug)]
pub(crate) struct LocalMetric {
    pub iso: f64,
    pub factors: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub skipped: usize,
}

impl LocalMetric {
    /// Builds the metric for index `i` of already-whitened feature rows.
    ///
    /// With all components kept and fewer window rows than features, the
    /// covariance is a rank-deficient matrix plus a ridge, so the spectrum is
    /// read off the small window Gram matrix: the complement of its range is
    /// one isotropic eigenspace at the ridge value.
    pub fn build(values: &DMatrix<f64>, i: usize, l2: WindowSpec, k: usize, mode: Normalization) -> Self {
        let m = values.ncols();
        let (z, _) = centered_window(values, i, l2);
        if k == m && z.nrows() < m {
            Self::from_window_gram(&z, mode)
        } else {
            Self::from_dense(&z, k, mode)
        }
    }

    fn from_dense(z: &DMatrix<f64>, k: usize, mode: Normalization) -> Self {
        let cov = covariance_of_centered(z);
        let eig = sym_eigen(&cov);
        let mut skipped = 0;
        let weights = eig
            .values
            .iter()
            .take(k)
            .map(|&l| {
                score_weight(clamp_eigenvalue(l), mode).unwrap_or_else(|| {
                    skipped += 1;
                    0.0
                })
            })
            .collect();
        let factors = eig.vectors.columns(0, k).into_owned();
        Self { iso: 0.0, factors, weights, skipped }
    }

    fn from_window_gram(z: &DMatrix<f64>, mode: Normalization) -> Self {
        let (rows, m) = z.shape();
        let count = rows as f64;
        let gram = (z * z.transpose()) / count;
        let eig = sym_eigen(&gram);
        let trace: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
        let ridge = ridge_for_trace(trace, m);
        let top = eig.values.iter().copied().fold(0.0, f64::max);
        let kept: Vec<usize> = (0..rows).filter(|&c| eig.values[c] > 1e-12 * top && top > 0.0).collect();

        let mut skipped = 0;
        let iso = score_weight(ridge, mode).unwrap_or_else(|| {
            skipped += m - kept.len();
            0.0
        });
        let mut factors = DMatrix::zeros(m, kept.len());
        let mut weights = Vec::with_capacity(kept.len());
        for (col, &c) in kept.iter().enumerate() {
            let s = eig.values[c];
            let u = z.tr_mul(&eig.vectors.column(c)) / (count * s).sqrt();
            factors.set_column(col, &u);
            let w = score_weight(s + ridge, mode).unwrap_or_else(|| {
                skipped += 1;
                0.0
            });
            weights.push(w - iso);
        }
        Self { iso, factors, weights, skipped }
    }
}
