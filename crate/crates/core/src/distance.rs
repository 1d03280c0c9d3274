//! Two-sided functional Mahalanobis distance matrices.
//!
//! `d²(i, j) = Σ_k (ω_{iik} − ω_{ijk})² + Σ_k (ω_{jik} − ω_{jjk})²`, where
//! `ω_{ijk}` is the normalized score of feature row `j` under the local
//! model of index `i`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{fit_domain, gram, GramMatrix};
use crate::data::{DistanceMatrix, Method, TimeSeries};
use crate::error::{invalid_config, invalid_data, Result};
use crate::features::{compute_features, stride_subsample, FeatureMatrix, WindowSpec};
use crate::fpca::{LocalMetric, LocalModel, Normalization};
use crate::linalg::inv_sqrt_spd;

/// Settings for the FIG distance stage.
#[derive(Clone, Debug, PartialEq)]
pub struct FigParams {
    /// Basis functions per input dimension.
    pub basis_count: usize,
    pub l1: usize,
    pub l2: usize,
    /// Keep every `stride`-th feature row before the covariance stage.
    pub stride: usize,
    /// Retained components; `None` keeps all `M`.
    pub k: Option<usize>,
    pub normalization: Normalization,
}

impl Default for FigParams {
    fn default() -> Self {
        Self { basis_count: 7, l1: 10, l2: 10, stride: 1, k: None, normalization: Normalization::Exp }
    }
}

/// Fits the basis domain, averages the basis over `L₁` windows and applies
/// the stride. This is everything upstream of `L₂`.
pub fn fig_features(x: &TimeSeries, params: &FigParams) -> Result<FeatureMatrix> {
    let spec = fit_domain(x, params.basis_count)?;
    let f = compute_features(x, &spec, WindowSpec::new(params.l1)?)?;
    if params.stride > 1 {
        stride_subsample(&f, params.stride)
    } else {
        Ok(f)
    }
}

pub fn fig_distance_matrix(x: &TimeSeries, params: &FigParams) -> Result<DistanceMatrix> {
    if x.len() < 2 {
        return Err(invalid_data("a distance matrix needs at least two samples"));
    }
    let f = fig_features(x, params)?;
    fig_distance_from_features(&f, params.l2, params.k, params.normalization)
}

/// Local models → scores → distances, for a precomputed feature matrix.
pub fn fig_distance_from_features(
    f: &FeatureMatrix,
    l2: usize,
    k: Option<usize>,
    normalization: Normalization,
) -> Result<DistanceMatrix> {
    let n = f.nrows();
    if n < 2 {
        return Err(invalid_data("a distance matrix needs at least two feature rows"));
    }
    let m = f.ncols();
    let k = k.unwrap_or(m);
    if k == 0 || k > m {
        return Err(invalid_config(format!("K = {k} must lie in 1..={m}")));
    }
    let window = WindowSpec::new(l2)?;
    let w = gram(&f.spec);
    let whitened;
    let values = if w.is_identity() {
        f.values()
    } else {
        let root = inv_sqrt_spd(w.matrix()).ok_or_else(|| invalid_config("Gram matrix is not positive definite"))?;
        whitened = f.values() * root;
        &whitened
    };

    let metrics: Vec<LocalMetric> =
        (0..n).into_par_iter().map(|i| LocalMetric::build(values, i, window, k, normalization)).collect();
    let skipped: usize = metrics.iter().map(|m| m.skipped).sum();
    if skipped > 0 {
        log::info!("{skipped} components skipped below the eigenvalue floor");
    }

    // terms[i][j] = Σ_k (ω_{iik} − ω_{ijk})²
    let terms: Vec<Vec<f64>> = metrics.par_iter().enumerate().map(|(i, metric)| one_sided_terms(values, i, metric)).collect();

    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            upper.push((terms[i][j] + terms[j][i]).max(0.0).sqrt());
        }
    }
    let mut d = DistanceMatrix::from_upper(n, &upper, Method::Fig)?;
    d.metadata.insert("l1".into(), f.window.length().to_string());
    d.metadata.insert("l2".into(), l2.to_string());
    d.metadata.insert("k".into(), k.to_string());
    d.metadata.insert("normalization".into(), normalization.to_string());
    d.metadata.insert("skipped_components".into(), skipped.to_string());
    Ok(d)
}

fn one_sided_terms(values: &DMatrix<f64>, i: usize, metric: &LocalMetric) -> Vec<f64> {
    let n = values.nrows();
    let mut out = vec![0.0; n];
    if metric.iso != 0.0 {
        for col in values.column_iter() {
            let own = col[i];
            for (o, v) in out.iter_mut().zip(col.iter()) {
                let diff = own - v;
                *o += diff * diff;
            }
        }
        out.iter_mut().for_each(|o| *o *= metric.iso);
    }
    if metric.factors.ncols() > 0 {
        let proj = values * &metric.factors;
        for (col, &w) in proj.column_iter().zip(&metric.weights) {
            if w == 0.0 {
                continue;
            }
            let own = col[i];
            for (o, v) in out.iter_mut().zip(col.iter()) {
                let diff = own - v;
                *o += w * diff * diff;
            }
        }
    }
    out
}

/// Distance between two indices from explicit [`LocalModel`]s.
pub fn fig_pair_distance(
    i: usize,
    j: usize,
    models: &[LocalModel],
    f: &FeatureMatrix,
    w: &GramMatrix,
) -> Result<f64> {
    let (mi, mj) = (&models[i], &models[j]);
    if mi.k() != mj.k() || mi.normalization != mj.normalization {
        return Err(invalid_config(format!(
            "local models {i} and {j} differ in K or normalization"
        )));
    }
    let ai = DVector::from_vec(f.row_vec(i));
    let aj = DVector::from_vec(f.row_vec(j));
    let mut total = 0.0;
    for model in [mi, mj] {
        let si = model.scores(&ai, w).normalized;
        let sj = model.scores(&aj, w).normalized;
        total += si.iter().zip(&sj).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Builds the local model of every feature row.
pub fn local_models(
    f: &FeatureMatrix,
    l2: usize,
    k: Option<usize>,
    normalization: Normalization,
) -> Result<Vec<LocalModel>> {
    let window = WindowSpec::new(l2)?;
    let w = gram(&f.spec);
    let k = k.unwrap_or(f.ncols());
    (0..f.nrows())
        .into_par_iter()
        .map(|i| LocalModel::fit(f, i, window, &w, k, normalization))
        .collect()
}

pub fn euclidean_distance_matrix(x: &TimeSeries) -> DistanceMatrix {
    euclidean_rows(x.data())
}

/// Pairwise Euclidean distances between the rows of `rows`.
pub fn euclidean_rows(rows: &DMatrix<f64>) -> DistanceMatrix {
    let n = rows.nrows();
    let upper: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..n).map(move |j| {
                rows.row(i).iter().zip(rows.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
        })
        .collect();
    DistanceMatrix::from_upper(n, &upper, Method::Euclidean).expect("finite input rows")
}
