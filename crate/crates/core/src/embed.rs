//! Diffusion-potential embedding of a distance matrix.
//!
//! α-decay kernel with k-NN adaptive bandwidth → row-stochastic diffusion
//! operator → diffusion time from the von Neumann entropy knee → potential
//! distances `‖−log(Pᵗ + ε)ᵢ − −log(Pᵗ + ε)ⱼ‖` → classical MDS start →
//! SMACOF stress majorization.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{DistanceMatrix, Method};
use crate::error::{invalid_config, FigError, Result};
use crate::linalg::{sym_eigen, sym_eigenvalues};

/// Offset inside the potential logarithm.
pub const LOG_EPS: f64 = 1e-7;

/// Distance matrices whose largest entry is at most this are treated as
/// describing a single repeated point; window averages of a constant series
/// leave rounding residue of order 1e-16.
pub const IDENTICAL_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedParams {
    pub knn: usize,
    pub alpha: f64,
    /// Fixed diffusion time; `None` selects it from the entropy knee.
    pub t: Option<usize>,
    pub t_max: usize,
    pub r: usize,
    pub mds_tol: f64,
    pub mds_max_iter: usize,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self { knn: 5, alpha: 40.0, t: None, t_max: 100, r: 2, mds_tol: 1e-6, mds_max_iter: 500 }
    }
}

#[derive(Clone, Debug)]
pub struct AffinityGraph {
    pub kernel: DMatrix<f64>,
    pub knn: usize,
    pub alpha: f64,
    /// Per-point bandwidth `εᵢ`.
    pub bandwidths: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DiffusionOperator {
    pub p: DMatrix<f64>,
    /// Row sums of the kernel the operator was normalized from, if known.
    pub degrees: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub coords: DMatrix<f64>,
    pub stress_history: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Embedding {
    pub fn r(&self) -> usize {
        self.coords.ncols()
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn final_stress(&self) -> f64 {
        *self.stress_history.last().unwrap_or(&f64::NAN)
    }
}

pub fn alpha_decay_kernel(d: &DistanceMatrix, knn: usize, alpha: f64) -> Result<AffinityGraph> {
    let n = d.n();
    if knn == 0 || knn >= n {
        return Err(invalid_config(format!("knn = {knn} must lie in 1..{n}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid_config("alpha must be positive"));
    }
    let m = d.matrix();
    if m.amax() <= IDENTICAL_EPS {
        return Err(FigError::IdenticalPoints);
    }
    let bandwidths: Vec<f64> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).collect();
            row.sort_by(f64::total_cmp);
            let kth = row[knn - 1];
            if kth > 0.0 {
                kth
            } else {
                row.iter().copied().find(|&v| v > 0.0).unwrap_or(1.0)
            }
        })
        .collect();
    let raw = DMatrix::from_fn(n, n, |i, j| (-(m[(i, j)] / bandwidths[i]).powf(alpha)).exp());
    let kernel = DMatrix::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)]));
    Ok(AffinityGraph { kernel, knn, alpha, bandwidths })
}

pub fn row_normalize(k: &DMatrix<f64>) -> Result<DiffusionOperator> {
    let n = k.nrows();
    let degrees: Vec<f64> = (0..n).map(|i| k.row(i).sum()).collect();
    if let Some(i) = degrees.iter().position(|&s| !(s > 0.0)) {
        return Err(FigError::DisconnectedPoint(i));
    }
    let p = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / degrees[i]);
    Ok(DiffusionOperator { p, degrees: Some(degrees) })
}

fn symmetric_conjugate(op: &DiffusionOperator) -> DMatrix<f64> {
    let n = op.p.nrows();
    match &op.degrees {
        // D^{1/2} P D^{-1/2} = D^{-1/2} K D^{-1/2}
        Some(deg) => DMatrix::from_fn(n, n, |i, j| op.p[(i, j)] * (deg[i] / deg[j]).sqrt()),
        None => (&op.p + op.p.transpose()) * 0.5,
    }
}

/// Von Neumann entropy `H(t)` of the operator spectrum for `t = 1..=t_max`.
pub fn von_neumann_entropy(op: &DiffusionOperator, t_max: usize) -> Vec<f64> {
    let eig = sym_eigenvalues(&symmetric_conjugate(op));
    entropy_curve(&eig, t_max)
}

pub(crate) fn entropy_curve(eigenvalues: &[f64], t_max: usize) -> Vec<f64> {
    (1..=t_max)
        .map(|t| {
            let powers: Vec<f64> = eigenvalues.iter().map(|v| v.abs().powi(t as i32)).collect();
            let total: f64 = powers.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            -powers
                .iter()
                .map(|p| p / total)
                .filter(|&q| q > 0.0)
                .map(|q| q * q.ln())
                .sum::<f64>()
        })
        .collect()
}

/// Index (1-based time) of the point farthest from the chord joining the
/// first and last points of the curve; the smallest such `t` on ties.
pub fn knee_point(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 3 {
        return 1;
    }
    let (x0, y0) = (1.0, curve[0]);
    let (x1, y1) = (n as f64, curve[n - 1]);
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (0.0, 1);
    for (idx, &y) in curve.iter().enumerate() {
        let x = (idx + 1) as f64;
        let dist = ((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)).abs() / len;
        if dist > best.0 {
            best = (dist, idx + 1);
        }
    }
    best.1
}

pub fn select_diffusion_time(op: &DiffusionOperator, t_max: usize) -> Result<usize> {
    if t_max < 2 {
        return Err(invalid_config("t_max must be at least 2"));
    }
    Ok(knee_point(&von_neumann_entropy(op, t_max)))
}

/// `Pᵗ` by repeated squaring.
pub fn matrix_power(p: &DMatrix<f64>, t: usize) -> DMatrix<f64> {
    let n = p.nrows();
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = p.clone();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => &r * &base,
            });
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result.unwrap_or_else(|| DMatrix::identity(n, n))
}

pub fn potential_distances(op: &DiffusionOperator, t: usize) -> Result<DistanceMatrix> {
    if t == 0 {
        return Err(invalid_config("diffusion time must be at least 1"));
    }
    let pt = matrix_power(&op.p, t);
    // columns of `u` are potential rows, contiguous in memory
    let u = pt.transpose().map(|v| -(v.max(0.0) + LOG_EPS).ln());
    let n = u.ncols();
    let upper: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let u = &u;
            (i + 1..n).map(move |j| {
                u.column(i).iter().zip(u.column(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
        })
        .collect();
    DistanceMatrix::from_upper(n, &upper, Method::Euclidean)
}

/// Torgerson scaling: top-`r` eigen-pairs of `−½ J D⁽²⁾ J`.
pub fn classical_mds(d: &DistanceMatrix, r: usize) -> Result<DMatrix<f64>> {
    let n = d.n();
    if r == 0 || r >= n {
        return Err(invalid_config(format!("embedding dimension {r} must lie in 1..{n}")));
    }
    let sq = d.matrix().map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = sym_eigen(&b);
    Ok(DMatrix::from_fn(n, r, |i, c| eig.vectors[(i, c)] * eig.values[c].max(0.0).sqrt()))
}

/// Row-major coordinates with their full pairwise distance table.
struct Layout {
    n: usize,
    r: usize,
    coords: Vec<f64>,
    dist: Vec<f64>,
}

impl Layout {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, r) = x.shape();
        let coords = (0..n).flat_map(|i| (0..r).map(move |c| (i, c))).map(|(i, c)| x[(i, c)]).collect();
        let mut l = Self { n, r, coords, dist: vec![0.0; n * n] };
        l.refresh();
        l
    }

    fn refresh(&mut self) {
        let (n, r) = (self.n, self.r);
        let coords = &self.coords;
        self.dist.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let xi = &coords[i * r..(i + 1) * r];
            for (j, out) in row.iter_mut().enumerate() {
                let xj = &coords[j * r..(j + 1) * r];
                *out = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            }
        });
    }

    fn stress(&self, d: &DistanceMatrix) -> f64 {
        let target = d.matrix();
        (0..self.n)
            .map(|i| {
                let t = target.column(i);
                (i + 1..self.n).map(|j| (self.dist[i * self.n + j] - t[j]).powi(2)).sum::<f64>()
            })
            .sum()
    }

    /// Guttman transform `X ← B(X) X / n`.
    fn guttman(&mut self, d: &DistanceMatrix) {
        let (n, r) = (self.n, self.r);
        let target = d.matrix();
        let (coords, dist) = (&self.coords, &self.dist);
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let t = target.column(i);
                let row = &dist[i * n..(i + 1) * n];
                let mut acc = vec![0.0; r];
                let mut diag = 0.0;
                for j in 0..n {
                    if j != i && row[j] > 0.0 {
                        let b = t[j] / row[j];
                        diag += b;
                        for c in 0..r {
                            acc[c] -= b * coords[j * r + c];
                        }
                    }
                }
                for c in 0..r {
                    acc[c] = (acc[c] + diag * coords[i * r + c]) / n as f64;
                }
                acc
            })
            .collect();
        self.coords = next;
        self.refresh();
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.r, &self.coords)
    }
}

/// Raw stress `Σ_{i<j} (‖xᵢ − xⱼ‖ − δᵢⱼ)²`.
pub fn stress(d: &DistanceMatrix, x: &DMatrix<f64>) -> f64 {
    Layout::new(x).stress(d)
}

/// Metric MDS by stress majorization from `init`. Stops when the relative
/// stress decrease falls below `tol` or after `max_iter` transforms.
pub fn smacof_mds(
    d: &DistanceMatrix,
    init: &DMatrix<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<Embedding> {
    if init.nrows() != d.n() {
        return Err(invalid_config("initial configuration has the wrong number of rows"));
    }
    let mut layout = Layout::new(init);
    let mut history = vec![layout.stress(d)];
    for _ in 0..max_iter {
        let prev = *history.last().unwrap();
        if prev == 0.0 {
            break;
        }
        let previous = layout.coords.clone();
        layout.guttman(d);
        let s = layout.stress(d);
        if s > prev {
            // majorization cannot raise stress; only rounding can
            layout.coords = previous;
            layout.refresh();
            break;
        }
        history.push(s);
        if (prev - s) / prev < tol {
            break;
        }
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("mds_iterations".into(), (history.len() - 1).to_string());
    Ok(Embedding { coords: layout.matrix(), stress_history: history, metadata })
}

/// The full pipeline from a distance matrix to `r` coordinates.
pub fn embed(d: &DistanceMatrix, params: &EmbedParams) -> Result<Embedding> {
    let n = d.n();
    if n < (params.knn + 1).max(params.r + 1) {
        return Err(invalid_config(format!(
            "{n} points are too few for knn = {} and r = {}",
            params.knn, params.r
        )));
    }
    let graph = alpha_decay_kernel(d, params.knn, params.alpha)?;
    let op = row_normalize(&graph.kernel)?;
    let t = match params.t {
        Some(t) => t,
        None => select_diffusion_time(&op, params.t_max)?,
    };
    let potential = potential_distances(&op, t)?;
    let init = classical_mds(&potential, params.r)?;
    let mut emb = smacof_mds(&potential, &init, params.mds_max_iter, params.mds_tol)?;
    let meta = &mut emb.metadata;
    meta.insert("knn".into(), params.knn.to_string());
    meta.insert("alpha".into(), params.alpha.to_string());
    meta.insert("t".into(), t.to_string());
    meta.insert("t_selection".into(), if params.t.is_some() { "fixed" } else { "vne_knee" }.into());
    meta.insert("t_max".into(), params.t_max.to_string());
    meta.insert("r".into(), params.r.to_string());
    meta.insert("mds_tol".into(), params.mds_tol.to_string());
    meta.insert("mds_max_iter".into(), params.mds_max_iter.to_string());
    meta.insert("log_eps".into(), LOG_EPS.to_string());
    meta.insert("input_method".into(), d.method().to_string());
    Ok(emb)
}
