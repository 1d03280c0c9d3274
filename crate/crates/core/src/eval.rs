//! Mantel correlation, noise and window sweeps, and distance-stage timing.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::data::{DistanceMatrix, Method, TimeSeries};
use crate::dig::{dig_distance_from_histograms, dig_histograms};
use crate::distance::{euclidean_rows, fig_distance_from_features, fig_features};
use crate::embed::{embed, Embedding};
use crate::error::{invalid_config, invalid_data, FigError, Result};
use crate::simulate::{rng_from_seed, simulate_sphere_walk, simulate_staged_surrogate, SurrogateConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct MantelResult {
    pub r: f64,
    pub p_value: Option<f64>,
    pub n_perm: usize,
}

fn centered_upper(d: &DistanceMatrix, which: &'static str) -> Result<(Vec<f64>, f64)> {
    let v = d.upper_triangle();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = c.iter().map(|x| x * x).sum::<f64>();
    if !(ss > 0.0) || c.iter().all(|&x| x == 0.0) {
        return Err(FigError::UndefinedCorrelation(which));
    }
    Ok((c, ss))
}

/// Pearson correlation of the strict upper triangles, with an optional
/// permutation p-value from joint row/column shuffles of `d2`.
pub fn mantel(d1: &DistanceMatrix, d2: &DistanceMatrix, n_perm: usize, seed: u64) -> Result<MantelResult> {
    let n = d1.n();
    if d2.n() != n {
        return Err(invalid_data(format!("distance matrices differ in size: {n} vs {}", d2.n())));
    }
    if n < 4 {
        return Err(invalid_data("the Mantel test needs at least 4 points"));
    }
    let (a, ssa) = centered_upper(d1, "the first distance matrix")?;
    let (b, ssb) = centered_upper(d2, "the second distance matrix")?;
    let norm = (ssa * ssb).sqrt();
    let r = (a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / norm).clamp(-1.0, 1.0);
    if n_perm == 0 {
        return Ok(MantelResult { r, p_value: None, n_perm: 0 });
    }
    // the centered values of a permuted matrix are the permuted centered values
    let mean_b = d2.upper_triangle().iter().sum::<f64>() / b.len() as f64;
    let m2 = d2.matrix();
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut hits = 0usize;
    for _ in 0..n_perm {
        perm.shuffle(&mut rng);
        let mut num = 0.0;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                num += a[k] * (m2[(perm[i], perm[j])] - mean_b);
                k += 1;
            }
        }
        if num / norm >= r {
            hits += 1;
        }
    }
    Ok(MantelResult { r, p_value: Some((1 + hits) as f64 / (1 + n_perm) as f64), n_perm })
}

pub fn embedding_distances(e: &Embedding) -> DistanceMatrix {
    euclidean_rows(&e.coords)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row of a sweep results table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub method: String,
    /// Noise level or window length.
    pub setting: f64,
    pub seed: u64,
    pub mantel_r: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub setting: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean and sample standard deviation of `mantel_r` per (method, setting),
/// in first-appearance order.
pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(m, s)| *m == r.method && *s == r.setting) {
            keys.push((r.method.clone(), r.setting));
        }
    }
    keys.into_iter()
        .map(|(method, setting)| {
            let vals: Vec<f64> =
                records.iter().filter(|r| r.method == method && r.setting == setting).map(|r| r.mantel_r).collect();
            let (mean, std) = mean_std(&vals);
            SummaryRow { method, setting, mean, std, count: vals.len() }
        })
        .collect()
}

pub const RAW_LABEL: &str = "raw";

fn noise_cell(cfg: &PipelineConfig, sigma: f64, seed: u64) -> Result<Vec<SweepRecord>> {
    let walk = simulate_sphere_walk(cfg.sim_n, cfg.sim_sigma_step, sigma, seed)?;
    let x = walk.observations();
    let truth = cfg.distance(&walk.angles(), Method::Euclidean)?;
    let mut out = Vec::new();
    let start = Instant::now();
    let raw = cfg.distance(&x, Method::Euclidean)?;
    let r = mantel(&raw, &truth, 0, seed)?.r;
    out.push(SweepRecord { method: RAW_LABEL.into(), setting: sigma, seed, mantel_r: r, runtime_s: start.elapsed().as_secs_f64() });
    for method in [Method::Fig, Method::Dig] {
        let start = Instant::now();
        let d = cfg.distance(&x, method)?;
        let e = embed(&d, &cfg.embed)?;
        let r = mantel(&embedding_distances(&e), &truth, 0, seed)?.r;
        out.push(SweepRecord {
            method: method.to_string(),
            setting: sigma,
            seed,
            mantel_r: r,
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// For every (σ, seed) cell: simulate the sphere walk and correlate the
/// angle distances with raw observation distances and with the FIG and DIG
/// embedding distances.
pub fn noise_sweep(sigmas: &[f64], seeds: &[u64], cfg: &PipelineConfig) -> Result<Vec<SweepRecord>> {
    if sigmas.len() < 2 || seeds.len() < 2 {
        return Err(invalid_config("a noise sweep needs at least 2 noise levels and 2 seeds"));
    }
    let cells: Vec<(f64, u64)> = sigmas.iter().flat_map(|&s| seeds.iter().map(move |&k| (s, k))).collect();
    let results: Vec<Result<Vec<SweepRecord>>> = cells.par_iter().map(|&(s, k)| noise_cell(cfg, s, k)).collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RobustnessGrid {
    pub method: Method,
    pub window_values: Vec<usize>,
    /// Element-wise mean over seeds of the pairwise Mantel grids.
    pub m: DMatrix<f64>,
    /// Element-wise standard deviation over seeds.
    pub std: DMatrix<f64>,
    pub per_seed: Vec<DMatrix<f64>>,
    pub seeds: Vec<u64>,
    /// Mean of the off-diagonal entries of `m`.
    pub summary_mean: f64,
    /// Standard deviation over seeds of each seed's off-diagonal mean.
    pub summary_std: f64,
}

pub(crate) fn off_diagonal_mean(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n < 2 {
        return 1.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)];
            }
        }
    }
    s / (n * (n - 1)) as f64
}

fn pairwise_grid(embeddings: &[DistanceMatrix]) -> Result<DMatrix<f64>> {
    let w = embeddings.len();
    let mut g = DMatrix::identity(w, w);
    for a in 0..w {
        for b in a + 1..w {
            let r = mantel(&embeddings[a], &embeddings[b], 0, 0)?.r;
            g[(a, b)] = r;
            g[(b, a)] = r;
        }
    }
    Ok(g)
}

/// Embeddings of one series at each window length, reusing the stage
/// upstream of `L₂`.
pub fn window_embeddings(
    x: &TimeSeries,
    l2_values: &[usize],
    method: Method,
    cfg: &PipelineConfig,
) -> Result<Vec<Embedding>> {
    match method {
        Method::Fig => {
            let p = cfg.fig_params();
            let f = fig_features(x, &p)?;
            l2_values
                .iter()
                .map(|&l2| embed(&fig_distance_from_features(&f, l2, p.k, p.normalization)?, &cfg.embed))
                .collect()
        }
        Method::Dig => {
            let h = dig_histograms(x, &cfg.dig_params())?;
            l2_values.iter().map(|&l2| embed(&dig_distance_from_histograms(&h, l2)?, &cfg.embed)).collect()
        }
        Method::Euclidean => {
            let e = embed(&cfg.distance(x, Method::Euclidean)?, &cfg.embed)?;
            Ok(vec![e; l2_values.len()])
        }
    }
}

/// Pairwise Mantel agreement between embeddings computed at different
/// `L₂`, for FIG and DIG, on the staged surrogate of every seed.
pub fn window_sweep(
    l2_values: &[usize],
    seeds: &[u64],
    surrogate: &SurrogateConfig,
    cfg: &PipelineConfig,
) -> Result<Vec<RobustnessGrid>> {
    if l2_values.is_empty() || seeds.is_empty() {
        return Err(invalid_config("a window sweep needs at least one window and one seed"));
    }
    let methods = [Method::Fig, Method::Dig];
    let cells: Vec<(Method, u64)> = methods.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let grids: Vec<Result<DMatrix<f64>>> = cells
        .par_iter()
        .map(|&(method, seed)| {
            let data = simulate_staged_surrogate(surrogate, seed)?;
            let emb = window_embeddings(&data.series, l2_values, method, cfg)?;
            let dists: Vec<DistanceMatrix> = emb.iter().map(embedding_distances).collect();
            pairwise_grid(&dists)
        })
        .collect();
    let mut grids = grids.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let w = l2_values.len();
    let mut out = Vec::new();
    for method in methods {
        let per_seed: Vec<DMatrix<f64>> = grids.by_ref().take(seeds.len()).collect();
        let mut m = DMatrix::zeros(w, w);
        let mut std = DMatrix::zeros(w, w);
        for a in 0..w {
            for b in 0..w {
                let vals: Vec<f64> = per_seed.iter().map(|g| g[(a, b)]).collect();
                let (mu, sd) = mean_std(&vals);
                m[(a, b)] = mu;
                std[(a, b)] = sd;
            }
        }
        let seed_means: Vec<f64> = per_seed.iter().map(off_diagonal_mean).collect();
        out.push(RobustnessGrid {
            method,
            window_values: l2_values.to_vec(),
            summary_mean: off_diagonal_mean(&m),
            summary_std: mean_std(&seed_means).1,
            m,
            std,
            per_seed,
            seeds: seeds.to_vec(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub method: Method,
    pub seconds: Vec<f64>,
    pub n: usize,
}

impl BenchResult {
    pub fn median(&self) -> f64 {
        let mut v = self.seconds.clone();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }
}

/// Synthetic input for timing: the staged surrogate cut to `n` samples of
/// dimension `d`.
pub fn bench_input(n: usize, d: usize, seed: u64) -> Result<TimeSeries> {
    let seg = 32;
    let cfg = SurrogateConfig { n_segments: n.div_ceil(seg).max(40), d, segment_len: seg, ..Default::default() };
    let s = simulate_staged_surrogate(&cfg, seed)?;
    TimeSeries::new(s.series.data().rows(0, n.min(s.series.len())).into_owned())
}

/// Wall-clock time of the distance stage (input to distance matrix) for
/// each method, run sequentially on a single thread.
pub fn benchmark_distance_stage(
    x: &TimeSeries,
    cfg: &PipelineConfig,
    methods: &[Method],
    repetitions: usize,
) -> Result<Vec<BenchResult>> {
    if repetitions < 3 {
        return Err(invalid_config("benchmarking needs at least 3 repetitions"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| FigError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        methods
            .iter()
            .map(|&method| {
                let mut seconds = Vec::with_capacity(repetitions);
                let mut n = 0;
                for _ in 0..repetitions {
                    let start = Instant::now();
                    let d = cfg.distance(x, method)?;
                    seconds.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
                    n = d.n();
                }
                Ok(BenchResult { method, seconds, n })
            })
            .collect()
    })
}
