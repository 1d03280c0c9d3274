//! Flat `section.key = value` pipeline configuration.
//!
//! Blank lines, lines starting with `#` and `meta.*` keys are ignored. Unknown keys,
//! duplicate keys and out-of-range values are rejected. [`PipelineConfig::to_text`]
//! emits every key in a fixed order, so parsing its output reproduces the
//! same text.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::basis::BasisFamily;
use crate::data::{DistanceMatrix, Method, TimeSeries};
use crate::dig::{dig_distance_matrix, DigParams};
use crate::distance::{euclidean_distance_matrix, fig_distance_matrix, FigParams};
use crate::embed::EmbedParams;
use crate::error::{invalid_config, Result};
use crate::fpca::Normalization;
use crate::simulate::{SurrogateConfig, DEFAULT_SIGMA_STEP};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub basis_family: BasisFamily,
    pub basis_b: usize,
    pub l1: usize,
    pub l2: usize,
    pub stride: usize,
    pub fpca_k: Option<usize>,
    pub normalization: Normalization,
    pub dig_bins: usize,
    pub embed: EmbedParams,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub sim_n: usize,
    pub sim_sigma_step: f64,
    pub sim_sigma_noise: f64,
    pub sweep_sigmas: Vec<f64>,
    pub sweep_l2_values: Vec<usize>,
    pub surrogate_n_segments: usize,
    pub surrogate_d: usize,
    pub surrogate_segment_len: usize,
    pub surrogate_n_stages: usize,
    pub surrogate_stay_probability: f64,
    pub mantel_n_perm: usize,
    pub bench_repetitions: usize,
    pub bench_n: usize,
    pub bench_d: usize,
    pub cache_dir: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let s = SurrogateConfig::default();
        Self {
            basis_family: BasisFamily::Fourier,
            basis_b: 7,
            l1: 10,
            l2: 10,
            stride: 1,
            fpca_k: None,
            normalization: Normalization::Exp,
            dig_bins: 20,
            embed: EmbedParams::default(),
            method: Method::Fig,
            seeds: vec![1, 2, 3, 4, 5],
            sim_n: 1000,
            sim_sigma_step: DEFAULT_SIGMA_STEP,
            sim_sigma_noise: 0.1,
            sweep_sigmas: vec![0.0, 0.05, 0.1, 0.15],
            sweep_l2_values: vec![10, 50, 100, 150, 200],
            surrogate_n_segments: s.n_segments,
            surrogate_d: s.d,
            surrogate_segment_len: s.segment_len,
            surrogate_n_stages: s.n_stages,
            surrogate_stay_probability: s.stay_probability,
            mantel_n_perm: 0,
            bench_repetitions: 5,
            bench_n: 5000,
            bench_d: 18,
            cache_dir: ".fig-cache".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| invalid_config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Keys under this prefix carry run metadata in sidecars and are skipped
/// when a sidecar is loaded back as a config.
pub const META_PREFIX: &str = "meta.";

impl PipelineConfig {
    /// Assigns one key without validating the whole config.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "basis.family" => self.basis_family = parse(key, v)?,
            "basis.b" => self.basis_b = parse(key, v)?,
            "windows.l1" => self.l1 = parse(key, v)?,
            "windows.l2" => self.l2 = parse(key, v)?,
            "windows.stride" => self.stride = parse(key, v)?,
            "fpca.k" => self.fpca_k = if v == "full" { None } else { Some(parse(key, v)?) },
            "fpca.normalization" => self.normalization = parse(key, v)?,
            "dig.bins" => self.dig_bins = parse(key, v)?,
            "embed.knn" => self.embed.knn = parse(key, v)?,
            "embed.alpha" => self.embed.alpha = parse(key, v)?,
            "embed.t" => self.embed.t = if v == "auto" { None } else { Some(parse(key, v)?) },
            "embed.t_max" => self.embed.t_max = parse(key, v)?,
            "embed.r" => self.embed.r = parse(key, v)?,
            "embed.mds_tol" => self.embed.mds_tol = parse(key, v)?,
            "embed.mds_max_iter" => self.embed.mds_max_iter = parse(key, v)?,
            "method" => self.method = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "sim.n" => self.sim_n = parse(key, v)?,
            "sim.sigma_step" => self.sim_sigma_step = parse(key, v)?,
            "sim.sigma_noise" => self.sim_sigma_noise = parse(key, v)?,
            "sweep.sigmas" => self.sweep_sigmas = parse_list(key, v)?,
            "sweep.l2_values" => self.sweep_l2_values = parse_list(key, v)?,
            "surrogate.n_segments" => self.surrogate_n_segments = parse(key, v)?,
            "surrogate.d" => self.surrogate_d = parse(key, v)?,
            "surrogate.segment_len" => self.surrogate_segment_len = parse(key, v)?,
            "surrogate.n_stages" => self.surrogate_n_stages = parse(key, v)?,
            "surrogate.stay_probability" => self.surrogate_stay_probability = parse(key, v)?,
            "mantel.n_perm" => self.mantel_n_perm = parse(key, v)?,
            "bench.repetitions" => self.bench_repetitions = parse(key, v)?,
            "bench.n" => self.bench_n = parse(key, v)?,
            "bench.d" => self.bench_d = parse(key, v)?,
            "paths.cache_dir" => self.cache_dir = v.to_string(),
            other => return Err(invalid_config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid_config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if key.starts_with(META_PREFIX) {
                continue;
            }
            if !seen.insert(key.to_string()) {
                return Err(invalid_config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            cfg.set(key, value).map_err(|e| invalid_config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let e = &self.embed;
        vec![
            ("basis.family", self.basis_family.to_string()),
            ("basis.b", self.basis_b.to_string()),
            ("windows.l1", self.l1.to_string()),
            ("windows.l2", self.l2.to_string()),
            ("windows.stride", self.stride.to_string()),
            ("fpca.k", self.fpca_k.map_or("full".into(), |k| k.to_string())),
            ("fpca.normalization", self.normalization.to_string()),
            ("dig.bins", self.dig_bins.to_string()),
            ("embed.knn", e.knn.to_string()),
            ("embed.alpha", e.alpha.to_string()),
            ("embed.t", e.t.map_or("auto".into(), |t| t.to_string())),
            ("embed.t_max", e.t_max.to_string()),
            ("embed.r", e.r.to_string()),
            ("embed.mds_tol", e.mds_tol.to_string()),
            ("embed.mds_max_iter", e.mds_max_iter.to_string()),
            ("method", self.method.to_string()),
            ("seeds", join(&self.seeds)),
            ("sim.n", self.sim_n.to_string()),
            ("sim.sigma_step", self.sim_sigma_step.to_string()),
            ("sim.sigma_noise", self.sim_sigma_noise.to_string()),
            ("sweep.sigmas", join(&self.sweep_sigmas)),
            ("sweep.l2_values", join(&self.sweep_l2_values)),
            ("surrogate.n_segments", self.surrogate_n_segments.to_string()),
            ("surrogate.d", self.surrogate_d.to_string()),
            ("surrogate.segment_len", self.surrogate_segment_len.to_string()),
            ("surrogate.n_stages", self.surrogate_n_stages.to_string()),
            ("surrogate.stay_probability", self.surrogate_stay_probability.to_string()),
            ("mantel.n_perm", self.mantel_n_perm.to_string()),
            ("bench.repetitions", self.bench_repetitions.to_string()),
            ("bench.n", self.bench_n.to_string()),
            ("bench.d", self.bench_d.to_string()),
            ("paths.cache_dir", self.cache_dir.clone()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("basis.b", self.basis_b),
            ("windows.l1", self.l1),
            ("windows.l2", self.l2),
            ("windows.stride", self.stride),
            ("dig.bins", self.dig_bins),
            ("embed.knn", self.embed.knn),
            ("embed.r", self.embed.r),
            ("sim.n", self.sim_n),
            ("surrogate.segment_len", self.surrogate_segment_len),
            ("bench.n", self.bench_n),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(invalid_config(format!("{key} must be positive")));
            }
        }
        if self.fpca_k == Some(0) {
            return Err(invalid_config("fpca.k must be positive or 'full'"));
        }
        if self.embed.t == Some(0) {
            return Err(invalid_config("embed.t must be positive or 'auto'"));
        }
        if self.embed.t_max < 2 {
            return Err(invalid_config("embed.t_max must be at least 2"));
        }
        if !(self.embed.alpha > 0.0 && self.embed.alpha.is_finite()) {
            return Err(invalid_config("embed.alpha must be positive"));
        }
        if !(self.embed.mds_tol >= 0.0 && self.embed.mds_tol.is_finite()) {
            return Err(invalid_config("embed.mds_tol must be non-negative"));
        }
        for (key, v) in [("sim.sigma_step", self.sim_sigma_step), ("sim.sigma_noise", self.sim_sigma_noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid_config(format!("{key} must be finite and non-negative")));
            }
        }
        if self.sweep_sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(invalid_config("sweep.sigmas must be finite and non-negative"));
        }
        if self.sweep_l2_values.contains(&0) {
            return Err(invalid_config("sweep.l2_values must be positive"));
        }
        if !(0.0..=1.0).contains(&self.surrogate_stay_probability) {
            return Err(invalid_config("surrogate.stay_probability must lie in [0, 1]"));
        }
        if self.cache_dir.is_empty() {
            return Err(invalid_config("paths.cache_dir must not be empty"));
        }
        Ok(())
    }

    pub fn fig_params(&self) -> FigParams {
        FigParams {
            basis_count: self.basis_b,
            l1: self.l1,
            l2: self.l2,
            stride: self.stride,
            k: self.fpca_k,
            normalization: self.normalization,
        }
    }

    pub fn dig_params(&self) -> DigParams {
        DigParams { bins: self.dig_bins, l1: self.l1, l2: self.l2, stride: self.stride }
    }

    pub fn surrogate(&self) -> SurrogateConfig {
        SurrogateConfig {
            n_segments: self.surrogate_n_segments,
            d: self.surrogate_d,
            segment_len: self.surrogate_segment_len,
            n_stages: self.surrogate_n_stages,
            transition: None,
            stay_probability: self.surrogate_stay_probability,
        }
    }

    /// Distance matrix for `method` with this config's parameters. The
    /// Euclidean method applies only the stride.
    pub fn distance(&self, x: &TimeSeries, method: Method) -> Result<DistanceMatrix> {
        match method {
            Method::Fig => fig_distance_matrix(x, &self.fig_params()),
            Method::Dig => dig_distance_matrix(x, &self.dig_params()),
            Method::Euclidean => {
                if self.stride > 1 {
                    let rows: Vec<usize> = (0..x.len()).step_by(self.stride).collect();
                    let sub = x.data().select_rows(rows.iter());
                    TimeSeries::new(sub).map(|s| euclidean_distance_matrix(&s))
                } else {
                    Ok(euclidean_distance_matrix(x))
                }
            }
        }
    }
}
