//! Synthetic data: a Brownian walk of two angles observed as noisy points on
//! the unit sphere, and a piecewise-stationary AR(1) surrogate with labeled
//! stages.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::TimeSeries;
use crate::error::{invalid_config, Result};

/// Elevation stays in `[ELEVATION_MARGIN, π − ELEVATION_MARGIN]`.
pub const ELEVATION_MARGIN: f64 = 0.1;

pub const DEFAULT_SIGMA_STEP: f64 = 0.015;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct SphereWalk {
    /// Columns: azimuth in `[0, 2π)`, elevation.
    pub theta: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub sigma_noise: f64,
    pub sigma_step: f64,
    pub seed: u64,
}

impl SphereWalk {
    pub fn observations(&self) -> TimeSeries {
        TimeSeries::new(self.x.clone()).expect("simulated values are finite")
    }

    pub fn angles(&self) -> TimeSeries {
        TimeSeries::new(self.theta.clone()).expect("simulated values are finite")
    }
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    while v < lo || v > hi {
        if v < lo {
            v = 2.0 * lo - v;
        }
        if v > hi {
            v = 2.0 * hi - v;
        }
    }
    v
}

pub fn simulate_sphere_walk(n: usize, sigma_step: f64, sigma_noise: f64, seed: u64) -> Result<SphereWalk> {
    if n < 2 {
        return Err(invalid_config("a walk needs at least 2 steps"));
    }
    if !(sigma_step >= 0.0 && sigma_noise >= 0.0) || !sigma_step.is_finite() || !sigma_noise.is_finite() {
        return Err(invalid_config("walk and noise scales must be finite and non-negative"));
    }
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = (ELEVATION_MARGIN, PI - ELEVATION_MARGIN);
    let mut theta = DMatrix::zeros(n, 2);
    let (mut az, mut el) = (PI, PI / 2.0);
    for t in 0..n {
        if t > 0 {
            let w1: f64 = rng.sample(StandardNormal);
            let w2: f64 = rng.sample(StandardNormal);
            az = (az + sigma_step * w1).rem_euclid(TAU);
            // rem_euclid can round up to exactly 2π
            if az >= TAU {
                az = 0.0;
            }
            el = reflect(el + sigma_step * w2, lo, hi);
        }
        theta[(t, 0)] = az;
        theta[(t, 1)] = el;
    }
    let y = DMatrix::from_fn(n, 3, |t, c| {
        let (a, e) = (theta[(t, 0)], theta[(t, 1)]);
        match c {
            0 => e.sin() * a.cos(),
            1 => e.sin() * a.sin(),
            _ => e.cos(),
        }
    });
    let mut x = y.clone();
    for t in 0..n {
        for c in 0..3 {
            let z: f64 = rng.sample(StandardNormal);
            x[(t, c)] += sigma_noise * z;
        }
    }
    Ok(SphereWalk { theta, y, x, sigma_noise, sigma_step, seed })
}

pub const STAGE_NAMES: [&str; 4] = ["REM", "Awake", "S1-S2", "S3-S4"];

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateConfig {
    pub n_segments: usize,
    pub d: usize,
    pub segment_len: usize,
    pub n_stages: usize,
    /// Row-stochastic stage transition matrix; `None` uses [`SurrogateConfig::stay_probability`].
    pub transition: Option<DMatrix<f64>>,
    pub stay_probability: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { n_segments: 200, d: 6, segment_len: 32, n_stages: 4, transition: None, stay_probability: 0.9 }
    }
}

impl SurrogateConfig {
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        match &self.transition {
            Some(t) => t.clone(),
            None => {
                let s = self.n_stages;
                if s == 1 {
                    return DMatrix::from_element(1, 1, 1.0);
                }
                let off = (1.0 - self.stay_probability) / (s - 1) as f64;
                DMatrix::from_fn(s, s, |i, j| if i == j { self.stay_probability } else { off })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_segments < 40 {
            return Err(invalid_config("the surrogate needs at least 40 segments"));
        }
        if self.d < 2 {
            return Err(invalid_config("the surrogate needs at least 2 dimensions"));
        }
        if self.segment_len == 0 {
            return Err(invalid_config("segment length must be positive"));
        }
        if self.n_stages == 0 || self.n_stages > STAGE_NAMES.len() {
            return Err(invalid_config(format!("n_stages must lie in 1..={}", STAGE_NAMES.len())));
        }
        if !(0.0..=1.0).contains(&self.stay_probability) {
            return Err(invalid_config("stay probability must lie in [0, 1]"));
        }
        let t = self.transition_matrix();
        if t.nrows() != self.n_stages || t.ncols() != self.n_stages {
            return Err(invalid_config("transition matrix must be n_stages × n_stages"));
        }
        for i in 0..t.nrows() {
            let row = t.row(i);
            if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(invalid_config(format!("transition row {i} is not a probability vector")));
            }
        }
        Ok(())
    }
}

/// Per-stage AR(1) parameters: lag-one correlation, marginal scale, mean
/// level, and cross-dimension coupling.
#[derive(Clone, Copy, Debug)]
struct StageDynamics {
    rho: f64,
    scale: f64,
    level: f64,
    coupling: f64,
}

const STAGES: [StageDynamics; 4] = [
    StageDynamics { rho: 0.9, scale: 0.6, level: 0.0, coupling: 0.3 },
    StageDynamics { rho: 0.2, scale: 1.2, level: 0.8, coupling: 0.0 },
    StageDynamics { rho: 0.6, scale: 0.9, level: -0.6, coupling: -0.4 },
    StageDynamics { rho: 0.97, scale: 1.6, level: 0.3, coupling: 0.6 },
];

fn draw_index(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in probs.enumerate() {
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

#[derive(Clone, Debug)]
pub struct StagedSurrogate {
    pub series: TimeSeries,
    /// Stage index of every sample.
    pub stages: Vec<usize>,
}

/// Piecewise-stationary multivariate AR(1). Each segment of `segment_len`
/// samples follows one stage; stages evolve as a Markov chain over segments
/// starting from a uniformly drawn stage.
pub fn simulate_staged_surrogate(cfg: &SurrogateConfig, seed: u64) -> Result<StagedSurrogate> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let trans = cfg.transition_matrix();
    let s = cfg.n_stages;
    let d = cfg.d;
    let n = cfg.n_segments * cfg.segment_len;
    let mut stage = draw_index(&mut rng, std::iter::repeat(1.0 / s as f64).take(s));
    let mut data = DMatrix::zeros(n, d);
    let mut stages = Vec::with_capacity(n);
    let mut prev = vec![0.0; d];
    let mut z = vec![0.0; d];
    for seg in 0..cfg.n_segments {
        if seg > 0 {
            stage = draw_index(&mut rng, trans.row(stage).iter().copied());
        }
        let dyn_ = STAGES[stage];
        let innov = dyn_.scale * (1.0 - dyn_.rho * dyn_.rho).sqrt();
        for k in 0..cfg.segment_len {
            let t = seg * cfg.segment_len + k;
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for c in 0..d {
                let level = if c % 2 == 0 { dyn_.level } else { -dyn_.level };
                let shock = z[c] + dyn_.coupling * z[(c + 1) % d];
                let v = level + dyn_.rho * (prev[c] - level) + innov * shock;
                data[(t, c)] = v;
            }
            for c in 0..d {
                prev[c] = data[(t, c)];
            }
            stages.push(stage);
        }
    }
    let labels = stages.iter().map(|&k| STAGE_NAMES[k].to_string()).collect();
    let series = TimeSeries::with_labels(data, Some(labels))?;
    Ok(StagedSurrogate { series, stages })
}
