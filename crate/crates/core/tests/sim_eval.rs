mod common;

use common::*;
use fig_core::config::PipelineConfig;
use fig_core::eval::{benchmark_distance_stage, mantel, noise_sweep, summarize, window_sweep, RAW_LABEL};
use fig_core::simulate::{simulate_sphere_walk, simulate_staged_surrogate, SurrogateConfig};
use fig_core::distance::{euclidean_distance_matrix, euclidean_rows};
use fig_core::{DistanceMatrix, Method, TimeSeries};
use nalgebra::DMatrix;

fn random_dm(n: usize, seed: u64) -> DistanceMatrix {
    euclidean_rows(&random_matrix(n, 3, seed))
}

#[test]
fn mantel_matches_naive_pearson() {
    for seed in 0..5 {
        let a = random_dm(25, seed);
        let b = random_dm(25, 100 + seed);
        let r = mantel(&a, &b, 0, 0).unwrap().r;
        assert!((r - pearson(&upper(a.matrix()), &upper(b.matrix()))).abs() < 1e-12);
    }
}

#[test]
fn mantel_self_and_affine_invariance() {
    let a = random_dm(20, 1);
    assert!((mantel(&a, &a, 0, 0).unwrap().r - 1.0).abs() < 1e-12);
    let b = random_dm(20, 2);
    let r = mantel(&a, &b, 0, 0).unwrap().r;
    let mut scaled = a.matrix().map(|v| 3.5 * v + 0.25);
    scaled.fill_diagonal(0.0);
    let scaled = DistanceMatrix::from_matrix(&scaled, Method::Fig).unwrap();
    assert!((mantel(&scaled, &b, 0, 0).unwrap().r - r).abs() < 1e-12);
    assert!((mantel(&a, &scaled, 0, 0).unwrap().r - 1.0).abs() < 1e-12);
}

#[test]
fn permutation_p_values_are_uniform_under_independence() {
    let reps = 100;
    let mut p: Vec<f64> = (0..reps)
        .map(|k| mantel(&random_dm(30, 1000 + k), &random_dm(30, 5000 + k), 999, k).unwrap().p_value.unwrap())
        .collect();
    p.sort_by(f64::total_cmp);
    let n = reps as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).abs().max((v - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    // two-sided Kolmogorov critical value at level 0.01
    assert!(ks < 1.628 / n.sqrt(), "KS statistic {ks}");
    assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));
}

#[test]
fn raw_mantel_decreases_with_noise() {
    let sigmas = [0.0, 0.05, 0.1, 0.15];
    let means: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            (1..=5)
                .map(|seed| {
                    let w = simulate_sphere_walk(1000, 0.015, s, seed).unwrap();
                    let truth = euclidean_distance_matrix(&w.angles());
                    mantel(&euclidean_distance_matrix(&w.observations()), &truth, 0, 0).unwrap().r
                })
                .sum::<f64>()
                / 5.0
        })
        .collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0], "{means:?}");
    }
    assert!(means[0] > 0.99);
}

#[test]
fn same_stage_segments_are_closer_under_fig() {
    let cfg = SurrogateConfig { n_segments: 60, ..Default::default() };
    let data = simulate_staged_surrogate(&cfg, 3).unwrap();
    let mut pc = PipelineConfig::default();
    pc.l1 = cfg.segment_len;
    pc.stride = cfg.segment_len;
    pc.l2 = 10;
    let d = pc.distance(&data.series, Method::Fig).unwrap();
    let labels: Vec<usize> = (0..d.n()).map(|i| data.stages[i * cfg.segment_len]).collect();
    let (mut same, mut diff) = (Vec::new(), Vec::new());
    for i in 0..d.n() {
        for j in i + 1..d.n() {
            if labels[i] == labels[j] { same.push(d.get(i, j)) } else { diff.push(d.get(i, j)) }
        }
    }
    // Mann-Whitney U by brute-force pair comparison
    let mut u = 0.0;
    for a in &same {
        for b in &diff {
            u += if a < b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    let (n1, n2) = (same.len() as f64, diff.len() as f64);
    let z = (u - n1 * n2 / 2.0) / (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
    assert!(z > 3.0, "z = {z}");
}

fn small_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.sim_n = 150;
    cfg.surrogate_n_segments = 40;
    cfg.l1 = 32;
    cfg.stride = 32;
    cfg
}

#[test]
fn noise_sweep_produces_every_cell() {
    let mut cfg = small_config();
    cfg.l1 = 10;
    cfg.stride = 1;
    let records = noise_sweep(&[0.0, 0.1], &[1, 2], &cfg).unwrap();
    assert_eq!(records.len(), 12);
    let summary = summarize(&records);
    assert_eq!(summary.len(), 6);
    let raw0 = summary.iter().find(|r| r.method == RAW_LABEL && r.setting == 0.0).unwrap();
    assert!(raw0.mean > 0.95);
    assert!(records.iter().all(|r| r.mantel_r.abs() <= 1.0));
    assert!(noise_sweep(&[0.1], &[1, 2], &cfg).is_err());
}

#[test]
fn window_grids_are_symmetric_with_unit_diagonal() {
    let cfg = small_config();
    let grids = window_sweep(&[5, 20], &[1, 2], &cfg.surrogate(), &cfg).unwrap();
    assert_eq!(grids.len(), 2);
    for g in &grids {
        assert_eq!(g.m, g.m.transpose());
        for i in 0..2 {
            assert_eq!(g.m[(i, i)], 1.0);
        }
        assert_eq!(g.per_seed.len(), 2);
    }
    let single = window_sweep(&[10], &[1], &cfg.surrogate(), &cfg).unwrap();
    assert_eq!(single[0].m, DMatrix::from_element(1, 1, 1.0));
}

#[test]
fn benchmark_reports_each_repetition() {
    let x = TimeSeries::new(random_walk(40, 3, 9)).unwrap();
    let cfg = PipelineConfig::default();
    let res = benchmark_distance_stage(&x, &cfg, &[Method::Fig, Method::Dig], 3).unwrap();
    assert_eq!(res.len(), 2);
    for r in &res {
        assert_eq!(r.seconds.len(), 3);
        assert!(r.seconds.iter().all(|&s| s > 0.0));
        assert!(r.median() > 0.0);
    }
    assert!(benchmark_distance_stage(&x, &cfg, &[Method::Fig], 2).is_err());
}
