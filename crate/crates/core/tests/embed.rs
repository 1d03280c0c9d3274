mod common;

use common::*;
use fig_core::embed::{
    alpha_decay_kernel, classical_mds, embed, knee_point, matrix_power, potential_distances, row_normalize,
    select_diffusion_time, smacof_mds, stress, von_neumann_entropy, DiffusionOperator, EmbedParams,
};
use fig_core::eval::{embedding_distances, mantel};
use fig_core::distance::euclidean_rows;
use fig_core::{DistanceMatrix, FigError, Method};
use nalgebra::DMatrix;

fn dist(points: &DMatrix<f64>) -> DistanceMatrix {
    euclidean_rows(points)
}

#[test]
fn kernel_is_one_at_zero_distance() {
    let mut m = DMatrix::from_element(4, 4, 1.0);
    m.fill_diagonal(0.0);
    m[(0, 1)] = 0.0;
    m[(1, 0)] = 0.0;
    let d = DistanceMatrix::from_matrix(&m, Method::Euclidean).unwrap();
    let k = alpha_decay_kernel(&d, 2, 40.0).unwrap();
    assert_eq!(k.kernel[(0, 1)], 1.0);
    assert_eq!(k.kernel[(2, 2)], 1.0);
}

#[test]
fn large_alpha_approaches_indicator() {
    let pts = random_matrix(12, 2, 1);
    let d = dist(&pts);
    let g = alpha_decay_kernel(&d, 3, 100.0).unwrap();
    let mut checked = 0;
    for i in 0..12 {
        for j in 0..12 {
            let ratio = d.get(i, j) / g.bandwidths[i];
            let raw = (-(ratio).powf(100.0)).exp();
            if ratio > 1.1 {
                assert!(raw < 1e-3);
                checked += 1;
            } else if ratio < 0.9 {
                assert!(raw > 1.0 - 1e-3);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn identical_points_are_rejected() {
    let d = DistanceMatrix::from_matrix(&DMatrix::zeros(5, 5), Method::Fig).unwrap();
    assert!(matches!(alpha_decay_kernel(&d, 2, 40.0), Err(FigError::IdenticalPoints)));
}

#[test]
fn row_normalize_examples() {
    let p = row_normalize(&DMatrix::from_element(5, 5, 2.0)).unwrap();
    assert!(p.p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    let mut k = DMatrix::from_element(3, 3, 1.0);
    k[(0, 2)] = 0.0;
    let p = row_normalize(&k).unwrap();
    for i in 0..3 {
        assert!((p.p.row(i).sum() - 1.0).abs() < 1e-12);
        for j in 0..3 {
            assert_eq!(p.p[(i, j)] > 0.0, k[(i, j)] > 0.0);
        }
    }
    let mut k = DMatrix::from_element(3, 3, 1.0);
    k.row_mut(1).fill(0.0);
    assert!(matches!(row_normalize(&k), Err(FigError::DisconnectedPoint(1))));
}

#[test]
fn powers_stay_row_stochastic() {
    let d = dist(&random_matrix(40, 3, 2));
    let op = row_normalize(&alpha_decay_kernel(&d, 5, 40.0).unwrap().kernel).unwrap();
    for t in [1, 2, 7, 33, 64, 100] {
        let pt = matrix_power(&op.p, t);
        for i in 0..40 {
            assert!((pt.row(i).sum() - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn identity_operator_selects_first_time() {
    let op = DiffusionOperator { p: DMatrix::identity(6, 6), degrees: None };
    let h = von_neumann_entropy(&op, 50);
    assert!(h.iter().all(|v| (v - h[0]).abs() < 1e-12));
    assert_eq!(select_diffusion_time(&op, 50).unwrap(), 1);
}

#[test]
fn knee_matches_brute_force_scan() {
    for c in [0.05, 0.2, 1.0, 3.0] {
        let curve: Vec<f64> = (1..=100).map(|t| 1.0 - (-(t as f64) * c).exp()).collect();
        let n = curve.len() as f64;
        let (a, b) = (curve[99] - curve[0], n - 1.0);
        let mut best = (f64::MIN, 0);
        for (k, &y) in curve.iter().enumerate() {
            let x = k as f64;
            let d = (a * x - b * (y - curve[0])).abs() / (a * a + b * b).sqrt();
            if d > best.0 + 1e-15 {
                best = (d, k + 1);
            }
        }
        assert_eq!(knee_point(&curve), best.1);
    }
}

#[test]
fn two_blobs_separate_in_potential_distance() {
    let mut pts = random_matrix(60, 2, 3).map(|v| v * 0.3);
    for i in 30..60 {
        pts[(i, 0)] += 10.0;
    }
    let d = dist(&pts);
    let op = row_normalize(&alpha_decay_kernel(&d, 5, 40.0).unwrap().kernel).unwrap();
    let t = select_diffusion_time(&op, 100).unwrap();
    let pot = potential_distances(&op, t).unwrap();
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for i in 0..60 {
        for j in i + 1..60 {
            if (i < 30) == (j < 30) {
                within += pot.get(i, j);
                nw += 1;
            } else {
                between += pot.get(i, j);
                nb += 1;
            }
        }
    }
    assert!((between / nb as f64) / (within / nw as f64) > 2.0);
}

#[test]
fn chain_potential_matches_naive_oracle() {
    let k = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.5, 0.0, 0.0,
        0.5, 1.0, 0.5, 0.0,
        0.0, 0.5, 1.0, 0.5,
        0.0, 0.0, 0.5, 1.0,
    ]);
    let op = row_normalize(&k).unwrap();
    for t in [1, 3, 6] {
        let mut pt: DMatrix<f64> = DMatrix::identity(4, 4);
        for _ in 0..t {
            let mut next: DMatrix<f64> = DMatrix::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    for l in 0..4 {
                        next[(i, j)] += pt[(i, l)] * op.p[(l, j)];
                    }
                }
            }
            pt = next;
        }
        let u = pt.map(|v| -(v + 1e-7).ln());
        let pot = potential_distances(&op, t).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = (u.row(i) - u.row(j)).norm();
                assert!((pot.get(i, j) - expected).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn identical_rows_have_zero_potential_distance() {
    let mut p = DMatrix::from_element(4, 4, 0.25);
    p[(2, 2)] = 0.4;
    p[(2, 3)] = 0.1;
    let pot = potential_distances(&DiffusionOperator { p, degrees: None }, 1).unwrap();
    assert_eq!(pot.get(0, 1), 0.0);
    assert!(pot.get(0, 2) > 0.0);
}

#[test]
fn classical_mds_recovers_configurations() {
    let line = DMatrix::from_fn(10, 1, |i, _| (i * i) as f64 * 0.1);
    let y = classical_mds(&dist(&line), 1).unwrap();
    assert!(procrustes_residual(&line, &y) < 1e-8);
    for seed in 0..5 {
        let pts = random_matrix(30, 2, 10 + seed);
        let y = classical_mds(&dist(&pts), 2).unwrap();
        assert!(procrustes_residual(&pts, &y) < 1e-6);
    }
    let square = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
    let d = dist(&square);
    assert!(stress(&d, &classical_mds(&d, 1).unwrap()) > 1e-3);
    assert!(matches!(classical_mds(&d, 4), Err(FigError::InvalidConfig(_))));
}

#[test]
fn smacof_examples() {
    let pts = random_matrix(20, 2, 20);
    let d = dist(&pts);
    let e = smacof_mds(&d, &pts, 500, 1e-6).unwrap();
    assert!(e.stress_history.len() <= 3);
    assert!(e.final_stress() < 1e-20);

    let mut m = random_matrix(50, 50, 21).map(|v| v.abs() + 1.0);
    m = (&m + m.transpose()) * 0.5;
    m.fill_diagonal(0.0);
    let d = DistanceMatrix::from_matrix(&m, Method::Fig).unwrap();
    let init = classical_mds(&d, 2).unwrap();
    let e = smacof_mds(&d, &init, 500, 1e-6).unwrap();
    assert!(e.final_stress() <= stress(&d, &init));
    for w in e.stress_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert!((stress(&d, &e.coords) - e.final_stress()).abs() <= 1e-9 * e.final_stress());
}

#[test]
fn embed_supports_two_and_three_dimensions() {
    let d = dist(&random_walk(80, 3, 30));
    for r in [2, 3] {
        let e = embed(&d, &EmbedParams { r, ..Default::default() }).unwrap();
        assert_eq!((e.n(), e.r()), (80, r));
        for key in ["knn", "alpha", "t", "t_selection", "r", "mds_tol", "mds_max_iter", "log_eps"] {
            assert!(e.metadata.contains_key(key), "{key}");
        }
    }
    let small = dist(&random_matrix(5, 2, 31));
    assert!(embed(&small, &EmbedParams::default()).is_err());
}

#[test]
fn fixed_time_override_is_recorded() {
    let d = dist(&random_walk(40, 2, 32));
    let e = embed(&d, &EmbedParams { t: Some(7), ..Default::default() }).unwrap();
    assert_eq!(e.metadata["t"], "7");
    assert_eq!(e.metadata["t_selection"], "fixed");
}

#[test]
fn embedding_is_permutation_equivariant() {
    let d = dist(&random_walk(60, 3, 33));
    let perm: Vec<usize> = (0..60).map(|i| (i * 17 + 5) % 60).collect();
    let a = embed(&d, &EmbedParams::default()).unwrap();
    let b = embed(&d.permuted(&perm), &EmbedParams::default()).unwrap();
    let a_perm = DMatrix::from_fn(60, 2, |i, c| a.coords[(perm[i], c)]);
    assert!(procrustes_residual(&a_perm, &b.coords) < 1e-6);
}

#[test]
fn mantel_scores_ignore_rigid_motions() {
    let d = dist(&random_walk(50, 2, 34));
    let e = embed(&d, &EmbedParams::default()).unwrap();
    let (s, c) = (0.7f64.sin(), 0.7f64.cos());
    let mut moved = e.clone();
    moved.coords = DMatrix::from_fn(50, 2, |i, k| {
        let (x, y) = (e.coords[(i, 0)], e.coords[(i, 1)]);
        if k == 0 { c * x - s * y + 4.0 } else { s * x + c * y - 1.5 }
    });
    let r1 = mantel(&embedding_distances(&e), &d, 0, 0).unwrap().r;
    let r2 = mantel(&embedding_distances(&moved), &d, 0, 0).unwrap().r;
    assert!((r1 - r2).abs() < 1e-12);
}
