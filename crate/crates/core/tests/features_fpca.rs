mod common;

use common::*;
use fig_core::basis::{eval_basis, fit_domain, gram, BasisFamily, BasisSpec};
use fig_core::distance::{
    euclidean_distance_matrix, fig_distance_matrix, fig_pair_distance, local_models, FigParams,
};
use fig_core::features::{compute_features, stride_subsample, window_indices, FeatureMatrix, WindowSpec};
use fig_core::fpca::{
    eigendecompose, local_covariance, local_mean, normalize_score, pc_score, vector_mahalanobis_direct,
    LocalModel, Normalization,
};
use fig_core::linalg::frobenius;
use fig_core::{FigError, TimeSeries};
use nalgebra::{DMatrix, DVector};

fn features_of(x: &DMatrix<f64>, b: usize, l1: usize) -> FeatureMatrix {
    let ts = TimeSeries::new(x.clone()).unwrap();
    let spec = fit_domain(&ts, b).unwrap();
    compute_features(&ts, &spec, WindowSpec::new(l1).unwrap()).unwrap()
}

#[test]
fn concatenated_basis_at_lower_bounds() {
    let spec = BasisSpec::new(BasisFamily::Fourier, 3, vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
    let v = eval_basis(&[0.0, 0.0], &spec).unwrap();
    let s2 = 2f64.sqrt();
    let expected = [1.0, s2, 0.0, 1.0, s2, 0.0];
    for (a, b) in v.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(matches!(eval_basis(&[0.0], &spec), Err(FigError::InvalidData(_))));
}

#[test]
fn seven_functions_per_dimension() {
    let ts = TimeSeries::new(random_matrix(10, 3, 1)).unwrap();
    assert_eq!(fit_domain(&ts, 7).unwrap().feature_count(), 21);
    assert!(gram(&fit_domain(&ts, 7).unwrap()).is_identity());
}

#[test]
fn window_examples() {
    assert_eq!(window_indices(0, 100, 10), 0..5);
    assert_eq!(window_indices(50, 100, 10), 45..55);
    assert_eq!(window_indices(99, 100, 1), 99..100);
    for i in 0..40 {
        let (lo, hi) = window(i, 40, 7);
        assert_eq!(window_indices(i, 40, 7), lo..hi + 1);
    }
}

#[test]
fn features_match_resummation() {
    let x = random_matrix(80, 2, 3);
    let ts = TimeSeries::new(x.clone()).unwrap();
    let spec = fit_domain(&ts, 5).unwrap();
    let f = compute_features(&ts, &spec, WindowSpec::new(10).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..80 {
        let (lo, hi) = window(i, 80, 10);
        let mut mean = DVector::zeros(10);
        for j in lo..=hi {
            mean += eval_basis(&[x[(j, 0)], x[(j, 1)]], &spec).unwrap();
        }
        mean /= (hi - lo + 1) as f64;
        worst = worst.max((f.values().row(i).transpose() - mean).amax());
        assert_eq!(f.values()[(i, 0)], 1.0);
    }
    assert!(worst < 1e-12);
}

#[test]
fn unit_window_features_are_basis_values() {
    let x = random_matrix(12, 2, 4);
    let ts = TimeSeries::new(x.clone()).unwrap();
    let spec = fit_domain(&ts, 7).unwrap();
    let f = compute_features(&ts, &spec, WindowSpec::new(1).unwrap()).unwrap();
    for i in 0..12 {
        let v = eval_basis(&[x[(i, 0)], x[(i, 1)]], &spec).unwrap();
        assert_eq!(f.values().row(i).transpose(), v);
    }
}

#[test]
fn stride_examples() {
    let f = features_of(&random_matrix(100, 1, 5), 3, 4);
    assert_eq!(stride_subsample(&f, 10).unwrap().nrows(), 10);
    assert_eq!(stride_subsample(&f, 100).unwrap().nrows(), 1);
    assert_eq!(stride_subsample(&f, 1).unwrap().values(), f.values());
}

#[test]
fn local_mean_and_covariance_match_two_pass_oracle() {
    let f = features_of(&random_walk(60, 2, 6), 5, 4);
    let l2 = WindowSpec::new(9).unwrap();
    let m = f.ncols();
    for i in [0, 3, 30, 59] {
        let (lo, hi) = window(i, 60, 9);
        let count = (hi - lo + 1) as f64;
        let mut mean = DVector::zeros(m);
        for j in lo..=hi {
            mean += f.values().row(j).transpose() / count;
        }
        assert!((local_mean(&f, i, l2) - &mean).amax() < 1e-12);
        let mut cov = DMatrix::zeros(m, m);
        for j in lo..=hi {
            let z = f.values().row(j).transpose() - &mean;
            cov += &z * z.transpose() / count;
        }
        let trace = cov.trace();
        cov += DMatrix::identity(m, m) * (1e-10 * trace / m as f64);
        assert!((local_covariance(&f, i, l2) - cov).amax() < 1e-10);
    }
}

#[test]
fn two_row_covariance() {
    let a = [0.2, 0.5, -1.0];
    let b = [1.0, 0.0, 0.5];
    let vals = DMatrix::from_row_slice(2, 3, &[a[0], a[1], a[2], b[0], b[1], b[2]]);
    let spec = BasisSpec::new(BasisFamily::Fourier, 3, vec![(0.0, 1.0)]).unwrap();
    let f = FeatureMatrix::from_parts(vals, spec, WindowSpec::new(1).unwrap()).unwrap();
    let c = local_covariance(&f, 1, WindowSpec::new(2).unwrap());
    let diff = DVector::from_iterator(3, a.iter().zip(&b).map(|(x, y)| x - y));
    let mut expected = &diff * diff.transpose() / 4.0;
    let ridge = 1e-10 * expected.trace() / 3.0;
    expected += DMatrix::identity(3, 3) * ridge;
    assert!((c - expected).amax() < 1e-15);
}

#[test]
fn eigendecompose_examples() {
    let w = fig_core::basis::GramMatrix::identity(3);
    let (vals, vecs) = eigendecompose(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0])), &w, 2).unwrap();
    assert_eq!(vals.as_slice(), &[3.0, 2.0]);
    assert!((vecs.column(0) - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-14);
    assert!((vecs.column(1) - DVector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-14);
    assert!(matches!(eigendecompose(&DMatrix::identity(3, 3), &w, 4), Err(FigError::InvalidConfig(_))));

    let a = random_spd(10, 0.01, 9);
    let w = fig_core::basis::GramMatrix::identity(10);
    let (vals, vecs) = eigendecompose(&a, &w, 10).unwrap();
    let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
    assert!(frobenius(&(rebuilt - &a)) / frobenius(&a) < 1e-8);
    assert!((vecs.transpose() * &vecs - DMatrix::identity(10, 10)).amax() < 1e-8);
    for c in 0..10 {
        let first = vecs.column(c).iter().copied().find(|v| v.abs() > 1e-12).unwrap();
        assert!(first > 0.0);
    }
}

#[test]
fn score_examples() {
    let f = features_of(&random_walk(50, 2, 10), 3, 3);
    let w = fig_core::basis::GramMatrix::identity(f.ncols());
    let model = LocalModel::fit(&f, 20, WindowSpec::new(12).unwrap(), &w, 6, Normalization::Exp).unwrap();
    for k in 0..6 {
        assert!(pc_score(&model.mean, &model, &w, k).abs() < 1e-15);
    }
    let shifted = &model.mean + model.eigvecs.column(2) * 0.7;
    for k in 0..6 {
        let expected = if k == 2 { 0.7 } else { 0.0 };
        assert!((pc_score(&shifted, &model, &w, k) - expected).abs() < 1e-12);
    }
    let a = f.values().row(33).transpose();
    for k in 0..6 {
        let direct = (&a - &model.mean).dot(&model.eigvecs.column(k));
        assert!((pc_score(&a, &model, &w, k) - direct).abs() < 1e-12);
    }
}

#[test]
fn normalization_examples() {
    assert_eq!(normalize_score(1.0, 0.0, Normalization::Exp), Some(1.0));
    assert!((normalize_score(2.0, 1.0, Normalization::Exp).unwrap() - 0.7357588823).abs() < 1e-10);
    assert_eq!(normalize_score(3.0, 4.0, Normalization::InvSqrt), Some(1.5));
    assert_eq!(normalize_score(3.0, 1e-13, Normalization::InvSqrt), None);
}

#[test]
fn mahalanobis_trivial_cases() {
    let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let v = DVector::from_vec(vec![0.0, 1.0, 2.5]);
    let i3 = DMatrix::identity(3, 3);
    assert_eq!(vector_mahalanobis_direct(&u, &u, &i3, &i3), 0.0);
    assert!((vector_mahalanobis_direct(&u, &v, &i3, &i3) - 2f64.sqrt() * (&u - &v).norm()).abs() < 1e-14);
}

#[test]
fn pair_distance_with_shared_covariance_matches_direct() {
    // a stationary toy series whose windows all span the full series share
    // one covariance, so the two-sided distance is the direct form
    let x = random_matrix(30, 2, 11);
    let params = FigParams { basis_count: 3, l1: 1, l2: 61, normalization: Normalization::InvSqrt, ..Default::default() };
    let ts = TimeSeries::new(x).unwrap();
    let f = fig_core::distance::fig_features(&ts, &params).unwrap();
    let w = fig_core::basis::GramMatrix::identity(f.ncols());
    let models = local_models(&f, params.l2, None, params.normalization).unwrap();
    let c = &models[0].cov;
    let d = fig_core::fpca::vector_mahalanobis_pc(
        &f.values().row(4).transpose(),
        &f.values().row(9).transpose(),
        c,
        c,
        Normalization::InvSqrt,
    )
    .unwrap();
    let pair = fig_pair_distance(4, 9, &models, &f, &w).unwrap();
    assert!((pair - d).abs() <= 1e-6 * d);
}

#[test]
fn pair_distance_examples() {
    let f = features_of(&random_walk(40, 2, 12), 5, 4);
    let w = fig_core::basis::GramMatrix::identity(f.ncols());
    let models = local_models(&f, 8, None, Normalization::Exp).unwrap();
    assert_eq!(fig_pair_distance(7, 7, &models, &f, &w).unwrap(), 0.0);
    assert_eq!(
        fig_pair_distance(3, 17, &models, &f, &w).unwrap(),
        fig_pair_distance(17, 3, &models, &f, &w).unwrap()
    );
    let mut mixed = models.clone();
    mixed[3].normalization = Normalization::InvSqrt;
    assert!(matches!(fig_pair_distance(3, 17, &mixed, &f, &w), Err(FigError::InvalidConfig(_))));
}

#[test]
fn distance_matrix_examples() {
    let two = TimeSeries::from_rows(&[vec![0.3, 0.1], vec![0.3, 0.1]]).unwrap();
    let d = fig_distance_matrix(&two, &FigParams::default()).unwrap();
    assert!(d.matrix().iter().all(|&v| v == 0.0));
    let one = TimeSeries::from_rows(&[vec![0.3]]).unwrap();
    assert!(matches!(fig_distance_matrix(&one, &FigParams::default()), Err(FigError::InvalidData(_))));
    let d = fig_distance_matrix(&TimeSeries::new(random_walk(60, 3, 13)).unwrap(), &FigParams::default()).unwrap();
    assert_eq!(d.matrix(), &d.matrix().transpose());
    assert!((0..60).all(|i| d.get(i, i) == 0.0));
}

#[test]
fn translation_invariance() {
    let x = random_walk(50, 2, 14);
    let shifted = x.map(|v| v + 3.25);
    let a = fig_distance_matrix(&TimeSeries::new(x).unwrap(), &FigParams::default()).unwrap();
    let b = fig_distance_matrix(&TimeSeries::new(shifted).unwrap(), &FigParams::default()).unwrap();
    assert!((a.matrix() - b.matrix()).amax() < 1e-6 * a.matrix().amax());
}

#[test]
fn euclidean_examples() {
    let d = euclidean_distance_matrix(&TimeSeries::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap());
    assert_eq!(d.get(0, 1), 5.0);
    let x = random_matrix(20, 4, 15);
    let d = euclidean_distance_matrix(&TimeSeries::new(x.clone()).unwrap());
    for i in 0..20 {
        for j in 0..20 {
            let mut s = 0.0;
            for c in 0..4 {
                s += (x[(i, c)] - x[(j, c)]).powi(2);
            }
            assert!((d.get(i, j) - s.sqrt()).abs() < 1e-12);
        }
    }
}
