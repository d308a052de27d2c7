mod common;

use common::*;
use patchdrift::ideal_free::*;
use patchdrift::linalg::Matrix;
use patchdrift::model::{exchangeable_sigma, Landscape};
use proptest::prelude::*;
use rand::Rng;

fn check_kkt(mu: &[f64], sigma: &Matrix<f64>, s: &IdealFreeSolution<f64>) {
    let y = s.y_star.as_slice();
    let grad: Vec<f64> = mu.iter().zip(sigma.mul_vec(y)).map(|(m, v)| m - v).collect();
    for i in 0..mu.len() {
        if s.support.contains(&i) {
            assert!((grad[i] - s.lambda).abs() <= 1e-9);
            assert!(y[i] > 0.0);
        } else {
            assert_eq!(y[i], 0.0);
            assert!(grad[i] - s.lambda <= 1e-9);
        }
    }
    assert!(s.kkt_residual <= 1e-9);
}

#[test]
fn symmetric_pair() {
    let s = optimize(&[0.3, 0.3], &Matrix::identity(2)).unwrap();
    assert_eq!(s.y_star.as_slice(), &[0.5, 0.5]);
    assert!(close(s.lambda, -0.2, 1e-15));
    assert!(close(chi_upper_bound(&[0.3, 0.3], &Matrix::identity(2)).unwrap(), 0.05, 1e-15));
}

#[test]
fn stays_in_one_place_when_the_gap_is_large() {
    let mu = [1.0, 0.0];
    let sigma = Matrix::diag(&[0.1, 0.1]);
    let s = optimize(&mu, &sigma).unwrap();
    assert_eq!(s.y_star.as_slice(), &[1.0, 0.0]);
    assert_eq!(s.support, vec![0]);
    assert!(mu[0] - mu[1] > sigma[(0, 0)] - sigma[(1, 0)]);
    check_kkt(&mu, &sigma, &s);
}

#[test]
fn active_set_matches_projected_gradient() {
    let mut r = rng(101);
    for case in 0..50 {
        let n = 3 + case % 4;
        let mu = random_vec(&mut r, n, -1.0, 1.0);
        let sigma = random_spd(&mut r, n, 0.2);
        let s = optimize(&mu, &sigma).unwrap();
        let oracle = optimize_projected_gradient(&mu, &sigma, 1_000_000, 1e-15).unwrap();
        for (a, b) in s.y_star.as_slice().iter().zip(oracle.as_slice()) {
            assert!(close(*a, *b, 1e-6), "case {case}: {a} vs {b}");
        }
        check_kkt(&mu, &sigma, &s);
    }
}

#[test]
fn uncorrelated_closed_form() {
    let c = closed_form_uncorrelated(&[0.3, 0.3], &[1.0, 4.0]).unwrap();
    let y = c.interior().unwrap().as_slice();
    assert!(close(y[0], 0.8, 1e-15) && close(y[1], 0.2, 1e-15));

    let var = [1.0, 2.0, 0.5, 4.0];
    let c = closed_form_uncorrelated(&[0.7; 4], &var).unwrap();
    let prec: f64 = var.iter().map(|v| 1.0 / v).sum();
    for (yi, vi) in c.interior().unwrap().as_slice().iter().zip(var) {
        assert!(close(*yi, 1.0 / vi / prec, 1e-15));
    }
}

#[test]
fn closed_forms_agree_with_the_optimizer_when_interior() {
    let mut r = rng(7);
    let (mut interior, mut boundary) = (0, 0);
    for _ in 0..60 {
        let n = 2 + r.random_range(0..5usize);
        let mu = random_vec(&mut r, n, 0.0, 1.0);
        let var = random_vec(&mut r, n, 0.5, 3.0);
        let sigma = Matrix::diag(&var);
        let opt = optimize(&mu, &sigma).unwrap();
        match closed_form_uncorrelated(&mu, &var).unwrap() {
            ClosedForm::Interior(y) => {
                interior += 1;
                for (a, b) in y.as_slice().iter().zip(opt.y_star.as_slice()) {
                    assert!(close(*a, *b, 1e-12));
                }
            }
            ClosedForm::InteriorConditionFails(raw) => {
                boundary += 1;
                assert!(opt.support.len() < n);
                assert!(raw.iter().any(|&v| v <= 0.0));
            }
        }
        let s2 = r.random_range(0.5..3.0);
        let rho = r.random_range(-0.9 / (n as f64 - 1.0).max(1.0)..0.9);
        let sigma = exchangeable_sigma(n, s2, rho).unwrap();
        let opt = optimize(&mu, &sigma).unwrap();
        match closed_form_exchangeable(&mu, s2, rho).unwrap() {
            ClosedForm::Interior(y) => {
                for (a, b) in y.as_slice().iter().zip(opt.y_star.as_slice()) {
                    assert!(close(*a, *b, 1e-12));
                }
            }
            ClosedForm::InteriorConditionFails(_) => assert!(opt.support.len() < n),
        }
    }
    assert!(interior > 5 && boundary > 5);
}

#[test]
fn exchangeable_form_reduces_to_uncorrelated_form() {
    let mu = [0.4, 0.5, 0.45, 0.6];
    let a = closed_form_exchangeable(&mu, 1.5, 0.0).unwrap();
    let b = closed_form_uncorrelated(&mu, &[1.5; 4]).unwrap();
    for (x, y) in a.interior().unwrap().as_slice().iter().zip(b.interior().unwrap().as_slice()) {
        assert!(close(*x, *y, 1e-15));
    }
    let flat = closed_form_exchangeable(&[0.2; 5], 1.0, 0.3).unwrap();
    assert!(flat.interior().unwrap().as_slice().iter().all(|&v| close(v, 0.2, 1e-15)));
}

#[test]
fn stronger_correlation_abandons_poor_patches() {
    let n = 15;
    let mu: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
    let mean = mu.iter().sum::<f64>() / n as f64;
    let solve = |rho: f64| optimize(&mu, &exchangeable_sigma(n, 2.0, rho).unwrap()).unwrap();
    let (a, b, c) = (solve(0.0), solve(0.5), solve(0.95));
    for i in (0..n).filter(|&i| mu[i] < mean - 1e-12) {
        let ys = [a.y_star.as_slice()[i], b.y_star.as_slice()[i], c.y_star.as_slice()[i]];
        assert!(ys[0] > 0.0, "{i}: {ys:?}");
        for w in ys.windows(2) {
            assert!(w[1] < w[0] || w[1] == 0.0, "{i}: {ys:?}");
        }
    }
    assert!(c.support.len() < b.support.len() && b.support.len() <= a.support.len());
}

#[test]
fn equal_exchangeable_patches_bound() {
    for (n, rho) in [(2, 0.0), (5, 0.3), (9, -0.1)] {
        let g = chi_upper_bound(&vec![0.4; n], &exchangeable_sigma(n, 1.3, rho).unwrap()).unwrap();
        let expect = 0.4 - 1.3 * (1.0 + (n as f64 - 1.0) * rho) / (2.0 * n as f64);
        assert!(close(g, expect, 1e-14));
    }
}

#[test]
fn persistence_counts() {
    assert_eq!(persistence_patch_count(0.3, 1.0, 0.0).unwrap(), PatchCount::Patches(2));
    assert_eq!(persistence_patch_count(0.3, 1.0, 0.6).unwrap(), PatchCount::Infeasible);
    assert_eq!(persistence_patch_count(0.3, 1.0, 0.7).unwrap(), PatchCount::Infeasible);
    assert_eq!(persistence_patch_count(0.3, 0.6 * (1.0 + 1e-9), 0.0).unwrap(), PatchCount::Patches(2));
    assert_eq!(persistence_patch_count(0.3, 0.5, 0.0).unwrap(), PatchCount::Patches(1));
    match persistence_patch_count(0.1, 1.0, 0.1).unwrap() {
        PatchCount::Patches(n) => {
            let g = |n: f64| 0.1 - ((n - 1.0) * 0.1 + 1.0) / (2.0 * n);
            assert!(g(n as f64) > 0.0 && g(n as f64 - 1.0) <= 0.0);
        }
        PatchCount::Infeasible => panic!(),
    }
}

#[test]
fn rejects_indefinite_covariance() {
    let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(optimize(&[0.0, 0.0], &s).is_err());
}

#[test]
fn single_precision() {
    let s = optimize(&[0.3f32, 0.1, 0.2], &Matrix::diag(&[1.0f32, 2.0, 0.5])).unwrap();
    let d = optimize(&[0.3f64, 0.1, 0.2], &Matrix::diag(&[1.0f64, 2.0, 0.5])).unwrap();
    for (a, b) in s.y_star.as_slice().iter().zip(d.y_star.as_slice()) {
        assert!((*a as f64 - b).abs() < 1e-5);
    }
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Matrix<f64>)> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n * n),
        )
            .prop_map(move |(mu, a)| {
                let a = Matrix::from_row_slice(n, n, &a);
                let mut s = a.matmul(&a.transpose());
                for i in 0..n {
                    s[(i, i)] += 0.1;
                }
                (mu, Matrix::from_fn(n, n, |i, j| (s[(i, j)] + s[(j, i)]) / 2.0))
            })
    })
}

proptest! {
    #[test]
    fn optimum_is_unique_under_relabelling((mu, sigma) in instance(), shift in 0usize..6) {
        let n = mu.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).rev().collect();
        let a = optimize(&mu, &sigma).unwrap();
        let pmu: Vec<f64> = perm.iter().map(|&p| mu[p]).collect();
        let b = optimize(&pmu, &sigma.select(&perm)).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            prop_assert!((b.y_star.as_slice()[k] - a.y_star.as_slice()[p]).abs() <= 1e-9);
        }
    }

    #[test]
    fn support_rerun_reproduces_the_optimum((mu, sigma) in instance()) {
        let a = optimize(&mu, &sigma).unwrap();
        let b = optimize_on_support(&mu, &sigma, &a.support).unwrap();
        for (x, y) in a.y_star.as_slice().iter().zip(b.y_star.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn shifting_growth_rates_shifts_the_bound((mu, sigma) in instance(), c in -5.0f64..5.0) {
        let a = optimize(&mu, &sigma).unwrap();
        let shifted: Vec<f64> = mu.iter().map(|m| m + c).collect();
        let b = optimize(&shifted, &sigma).unwrap();
        prop_assert!((b.g_value - a.g_value - c).abs() <= 1e-12 * (1.0 + c.abs()));
        for (x, y) in a.y_star.as_slice().iter().zip(b.y_star.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn bound_dominates_every_stationary_plug_in((mu, sigma) in instance(), seed in 0u64..500) {
        let n = mu.len();
        let q = random_generator(&mut rng(seed), n);
        let l = Landscape::new(mu.clone(), sigma.clone()).unwrap();
        let g = chi_upper_bound(&mu, &sigma).unwrap();
        prop_assert!(g >= l.mean_growth(q.pi().as_slice()) - 1e-12);
        let s = optimize(&mu, &sigma).unwrap();
        prop_assert!(s.kkt_residual <= 1e-9);
    }
}
