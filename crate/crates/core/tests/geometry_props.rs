#![allow(clippy::needless_range_loop)]

mod common;

use std::f64::consts::PI;

use common::*;
use flatpencil::geometry::{
    affinor_at, characteristic_polynomial, connection_residuals, curvature_symmetry_residual,
    lowered_nijenhuis, mn_identity_residuals, nijenhuis, pencil_eigenvalues, tensor_m_from,
};
use flatpencil::{linalg, Complex64 as C, MetricField, Variance};
use proptest::prelude::*;

fn random_pair(seed: u64, dim: usize) -> (MetricField, MetricField, Vec<C>) {
    let mut r = rng(seed);
    let g1 = metric_from(Variance::Contravariant, &random_metric_entries(&mut r, dim));
    let g2 = metric_from(Variance::Contravariant, &random_metric_entries(&mut r, dim));
    let x = random_point(&mut r, dim, -1.0, 1.0);
    (g1, g2, x)
}

#[test]
fn sphere_curvature_matches_finite_difference_oracle() {
    let g = metric_from(Variance::Covariant, &strs(&[&["1", "0"], &["0", "sin(u1)^2"]]));
    let x = pt(&[PI / 4.0, 0.2]);
    let geo = g.geometry(&x).unwrap();
    let fd = fd_curvature_upup(&g, &x);
    assert!(max_diff(&geo.riemann_upup, &fd) < 1e-6);
    assert!(geo.constant_curvature_residual(re(1.0)) < 1e-12);
}

#[test]
fn polar_curvature_matches_finite_difference_oracle() {
    let g = metric_from(Variance::Covariant, &strs(&[&["1", "0"], &["0", "u1^2"]]));
    let x = pt(&[2.0, 0.3]);
    let fd = fd_curvature_upup(&g, &x);
    assert!(fd.iter().all(|z| z.norm() < 1e-6));
    assert!(g.geometry(&x).unwrap().max_curvature() < 1e-14);
}

#[test]
fn random_affinor_derivative_matches_finite_differences() {
    let (g1, g2, _) = random_pair(11, 2);
    let x = pt(&[1.0, 2.0]);
    let a = affinor_at(&g1, &g2, &x).unwrap();
    // direct product of values
    let v1 = g1.eval(&x).unwrap();
    let v2 = linalg::invert(&g2.eval(&x).unwrap(), 2, 0.0).unwrap().0;
    assert!(max_diff(&a.v, &linalg::matmul(&v1, &v2, 2)) < 1e-13);
    for s in 0..2 {
        for idx in 0..4 {
            let f = |y: &[C]| affinor_at(&g1, &g2, y).unwrap().v[idx];
            let fd = fd1(&f, &x, s, 1e-3);
            assert!(rel_err(a.dv[s * 4 + idx], fd) < 1e-6);
        }
    }
}

#[test]
fn random_three_dimensional_pencil_roots_are_roots() {
    for seed in 0..20 {
        let (g1, g2, x) = random_pair(100 + seed, 3);
        let s = pencil_eigenvalues(&g1, &g2, &x).unwrap();
        let a = g1.eval(&x).unwrap();
        let b = g2.eval(&x).unwrap();
        for lam in &s.values {
            let m: Vec<C> = a.iter().zip(&b).map(|(p, q)| p - lam * q).collect();
            let scale = (linalg::norm1(&a, 3) + lam.norm() * linalg::norm1(&b, 3)).powi(3);
            assert!(linalg::det(&m, 3).norm() / scale < 1e-8, "seed {seed}");
        }
        for w in s.values.windows(2) {
            assert!(w[0].re < w[1].re || (w[0].re == w[1].re && w[0].im <= w[1].im));
        }
    }
}

#[test]
fn characteristic_polynomial_matches_determinant() {
    let (g1, g2, x) = random_pair(5, 3);
    let v = affinor_at(&g1, &g2, &x).unwrap().v;
    let p = characteristic_polynomial(&v, 3);
    for z in [re(0.3), C::new(-1.0, 2.0)] {
        let m: Vec<C> = (0..9)
            .map(|k| if k % 4 == 0 { z - v[k] } else { -v[k] })
            .collect();
        let val: C = p.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c);
        assert!((val - linalg::det(&m, 3)).norm() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_inverse_and_connection_identities(seed in any::<u64>(), dim in 2usize..=3) {
        let (g1, _, x) = random_pair(seed, dim);
        let geo = g1.geometry(&x).unwrap();
        let p = linalg::matmul(&geo.g_up, &geo.g_down, dim);
        prop_assert!(max_diff(&p, &linalg::identity(dim)) < 1e-10);
        let n = dim;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert_eq!(geo.gamma(i, j, k), geo.gamma(i, k, j));
                }
            }
        }
        let [c1, c2] = connection_residuals(&geo);
        prop_assert!(c1 < 1e-9 && c2 < 1e-9, "{} {}", c1, c2);
        prop_assert!(curvature_symmetry_residual(&geo) < 1e-9);
    }

    #[test]
    fn covariant_and_contravariant_inputs_agree(seed in any::<u64>(), dim in 2usize..=3) {
        let (g1, _, x) = random_pair(seed, dim);
        let up = g1.geometry(&x).unwrap();
        let jets = g1.jets(&x, 2).unwrap().inverse(&x, 1e-12).unwrap();
        let down = flatpencil::GeometryJet::from_jets(&x, &jets, Variance::Covariant, 1e-12).unwrap();
        let scale = 1.0 + up.max_curvature();
        prop_assert!(max_diff(&up.riemann_upup, &down.riemann_upup) / scale < 1e-10);
        prop_assert!(max_diff(&up.gamma_contra, &down.gamma_contra) / (1.0 + up.scale()) < 1e-11);
    }

    #[test]
    fn nijenhuis_and_m_identities(seed in any::<u64>(), dim in 2usize..=3) {
        let (g1, g2, x) = random_pair(seed, dim);
        let (a, b) = (g1.geometry(&x).unwrap(), g2.geometry(&x).unwrap());
        let aff = affinor_at(&g1, &g2, &x).unwrap();
        let nij = nijenhuis(&aff);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    prop_assert_eq!(nij[(k * dim + i) * dim + j], -nij[(k * dim + j) * dim + i]);
                }
            }
        }
        let m = tensor_m_from(&a, &b);
        let t = lowered_nijenhuis(&nij, &a, &b);
        let r = mn_identity_residuals(&m, &t, dim);
        prop_assert!(r.iter().all(|x| *x < 1e-8), "{:?}", r);
    }
}

#[test]
fn nijenhuis_and_m_vanish_together() {
    let pairs: Vec<(MetricField, MetricField)> = vec![
        (
            metric_from(Variance::Contravariant, &strs(&[&["exp(u1*u2)", "0"], &["0", "exp(u1*u2)"]])),
            metric_from(Variance::Contravariant, &strs(&[&["1", "0"], &["0", "1"]])),
        ),
        (
            metric_from(Variance::Contravariant, &strs(&[&["u1", "0"], &["0", "u2"]])),
            metric_from(Variance::Contravariant, &strs(&[&["1", "0"], &["0", "1"]])),
        ),
        (
            metric_from(Variance::Contravariant, &strs(&[&["u2 + 2", "0"], &["0", "u1 + 2"]])),
            metric_from(Variance::Contravariant, &strs(&[&["1", "0"], &["0", "1"]])),
        ),
        (
            metric_from(Variance::Contravariant, &strs(&[&["2 + u1*u2", "u1"], &["u1", "3"]])),
            metric_from(Variance::Contravariant, &strs(&[&["1", "0"], &["0", "1 + u2^2"]])),
        ),
    ];
    let tol = 1e-9;
    for (g1, g2) in &pairs {
        for x in [pt(&[0.5, 0.7]), pt(&[1.2, 0.3])] {
            let nij = nijenhuis(&affinor_at(g1, g2, &x).unwrap());
            let m = tensor_m_from(&g1.geometry(&x).unwrap(), &g2.geometry(&x).unwrap());
            let nmax = nij.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let mmax = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert_eq!(nmax < tol, mmax < tol, "{} {}", nmax, mmax);
        }
    }
}
