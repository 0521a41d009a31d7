//! Independent oracles for the dense kernels.

mod common;

use common::{char_poly_roots, match_spectra, random_matrix, rng, taylor_expm};
use lfc_laa::numerics::{eigenvalues, expm, norm1, zoh_discretize};
use lfc_laa::Matrix;
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn expm_matches_truncated_taylor_series() {
    let mut r = rng(11);
    for _ in 0..50 {
        let m = random_matrix(&mut r, 4);
        let scale = r.gen_range(0.05..1.0) / norm1(&m);
        let m = m * scale;
        assert!(norm1(&m) <= 1.0 + 1e-15);
        let err = max_abs_diff(&expm(&m).unwrap(), &taylor_expm(&m));
        assert!(err < 1e-12, "{err:e}");
    }
}

#[test]
fn expm_of_diagonal_and_nilpotent() {
    let d = Matrix::from_diagonal(&DVector::from_vec(vec![0.5, -2.0, 0.0]));
    let e = expm(&d).unwrap();
    assert!((e[(0, 0)] - 0.5f64.exp()).abs() < 1e-15);
    assert!((e[(1, 1)] - (-2.0f64).exp()).abs() < 1e-15);
    assert_eq!(e[(2, 2)], 1.0);
    let n = Matrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
    let e = expm(&n).unwrap();
    assert!(max_abs_diff(&e, &Matrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, 1.0])) < 1e-14);
}

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    let mut r = rng(23);
    for trial in 0..50 {
        let m = random_matrix(&mut r, 5);
        let spectrum = eigenvalues(&m).unwrap();
        let roots = char_poly_roots(&m);
        let err = match_spectra(&spectrum.eigenvalues, &roots);
        assert!(err < 1e-8, "trial {trial}: {err:e}");
    }
}

#[test]
fn eigenvalues_of_known_matrices() {
    // Rotation generator: +-2i.
    let m = Matrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
    let s = eigenvalues(&m).unwrap();
    let expected = [Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0)];
    assert!(match_spectra(&s.eigenvalues, &expected) < 1e-14);
    // Upper triangular: the diagonal.
    let t = Matrix::from_row_slice(3, 3, &[1.0, 4.0, -2.0, 0.0, -3.0, 5.0, 0.0, 0.0, 0.5]);
    let s = eigenvalues(&t).unwrap();
    let expected: Vec<Complex64> = [1.0, -3.0, 0.5].iter().map(|&x| Complex64::new(x, 0.0)).collect();
    assert!(match_spectra(&s.eigenvalues, &expected) < 1e-13);
    assert!(s.residual_bound < 1e-10);
}

#[test]
fn zoh_semigroup() {
    let mut r = rng(5);
    for _ in 0..20 {
        let a = random_matrix(&mut r, 4);
        let b = Matrix::from_fn(4, 2, |_, _| r.gen_range(-1.0..1.0));
        let dt = r.gen_range(0.01..0.2);
        let (ad, bd) = zoh_discretize(&a, &b, dt).unwrap();
        let (ad2, bd2) = zoh_discretize(&a, &b, 2.0 * dt).unwrap();
        assert!(max_abs_diff(&ad2, &(&ad * &ad)) < 1e-10);
        assert!(max_abs_diff(&bd2, &(&ad * &bd + &bd)) < 1e-10);
    }
}

#[test]
fn zoh_of_integrator_chain() {
    // x1' = x2, x2' = u: Ad = [[1, h], [0, 1]], Bd = [h^2/2, h].
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let h = 0.1;
    let (ad, bd) = zoh_discretize(&a, &b, h).unwrap();
    assert!(max_abs_diff(&ad, &Matrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0])) < 1e-15);
    assert!(max_abs_diff(&bd, &Matrix::from_row_slice(2, 1, &[h * h / 2.0, h])) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_is_similarity_invariant(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n);
        // Well-conditioned similarity: identity plus a small perturbation.
        let s = Matrix::identity(n, n) + random_matrix(&mut r, n) * 0.2;
        let s_inv = s.clone().try_inverse().unwrap();
        let b = &s * &a * &s_inv;
        let ea = eigenvalues(&a).unwrap();
        let eb = eigenvalues(&b).unwrap();
        prop_assert!(match_spectra(&ea.eigenvalues, &eb.eigenvalues) < 1e-7);
    }

    #[test]
    fn eigenvalue_sum_and_product(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n);
        let s = eigenvalues(&a).unwrap();
        let sum: Complex64 = s.eigenvalues.iter().sum();
        let prod: Complex64 = s.eigenvalues.iter().product();
        prop_assert!((sum.re - a.trace()).abs() < 1e-9 && sum.im.abs() < 1e-9);
        let det = a.determinant();
        prop_assert!((prod.re - det).abs() < 1e-8 * (1.0 + det.abs()) && prod.im.abs() < 1e-8);
    }
}
