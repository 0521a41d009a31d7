//! Oracles and fixtures shared by the integration tests. Each oracle is
//! written from first principles and shares no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use lfc_laa::model::{AreaParams, GeneratorParams};
use lfc_laa::network::{Branch, GeneratorConstants, NetworkModel};
use lfc_laa::Matrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize) -> Matrix {
    Matrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0))
}

/// `sum_k M^k / k!` to 40 terms.
pub fn taylor_expm(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let mut term = Matrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=40 {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

/// Monic characteristic polynomial coefficients `[c_n-1, ..., c_0]` of
/// `lambda^n + c_n-1 lambda^n-1 + ... + c_0`, by Faddeev-LeVerrier.
pub fn char_poly(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = Vec::with_capacity(n);
    let mut m = Matrix::zeros(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        m = a * &m + Matrix::identity(n, n) * c;
        c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Polynomial roots by Durand-Kerner iteration, polished with Newton steps.
pub fn durand_kerner(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let radius = 1.0 + coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius / seed.norm().powi(k as i32)).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let (p, _) = horner(coeffs, z[i]);
            let denom: Complex64 = (0..n).filter(|&j| j != i).map(|j| z[i] - z[j]).product();
            let step = p / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    for zi in &mut z {
        for _ in 0..5 {
            let (p, dp) = horner(coeffs, *zi);
            if dp.norm() > 0.0 {
                *zi -= p / dp;
            }
        }
    }
    z
}

pub fn char_poly_roots(a: &Matrix) -> Vec<Complex64> {
    durand_kerner(&char_poly(a))
}

/// Largest pair distance under greedy global nearest pairing.
pub fn match_spectra(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut used_a, mut used_b) = (vec![false; n], vec![false; n]);
    let mut worst = 0.0f64;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Classical RK4 for `x' = A x + b` with constant forcing.
pub fn rk4_linear(a: &Matrix, forcing: &[f64], x0: &[f64], h: f64, steps: usize) -> Vec<f64> {
    let n = x0.len();
    let a: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
    let f = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut s = forcing[i];
            for j in 0..n {
                s += a[i * n + j] * x[j];
            }
            out[i] = s;
        }
    };
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..steps {
        f(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

pub fn generator(tt: f64, tg: f64, r: f64, alpha: f64) -> GeneratorParams {
    GeneratorParams {
        turbine_time_constant: tt,
        governor_time_constant: tg,
        droop: r,
        participation: alpha,
    }
}

/// Random single area with positive damping and 1 to 3 generators.
pub fn random_area(r: &mut ChaCha8Rng) -> AreaParams {
    let n = r.gen_range(1..=3);
    let mut alphas: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = alphas.iter().sum();
    alphas.iter_mut().for_each(|a| *a /= total);
    let last = 1.0 - alphas[..n - 1].iter().sum::<f64>();
    alphas[n - 1] = last;
    AreaParams {
        damping: r.gen_range(0.5..2.0),
        inertia: r.gen_range(3.0..10.0),
        generators: alphas
            .into_iter()
            .map(|a| generator(r.gen_range(0.2..0.6), r.gen_range(0.05..0.3), r.gen_range(0.03..0.1), a))
            .collect(),
        tie_coefficients: BTreeMap::new(),
    }
}

/// Two generators (buses 1, 2) and two loads (buses 3, 4) on a ring.
pub fn toy_network() -> NetworkModel {
    let branches = [
        Branch { from: 1, to: 3, reactance: 0.5 },
        Branch { from: 3, to: 4, reactance: 0.25 },
        Branch { from: 4, to: 2, reactance: 0.4 },
        Branch { from: 2, to: 1, reactance: 1.0 },
    ];
    let constants = GeneratorConstants {
        m: vec![0.08, 0.05],
        d_g: vec![0.02, 0.03],
        k_p: vec![0.5, 0.4],
        k_i: vec![0.0, 0.05],
    };
    NetworkModel::from_branches(&[1, 2], &[3, 4], &branches, constants, vec![0.6, 0.9]).unwrap()
}
