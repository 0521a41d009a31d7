//! Eigenvalues of real nonsymmetric matrices.
//!
//! Pipeline: diagonal balancing, Householder reduction to upper Hessenberg
//! form, then the Francis implicit double-shift QR iteration with
//! exceptional shifts. Complex eigenvalues come out of 2x2 diagonal blocks
//! and are therefore exact conjugates of each other.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{ensure_finite, ensure_square, norm1, Matrix};
use crate::error::{Error, Result};

/// Largest accepted matrix order.
pub const MAX_ORDER: usize = 200;

/// Total QR sweeps allowed per unit of matrix order.
pub const ITERATIONS_PER_ORDER: usize = 100;

/// Relative size below which a subdiagonal entry is treated as zero.
pub const DEFLATION_TOLERANCE: f64 = f64::EPSILON;

/// Full eigenvalue set of a square matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Sorted by real part descending, then imaginary part descending.
    pub eigenvalues: Vec<Complex64>,
    /// Largest `||M v - lambda v||` over the eigenvalues, for unit `v`
    /// obtained by inverse iteration on the original matrix.
    pub residual_bound: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectral abscissa. `-inf` for an empty spectrum.
    pub fn max_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Computes every eigenvalue of `m`.
pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    ensure_square(m, "eigenvalue argument")?;
    ensure_finite(m, "eigenvalue argument")?;
    let n = m.nrows();
    if n > MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue solver accepts order <= {MAX_ORDER}, got {n}"
        )));
    }
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            residual_bound: 0.0,
        });
    }

    let mut h = Dense::from_matrix(m);
    h.balance();
    h.reduce_to_hessenberg();
    let mut values = h.francis_qr()?;

    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let residual_bound = residual_bound(m, &values);
    Ok(Spectrum {
        eigenvalues: values,
        residual_bound,
    })
}

/// Square work matrix with 1-based indexing, matching the classical
/// formulation of the QR sweep below.
struct Dense {
    n: usize,
    a: Vec<f64>,
}

impl Dense {
    fn from_matrix(m: &Matrix) -> Self {
        let n = m.nrows();
        let mut a = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[(i + 1) * (n + 1) + j + 1] = m[(i, j)];
            }
        }
        Dense { n, a }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] = v;
    }

    /// Similarity scaling by powers of two so that row and column norms are
    /// comparable. Exact in floating point.
    fn balance(&mut self) {
        const RADIX: f64 = 2.0;
        let sqrdx = RADIX * RADIX;
        let n = self.n;
        loop {
            let mut done = true;
            for i in 1..=n {
                let mut r = 0.0;
                let mut c = 0.0;
                for j in 1..=n {
                    if j != i {
                        c += self.get(j, i).abs();
                        r += self.get(i, j).abs();
                    }
                }
                if c != 0.0 && r != 0.0 {
                    let mut g = r / RADIX;
                    let mut f = 1.0;
                    let s = c + r;
                    while c < g {
                        f *= RADIX;
                        c *= sqrdx;
                    }
                    g = r * RADIX;
                    while c > g {
                        f /= RADIX;
                        c /= sqrdx;
                    }
                    if (c + r) / f < 0.95 * s {
                        done = false;
                        let g = 1.0 / f;
                        for j in 1..=n {
                            let k = self.idx(i, j);
                            self.a[k] *= g;
                        }
                        for j in 1..=n {
                            let k = self.idx(j, i);
                            self.a[k] *= f;
                        }
                    }
                }
            }
            if done {
                break;
            }
        }
    }

    /// Householder reduction to upper Hessenberg form.
    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        if n < 3 {
            return;
        }
        let mut v = vec![0.0; n + 1];
        for k in 1..=n - 2 {
            let scale: f64 = (k + 1..=n).map(|i| self.get(i, k).abs()).sum();
            if scale == 0.0 {
                continue;
            }
            let mut sigma = 0.0;
            for i in k + 1..=n {
                v[i] = self.get(i, k) / scale;
                sigma += v[i] * v[i];
            }
            let norm = sigma.sqrt();
            let alpha = if v[k + 1] >= 0.0 { -norm } else { norm };
            v[k + 1] -= alpha;
            let vtv: f64 = (k + 1..=n).map(|i| v[i] * v[i]).sum();
            if vtv == 0.0 {
                continue;
            }
            // Left application: rows k+1..n.
            for j in k..=n {
                let s: f64 = (k + 1..=n).map(|i| v[i] * self.get(i, j)).sum();
                let f = 2.0 * s / vtv;
                for i in k + 1..=n {
                    let idx = self.idx(i, j);
                    self.a[idx] -= f * v[i];
                }
            }
            // Right application: columns k+1..n.
            for i in 1..=n {
                let s: f64 = (k + 1..=n).map(|j| self.get(i, j) * v[j]).sum();
                let f = 2.0 * s / vtv;
                for j in k + 1..=n {
                    let idx = self.idx(i, j);
                    self.a[idx] -= f * v[j];
                }
            }
            self.set(k + 1, k, alpha * scale);
            for i in k + 2..=n {
                self.set(i, k, 0.0);
            }
        }
    }

    /// Francis double-shift QR on the Hessenberg matrix. Consumes the
    /// matrix contents.
    fn francis_qr(&mut self) -> Result<Vec<Complex64>> {
        let n = self.n;
        let cap = ITERATIONS_PER_ORDER * n;
        let tol = DEFLATION_TOLERANCE;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];

        let mut anorm = 0.0;
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm += self.get(i, j).abs();
            }
        }

        let mut total_iterations = 0usize;
        let mut nn = n;
        let mut t = 0.0;
        while nn >= 1 {
            let mut its = 0usize;
            loop {
                // Look for a single small subdiagonal element.
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.get(l - 1, l - 1).abs() + self.get(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.get(l, l - 1).abs() <= tol * s {
                        self.set(l, l - 1, 0.0);
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.get(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.get(nn - 1, nn - 1);
                let mut w = self.get(nn, nn - 1) * self.get(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = z;
                        wi[nn] = -z;
                    }
                    nn = nn.saturating_sub(2);
                    break;
                }

                if total_iterations >= cap {
                    return Err(Error::NoConvergence {
                        order: n,
                        iterations: total_iterations,
                    });
                }
                if its > 0 && its % 10 == 0 {
                    // Exceptional shift.
                    t += x;
                    for i in 1..=nn {
                        let k = self.idx(i, i);
                        self.a[k] -= x;
                    }
                    let s = self.get(nn, nn - 1).abs() + self.get(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;
                total_iterations += 1;

                // Form the shift and look for two consecutive small
                // subdiagonal elements.
                let mut m = nn - 2;
                let (mut p, mut q, mut r);
                loop {
                    let z = self.get(m, m);
                    let rr = x - z;
                    let ss = y - z;
                    p = (rr * ss - w) / self.get(m + 1, m) + self.get(m, m + 1);
                    q = self.get(m + 1, m + 1) - z - rr - ss;
                    r = self.get(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = self.get(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs()
                        * (self.get(m - 1, m - 1).abs() + z.abs() + self.get(m + 1, m + 1).abs());
                    if u <= tol * v {
                        break;
                    }
                    m -= 1;
                }
                for i in m + 2..=nn {
                    self.set(i, i - 2, 0.0);
                    if i != m + 2 {
                        self.set(i, i - 3, 0.0);
                    }
                }

                // Double QR step on rows l..nn and columns m..nn.
                let mut k = m;
                while k + 1 <= nn {
                    if k != m {
                        p = self.get(k, k - 1);
                        q = self.get(k + 1, k - 1);
                        r = if k != nn - 1 { self.get(k + 2, k - 1) } else { 0.0 };
                        x = p.abs() + q.abs() + r.abs();
                        if x != 0.0 {
                            p /= x;
                            q /= x;
                            r /= x;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().copysign(p);
                    if s != 0.0 {
                        if k == m {
                            if l != m {
                                let v = -self.get(k, k - 1);
                                self.set(k, k - 1, v);
                            }
                        } else {
                            self.set(k, k - 1, -s * x);
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        let z = r / s;
                        q /= p;
                        r /= p;
                        for j in k..=nn {
                            let mut pp = self.get(k, j) + q * self.get(k + 1, j);
                            if k != nn - 1 {
                                pp += r * self.get(k + 2, j);
                                let v = self.get(k + 2, j) - pp * z;
                                self.set(k + 2, j, v);
                            }
                            let v = self.get(k + 1, j) - pp * y;
                            self.set(k + 1, j, v);
                            let v = self.get(k, j) - pp * x;
                            self.set(k, j, v);
                        }
                        let mmin = nn.min(k + 3);
                        for i in l..=mmin {
                            let mut pp = x * self.get(i, k) + y * self.get(i, k + 1);
                            if k != nn - 1 {
                                pp += z * self.get(i, k + 2);
                                let v = self.get(i, k + 2) - pp * r;
                                self.set(i, k + 2, v);
                            }
                            let v = self.get(i, k + 1) - pp * q;
                            self.set(i, k + 1, v);
                            let v = self.get(i, k) - pp;
                            self.set(i, k, v);
                        }
                    }
                    k += 1;
                }
            }
        }

        let out: Vec<Complex64> = (1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect();
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NoConvergence {
                order: n,
                iterations: total_iterations,
            });
        }
        Ok(out)
    }
}

/// Two steps of shifted inverse iteration per eigenvalue on the original
/// matrix; returns the worst unit-vector residual.
fn residual_bound(m: &Matrix, values: &[Complex64]) -> f64 {
    let n = m.nrows();
    let scale = norm1(m).max(1.0);
    let mc: DMatrix<Complex64> = m.map(|v| Complex64::new(v, 0.0));
    let start = DVector::from_fn(n, |i, _| Complex64::new(1.0 + i as f64 / n as f64, 0.0));
    let mut worst: f64 = 0.0;
    for &lambda in values {
        let shift = lambda + Complex64::new(1e-13 * scale, 1e-13 * scale);
        let mut shifted = mc.clone();
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let lu = shifted.lu();
        let mut v = start.normalize();
        for _ in 0..2 {
            match lu.solve(&v) {
                Some(next) if next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                    let norm = next.norm();
                    if norm == 0.0 {
                        break;
                    }
                    v = next.unscale(norm);
                }
                _ => break,
            }
        }
        let r = (&mc * &v - v.scale(1.0) * lambda).norm();
        worst = worst.max(r);
    }
    worst
}
