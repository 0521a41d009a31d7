//! Dense linear-algebra kernels shared by the model, simulation and
//! stability modules.

mod eigen;

pub use eigen::{eigenvalues, Spectrum, DEFLATION_TOLERANCE, ITERATIONS_PER_ORDER, MAX_ORDER};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix, indexed `(row, column)`.
pub type Matrix = DMatrix<f64>;

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Matrix exponential `e^M`.
///
/// Backed by nalgebra's scaling-and-squaring Padé approximant.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    ensure_square(m, "expm argument")?;
    ensure_finite(m, "expm argument")?;
    if m.nrows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    Ok(m.clone().exp())
}

/// Zero-order-hold discretization of `x' = A x + B u` over a step `dt`.
///
/// Returns the top blocks `(Ad, Bd)` of `expm(dt * [[A, B], [0, 0]])`.
pub fn zoh_discretize(a: &Matrix, b: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "discretization step must be positive, got {dt}"
        )));
    }
    ensure_square(a, "state matrix")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "input matrix has {} rows, state matrix has order {n}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = expm(&aug)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e, Matrix::identity(3, 3));
    }

    #[test]
    fn expm_nilpotent() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&m).unwrap();
        assert_relative_eq!(e, Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn expm_rejects_non_square() {
        assert!(matches!(expm(&Matrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn zoh_of_zero_dynamics_integrates_input() {
        let a = Matrix::zeros(3, 3);
        let b = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let (ad, bd) = zoh_discretize(&a, &b, 0.25).unwrap();
        assert_relative_eq!(ad, Matrix::identity(3, 3), epsilon = 1e-15);
        assert_relative_eq!(bd, &b * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn zoh_scalar_closed_form() {
        let a = Matrix::from_element(1, 1, -1.0);
        let b = Matrix::from_element(1, 1, 1.0);
        let (ad, bd) = zoh_discretize(&a, &b, 0.1).unwrap();
        assert_relative_eq!(ad[(0, 0)], (-0.1f64).exp(), max_relative = 1e-14);
        // (e^{a dt} - 1) b / a with a = -1
        assert_relative_eq!(bd[(0, 0)], 1.0 - (-0.1f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn zoh_rejects_bad_step() {
        let a = Matrix::zeros(1, 1);
        assert!(zoh_discretize(&a, &a, 0.0).is_err());
        assert!(zoh_discretize(&a, &a, -1.0).is_err());
        assert!(zoh_discretize(&a, &Matrix::zeros(2, 1), 0.1).is_err());
    }
}
