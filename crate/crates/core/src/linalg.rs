//! Small dense linear-algebra helpers shared by the criteria and the root bound.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    match m.shape() {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => m[(0, 0)].abs(),
        _ => m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0, |acc: f64, &s| acc.max(s)),
    }
}

/// Spectral radius of a square complex matrix.
pub fn spectral_radius(m: &DMatrix<Complex<f64>>) -> Result<f64> {
    let n = m.nrows();
    match n {
        0 => Ok(0.0),
        1 => Ok(m[(0, 0)].norm()),
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = (half_tr * half_tr - (a * d - b * c)).sqrt();
            Ok((half_tr + disc).norm().max((half_tr - disc).norm()))
        }
        _ => {
            let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000).ok_or(Error::Eigen)?;
            let (_, t) = schur.unpack();
            Ok((0..n).map(|i| t[(i, i)].norm()).fold(0.0, f64::max))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 2.0]);
        assert!((spectral_norm(&m) - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn radius_of_rotation_and_triangular() {
        let i = Complex::new(0.0, 1.0);
        let one = Complex::new(1.0, 0.0);
        let z = Complex::new(0.0, 0.0);
        let m = DMatrix::from_row_slice(3, 3, &[z, -one, z, one, z, z, z, z, i * 0.5]);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-12);
        let t = DMatrix::from_row_slice(3, 3, &[one * 0.2, one * 5.0, z, z, i * 0.7, one, z, z, one * -0.1]);
        assert!((spectral_radius(&t).unwrap() - 0.7).abs() < 1e-12);
    }
}
