//! Strong-stability tests: the total-variation criterion for scalar
//! measures, the torus spectral-radius criterion for pointwise delays, and
//! the closed form for an affine density.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::measure::BVMeasure;

/// Largest torus dimension accepted by [`hs_spectral_radius`].
pub const MAX_TORUS_DIM: usize = 6;
/// Upper bound on grid evaluations.
pub const MAX_TORUS_EVALS: usize = 50_000_000;
/// `rho_refined` must stay below `1 - HS_MARGIN` for a strong-stability verdict.
pub const HS_MARGIN: f64 = 1e-9;
const REFINE_ITERS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MelvinScalar,
    HsTorus,
    AffineClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongStabilityVerdict {
    pub strongly_stable: bool,
    pub margin: f64,
    pub method: Method,
}

/// Scalar criterion: strongly stable iff `TV(mu) < 1`.
pub fn melvin_scalar(mu: &BVMeasure) -> Result<StrongStabilityVerdict> {
    if mu.dimension() != 1 {
        return Err(Error::UnsupportedDimension(mu.dimension()));
    }
    let tv = mu.total_variation();
    Ok(StrongStabilityVerdict { strongly_stable: tv < 1.0, margin: 1.0 - tv, method: Method::MelvinScalar })
}

/// Closed-form total variation of the density `a + b theta` on `[-1, 0]`.
pub fn affine_total_variation(a: f64, b: f64) -> f64 {
    if a * (b - a) > 0.0 {
        ((a - b).powi(2) + a * a) / (2.0 * b.abs())
    } else {
        (a - b / 2.0).abs()
    }
}

/// Strong-stability region of the affine density in the `(a, b)` plane.
pub fn affine_region_membership(a: f64, b: f64) -> StrongStabilityVerdict {
    let inside = if a * (b - a) > 0.0 {
        (a - b).powi(2) + a * a < 2.0 * b.abs()
    } else {
        (a - b / 2.0).abs() < 1.0
    };
    StrongStabilityVerdict {
        strongly_stable: inside,
        margin: 1.0 - affine_total_variation(a, b),
        method: Method::AffineClosedForm,
    }
}

/// Torus maximum of `rho(sum_k A_k e^{i theta_k})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HsEstimate {
    /// Maximum over the grid: a lower bound.
    pub rho_lower: f64,
    /// After coordinate ascent from the best grid point.
    pub rho_refined: f64,
    pub argmax: Vec<f64>,
}

impl HsEstimate {
    pub fn verdict(&self) -> StrongStabilityVerdict {
        StrongStabilityVerdict {
            strongly_stable: self.rho_refined < 1.0 - HS_MARGIN,
            margin: 1.0 - self.rho_refined,
            method: Method::HsTorus,
        }
    }
}

fn rho_at(coeffs: &[DMatrix<Complex<f64>>], angles: &[f64]) -> Result<f64> {
    let n = coeffs[0].nrows();
    let mut sum = DMatrix::<Complex<f64>>::zeros(n, n);
    for (a, &t) in coeffs.iter().zip(angles) {
        sum += a * Complex::from_polar(1.0, t);
    }
    spectral_radius(&sum)
}

/// Grid search over `[0, 2 pi)^N` followed by coordinate ascent.
///
/// The first angle is pinned at zero: multiplying every term by a common
/// phase does not change the spectral radius. `delays` are not used by the
/// criterion; they are accepted so that callers can pass a system as is.
/// Rational independence of the delays is not checked.
pub fn hs_spectral_radius(coeffs: &[DMatrix<f64>], delays: &[f64], grid_per_axis: usize) -> Result<HsEstimate> {
    let dim = coeffs.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("need at least one coefficient matrix".into()));
    }
    if dim > MAX_TORUS_DIM {
        return Err(Error::Dimensionality(dim));
    }
    if !delays.is_empty() && delays.len() != dim {
        return Err(Error::InvalidArgument("one delay per coefficient expected".into()));
    }
    if grid_per_axis < 8 {
        return Err(Error::InvalidArgument(format!("grid_per_axis must be >= 8, got {grid_per_axis}")));
    }
    let n = coeffs[0].nrows();
    if coeffs.iter().any(|a| a.nrows() != n || a.ncols() != n) {
        return Err(Error::InvalidArgument("coefficient matrices must share a square shape".into()));
    }
    let free = dim - 1;
    let total = grid_per_axis
        .checked_pow(free as u32)
        .filter(|&t| t <= MAX_TORUS_EVALS)
        .ok_or_else(|| Error::ResourceLimit(format!("{grid_per_axis}^{free} torus grid points")))?;

    let complex: Vec<DMatrix<Complex<f64>>> = coeffs.iter().map(|a| a.map(|v| Complex::new(v, 0.0))).collect();
    let step = 2.0 * std::f64::consts::PI / grid_per_axis as f64;
    let angles_of = |mut idx: usize| {
        let mut angles = vec![0.0; dim];
        for slot in angles.iter_mut().skip(1) {
            *slot = (idx % grid_per_axis) as f64 * step;
            idx /= grid_per_axis;
        }
        angles
    };

    let (best_idx, rho_lower) = (0..total)
        .into_par_iter()
        .map(|idx| rho_at(&complex, &angles_of(idx)).map(|r| (idx, r)))
        .try_reduce(|| (usize::MAX, f64::NEG_INFINITY), |a, b| {
            // ties resolve to the lowest index so the result is deterministic
            Ok(if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        })?;

    let mut argmax = angles_of(best_idx);
    let mut best = rho_lower;
    let mut delta = step;
    for _ in 0..REFINE_ITERS {
        let mut improved = false;
        for k in 1..dim {
            for dir in [1.0, -1.0] {
                let mut trial = argmax.clone();
                trial[k] += dir * delta;
                let r = rho_at(&complex, &trial)?;
                if r > best {
                    best = r;
                    argmax = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    for a in argmax.iter_mut() {
        *a = a.rem_euclid(2.0 * std::f64::consts::PI);
    }
    Ok(HsEstimate { rho_lower, rho_refined: best, argmax })
}
