//! Matrix-valued measures of bounded variation on `[-1, 0]`.
//!
//! A measure is stored as a finite set of atoms plus a piecewise-polynomial
//! density. The normalized distribution function is
//! `M(t) = mu([-1, t])`, which is right-continuous and includes an atom at
//! `-1` in `M(-1)`. All matrix norms are operator 2-norms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::perturbation::PerturbationMap;
use crate::poly;
use crate::quad;
use crate::simulator::History;

/// Determinants below this magnitude count as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Atoms within `h / SNAP_DIVISOR` of a grid node are snapped to it.
const SNAP_DIVISOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub loc: f64,
    pub weight: DMatrix<f64>,
}

/// Polynomial density on `[l, r)`; `coeffs[d]` multiplies `theta^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPiece {
    pub l: f64,
    pub r: f64,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl DensityPiece {
    /// Coefficients of the scalar polynomial in entry `(i, j)`.
    pub fn entry_poly(&self, i: usize, j: usize) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[(i, j)]).collect()
    }

    fn value_at(&self, theta: f64) -> DMatrix<f64> {
        let n = self.coeffs[0].nrows();
        let mut acc = DMatrix::zeros(n, n);
        for c in self.coeffs.iter().rev() {
            acc = acc * theta + c;
        }
        acc
    }

    /// `int_lo^hi D(theta) q(theta) dtheta` for a scalar polynomial `q`.
    fn integrate_times(&self, q: &[f64], lo: f64, hi: f64) -> DMatrix<f64> {
        let n = self.coeffs[0].nrows();
        let mut acc = DMatrix::zeros(n, n);
        for (d, c) in self.coeffs.iter().enumerate() {
            let mut mono = vec![0.0; d + 1];
            mono[d] = 1.0;
            let w = poly::integrate(&poly::mul(&mono, q), lo, hi);
            if w != 0.0 {
                acc += c * w;
            }
        }
        acc
    }
}

/// A bounded-variation matrix measure on `[-1, 0]`: atoms plus a
/// piecewise-polynomial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct BVMeasure {
    n: usize,
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
}

fn check_matrix(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidMeasure(format!(
            "{what} has shape {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMeasure(format!("{what} has non-finite entries")));
    }
    Ok(())
}

impl BVMeasure {
    pub fn new(n: usize, mut atoms: Vec<Atom>, mut density: Vec<DensityPiece>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        for a in &atoms {
            if !(-1.0..=0.0).contains(&a.loc) {
                return Err(Error::InvalidMeasure(format!("atom location {} outside [-1, 0]", a.loc)));
            }
            check_matrix(&a.weight, n, "atom weight")?;
        }
        atoms.sort_by(|x, y| x.loc.total_cmp(&y.loc));
        if let Some(w) = atoms.windows(2).find(|w| w[0].loc == w[1].loc) {
            return Err(Error::InvalidMeasure(format!("two atoms at {}", w[0].loc)));
        }
        for p in &density {
            if !(p.l >= -1.0 && p.r <= 0.0 && p.l < p.r) {
                return Err(Error::InvalidMeasure(format!("density interval [{}, {}) not inside [-1, 0]", p.l, p.r)));
            }
            if p.coeffs.is_empty() {
                return Err(Error::InvalidMeasure("density piece without coefficients".into()));
            }
            for c in &p.coeffs {
                check_matrix(c, n, "density coefficient")?;
            }
        }
        density.sort_by(|x, y| x.l.total_cmp(&y.l));
        if let Some(w) = density.windows(2).find(|w| w[0].r > w[1].l) {
            return Err(Error::InvalidMeasure(format!(
                "density intervals [{}, {}) and [{}, {}) overlap",
                w[0].l, w[0].r, w[1].l, w[1].r
            )));
        }
        Ok(Self { n, atoms, density })
    }

    pub fn zero(n: usize) -> Self {
        Self { n, atoms: Vec::new(), density: Vec::new() }
    }

    /// Scalar measure with density `a + b theta` on `[-1, 0]`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::scalar_polynomial(&[a, b])
    }

    /// Scalar measure with polynomial density on the whole of `[-1, 0]`.
    pub fn scalar_polynomial(coeffs: &[f64]) -> Self {
        let piece = DensityPiece {
            l: -1.0,
            r: 0.0,
            coeffs: coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect(),
        };
        Self { n: 1, atoms: Vec::new(), density: vec![piece] }
    }

    /// Scalar purely atomic measure from `(location, weight)` pairs.
    pub fn scalar_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            1,
            atoms
                .iter()
                .map(|&(loc, w)| Atom { loc, weight: DMatrix::from_element(1, 1, w) })
                .collect(),
            Vec::new(),
        )
    }

    /// Pointwise-delay system `x(t) = sum A_k x(t - tau_k)`.
    pub fn pointwise(coeffs: &[DMatrix<f64>], delays: &[f64]) -> Result<Self> {
        if coeffs.len() != delays.len() || coeffs.is_empty() {
            return Err(Error::InvalidMeasure("need one delay per coefficient".into()));
        }
        let n = coeffs[0].nrows();
        Self::new(
            n,
            coeffs
                .iter()
                .zip(delays)
                .map(|(a, &tau)| Atom { loc: -tau, weight: a.clone() })
                .collect(),
            Vec::new(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    pub fn is_atomic(&self) -> bool {
        self.density.is_empty()
    }

    fn require_scalar(&self) -> Result<()> {
        if self.n != 1 {
            return Err(Error::UnsupportedDimension(self.n));
        }
        Ok(())
    }

    /// Density value at `theta` (zero off the pieces).
    pub fn density_at(&self, theta: f64) -> DMatrix<f64> {
        self.density
            .iter()
            .find(|p| theta >= p.l && theta < p.r)
            .map(|p| p.value_at(theta))
            .unwrap_or_else(|| DMatrix::zeros(self.n, self.n))
    }

    /// `M(t) = mu([-1, t])`.
    pub fn cumulative(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(-1.0..=0.0).contains(&t) {
            return Err(Error::Domain { value: t });
        }
        Ok(self.mass(-1.0, t, true))
    }

    /// `mu((l, r])`, or `mu([l, r])` when `left_closed`.
    pub fn mass(&self, l: f64, r: f64, left_closed: bool) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.n, self.n);
        for a in &self.atoms {
            let inside = (a.loc > l || (left_closed && a.loc == l)) && a.loc <= r;
            if inside {
                acc += &a.weight;
            }
        }
        for p in &self.density {
            let lo = p.l.max(l);
            let hi = p.r.min(r);
            if lo < hi {
                acc += p.integrate_times(&[1.0], lo, hi);
            }
        }
        acc
    }

    /// `A_M = M(0) - M(0^-)`: the atom at zero.
    pub fn atom_at_zero(&self) -> DMatrix<f64> {
        self.atoms
            .iter()
            .find(|a| a.loc == 0.0)
            .map(|a| a.weight.clone())
            .unwrap_or_else(|| DMatrix::zeros(self.n, self.n))
    }

    /// Total variation `|mu|([-1, 0])` with respect to the spectral norm.
    ///
    /// Scalar density pieces are integrated exactly by splitting at the
    /// real roots of the density; matrix densities use adaptive quadrature
    /// of `||D(theta)||_2`.
    pub fn total_variation(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| spectral_norm(&a.weight)).sum();
        let dens: f64 = self
            .density
            .iter()
            .map(|p| {
                if self.n == 1 {
                    poly::integrate_abs(&p.entry_poly(0, 0), p.l, p.r)
                } else {
                    quad::integrate(|t| spectral_norm(&p.value_at(t)), p.l, p.r, 1e-12)
                }
            })
            .sum();
        atoms + dens
    }

    /// Membership in the well-posed class: `det(I - A_M) != 0`.
    pub fn in_class_w(&self) -> WMembership {
        let m = DMatrix::<f64>::identity(self.n, self.n) - self.atom_at_zero();
        let det_abs = m.determinant().abs();
        WMembership { member: det_abs >= SINGULAR_TOL, det_abs }
    }

    /// Stieltjes integral `int dmu(theta) f(theta)` against a sampled
    /// function; the density times the piecewise-linear interpolant is
    /// integrated exactly on every grid cell.
    pub fn integrate_against(&self, f: &History) -> Result<DVector<f64>> {
        if f.dimension() != self.n {
            return Err(Error::InvalidHistory(format!(
                "history dimension {} does not match measure dimension {}",
                f.dimension(),
                self.n
            )));
        }
        let w = self.lag_weights(f.grid_m());
        Ok(w.apply(|lag| f.node(f.grid_m() - lag)))
    }

    /// Stieltjes integral against a closed-form integrand, with adaptive
    /// quadrature on the density part.
    pub fn integrate_fn<F>(&self, f: F) -> DVector<f64>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let mut acc = DVector::zeros(self.n);
        for a in &self.atoms {
            acc += &a.weight * f(a.loc);
        }
        for p in &self.density {
            for k in 0..self.n {
                acc[k] += quad::integrate(|t| (p.value_at(t).row(k) * f(t))[(0, 0)], p.l, p.r, 1e-13);
            }
        }
        acc
    }

    /// Discretization of the measure on the grid `theta = -i/m`: the
    /// weights reproduce `int dmu x` exactly for piecewise-linear `x`,
    /// except that off-grid atoms are split between their two neighbours.
    pub fn lag_weights(&self, m: usize) -> LagWeights {
        let n = self.n;
        let h = 1.0 / m as f64;
        let node = |i: usize| -(i as f64) / m as f64;
        let mut w = vec![DMatrix::<f64>::zeros(n, n); m + 1];

        for a in &self.atoms {
            let u = -a.loc * m as f64;
            let nearest = u.round();
            if (u - nearest).abs() <= 1.0 / SNAP_DIVISOR {
                w[nearest as usize] += &a.weight;
            } else {
                let i = u.floor() as usize;
                let frac = u - i as f64;
                w[i] += &a.weight * (1.0 - frac);
                w[i + 1] += &a.weight * frac;
            }
        }

        for p in &self.density {
            // cells [node(i + 1), node(i)] overlapping [l, r)
            let first = ((-p.r) * m as f64).floor().max(0.0) as usize;
            let last = (((-p.l) * m as f64).ceil() as usize).min(m);
            for i in first..last {
                let (lo_cell, hi_cell) = (node(i + 1), node(i));
                let lo = p.l.max(lo_cell);
                let hi = p.r.min(hi_cell);
                if lo >= hi {
                    continue;
                }
                // x(theta) = x_{i+1} (hi_cell - theta)/h + x_i (theta - lo_cell)/h
                w[i] += p.integrate_times(&[-lo_cell / h, 1.0 / h], lo, hi);
                w[i + 1] += p.integrate_times(&[hi_cell / h, -1.0 / h], lo, hi);
            }
        }
        LagWeights { n, weights: w }
    }

    /// Pushforward by a piecewise-constant map: one atom per distinct value
    /// carrying the mass of its preimage.
    pub fn pushforward(&self, phi: &PerturbationMap) -> BVMeasure {
        let mut out: Vec<Atom> = Vec::new();
        let bp = phi.breakpoints();
        for (j, &v) in phi.values().iter().enumerate() {
            let w = self.mass(bp[j], bp[j + 1], j == 0);
            match out.iter_mut().find(|a| a.loc == v) {
                Some(a) => a.weight += w,
                None => out.push(Atom { loc: v, weight: w }),
            }
        }
        out.retain(|a| a.weight.iter().any(|&x| x != 0.0));
        out.sort_by(|x, y| x.loc.total_cmp(&y.loc));
        BVMeasure { n: self.n, atoms: out, density: Vec::new() }
    }

    /// Hahn-Jordan decomposition of a scalar measure.
    pub fn jordan_decompose(&self) -> Result<ScalarSignedDecomposition> {
        self.require_scalar()?;
        let scalar = |v: f64| DMatrix::from_element(1, 1, v);

        let mut pos_atoms = Vec::new();
        let mut neg_atoms = Vec::new();
        for a in &self.atoms {
            let w = a.weight[(0, 0)];
            if w > 0.0 {
                pos_atoms.push(Atom { loc: a.loc, weight: scalar(w) });
            } else if w < 0.0 {
                neg_atoms.push(Atom { loc: a.loc, weight: scalar(-w) });
            }
        }

        let mut pos_pieces = Vec::new();
        let mut neg_pieces = Vec::new();
        // sign-constant cells covering [-1, 0]; gaps carry zero density
        let mut cuts = vec![-1.0, 0.0];
        for p in &self.density {
            let q = p.entry_poly(0, 0);
            let mut knots = vec![p.l];
            knots.extend(poly::real_roots_in(&q, p.l, p.r));
            knots.push(p.r);
            cuts.extend(knots.iter().copied());
            for k in knots.windows(2) {
                let mid = poly::eval(&q, 0.5 * (k[0] + k[1]));
                if mid > 0.0 {
                    pos_pieces.push(DensityPiece { l: k[0], r: k[1], coeffs: q.iter().map(|&c| scalar(c)).collect() });
                } else if mid < 0.0 {
                    neg_pieces.push(DensityPiece { l: k[0], r: k[1], coeffs: q.iter().map(|&c| scalar(-c)).collect() });
                }
            }
        }
        cuts.sort_by(|x, y| x.total_cmp(y));
        cuts.dedup();

        let mut cells: Vec<(f64, f64, Sign)> = Vec::new();
        for k in cuts.windows(2) {
            let mid = 0.5 * (k[0] + k[1]);
            let sign = if self.density_at(mid)[(0, 0)] < 0.0 { Sign::Negative } else { Sign::Positive };
            match cells.last_mut() {
                Some(last) if last.2 == sign => last.1 = k[1],
                _ => cells.push((k[0], k[1], sign)),
            }
        }

        let mut positive_support = Support::default();
        let mut negative_support = Support::default();
        for &(l, r, s) in &cells {
            match s {
                Sign::Positive => positive_support.intervals.push((l, r)),
                Sign::Negative => negative_support.intervals.push((l, r)),
            }
        }
        for a in &pos_atoms {
            positive_support.points.push(a.loc);
            negative_support.holes.push(a.loc);
        }
        for a in &neg_atoms {
            negative_support.points.push(a.loc);
            positive_support.holes.push(a.loc);
        }

        Ok(ScalarSignedDecomposition {
            positive_part: BVMeasure::new(1, pos_atoms, pos_pieces)?,
            negative_part: BVMeasure::new(1, neg_atoms, neg_pieces)?,
            positive_support,
            negative_support,
        })
    }

    /// Linear combination `self + c * other` (dimensions must match);
    /// atoms at equal locations are merged and density pieces are kept
    /// only when both measures share the same interval layout or one is
    /// purely atomic.
    pub fn add_scaled(&self, other: &BVMeasure, c: f64) -> Result<BVMeasure> {
        if self.n != other.n {
            return Err(Error::InvalidMeasure("dimension mismatch".into()));
        }
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            match atoms.iter_mut().find(|b| b.loc == a.loc) {
                Some(b) => b.weight += &a.weight * c,
                None => atoms.push(Atom { loc: a.loc, weight: &a.weight * c }),
            }
        }
        let mut density = self.density.clone();
        for p in &other.density {
            let scaled: Vec<_> = p.coeffs.iter().map(|m| m * c).collect();
            match density.iter_mut().find(|q| q.l == p.l && q.r == p.r) {
                Some(q) => {
                    if q.coeffs.len() < scaled.len() {
                        q.coeffs.resize(scaled.len(), DMatrix::zeros(self.n, self.n));
                    }
                    for (d, m) in scaled.into_iter().enumerate() {
                        q.coeffs[d] += m;
                    }
                }
                None => density.push(DensityPiece { l: p.l, r: p.r, coeffs: scaled }),
            }
        }
        BVMeasure::new(self.n, atoms, density)
    }
}

/// Result of the well-posedness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WMembership {
    pub member: bool,
    /// `|det(I - A_M)|`
    pub det_abs: f64,
}

/// Matrix weights `W_0..W_m` of the discretized Stieltjes integral, indexed
/// by lag `i` (grid node `theta = -i h`).
#[derive(Debug, Clone)]
pub struct LagWeights {
    n: usize,
    weights: Vec<DMatrix<f64>>,
}

impl LagWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, lag: usize) -> &DMatrix<f64> {
        &self.weights[lag]
    }

    /// Sum of the weight norms; bounded by the total variation.
    pub fn total_norm(&self) -> f64 {
        self.weights.iter().map(spectral_norm).sum()
    }

    /// `sum_i W_i x(lag i)`.
    pub fn apply<'a, F>(&self, x: F) -> DVector<f64>
    where
        F: Fn(usize) -> &'a [f64],
    {
        let mut acc = DVector::zeros(self.n);
        for (i, w) in self.weights.iter().enumerate() {
            let v = x(i);
            for r in 0..self.n {
                let mut s = 0.0;
                for c in 0..self.n {
                    s += w[(r, c)] * v[c];
                }
                acc[r] += s;
            }
        }
        acc
    }

    /// Row-major flattened weights, lag-major.
    pub(crate) fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weights.len() * self.n * self.n);
        for w in &self.weights {
            for r in 0..self.n {
                for c in 0..self.n {
                    out.push(w[(r, c)]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// A Borel set made of half-open intervals `[l, r)` (the last one closed at
/// zero), plus isolated points, minus holes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Support {
    pub intervals: Vec<(f64, f64)>,
    pub points: Vec<f64>,
    pub holes: Vec<f64>,
}

impl Support {
    pub fn contains(&self, theta: f64) -> bool {
        if self.points.contains(&theta) {
            return true;
        }
        if self.holes.contains(&theta) {
            return false;
        }
        self.intervals
            .iter()
            .any(|&(l, r)| theta >= l && (theta < r || (r == 0.0 && theta == 0.0)))
    }
}

/// `mu = positive_part - negative_part` with disjoint supports covering
/// `[-1, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSignedDecomposition {
    pub positive_part: BVMeasure,
    pub negative_part: BVMeasure,
    pub positive_support: Support,
    pub negative_support: Support,
}

impl ScalarSignedDecomposition {
    pub fn sign_at(&self, theta: f64) -> Sign {
        if self.negative_support.contains(theta) {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    pub loc: f64,
    pub weight: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceJson {
    pub l: f64,
    pub r: f64,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

/// Wire format of a measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureJson {
    pub n: usize,
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
    #[serde(default)]
    pub density: Vec<PieceJson>,
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMeasure(format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<MeasureJson> for BVMeasure {
    type Error = Error;

    fn try_from(j: MeasureJson) -> Result<Self> {
        let atoms = j
            .atoms
            .iter()
            .map(|a| Ok(Atom { loc: a.loc, weight: matrix_from_rows(&a.weight, j.n)? }))
            .collect::<Result<Vec<_>>>()?;
        let density = j
            .density
            .iter()
            .map(|p| {
                Ok(DensityPiece {
                    l: p.l,
                    r: p.r,
                    coeffs: p.coeffs.iter().map(|c| matrix_from_rows(c, j.n)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        BVMeasure::new(j.n, atoms, density)
    }
}

impl From<BVMeasure> for MeasureJson {
    fn from(m: BVMeasure) -> Self {
        MeasureJson {
            n: m.n,
            atoms: m.atoms.iter().map(|a| AtomJson { loc: a.loc, weight: matrix_to_rows(&a.weight) }).collect(),
            density: m
                .density
                .iter()
                .map(|p| PieceJson { l: p.l, r: p.r, coeffs: p.coeffs.iter().map(matrix_to_rows).collect() })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: &DMatrix<f64>) -> f64 {
        m[(0, 0)]
    }

    #[test]
    fn cumulative_of_zero_and_affine() {
        let z = BVMeasure::zero(2);
        assert_eq!(z.cumulative(-0.3).unwrap(), DMatrix::zeros(2, 2));
        let (a, b) = (0.5, 2.1);
        let mu = BVMeasure::affine(a, b);
        for &t in &[-1.0, -0.7, -0.25, 0.0] {
            let want = a * (t + 1.0) + b / 2.0 * (t * t - 1.0);
            assert!((s(&mu.cumulative(t).unwrap()) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn cumulative_is_right_continuous_at_atoms() {
        let mu = BVMeasure::scalar_atoms(&[(-0.4, 1.5)]).unwrap();
        assert_eq!(s(&mu.cumulative(-0.4 - 1e-12).unwrap()), 0.0);
        assert_eq!(s(&mu.cumulative(-0.4).unwrap()), 1.5);
        assert_eq!(s(&mu.cumulative(-0.1).unwrap()), 1.5);
    }

    #[test]
    fn cumulative_rejects_out_of_domain() {
        let mu = BVMeasure::affine(1.0, 0.0);
        assert!(matches!(mu.cumulative(0.1), Err(Error::Domain { .. })));
        assert!(matches!(mu.cumulative(-1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn invalid_measures_rejected() {
        assert!(BVMeasure::scalar_atoms(&[(0.2, 1.0)]).is_err());
        assert!(BVMeasure::scalar_atoms(&[(-0.2, 1.0), (-0.2, 2.0)]).is_err());
        let piece = |l, r| DensityPiece { l, r, coeffs: vec![DMatrix::from_element(1, 1, 1.0)] };
        assert!(BVMeasure::new(1, vec![], vec![piece(-1.0, -0.4), piece(-0.5, 0.0)]).is_err());
        assert!(BVMeasure::new(1, vec![], vec![piece(-0.5, -0.5)]).is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert!((BVMeasure::affine(-2.0, 0.0).total_variation() - 2.0).abs() < 1e-15);
        assert!((BVMeasure::affine(0.5, 2.1).total_variation() - 2.81 / 4.2).abs() < 1e-15);
        let mu = BVMeasure::scalar_atoms(&[(-0.8, 0.3), (-0.3, -0.4)]).unwrap();
        assert!((mu.total_variation() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn total_variation_of_matrix_density_uses_spectral_norm() {
        // D(theta) = diag(1, 2 theta): ||D||_2 = max(1, 2|theta|)
        let c0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let c1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        let mu = BVMeasure::new(2, vec![], vec![DensityPiece { l: -1.0, r: 0.0, coeffs: vec![c0, c1] }]).unwrap();
        // int_{-1}^{-1/2} -2 theta + int_{-1/2}^0 1 = (1 - 1/4) + 1/2
        assert!((mu.total_variation() - 1.25).abs() < 1e-10);
    }

    #[test]
    fn jordan_split_of_affine() {
        let mu = BVMeasure::affine(0.5, 2.1);
        let d = mu.jordan_decompose().unwrap();
        let tv = d.positive_part.total_variation();
        let tv_neg = d.negative_part.total_variation();
        assert!((tv + tv_neg - mu.total_variation()).abs() < 1e-15);
        let v = -5.0 / 21.0;
        assert_eq!(d.positive_support.intervals.len(), 1);
        assert!((d.positive_support.intervals[0].0 - v).abs() < 1e-15);
        assert!((d.negative_support.intervals[0].1 - v).abs() < 1e-15);
        assert_eq!(d.sign_at(-0.9), Sign::Negative);
        assert_eq!(d.sign_at(-0.1), Sign::Positive);
        assert_eq!(d.sign_at(0.0), Sign::Positive);
    }

    #[test]
    fn jordan_of_nonnegative_and_atoms() {
        let d = BVMeasure::affine(1.0, 0.5).jordan_decompose().unwrap();
        assert_eq!(d.negative_part.total_variation(), 0.0);
        let d = BVMeasure::scalar_atoms(&[(-0.5, 1.0), (-0.25, -1.0)]).unwrap().jordan_decompose().unwrap();
        assert!(d.positive_support.contains(-0.5));
        assert!(d.negative_support.contains(-0.25));
        assert!(!d.positive_support.contains(-0.25));
        assert!(!d.negative_support.contains(-0.5));
    }

    #[test]
    fn jordan_rejects_matrices() {
        assert_eq!(BVMeasure::zero(2).jordan_decompose().unwrap_err(), Error::UnsupportedDimension(2));
    }

    #[test]
    fn integrate_against_constant_and_dirac() {
        let mu = BVMeasure::affine(0.5, 2.1);
        let h = History::scalar_from_fn(64, |_| 3.0).unwrap();
        let got = mu.integrate_against(&h).unwrap()[0];
        assert!((got - 3.0 * s(&mu.cumulative(0.0).unwrap())).abs() < 1e-14);

        let dirac = BVMeasure::scalar_atoms(&[(-0.3, 2.0)]).unwrap();
        let f = |t: f64| DVector::from_element(1, (3.0 * t).sin());
        assert!((dirac.integrate_fn(f)[0] - 2.0 * (-0.9f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn affine_density_annihilates_integer_cosines() {
        let mu = BVMeasure::affine(0.5, 2.1);
        for k in [1, 3, 127] {
            let w = 2.0 * std::f64::consts::PI * k as f64;
            let got = mu.integrate_fn(|t| DVector::from_element(1, (w * t).cos()))[0];
            assert!(got.abs() < 1e-11, "k = {k}: {got}");
        }
    }

    #[test]
    fn w_membership() {
        let m = BVMeasure::affine(1.0, 1.0).in_class_w();
        assert!(m.member);
        assert_eq!(m.det_abs, 1.0);
        assert!(!BVMeasure::scalar_atoms(&[(0.0, 1.0)]).unwrap().in_class_w().member);
        let m = BVMeasure::scalar_atoms(&[(0.0, 0.5)]).unwrap().in_class_w();
        assert!(m.member);
        assert_eq!(m.det_abs, 0.5);
    }

    #[test]
    fn lag_weights_split_off_grid_atoms() {
        let mu = BVMeasure::scalar_atoms(&[(-0.3, 1.0), (-0.5, 2.0)]).unwrap();
        let w = mu.lag_weights(4);
        // -0.3 sits at 1.2 h; -0.5 is on node 2
        assert!((s(w.get(1)) - 0.8).abs() < 1e-15);
        assert!((s(w.get(2)) - 2.2).abs() < 1e-15);
        assert!((w.total_norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let mu = BVMeasure::new(
            1,
            vec![Atom { loc: -0.5, weight: DMatrix::from_element(1, 1, 0.25) }],
            vec![DensityPiece { l: -1.0, r: -0.2, coeffs: vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, -2.0)] }],
        )
        .unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        assert!(text.contains("\"coeffs\":[[[1.0]],[[-2.0]]]"));
        let back: BVMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        assert!(serde_json::from_str::<BVMeasure>(r#"{"n":1,"atoms":[{"loc":0.5,"weight":[[1]]}]}"#).is_err());
        assert!(serde_json::from_str::<BVMeasure>(r#"{"n":1,"bogus":1}"#).is_err());
    }
}
