//! Quasipolynomials `Q(s) = sum_j p_j(s) e^{-tau_j s}` and their zeros in
//! rectangles of the complex plane.
//!
//! Zeros are located by tracing the zero-level curves of `Re Q` cell by cell
//! (marching squares) and detecting sign changes of `Im Q` along them. Each
//! candidate is refined by damped Newton iteration with the analytic
//! derivative, and the resulting set is checked against an argument
//! principle count along the rectangle boundary.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

pub type C64 = Complex<f64>;

/// Newton stops once `|Q(s)| <= NEWTON_TOL * scale(s)`.
pub const NEWTON_TOL: f64 = 1e-10;
/// Boundary samples with `|Q| <= BOUNDARY_TOL * scale` signal a zero on the contour.
pub const BOUNDARY_TOL: f64 = 1e-8;
/// Maximum number of grid nodes in a root search.
pub const MAX_GRID_NODES: f64 = 1e7;
/// Roots closer than this to the origin are the trivial double root.
pub const ROOT_ZERO_RADIUS: f64 = 1e-6;
/// Default width of the marginal strip left of the imaginary axis.
pub const DEFAULT_DELTA_MARGIN: f64 = 1e-3;
/// Default grid step as a fraction of the root bound.
pub const DEFAULT_GRID_STEP_FACTOR: f64 = 1.0 / 200.0;

const NEWTON_MAX_ITERS: usize = 200;
const DILATION: f64 = 1e-6;
const MAX_DILATIONS: usize = 5;
const MAX_ARG_DEPTH: u32 = 48;

/// One exponential term: `p(s) e^{-tau s}` with `p(s) = sum coeffs[i] s^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpTerm {
    pub tau: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QpJson", into = "QpJson")]
pub struct QuasiPolynomial {
    terms: Vec<QpTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpJson {
    pub terms: Vec<QpTerm>,
}

impl TryFrom<QpJson> for QuasiPolynomial {
    type Error = Error;
    fn try_from(j: QpJson) -> Result<Self> {
        QuasiPolynomial::new(j.terms)
    }
}

impl From<QuasiPolynomial> for QpJson {
    fn from(q: QuasiPolynomial) -> Self {
        QpJson { terms: q.terms }
    }
}

impl QuasiPolynomial {
    pub fn new(terms: Vec<QpTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("quasipolynomial needs at least one term".into()));
        }
        for t in &terms {
            if !(t.tau >= 0.0 && t.tau.is_finite()) {
                return Err(Error::InvalidArgument(format!("delay {} must be finite and nonnegative", t.tau)));
            }
            if t.coeffs.is_empty() || t.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument("term coefficients must be finite and non-empty".into()));
            }
        }
        if terms.windows(2).any(|w| !(w[0].tau < w[1].tau)) {
            return Err(Error::InvalidArgument("delays must be strictly increasing".into()));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[QpTerm] {
        &self.terms
    }

    pub fn eval(&self, s: C64) -> C64 {
        self.terms.iter().map(|t| horner(&t.coeffs, s) * (-t.tau * s).exp()).sum()
    }

    /// `(Q(s), Q'(s))`.
    pub fn eval_with_derivative(&self, s: C64) -> (C64, C64) {
        let mut q = C64::new(0.0, 0.0);
        let mut dq = C64::new(0.0, 0.0);
        for t in &self.terms {
            let e = (-t.tau * s).exp();
            let (p, dp) = horner_with_derivative(&t.coeffs, s);
            q += p * e;
            dq += (dp - p * t.tau) * e;
        }
        (q, dq)
    }

    /// Magnitude of the individual monomial terms at `s`: the size against
    /// which rounding in `Q(s)` is measured. Floored by the largest
    /// coefficient so that polynomials vanishing at the origin keep a
    /// meaningful scale there.
    pub fn scale(&self, s: C64) -> f64 {
        let r = s.norm();
        let mut total = 0.0;
        let mut cmax: f64 = 0.0;
        for t in &self.terms {
            let damp = (-t.tau * s.re).exp();
            let mut pw = 1.0;
            for &c in &t.coeffs {
                total += c.abs() * pw * damp;
                pw *= r;
                cmax = cmax.max(c.abs());
            }
        }
        total.max(cmax)
    }

    fn has_real_coefficients(&self) -> bool {
        true
    }
}

fn horner(coeffs: &[f64], s: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn horner_with_derivative(coeffs: &[f64], s: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let finite = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite());
        if !finite || !(re_min < re_max) || !(im_min < im_max) {
            return Err(Error::InvalidArgument(format!(
                "invalid rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self { re_min, re_max, im_min, im_max })
    }

    /// `S_alpha = [0, alpha] x [0, alpha]`.
    pub fn square(alpha: f64) -> Result<Self> {
        Self::new(0.0, alpha, 0.0, alpha)
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn dilate(&self, d: f64) -> Self {
        Self { re_min: self.re_min - d, re_max: self.re_max + d, im_min: self.im_min - d, im_max: self.im_max + d }
    }

    pub fn contains(&self, s: C64, tol: f64) -> bool {
        s.re >= self.re_min - tol && s.re <= self.re_max + tol && s.im >= self.im_min - tol && s.im <= self.im_max + tol
    }

    fn extent(&self) -> f64 {
        self.re_min.abs().max(self.re_max.abs()).max(self.im_min.abs()).max(self.im_max.abs()).max(1.0)
    }

    /// Counter-clockwise corners.
    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }
}

/// A refined zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub s: C64,
    pub multiplicity: usize,
    pub abs_q: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RootSearch {
    pub roots: Vec<Root>,
    /// Starting points on which Newton failed to converge.
    pub rejected: Vec<C64>,
}

impl RootSearch {
    /// Number of roots counted with multiplicity.
    pub fn count(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    /// CSV `re,im,abs_Q,newton_iters`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re,im,abs_Q,newton_iters")?;
        for r in &self.roots {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{}", r.s.re, r.s.im, r.abs_q, r.newton_iters)?;
        }
        Ok(())
    }
}

struct NewtonOutcome {
    s: C64,
    abs_q: f64,
    iters: usize,
    converged: bool,
}

fn newton(q: &QuasiPolynomial, start: C64) -> NewtonOutcome {
    let mut s = start;
    let (mut f, mut df) = q.eval_with_derivative(s);
    let mut iters = 0;
    while iters < NEWTON_MAX_ITERS {
        if f.norm() == 0.0 || df.norm() == 0.0 || !df.is_finite() {
            break;
        }
        iters += 1;
        let step = f / df;
        let mut lambda = 1.0;
        let mut next;
        let mut f_next;
        loop {
            next = s - step * lambda;
            f_next = q.eval(next);
            if (f_next.is_finite() && f_next.norm() < f.norm()) || lambda < 1e-4 {
                break;
            }
            lambda *= 0.5;
        }
        if !(f_next.is_finite() && f_next.norm() < f.norm()) {
            break;
        }
        let moved = (next - s).norm();
        s = next;
        let pair = q.eval_with_derivative(s);
        f = pair.0;
        df = pair.1;
        if moved <= 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    let abs_q = f.norm();
    NewtonOutcome { s, abs_q, iters, converged: s.is_finite() && abs_q <= NEWTON_TOL * q.scale(s) }
}

/// Modified Newton `s - m Q/Q'` for a root of known multiplicity `m`.
fn polish(q: &QuasiPolynomial, mut s: C64, multiplicity: usize) -> (C64, f64) {
    let mut best = q.eval(s).norm();
    for _ in 0..8 {
        let (f, df) = q.eval_with_derivative(s);
        if f.norm() == 0.0 || df.norm() == 0.0 {
            break;
        }
        let next = s - f / df * multiplicity as f64;
        let fn_ = q.eval(next).norm();
        if !(fn_ < best) {
            break;
        }
        best = fn_;
        s = next;
    }
    (s, best)
}

/// Zeros of `q` in `rect` located on a grid of spacing `grid_step`.
pub fn roots_in_rect(q: &QuasiPolynomial, rect: &Rect, grid_step: f64) -> Result<RootSearch> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid step must be positive, got {grid_step}")));
    }
    if rect.width() * rect.height() / (grid_step * grid_step) > MAX_GRID_NODES {
        return Err(Error::ResourceLimit(format!(
            "rectangle area / grid_step^2 exceeds {MAX_GRID_NODES:e}"
        )));
    }
    // pad by one cell and offset the lattice so that no node sits on the
    // real axis or the rectangle edges
    let re0 = rect.re_min - grid_step * 1.2718;
    let im0 = rect.im_min - grid_step * 1.3719;
    let nx = ((rect.width() + 2.6 * grid_step) / grid_step).ceil() as usize + 1;
    let ny = ((rect.height() + 2.8 * grid_step) / grid_step).ceil() as usize + 1;
    let node = |i: usize, j: usize| C64::new(re0 + i as f64 * grid_step, im0 + j as f64 * grid_step);

    let values: Vec<C64> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| (0..nx).map(move |i| q.eval(node(i, j))))
        .collect();
    let at = |i: usize, j: usize| values[j * nx + i];

    let candidates: Vec<C64> = (0..ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut out = Vec::new();
            for i in 0..nx - 1 {
                cell_candidates(
                    [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)],
                    [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)],
                    &mut out,
                );
            }
            out
        })
        .collect();

    let outcomes: Vec<(C64, NewtonOutcome)> = candidates.par_iter().map(|&c| (c, newton(q, c))).collect();

    let tol = 1e-9 * rect.extent();
    let dedup = 10.0 * grid_step * 1e-3;
    let mut found: Vec<NewtonOutcome> = Vec::new();
    let mut rejected = Vec::new();
    for (start, out) in outcomes {
        if !out.converged {
            if rect.contains(start, 0.0) {
                rejected.push(start);
            }
            continue;
        }
        if !rect.contains(out.s, tol) {
            continue;
        }
        match found.iter_mut().find(|f| (f.s - out.s).norm() <= dedup) {
            Some(f) => {
                if out.abs_q < f.abs_q {
                    *f = out;
                }
            }
            None => found.push(out),
        }
    }

    let mut roots = Vec::with_capacity(found.len());
    for (idx, f) in found.iter().enumerate() {
        let nearest = found
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != idx)
            .map(|(_, g)| (g.s - f.s).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = (0.25 * grid_step).min(0.4 * nearest);
        let local = Rect::new(f.s.re - radius, f.s.re + radius, f.s.im - radius, f.s.im + radius)?;
        let multiplicity = argument_principle_count(q, &local).map(|c| c.max(1) as usize).unwrap_or(1);
        let (s, abs_q) = if multiplicity > 1 { polish(q, f.s, multiplicity) } else { (f.s, f.abs_q) };
        roots.push(Root { s, multiplicity, abs_q, newton_iters: f.iters });
    }
    roots.sort_by(|a, b| a.s.im.total_cmp(&b.s.im).then(a.s.re.total_cmp(&b.s.re)));
    Ok(RootSearch { roots, rejected })
}

/// Candidate zeros inside one grid cell: points where `Im Q` changes sign
/// along the `Re Q = 0` segment, plus the cell centre when both level sets
/// cross the cell.
fn cell_candidates(p: [C64; 4], v: [C64; 4], out: &mut Vec<C64>) {
    let re_pos: [bool; 4] = std::array::from_fn(|k| v[k].re >= 0.0);
    let im_pos: [bool; 4] = std::array::from_fn(|k| v[k].im >= 0.0);
    let re_mixed = re_pos.iter().any(|&b| b != re_pos[0]);
    let im_mixed = im_pos.iter().any(|&b| b != im_pos[0]);
    if !re_mixed || !im_mixed {
        return;
    }
    // Re Q crossings on the four edges with the interpolated Im Q there
    let mut crossings: Vec<(C64, f64)> = Vec::with_capacity(4);
    for k in 0..4 {
        let l = (k + 1) % 4;
        if re_pos[k] != re_pos[l] {
            let t = v[k].re / (v[k].re - v[l].re);
            crossings.push((p[k] + (p[l] - p[k]) * t, v[k].im + (v[l].im - v[k].im) * t));
        }
    }
    let segments: Vec<((C64, f64), (C64, f64))> = match crossings.len() {
        2 => vec![(crossings[0], crossings[1])],
        4 => {
            // saddle: pair according to the sign at the centre
            let centre_re: f64 = v.iter().map(|z| z.re).sum::<f64>() / 4.0;
            if (centre_re >= 0.0) == re_pos[0] {
                vec![(crossings[0], crossings[3]), (crossings[1], crossings[2])]
            } else {
                vec![(crossings[0], crossings[1]), (crossings[2], crossings[3])]
            }
        }
        _ => Vec::new(),
    };
    for (a, b) in segments {
        if (a.1 >= 0.0) != (b.1 >= 0.0) {
            let t = a.1 / (a.1 - b.1);
            out.push(a.0 + (b.0 - a.0) * t);
        }
    }
    out.push((p[0] + p[2]) * 0.5);
}

fn arg_ratio(b: C64, a: C64) -> f64 {
    (b / a).arg()
}

struct BoundaryWalk<'a> {
    q: &'a QuasiPolynomial,
    min_step: f64,
    near: f64,
    hit: bool,
}

impl BoundaryWalk<'_> {
    /// A small sample only counts as a zero on the contour when Newton
    /// started there converges to a zero at (numerically) the same point.
    fn check(&mut self, s: C64, f: C64) {
        if f.norm() > BOUNDARY_TOL * self.q.scale(s) {
            return;
        }
        let out = newton(self.q, s);
        if !out.converged || (out.s - s).norm() <= self.near {
            self.hit = true;
        }
    }

    /// Argument increment of `Q` from `a` to `b`, refined until every
    /// refined until each half changes `Q` by less than half its modulus.
    fn segment(&mut self, a: C64, fa: C64, b: C64, fb: C64, depth: u32) -> f64 {
        if self.hit {
            return 0.0;
        }
        let m = (a + b) * 0.5;
        let fm = self.q.eval(m);
        self.check(m, fm);
        if self.hit {
            return 0.0;
        }
        // a relative change below 1/2 on each half bounds the turn per half
        // by pi/6 and rules out a full turn hiding between samples
        let settled = |x: C64, y: C64| (y - x).norm() < 0.5 * x.norm().min(y.norm());
        if settled(fa, fm) && settled(fm, fb) {
            return arg_ratio(fm, fa) + arg_ratio(fb, fm);
        }
        if depth >= MAX_ARG_DEPTH || (b - a).norm() < self.min_step {
            self.hit = true;
            return 0.0;
        }
        self.segment(a, fa, m, fm, depth + 1) + self.segment(m, fm, b, fb, depth + 1)
    }
}

fn winding(q: &QuasiPolynomial, rect: &Rect) -> Option<f64> {
    let corners = rect.corners();
    let mut walk = BoundaryWalk { q, min_step: 1e-13 * rect.extent(), near: 0.1 * DILATION * rect.extent(), hit: false };
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let len = (b - a).norm();
        let pieces = ((len / rect.width().min(rect.height()) * 64.0).ceil() as usize).clamp(64, 100_000);
        let mut prev = a;
        let mut fprev = q.eval(a);
        walk.check(prev, fprev);
        for k in 1..=pieces {
            let next = a + (b - a) * (k as f64 / pieces as f64);
            let fnext = q.eval(next);
            walk.check(next, fnext);
            total += walk.segment(prev, fprev, next, fnext, 0);
            if walk.hit {
                return None;
            }
            prev = next;
            fprev = fnext;
        }
    }
    Some(total / (2.0 * std::f64::consts::PI))
}

/// Number of zeros (with multiplicity) enclosed by `rect`, from the winding
/// number of `Q` along the boundary. A zero on the boundary triggers up to
/// five dilations by `1e-6`.
pub fn argument_principle_count(q: &QuasiPolynomial, rect: &Rect) -> Result<i64> {
    let mut r = *rect;
    for _ in 0..=MAX_DILATIONS {
        if let Some(w) = winding(q, &r) {
            let k = w.round();
            if (w - k).abs() > 0.05 {
                return Err(Error::Uncountable(format!("winding number {w} is not an integer")));
            }
            return Ok(k as i64);
        }
        r = r.dilate(DILATION);
    }
    Err(Error::Uncountable("zero persists on the contour after dilation".into()))
}

/// `Q(s) = s^2 - a s + b + ((a - b) s - b) e^{-s}`, the numerator of the
/// characteristic function of the affine-density equation.
pub fn char_quasipoly_affine(a: f64, b: f64) -> QuasiPolynomial {
    QuasiPolynomial {
        terms: vec![QpTerm { tau: 0.0, coeffs: vec![b, -a, 1.0] }, QpTerm { tau: 1.0, coeffs: vec![-b, a - b] }],
    }
}

/// Bound on `|lambda|` for zeros with `Re lambda >= 0`:
/// `||A_0||_2 + ||A_1||_2` of the companion realization.
pub fn root_bound_affine(a: f64, b: f64) -> f64 {
    let a0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, b, -a]);
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -b, a - b]);
    spectral_norm(&a0) + spectral_norm(&a1)
}

/// `Q''(0) = 2 - 2a + b`; the equation is unstable whenever it is `<= 0`.
pub fn half_space_value(a: f64, b: f64) -> f64 {
    2.0 - 2.0 * a + b
}

/// Knobs for [`exp_stability_affine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpStabilityOptions {
    pub grid_step_factor: f64,
    pub delta_margin: f64,
}

impl Default for ExpStabilityOptions {
    fn default() -> Self {
        Self { grid_step_factor: DEFAULT_GRID_STEP_FACTOR, delta_margin: DEFAULT_DELTA_MARGIN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpStability {
    pub stable: bool,
    /// No zero with `Re >= 0`, but some zero in `(-delta_margin, 0)`.
    pub marginal: bool,
    /// A zero with `Re >= 0` (other than the origin), when one was found.
    pub witness: Option<C64>,
    /// Rightmost non-trivial zero found in the search region.
    pub worst_root: Option<C64>,
    /// Whether a rectangle search was run (false on the half-space shortcut).
    pub searched: bool,
}

/// Positive real zero of `Q` when `2 - 2a + b < 0`, by bisection on `(0, alpha]`.
pub fn positive_real_root_affine(a: f64, b: f64) -> Option<f64> {
    if half_space_value(a, b) >= 0.0 {
        return None;
    }
    let q = char_quasipoly_affine(a, b);
    let f = |x: f64| q.eval(C64::new(x, 0.0)).re;
    let alpha = root_bound_affine(a, b);
    // geometric scan for the first point where Q dips below zero
    let mut lo = None;
    let mut x = 1e-9 * alpha.max(1.0);
    while x < alpha {
        if f(x) < 0.0 {
            lo = Some(x);
            break;
        }
        x *= 1.05;
    }
    let mut lo = lo?;
    let mut hi = lo;
    while f(hi) < 0.0 {
        hi = (hi * 1.5).min(alpha * 2.0 + 1.0);
        if hi >= alpha * 2.0 + 1.0 && f(hi) < 0.0 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(if f(lo).abs() < f(hi).abs() { lo } else { hi })
}

/// Exponential stability of the affine-density equation.
///
/// Outside the half-space `2 - 2a + b <= 0`, every zero with `Re >= 0` has
/// a conjugate representative in `S_alpha`; the search covers
/// `[-delta_margin, alpha] x [0, alpha]` (the strip left of the axis flags
/// near-marginal cases) and its root count is certified by the argument
/// principle.
pub fn exp_stability_affine(a: f64, b: f64, opts: &ExpStabilityOptions) -> Result<ExpStability> {
    let q2 = half_space_value(a, b);
    if q2 <= 1e-12 * (1.0 + a.abs() + b.abs()) {
        let witness = positive_real_root_affine(a, b).map(|x| C64::new(x, 0.0));
        return Ok(ExpStability {
            stable: false,
            marginal: false,
            witness: witness.or(if q2 >= 0.0 { Some(C64::new(0.0, 0.0)) } else { None }),
            worst_root: witness,
            searched: false,
        });
    }
    let q = char_quasipoly_affine(a, b);
    let alpha = root_bound_affine(a, b);
    let step = alpha * opts.grid_step_factor;
    // the bottom edge sits just below the real axis so real zeros are interior
    let rect = Rect::new(-opts.delta_margin, alpha, -0.31 * step, alpha)?;
    let search = roots_in_rect(&q, &rect, step)?;
    let counted = argument_principle_count(&q, &rect)?;
    if counted != search.count() as i64 {
        return Err(Error::CountMismatch { found: search.count(), counted });
    }

    let mut witness: Option<C64> = None;
    let mut worst: Option<C64> = None;
    let mut marginal = false;
    for r in &search.roots {
        if r.s.norm() < ROOT_ZERO_RADIUS {
            // a third zero merged into the origin means a zero on the axis
            if r.multiplicity > 2 {
                marginal = true;
            }
            continue;
        }
        let s = if r.s.im < 0.0 { r.s.conj() } else { r.s };
        if worst.is_none_or(|w| s.re > w.re) {
            worst = Some(s);
        }
        if s.re >= 0.0 {
            if witness.is_none_or(|w| s.re > w.re) {
                witness = Some(s);
            }
        } else if s.re > -opts.delta_margin {
            marginal = true;
        }
    }
    let stable = witness.is_none();
    Ok(ExpStability { stable: stable && !marginal, marginal: stable && marginal, witness, worst_root: worst, searched: true })
}

impl QuasiPolynomial {
    /// `|Q(conj s) - conj(Q(s))|`, zero for real coefficients.
    pub fn conjugate_defect(&self, s: C64) -> f64 {
        debug_assert!(self.has_real_coefficients());
        (self.eval(s.conj()) - self.eval(s).conj()).norm()
    }
}
