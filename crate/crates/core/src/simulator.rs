//! Forward solution of `x(t) = int dmu(theta) x(t + theta)` on a uniform grid.
//!
//! The solution on `[-1, T]` is stored at the nodes `t = -1 + k h`,
//! `h = 1/m`, and read between nodes by linear interpolation. Each new node
//! depends only on strictly earlier nodes plus the weight at lag zero, so a
//! step is one linear solve with `I - W_0`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{BVMeasure, SINGULAR_TOL};

/// Default grid resolution `h = 1/256`.
pub const DEFAULT_GRID_M: usize = 256;
/// Trajectories are cut off once `|x(t)|` exceeds this value.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

/// A continuous function on `[-1, 0]` sampled at `m + 1` equispaced nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    n: usize,
    m: usize,
    samples: Vec<f64>,
}

impl History {
    pub fn from_samples(n: usize, m: usize, samples: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidHistory(format!("grid must have m >= 2 cells, got {m}")));
        }
        if n == 0 || samples.len() != (m + 1) * n {
            return Err(Error::InvalidHistory(format!(
                "expected {} samples for n = {n}, m = {m}, got {}",
                (m + 1) * n,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidHistory("non-finite sample".into()));
        }
        Ok(Self { n, m, samples })
    }

    pub fn from_fn<F: Fn(f64) -> DVector<f64>>(n: usize, m: usize, f: F) -> Result<Self> {
        let mut samples = Vec::with_capacity((m + 1) * n);
        for j in 0..=m {
            let v = f(Self::node_theta(m, j));
            if v.len() != n {
                return Err(Error::InvalidHistory("function returned wrong dimension".into()));
            }
            samples.extend(v.iter());
        }
        Self::from_samples(n, m, samples)
    }

    pub fn scalar_from_fn<F: Fn(f64) -> f64>(m: usize, f: F) -> Result<Self> {
        Self::from_samples(1, m, (0..=m).map(|j| f(Self::node_theta(m, j))).collect())
    }

    /// `cos(2 k pi theta)`, the oscillatory initial condition.
    pub fn cosine(m: usize, k: u32) -> Result<Self> {
        let w = 2.0 * std::f64::consts::PI * k as f64;
        Self::scalar_from_fn(m, |t| (w * t).cos())
    }

    fn node_theta(m: usize, j: usize) -> f64 {
        (j as f64 - m as f64) / m as f64
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn grid_m(&self) -> usize {
        self.m
    }

    pub fn grid_step(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sample at node `j` (`theta = -1 + j h`).
    pub fn node(&self, j: usize) -> &[f64] {
        &self.samples[j * self.n..(j + 1) * self.n]
    }

    pub fn at_zero(&self) -> DVector<f64> {
        DVector::from_column_slice(self.node(self.m))
    }

    /// Linear interpolation at `theta` in `[-1, 0]`.
    pub fn eval(&self, theta: f64) -> Result<DVector<f64>> {
        if !(-1.0..=0.0).contains(&theta) {
            return Err(Error::Domain { value: theta });
        }
        let u = (theta + 1.0) * self.m as f64;
        let j = (u.floor() as usize).min(self.m - 1);
        let f = u - j as f64;
        let (a, b) = (self.node(j), self.node(j + 1));
        Ok(DVector::from_iterator(self.n, a.iter().zip(b).map(|(x, y)| (1.0 - f) * x + f * y)))
    }

    /// `sup_theta |x(theta)|` with the Euclidean norm; attained at a node.
    pub fn sup_norm(&self) -> f64 {
        self.samples
            .chunks(self.n)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Returns `self + c` with the constant vector `c` added at every node.
    pub fn shifted(&self, c: &DVector<f64>) -> Self {
        let mut samples = self.samples.clone();
        for chunk in samples.chunks_mut(self.n) {
            for (x, d) in chunk.iter_mut().zip(c.iter()) {
                *x += d;
            }
        }
        Self { n: self.n, m: self.m, samples }
    }
}

/// Residual `eta(0) - int dmu eta` at grid resolution.
pub fn c0_residual(mu: &BVMeasure, eta: &History) -> Result<DVector<f64>> {
    Ok(eta.at_zero() - mu.integrate_against(eta)?)
}

/// Constant shift `c0` that moves `eta` into `C0`.
pub fn c0_shift(mu: &BVMeasure, eta: &History) -> Result<DVector<f64>> {
    let n = mu.dimension();
    let residual = mu.integrate_against(eta)? - eta.at_zero();
    let total = DMatrix::<f64>::identity(n, n) - mu.cumulative(0.0)?;
    if total.determinant().abs() < SINGULAR_TOL {
        return Err(Error::NotProjectable { residual: residual.norm() });
    }
    total
        .lu()
        .solve(&residual)
        .ok_or(Error::NotProjectable { residual: residual.norm() })
}

/// Projects `eta` onto `C0` by a constant shift:
/// `eta + c0` with `c0 = (I - M(0))^{-1} (int dmu eta - eta(0))`.
pub fn project_c0(eta: &History, mu: &BVMeasure) -> Result<History> {
    let c0 = c0_shift(mu, eta)?;
    Ok(eta.shifted(&c0))
}

/// Solution samples on `[-1, T]` with per-unit-window sup norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    m: usize,
    horizon: f64,
    samples: Vec<f64>,
    window_sups: Vec<f64>,
    diverged: bool,
}

impl Trajectory {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn grid_step(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn grid_m(&self) -> usize {
        self.m
    }

    /// Requested horizon (the trajectory may stop earlier on divergence).
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of stored nodes, including the `m + 1` initial ones.
    pub fn len(&self) -> usize {
        self.samples.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.m as f64) / self.m as f64
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.samples[k * self.n..(k + 1) * self.n]
    }

    /// Last time reached.
    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// `W_j = sup_{t in [j-1, j]} |x(t)|` for `j = 0..`.
    pub fn window_sups(&self) -> &[f64] {
        &self.window_sups
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Linear interpolation at time `t` in `[-1, end_time]`.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        if !(t >= -1.0 && t <= self.end_time()) {
            return Err(Error::Domain { value: t });
        }
        let u = (t + 1.0) * self.m as f64;
        let k = (u.floor() as usize).min(self.len() - 2);
        let f = u - k as f64;
        let (a, b) = (self.node(k), self.node(k + 1));
        Ok(DVector::from_iterator(self.n, a.iter().zip(b).map(|(x, y)| (1.0 - f) * x + f * y)))
    }

    /// History segment `x_t` for a grid time `t = k h`.
    pub fn history_at(&self, k: usize) -> Result<History> {
        if k + self.m >= self.len() {
            return Err(Error::Domain { value: k as f64 / self.m as f64 });
        }
        History::from_samples(self.n, self.m, self.samples[k * self.n..(k + self.m + 1) * self.n].to_vec())
    }

    /// CSV `t,x_1,...,x_n`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x_{i}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for k in 0..self.len() {
            write!(out, "{:.16e}", self.time(k))?;
            for v in self.node(k) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// CSV `j,W_j`.
    pub fn write_windows_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "j,W_j")?;
        for (j, w) in self.window_sups.iter().enumerate() {
            writeln!(out, "{j},{w:.16e}")?;
        }
        Ok(())
    }
}

/// Residual tolerance for accepting an initial condition as a member of C0.
pub fn c0_tolerance(x0: &History) -> f64 {
    1e-8 * (1.0 + x0.sup_norm())
}

/// Advances the solution from `x0` up to time `horizon`.
pub fn solve(mu: &BVMeasure, x0: &History, horizon: f64) -> Result<Trajectory> {
    let n = mu.dimension();
    if x0.dimension() != n {
        return Err(Error::InvalidHistory("dimension mismatch between measure and history".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let w = mu.in_class_w();
    if !w.member {
        return Err(Error::NotWellPosed { det: w.det_abs });
    }
    let residual = c0_residual(mu, x0)?.norm();
    let tolerance = c0_tolerance(x0);
    if residual > tolerance {
        return Err(Error::NotInC0 { residual, tolerance });
    }

    let m = x0.grid_m();
    let weights = mu.lag_weights(m);
    let implicit = DMatrix::<f64>::identity(n, n) - weights.get(0);
    let implicit00 = implicit[(0, 0)];
    if implicit.determinant().abs() < SINGULAR_TOL {
        return Err(Error::NotWellPosed { det: implicit.determinant().abs() });
    }
    let solver = implicit.lu();
    let flat = weights.flat();
    // lags with nonzero weight, skipping lag 0
    let active: Vec<usize> = (1..=m)
        .filter(|&i| flat[i * n * n..(i + 1) * n * n].iter().any(|&v| v != 0.0))
        .collect();

    let steps = (horizon * m as f64).round() as usize;
    let mut samples = Vec::with_capacity((m + 1 + steps) * n);
    samples.extend_from_slice(x0.samples());
    let mut rhs = DVector::<f64>::zeros(n);
    let mut diverged = false;

    for step in 1..=steps {
        let k = m + step;
        rhs.fill(0.0);
        for &i in &active {
            let base = (k - i) * n;
            let wi = &flat[i * n * n..(i + 1) * n * n];
            for r in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += wi[r * n + c] * samples[base + c];
                }
                rhs[r] += s;
            }
        }
        let x = if n == 1 {
            DVector::from_element(1, rhs[0] / implicit00)
        } else {
            solver.solve(&rhs).ok_or(Error::NotWellPosed { det: 0.0 })?
        };
        let blown = x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_CUTOFF);
        samples.extend(x.iter());
        if blown {
            diverged = true;
            break;
        }
    }

    let window_sups = window_sups(&samples, n, m);
    Ok(Trajectory { n, m, horizon, samples, window_sups, diverged })
}

fn window_sups(samples: &[f64], n: usize, m: usize) -> Vec<f64> {
    let len = samples.len() / n;
    let norm = |k: usize| {
        let v = &samples[k * n..(k + 1) * n];
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    };
    // window j covers nodes (j-1) m + m .. j m + m, i.e. [j - 1, j]
    let windows = (len - 1) / m;
    (0..windows)
        .map(|j| (j * m..=(j + 1) * m).map(norm).fold(0.0, f64::max))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    Decayed,
    Diverged,
    Inconclusive,
}

/// Exponential fit `W_j ~ K W_0 e^{rate j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayEstimate {
    pub rate: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub verdict: DecayVerdict,
}

/// Least-squares fit of `log W_j` against `j` over the last half of the
/// windows.
pub fn estimate_decay(traj: &Trajectory) -> Result<DecayEstimate> {
    let w = traj.window_sups();
    let w0 = w.first().copied().unwrap_or(0.0);
    if traj.diverged() {
        let (rate, k) = fit_log_windows(w, w0);
        return Ok(DecayEstimate { rate, k, verdict: DecayVerdict::Diverged });
    }
    if w.len() < 6 {
        return Err(Error::InvalidArgument(format!(
            "decay estimation needs a horizon of at least 5, got {} windows",
            w.len()
        )));
    }
    let last = *w.last().unwrap();
    if last == 0.0 {
        return Ok(DecayEstimate { rate: f64::NEG_INFINITY, k: 1.0, verdict: DecayVerdict::Decayed });
    }
    let (rate, k) = fit_log_windows(w, w0);
    let verdict = if last > 1e3 * w0 {
        DecayVerdict::Diverged
    } else if rate < -1e-3 && last < w0 {
        DecayVerdict::Decayed
    } else {
        DecayVerdict::Inconclusive
    };
    Ok(DecayEstimate { rate, k, verdict })
}

fn fit_log_windows(w: &[f64], w0: f64) -> (f64, f64) {
    let start = w.len() / 2;
    let pts: Vec<(f64, f64)> =
        (start..w.len()).filter(|&j| w[j] > 0.0 && w[j].is_finite()).map(|j| (j as f64, w[j].ln())).collect();
    if pts.is_empty() {
        return (0.0, 0.0);
    }
    let cnt = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / cnt;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / cnt;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - rate * mx;
    let k = if w0 > 0.0 { intercept.exp() / w0 } else { 0.0 };
    (rate, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_validation_and_eval() {
        assert!(History::from_samples(1, 1, vec![0.0, 1.0]).is_err());
        assert!(History::from_samples(1, 4, vec![0.0; 4]).is_err());
        let h = History::scalar_from_fn(4, |t| 2.0 * t + 1.0).unwrap();
        assert!((h.eval(-0.6).unwrap()[0] - (-0.2)).abs() < 1e-15);
        assert_eq!(h.eval(0.0).unwrap()[0], 1.0);
        assert!(h.eval(0.1).is_err());
        assert_eq!(h.sup_norm(), 1.0);
    }

    #[test]
    fn projection_examples() {
        let mu = BVMeasure::affine(0.5, 2.1);
        // exactly in C0 already after one projection
        let eta = project_c0(&History::cosine(256, 1).unwrap(), &mu).unwrap();
        assert!(c0_shift(&mu, &eta).unwrap()[0].abs() < 1e-14);

        let c0 = c0_shift(&mu, &History::cosine(4096, 3).unwrap()).unwrap()[0];
        assert!((c0 + 1.0 / 1.55).abs() < 1e-6, "{c0}");

        let zero = BVMeasure::zero(1);
        let eta = History::scalar_from_fn(16, |t| t).unwrap();
        assert_eq!(c0_shift(&zero, &eta).unwrap()[0], 0.0);
    }

    #[test]
    fn projection_fails_when_total_mass_is_one() {
        let mu = BVMeasure::scalar_atoms(&[(-1.0, 1.0)]).unwrap();
        let eta = History::scalar_from_fn(8, |t| t).unwrap();
        assert!(matches!(project_c0(&eta, &mu), Err(Error::NotProjectable { .. })));
    }

    #[test]
    fn zero_measure_gives_zero_solution() {
        let mu = BVMeasure::zero(1);
        let x0 = History::scalar_from_fn(16, |t| t * (t + 1.0)).unwrap();
        let traj = solve(&mu, &x0, 6.0).unwrap();
        assert!((17..traj.len()).all(|k| traj.node(k)[0] == 0.0));
        let est = estimate_decay(&traj).unwrap();
        assert_eq!(est.verdict, DecayVerdict::Decayed);
        assert_eq!(est.rate, f64::NEG_INFINITY);
    }

    #[test]
    fn constant_solutions_of_unit_delay() {
        let mu = BVMeasure::scalar_atoms(&[(-1.0, 1.0)]).unwrap();
        let ones = History::scalar_from_fn(8, |_| 1.0).unwrap();
        let traj = solve(&mu, &ones, 3.0).unwrap();
        assert!((0..traj.len()).all(|k| traj.node(k)[0] == 1.0));
        let zeros = History::scalar_from_fn(8, |_| 0.0).unwrap();
        let traj = solve(&mu, &zeros, 3.0).unwrap();
        assert!((0..traj.len()).all(|k| traj.node(k)[0] == 0.0));
    }

    #[test]
    fn half_atom_contracts_by_half_per_window() {
        let mu = BVMeasure::scalar_atoms(&[(-1.0, 0.5)]).unwrap();
        let x0 = project_c0(&History::scalar_from_fn(64, |t| 1.0 + t).unwrap(), &mu).unwrap();
        let traj = solve(&mu, &x0, 8.0).unwrap();
        let w0 = x0.sup_norm();
        for k in 0..traj.len() {
            let t = traj.time(k);
            let bound = 0.5f64.powi(t.max(0.0).floor() as i32) * w0;
            assert!(traj.node(k)[0].abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_initial_conditions_outside_c0() {
        let mu = BVMeasure::scalar_atoms(&[(-1.0, 0.5)]).unwrap();
        let x0 = History::scalar_from_fn(8, |_| 1.0).unwrap();
        assert!(matches!(solve(&mu, &x0, 1.0), Err(Error::NotInC0 { .. })));
        let ill = BVMeasure::scalar_atoms(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(solve(&ill, &x0, 1.0), Err(Error::NotWellPosed { .. })));
    }

    #[test]
    fn exact_exponential_rate() {
        let m = 8;
        let samples: Vec<f64> = (0..=(m * 11)).map(|k| 0.5f64.powf((k as f64 - m as f64) / m as f64)).collect();
        let traj = Trajectory {
            n: 1,
            m,
            horizon: 10.0,
            window_sups: window_sups(&samples, 1, m),
            samples,
            diverged: false,
        };
        let est = estimate_decay(&traj).unwrap();
        assert!((est.rate - 0.5f64.ln()).abs() < 1e-6);
        assert_eq!(est.verdict, DecayVerdict::Decayed);
    }

    #[test]
    fn csv_layout() {
        let mu = BVMeasure::zero(1);
        let traj = solve(&mu, &History::scalar_from_fn(2, |t| t).unwrap(), 0.5).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1");
        assert_eq!(lines[1], "-1.0000000000000000e0,-1.0000000000000000e0");
        assert_eq!(lines.len(), 1 + 4);
    }
}
