//! Piecewise-constant delay perturbations `phi: [-1, 0] -> [-1, 0]`.
//!
//! Random draws use `ChaCha8Rng` seeded with `seed_from_u64`, so a run is
//! reproducible from `(RNG_ALGORITHM, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{BVMeasure, ScalarSignedDecomposition, Sign};
use crate::simulator::{project_c0, solve, History, Trajectory};

/// Name of the generator behind every seeded construction.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/seed_from_u64";

/// Half-width (in cells) of a tiny piece isolating an atom from an
/// opposite-sign density around it.
const ATOM_PIECE_WIDTH: f64 = 1e-13;

/// Jitter of the destabilizing representatives, as a fraction of the cell width.
const RESONANT_JITTER: f64 = 0.05;

/// Piecewise-constant map with value `values[j]` on `(s_j, s_{j+1}]`
/// (the first piece closed at `-1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhiJson", into = "PhiJson")]
pub struct PerturbationMap {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiJson {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl TryFrom<PhiJson> for PerturbationMap {
    type Error = Error;
    fn try_from(j: PhiJson) -> Result<Self> {
        PerturbationMap::new(j.breakpoints, j.values, j.seed)
    }
}

impl From<PerturbationMap> for PhiJson {
    fn from(p: PerturbationMap) -> Self {
        PhiJson { breakpoints: p.breakpoints, values: p.values, seed: p.seed }
    }
}

impl PerturbationMap {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return bad(format!(
                "need m + 1 breakpoints for m values, got {} and {}",
                breakpoints.len(),
                values.len()
            ));
        }
        if breakpoints[0] != -1.0 || *breakpoints.last().unwrap() != 0.0 {
            return bad("breakpoints must start at -1 and end at 0".into());
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("breakpoints must be strictly increasing".into());
        }
        if values.iter().any(|v| !(-1.0..=0.0).contains(v)) {
            return bad("values must lie in [-1, 0]".into());
        }
        Ok(Self { breakpoints, values, seed })
    }

    /// Map that sends every piece to the given representative (for example
    /// atom locations), i.e. a delay-preserving perturbation.
    pub fn identity_like(breakpoints: Vec<f64>, representatives: Vec<f64>) -> Result<Self> {
        Self::new(breakpoints, representatives, None)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn pieces(&self) -> usize {
        self.values.len()
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        if !(-1.0..=0.0).contains(&theta) {
            return Err(Error::Domain { value: theta });
        }
        // first j with theta <= s_{j+1}
        let j = self.breakpoints[1..].partition_point(|&s| s < theta);
        Ok(self.values[j.min(self.values.len() - 1)])
    }

    /// `||phi - id||_inf`, attained at a piece endpoint.
    pub fn sup_deviation(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - self.breakpoints[j]).abs().max((v - self.breakpoints[j + 1]).abs()))
            .fold(0.0, f64::max)
    }
}

/// `N` equal pieces `(-j/N, -(j-1)/N]`, each sent to a uniform point of its
/// own cell (never to `0`), so `||phi - id|| <= 1/N`.
pub fn sample_phi_uniform(pieces: usize, seed: u64) -> Result<PerturbationMap> {
    if pieces == 0 {
        return Err(Error::InvalidArgument("need at least one piece".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let breakpoints: Vec<f64> = (0..=pieces).map(|i| (i as f64 - pieces as f64) / pieces as f64).collect();
    let values = breakpoints.windows(2).map(|w| rng.random_range(w[0]..w[1])).collect();
    PerturbationMap::new(breakpoints, values, Some(seed))
}

/// Perturbation of size `< epsilon` whose pushforward is a pointwise-delay
/// system with `sum |weights| = TV(mu) >= 1`.
///
/// `[-1, 0]` is cut into `m` equal cells of width `w < epsilon`. Within cell
/// `k` the positive-support part of the cell is sent to one representative
/// and the negative-support part to another, each lying in the support of
/// its sign. The representatives sit near `t_k + w/4` and `t_k + 3w/4`
/// (moved into the right support when needed) with a small random jitter: at frequency
/// `2 pi / w` the positive and negative atoms then add up in phase, giving
/// an unstable characteristic root that is visible on ordinary simulation
/// grids, while the jitter keeps the delays generic.
pub fn destabilizing_phi(mu: &BVMeasure, epsilon: f64, seed: u64) -> Result<PerturbationMap> {
    if mu.dimension() != 1 {
        return Err(Error::UnsupportedDimension(mu.dimension()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let tv = mu.total_variation();
    if tv < 1.0 {
        return Err(Error::NoDestabilizer { tv });
    }
    let decomposition = mu.jordan_decompose()?;

    let cells = (1.0 / epsilon).floor() as usize + 1;
    let width = 1.0 / cells as f64;
    let cell_edge = |k: usize| (k as f64 - cells as f64) / cells as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reps = Vec::with_capacity(cells);
    for k in 0..cells {
        let (lo, hi) = (cell_edge(k), cell_edge(k + 1));
        let mut draw = |centre: f64| lo + width * (centre + RESONANT_JITTER * rng.random_range(-1.0..1.0));
        let pos = draw(0.25);
        let neg = draw(0.75);
        reps.push((
            nearest_of_sign(&decomposition, Sign::Positive, lo, hi, pos),
            nearest_of_sign(&decomposition, Sign::Negative, lo, hi, neg),
        ));
    }

    // every point where the sign of mu can change, plus the cell edges
    let mut cuts: Vec<f64> = (0..=cells).map(cell_edge).collect();
    cuts.extend(decomposition.positive_support.intervals.iter().flat_map(|&(l, r)| [l, r]));
    let atom_width = ATOM_PIECE_WIDTH;
    for a in mu.atoms() {
        cuts.push(a.loc);
        if a.loc > -1.0 {
            cuts.push((a.loc - atom_width).max(-1.0));
        } else {
            cuts.push(-1.0 + atom_width);
        }
    }
    cuts.retain(|c| (-1.0..=0.0).contains(c));
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    let mut breakpoints = vec![-1.0];
    let mut values: Vec<f64> = Vec::new();
    for (j, seg) in cuts.windows(2).enumerate() {
        let (l, r) = (seg[0], seg[1]);
        let mid = 0.5 * (l + r);
        let k = (((mid + 1.0) / width).floor() as usize).min(cells - 1);
        let mass = mu.mass(l, r, j == 0)[(0, 0)];
        let sign = if mass > 0.0 {
            Sign::Positive
        } else if mass < 0.0 {
            Sign::Negative
        } else {
            decomposition.sign_at(mid)
        };
        let v = match sign {
            Sign::Positive => reps[k].0,
            Sign::Negative => reps[k].1,
        };
        if values.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = r;
        } else {
            values.push(v);
            breakpoints.push(r);
        }
    }
    PerturbationMap::new(breakpoints, values, Some(seed))
}

/// Point of `[lo, hi]` closest to `target` where the decomposition has the
/// given sign; `target` itself when the cell holds no such point.
fn nearest_of_sign(dec: &ScalarSignedDecomposition, sign: Sign, lo: f64, hi: f64, target: f64) -> f64 {
    if dec.sign_at(target) == sign {
        return target;
    }
    let support = match sign {
        Sign::Positive => &dec.positive_support,
        Sign::Negative => &dec.negative_support,
    };
    let mut candidates: Vec<f64> = support.points.iter().copied().filter(|p| (lo..=hi).contains(p) && *p < 0.0).collect();
    for &(l, r) in &support.intervals {
        let (a, b) = (l.max(lo), r.min(hi));
        if a < b {
            // stay clear of the open right end
            candidates.push(target.clamp(a, b - 1e-6 * (b - a)));
        }
    }
    candidates
        .into_iter()
        .filter(|&c| dec.sign_at(c) == sign)
        .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
        .unwrap_or(target)
}

/// Simulates the perturbed equation `x(t) = int d(phi_* mu) x(t + theta)`
/// from `x0` shifted into `C0` of the perturbed measure.
pub fn perturb_and_simulate(mu: &BVMeasure, phi: &PerturbationMap, x0: &History, horizon: f64) -> Result<Trajectory> {
    let perturbed = mu.pushforward(phi);
    let w = perturbed.in_class_w();
    if !w.member {
        return Err(Error::NotWellPosed { det: w.det_abs });
    }
    let start = project_c0(x0, &perturbed)?;
    solve(&perturbed, &start, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sampling_contract() {
        let phi = sample_phi_uniform(25, 7).unwrap();
        assert_eq!(phi.pieces(), 25);
        assert!(phi.sup_deviation() <= 0.04 + 1e-15);
        assert!(phi.values().iter().all(|&v| (-1.0..0.0).contains(&v)));
        assert_eq!(phi, sample_phi_uniform(25, 7).unwrap());
        assert_ne!(phi, sample_phi_uniform(25, 8).unwrap());

        let one = sample_phi_uniform(1, 3).unwrap();
        assert!(one.values()[0] < 0.0 && one.values()[0] >= -1.0);
        assert!(one.sup_deviation() <= 1.0);
    }

    #[test]
    fn eval_respects_piece_convention() {
        let phi = PerturbationMap::new(vec![-1.0, -0.5, 0.0], vec![-0.9, -0.1], None).unwrap();
        assert_eq!(phi.eval(-1.0).unwrap(), -0.9);
        assert_eq!(phi.eval(-0.5).unwrap(), -0.9);
        assert_eq!(phi.eval(-0.49).unwrap(), -0.1);
        assert_eq!(phi.eval(0.0).unwrap(), -0.1);
        assert!(phi.eval(0.5).is_err());
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(PerturbationMap::new(vec![-1.0, 0.0], vec![0.5], None).is_err());
        assert!(PerturbationMap::new(vec![-1.0, -0.5, -0.5, 0.0], vec![-0.5; 3], None).is_err());
        assert!(PerturbationMap::new(vec![-0.9, 0.0], vec![-0.5], None).is_err());
    }

    #[test]
    fn destabilizer_for_negative_uniform_density() {
        let mu = BVMeasure::affine(-2.0, 0.0);
        let phi = destabilizing_phi(&mu, 0.04, 1).unwrap();
        assert!(phi.sup_deviation() < 0.04);
        let pushed = mu.pushforward(&phi);
        assert_eq!(pushed.atoms().len(), 26);
        for a in pushed.atoms() {
            assert!((a.weight[(0, 0)] + 2.0 / 26.0).abs() < 1e-14);
        }
        assert!((pushed.total_variation() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn destabilizer_for_single_atoms() {
        for w in [-1.0, 1.0] {
            let mu = BVMeasure::scalar_atoms(&[(-0.5, w)]).unwrap();
            let phi = destabilizing_phi(&mu, 0.1, 4).unwrap();
            let pushed = mu.pushforward(&phi);
            assert_eq!(pushed.atoms().len(), 1);
            assert_eq!(pushed.atoms()[0].weight[(0, 0)], w);
            assert!(phi.sup_deviation() < 0.1);
        }
    }

    #[test]
    fn destabilizer_requires_large_variation() {
        let mu = BVMeasure::affine(0.5, 2.1);
        assert!(matches!(destabilizing_phi(&mu, 0.04, 0), Err(Error::NoDestabilizer { .. })));
    }

    #[test]
    fn identity_like_pushforward_reproduces_trajectory() {
        let mu = BVMeasure::scalar_atoms(&[(-0.7, 0.4), (-0.3, -0.35)]).unwrap();
        let phi = PerturbationMap::identity_like(vec![-1.0, -0.5, 0.0], vec![-0.7, -0.3]).unwrap();
        assert_eq!(mu.pushforward(&phi), mu);
        let x0 = History::cosine(64, 3).unwrap();
        let direct = solve(&mu, &project_c0(&x0, &mu).unwrap(), 5.0).unwrap();
        let perturbed = perturb_and_simulate(&mu, &phi, &x0, 5.0).unwrap();
        assert_eq!(direct, perturbed);
    }

    #[test]
    fn json_shape() {
        let phi = sample_phi_uniform(2, 11).unwrap();
        let text = serde_json::to_string(&phi).unwrap();
        assert!(text.starts_with("{\"breakpoints\":[-1.0,-0.5,0.0],\"values\":["));
        assert!(text.ends_with(",\"seed\":11}"));
        let back: PerturbationMap = serde_json::from_str(&text).unwrap();
        assert_eq!(back, phi);
    }
}
