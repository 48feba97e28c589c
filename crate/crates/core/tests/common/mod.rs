#![allow(dead_code)]

use delaydiff_core::{Atom, BVMeasure, DensityPiece};
use nalgebra::DMatrix;
use rand::Rng;

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Random scalar measure: up to three atoms plus one or two polynomial
/// density pieces, rescaled to total variation `tv`.
pub fn random_scalar_measure<R: Rng>(rng: &mut R, tv: f64) -> BVMeasure {
    random_scalar_measure_on(rng, tv, None)
}

/// As [`random_scalar_measure`], with atoms and the density break rounded
/// to multiples of `2^-levels` when `levels` is given.
pub fn random_scalar_measure_on<R: Rng>(rng: &mut R, tv: f64, levels: Option<u32>) -> BVMeasure {
    let snap = |x: f64| match levels {
        Some(l) => {
            let s = (1u64 << l) as f64;
            (x * s).round() / s
        }
        None => x,
    };
    loop {
        let n_atoms = rng.random_range(0..=3);
        let mut atoms = Vec::new();
        for _ in 0..n_atoms {
            let loc = snap(rng.random_range(-1.0..=0.0));
            if atoms.iter().all(|a: &(f64, f64)| (a.0 - loc).abs() > 1e-3) {
                atoms.push((loc, rng.random_range(-1.0..1.0)));
            }
        }
        let split = snap(rng.random_range(-0.9..-0.1));
        let mut pieces = Vec::new();
        for (l, r) in [(-1.0, split), (split, 0.0)] {
            if rng.random_bool(0.75) {
                let deg = rng.random_range(0..=3);
                pieces.push((l, r, (0..=deg).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>()));
            }
        }
        let build = |c: f64| {
            BVMeasure::new(
                1,
                atoms.iter().map(|&(loc, w)| Atom { loc, weight: scalar(w * c) }).collect(),
                pieces
                    .iter()
                    .map(|(l, r, co)| DensityPiece { l: *l, r: *r, coeffs: co.iter().map(|&v| scalar(v * c)).collect() })
                    .collect(),
            )
            .unwrap()
        };
        let raw = build(1.0).total_variation();
        if raw > 1e-3 {
            return build(tv / raw);
        }
    }
}

/// Total variation as the supremum over the dyadic partition of depth
/// `2^levels`, summing `|mu((t_k, t_{k+1}])|` with the atom at `-1` added to
/// the first cell.
pub fn dyadic_variation(mu: &BVMeasure, levels: u32) -> f64 {
    let cells = 1usize << levels;
    let h = 1.0 / cells as f64;
    let mut masses = vec![0.0; cells];
    for p in mu.density() {
        let coeffs = p.entry_poly(0, 0);
        // antiderivative by Horner: sum c_d x^{d+1} / (d+1)
        let anti = |x: f64| coeffs.iter().enumerate().rev().fold(0.0, |acc, (d, c)| acc * x + c / (d + 1) as f64) * x;
        let first = (((p.l + 1.0) / h).floor() as usize).min(cells - 1);
        let last = (((p.r + 1.0) / h).ceil() as usize).min(cells);
        let mut prev_x = (-1.0 + first as f64 * h).max(p.l);
        let mut prev_f = anti(prev_x);
        for (k, m) in masses.iter_mut().enumerate().take(last).skip(first) {
            let hi = (-1.0 + (k + 1) as f64 * h).min(p.r);
            if hi > prev_x {
                let f = anti(hi);
                *m += f - prev_f;
                prev_x = hi;
                prev_f = f;
            }
        }
    }
    for a in mu.atoms() {
        // cell k covers (t_k, t_{k+1}]; the atom at -1 joins cell 0
        let k = (((a.loc + 1.0) / h).ceil() as usize).saturating_sub(1).min(cells - 1);
        masses[k] += a.weight[(0, 0)];
    }
    masses.iter().map(|m| m.abs()).sum()
}
