//! Delay-difference equations `x(t) = ∫_{-1}^0 dμ(θ) x(t+θ)` driven by
//! matrix-valued measures of bounded variation: simulation, strong and
//! exponential stability tests, destabilizing perturbations of the delays,
//! and stability maps of the affine-density family.

// `!(x < y)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
mod linalg;
pub mod measure;
pub mod perturbation;
pub mod poly;
mod quad;
pub mod quasipoly;
pub mod simulator;
pub mod sweep;

pub use criteria::{
    affine_region_membership, affine_total_variation, hs_spectral_radius, melvin_scalar, HsEstimate, Method,
    StrongStabilityVerdict,
};
pub use error::{Error, Result};
pub use linalg::{spectral_norm, spectral_radius};
pub use measure::{Atom, BVMeasure, DensityPiece, LagWeights, ScalarSignedDecomposition, Sign, Support, WMembership};
pub use perturbation::{destabilizing_phi, perturb_and_simulate, sample_phi_uniform, PerturbationMap, RNG_ALGORITHM};
pub use quasipoly::{
    argument_principle_count, char_quasipoly_affine, exp_stability_affine, half_space_value, positive_real_root_affine,
    root_bound_affine, roots_in_rect,
    ExpStability, ExpStabilityOptions, QpTerm, QuasiPolynomial, Rect, Root, RootSearch, C64,
};
pub use simulator::{estimate_decay, project_c0, solve, DecayEstimate, DecayVerdict, History, Trajectory};
pub use sweep::{emit_region_csv, emit_region_svg, sweep_affine, SweepConfig, SweepGrid, Verdict};
