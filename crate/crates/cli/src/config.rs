//! Experiment configs. Every struct rejects unknown keys, and `prepare`
//! turns a config into validated core inputs before anything is computed.

use std::path::Path;

use delaydiff_core::{BVMeasure, History, PerturbationMap, QuasiPolynomial, Rect, SweepConfig};
use delaydiff_core::sweep::Axis;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde::de::DeserializeOwned;

use crate::CliError;

pub const DEFAULT_TORUS_GRID: usize = 64;
pub const DEFAULT_GRID_M: usize = delaydiff_core::simulator::DEFAULT_GRID_M;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn invalid(e: delaydiff_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Density `a + b theta` on `[-1, 0]`.
    Affine { a: f64, b: f64 },
    Zero { n: usize },
    Explicit { measure: BVMeasure },
    /// `x(t) = sum A_k x(t - tau_k)`.
    Pointwise { coeffs: Vec<Vec<Vec<f64>>>, delays: Vec<f64> },
}

/// Coefficients of a pointwise system as matrices, checked for shape.
pub fn matrices(coeffs: &[Vec<Vec<f64>>]) -> Result<Vec<DMatrix<f64>>, CliError> {
    let n = coeffs.first().map_or(0, |c| c.len());
    coeffs
        .iter()
        .map(|rows| {
            if n == 0 || rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Config(format!("pointwise coefficients must all be {n}x{n} with n > 0")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        })
        .collect()
}

impl MeasureSpec {
    pub fn build(&self) -> Result<BVMeasure, CliError> {
        match self {
            MeasureSpec::Affine { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(CliError::Config("affine coefficients must be finite".into()));
                }
                Ok(BVMeasure::affine(*a, *b))
            }
            MeasureSpec::Zero { n } => {
                if *n == 0 {
                    return Err(CliError::Config("dimension must be positive".into()));
                }
                Ok(BVMeasure::zero(*n))
            }
            MeasureSpec::Explicit { measure } => Ok(measure.clone()),
            MeasureSpec::Pointwise { coeffs, delays } => {
                if delays.iter().any(|d| !(0.0..=1.0).contains(d)) {
                    return Err(CliError::Config("delays must lie in [0, 1]".into()));
                }
                BVMeasure::pointwise(&matrices(coeffs)?, delays).map_err(invalid)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub measure: MeasureSpec,
    #[serde(default = "default_torus_grid")]
    pub torus_grid: usize,
}

fn default_torus_grid() -> usize {
    DEFAULT_TORUS_GRID
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `cos(2 k pi theta)` in every component.
    Cosine { k: u32 },
    /// Node values, `n` per node, from `theta = -1` to `0`.
    Samples { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub measure: MeasureSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    /// Defaults to the sample count for sampled initial conditions.
    #[serde(default)]
    pub grid_m: Option<usize>,
    /// Project the initial condition onto the compatible subspace first.
    #[serde(default = "yes")]
    pub project: bool,
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    Uniform { pieces: usize },
    Destabilizing { epsilon: f64 },
    Explicit { breakpoints: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub measure: MeasureSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    /// Defaults to the sample count for sampled initial conditions.
    #[serde(default)]
    pub grid_m: Option<usize>,
    pub phi: PhiSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    pub a: Axis,
    pub b: Axis,
    #[serde(default)]
    pub grid_step_factor: Option<f64>,
    #[serde(default)]
    pub delta_margin: Option<f64>,
    #[serde(default)]
    pub out: Option<String>,
}

impl SweepFileConfig {
    pub fn build(&self) -> Result<SweepConfig, CliError> {
        let defaults = SweepConfig::default();
        let cfg = SweepConfig {
            a: self.a,
            b: self.b,
            grid_step_factor: self.grid_step_factor.unwrap_or(defaults.grid_step_factor),
            delta_margin: self.delta_margin.unwrap_or(defaults.delta_margin),
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Quasipolynomial { quasipolynomial: QuasiPolynomial },
    /// Characteristic function of the affine density.
    Affine { a: f64, b: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub rect: Option<Rect>,
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub out: Option<String>,
}

/// Prepared trajectory inputs shared by `simulate` and `perturb`.
pub struct Run {
    pub measure: BVMeasure,
    pub initial: History,
    pub horizon: f64,
    pub project: bool,
}

pub fn prepare_run(
    measure: &MeasureSpec,
    initial: &InitialSpec,
    horizon: f64,
    grid_m: Option<usize>,
    project: bool,
) -> Result<Run, CliError> {
    let measure = measure.build()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CliError::Config(format!("horizon must be positive, got {horizon}")));
    }
    let n = measure.dimension();
    let initial = match initial {
        InitialSpec::Cosine { k } => {
            let grid_m = grid_m.unwrap_or(DEFAULT_GRID_M);
            let w = 2.0 * std::f64::consts::PI * *k as f64;
            History::from_fn(n, grid_m, |t| DVector::from_element(n, (w * t).cos()))
        }
        InitialSpec::Samples { values } => {
            let grid_m = grid_m.unwrap_or((values.len() / n).saturating_sub(1));
            if values.len() % n != 0 || values.len() / n != grid_m + 1 {
                return Err(CliError::Config(format!(
                    "expected {} samples for n = {n}, grid_m = {grid_m}, got {}",
                    (grid_m + 1) * n,
                    values.len()
                )));
            }
            History::from_samples(n, grid_m, values.clone())
        }
    }
    .map_err(invalid)?;
    Ok(Run { measure, initial, horizon, project })
}

pub fn prepare_phi(spec: &PhiSpec) -> Result<Option<PerturbationMap>, CliError> {
    match spec {
        PhiSpec::Uniform { pieces } if *pieces == 0 => Err(CliError::Config("pieces must be positive".into())),
        PhiSpec::Destabilizing { epsilon } if !(epsilon.is_finite() && *epsilon > 0.0) => {
            Err(CliError::Config(format!("epsilon must be positive, got {epsilon}")))
        }
        PhiSpec::Explicit { breakpoints, values } => {
            PerturbationMap::new(breakpoints.clone(), values.clone(), None).map(Some).map_err(invalid)
        }
        _ => Ok(None),
    }
}
