use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use delaydiff_core::quasipoly::DEFAULT_DELTA_MARGIN;
use delaydiff_core::{
    affine_region_membership, argument_principle_count, char_quasipoly_affine, destabilizing_phi, emit_region_csv,
    emit_region_svg, estimate_decay, hs_spectral_radius, melvin_scalar, perturb_and_simulate, project_c0,
    root_bound_affine, roots_in_rect, sample_phi_uniform, solve, sweep_affine, BVMeasure, DecayEstimate, HsEstimate,
    Rect, StrongStabilityVerdict, Trajectory, RNG_ALGORITHM,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{
    self, AnalyzeConfig, MeasureSpec, PerturbConfig, PhiSpec, RootsConfig, SimulateConfig, SweepFileConfig, SystemSpec,
};
use crate::{CliError, Common};

/// Default number of grid cells across the shorter side of a root-search rectangle.
const ROOT_GRID_CELLS: f64 = 200.0;

fn out_dir(common: &Common, from_config: &Option<String>) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| from_config.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

#[derive(Serialize)]
struct AnalyzeReport {
    #[serde(flatten)]
    verdict: StrongStabilityVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_variation: Option<f64>,
    /// Closed-form region test, reported next to the variation test for the affine family.
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<StrongStabilityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    torus: Option<HsEstimate>,
}

/// Pointwise-delay coefficients of an atomic measure (the zero measure gets one zero matrix).
fn pointwise_parts(mu: &BVMeasure) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let n = mu.dimension();
    if mu.atoms().is_empty() {
        return (vec![DMatrix::zeros(n, n)], vec![0.0]);
    }
    mu.atoms().iter().map(|a| (a.weight.clone(), -a.loc)).unzip()
}

pub fn analyze(common: &Common) -> Result<(), CliError> {
    let cfg: AnalyzeConfig = config::load(&common.config)?;
    let mu = cfg.measure.build()?;
    if cfg.torus_grid < 8 {
        return Err(CliError::Config(format!("torus_grid must be >= 8, got {}", cfg.torus_grid)));
    }

    let report = if mu.dimension() == 1 {
        let closed_form = match cfg.measure {
            MeasureSpec::Affine { a, b } => Some(affine_region_membership(a, b)),
            _ => None,
        };
        AnalyzeReport {
            verdict: melvin_scalar(&mu)?,
            total_variation: Some(mu.total_variation()),
            closed_form,
            torus: None,
        }
    } else if mu.is_atomic() {
        let (coeffs, delays) = pointwise_parts(&mu);
        let est = hs_spectral_radius(&coeffs, &delays, cfg.torus_grid)?;
        AnalyzeReport { verdict: est.verdict(), total_variation: None, closed_form: None, torus: Some(est) }
    } else {
        return Err(delaydiff_core::Error::UnsupportedDimension(mu.dimension()).into());
    };
    print_json(&report);
    Ok(())
}

#[derive(Serialize)]
struct DecayReport {
    #[serde(flatten)]
    decay: DecayEstimate,
    horizon: f64,
    grid_m: usize,
    windows: usize,
    /// The solution crossed the divergence cutoff before the horizon.
    cutoff_reached: bool,
}

fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<DecayReport, CliError> {
    let decay = estimate_decay(traj)?;
    write_file(&dir.join("trajectory.csv"), |w| traj.write_csv(w))?;
    write_file(&dir.join("windows.csv"), |w| traj.write_windows_csv(w))?;
    let report = DecayReport {
        decay,
        horizon: traj.end_time(),
        grid_m: traj.grid_m(),
        windows: traj.window_sups().len(),
        cutoff_reached: traj.diverged(),
    };
    write_json(&dir.join("decay.json"), &report)?;
    Ok(report)
}

pub fn simulate(common: &Common) -> Result<(), CliError> {
    let cfg: SimulateConfig = config::load(&common.config)?;
    let run = config::prepare_run(&cfg.measure, &cfg.initial, cfg.horizon, cfg.grid_m, cfg.project)?;
    let dir = out_dir(common, &cfg.out)?;

    let start = if run.project { project_c0(&run.initial, &run.measure)? } else { run.initial };
    let traj = solve(&run.measure, &start, run.horizon)?;
    let report = write_trajectory(&dir, &traj)?;
    print_json(&report);
    Ok(())
}

#[derive(Serialize)]
struct PhiReport<'a> {
    phi: &'a delaydiff_core::PerturbationMap,
    rng: &'static str,
    sup_deviation: f64,
}

pub fn perturb(common: &Common) -> Result<(), CliError> {
    let cfg: PerturbConfig = config::load(&common.config)?;
    let run = config::prepare_run(&cfg.measure, &cfg.initial, cfg.horizon, cfg.grid_m, true)?;
    let explicit = config::prepare_phi(&cfg.phi)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let dir = out_dir(common, &cfg.out)?;

    let phi = match (&cfg.phi, explicit) {
        (_, Some(phi)) => phi,
        (PhiSpec::Uniform { pieces }, None) => sample_phi_uniform(*pieces, seed)?,
        (PhiSpec::Destabilizing { epsilon }, None) => destabilizing_phi(&run.measure, *epsilon, seed)?,
        (PhiSpec::Explicit { .. }, None) => unreachable!("explicit maps are built while preparing"),
    };
    write_json(
        &dir.join("phi.json"),
        &PhiReport { phi: &phi, rng: RNG_ALGORITHM, sup_deviation: phi.sup_deviation() },
    )?;
    let traj = perturb_and_simulate(&run.measure, &phi, &run.initial, run.horizon)?;
    let report = write_trajectory(&dir, &traj)?;
    print_json(&report);
    Ok(())
}

#[derive(Serialize)]
struct SweepReport {
    counts: std::collections::BTreeMap<&'static str, usize>,
    cells: usize,
    root_searches: usize,
    failed: usize,
}

pub fn sweep(common: &Common) -> Result<(), CliError> {
    let cfg: SweepFileConfig = config::load(&common.config)?;
    let sweep_cfg = cfg.build()?;
    let dir = out_dir(common, &cfg.out)?;

    let grid = sweep_affine(&sweep_cfg)?;
    emit_region_csv(&grid, &dir.join("region.csv"))?;
    emit_region_svg(&grid, &dir.join("region.svg"))?;

    let counts = grid.counts();
    let summary: Vec<String> = counts.iter().map(|(v, n)| format!("{} {n}", v.as_str())).collect();
    eprintln!("sweep {}x{}: {}", grid.resolution.0, grid.resolution.1, summary.join(", "));
    print_json(&SweepReport {
        counts: counts.iter().map(|(v, n)| (v.as_str(), *n)).collect(),
        cells: grid.cells.len(),
        root_searches: grid.root_searches,
        failed: grid.cells.iter().filter(|c| c.failed).count(),
    });
    Ok(())
}

#[derive(Serialize)]
struct RootsReport {
    rect: Rect,
    grid_step: f64,
    found: usize,
    counted: i64,
    distinct: usize,
    rejected: usize,
}

pub fn roots(common: &Common) -> Result<(), CliError> {
    let cfg: RootsConfig = config::load(&common.config)?;
    let (q, default_rect) = match &cfg.system {
        SystemSpec::Quasipolynomial { quasipolynomial } => (quasipolynomial.clone(), None),
        SystemSpec::Affine { a, b } => {
            if !a.is_finite() || !b.is_finite() {
                return Err(CliError::Config("affine coefficients must be finite".into()));
            }
            // S_alpha, widened so that real and imaginary-axis zeros are interior
            let alpha = root_bound_affine(*a, *b);
            let d = DEFAULT_DELTA_MARGIN;
            (char_quasipoly_affine(*a, *b), Some(Rect::new(-d, alpha, -d, alpha)))
        }
    };
    let rect = match (cfg.rect, default_rect) {
        (Some(r), _) => Rect::new(r.re_min, r.re_max, r.im_min, r.im_max),
        (None, Some(r)) => r,
        (None, None) => return Err(CliError::Config("a rect is required for a general quasi-polynomial".into())),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let grid_step = cfg.grid_step.unwrap_or(rect.width().min(rect.height()) / ROOT_GRID_CELLS);
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(CliError::Config(format!("grid_step must be positive, got {grid_step}")));
    }
    let dir = out_dir(common, &cfg.out)?;

    let search = roots_in_rect(&q, &rect, grid_step)?;
    write_file(&dir.join("roots.csv"), |w| search.write_csv(w))?;
    let counted = argument_principle_count(&q, &rect)?;
    let report = RootsReport {
        rect,
        grid_step,
        found: search.count(),
        counted,
        distinct: search.roots.len(),
        rejected: search.rejected.len(),
    };
    write_json(&dir.join("roots.json"), &report)?;
    print_json(&report);
    if report.found as i64 != counted {
        return Err(CliError::Mismatch { found: report.found, counted });
    }
    Ok(())
}
