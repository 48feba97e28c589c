//! Stability map of the affine-density family over a rectangle of the
//! `(a, b)` plane.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{affine_region_membership, affine_total_variation};
use crate::error::{Error, Result};
use crate::quasipoly::{
    exp_stability_affine, half_space_value, ExpStabilityOptions, DEFAULT_DELTA_MARGIN, DEFAULT_GRID_STEP_FACTOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    #[serde(rename = "SS")]
    Ss,
    #[serde(rename = "ES")]
    Es,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ss => "SS",
            Verdict::Es => "ES",
            Verdict::Marginal => "MARGINAL",
            Verdict::Unstable => "UNSTABLE",
        }
    }

    fn color(self) -> &'static str {
        match self {
            Verdict::Ss => "#f28e2b",
            Verdict::Es => "#4e79a7",
            Verdict::Marginal => "#bab0ac",
            Verdict::Unstable => "#ffffff",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub a: f64,
    pub b: f64,
    pub verdict: Verdict,
    pub tv: f64,
    /// Rightmost non-trivial root seen by the root search, if any.
    pub worst_root: Option<(f64, f64)>,
    /// The root search failed; the verdict falls back to MARGINAL.
    pub failed: bool,
}

/// Axis specification `[min, max, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, usize)", into = "(f64, f64, usize)")]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl From<(f64, f64, usize)> for Axis {
    fn from((min, max, n): (f64, f64, usize)) -> Self {
        Self { min, max, n }
    }
}

impl From<Axis> for (f64, f64, usize) {
    fn from(a: Axis) -> Self {
        (a.min, a.max, a.n)
    }
}

impl Axis {
    pub fn point(&self, i: usize) -> f64 {
        if self.n == 1 {
            return self.min;
        }
        self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64
    }
}

fn default_grid_step_factor() -> f64 {
    DEFAULT_GRID_STEP_FACTOR
}

fn default_delta_margin() -> f64 {
    DEFAULT_DELTA_MARGIN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub a: Axis,
    pub b: Axis,
    #[serde(default = "default_grid_step_factor")]
    pub grid_step_factor: f64,
    #[serde(default = "default_delta_margin")]
    pub delta_margin: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a: Axis { min: -4.0, max: 4.0, n: 161 },
            b: Axis { min: -4.0, max: 4.0, n: 161 },
            grid_step_factor: DEFAULT_GRID_STEP_FACTOR,
            delta_margin: DEFAULT_DELTA_MARGIN,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, ax) in [("a", &self.a), ("b", &self.b)] {
            if ax.n < 2 || !(ax.min < ax.max) || !ax.min.is_finite() || !ax.max.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "axis {name} needs min < max and at least 2 points"
                )));
            }
        }
        if !(self.grid_step_factor > 0.0 && self.grid_step_factor < 1.0) {
            return Err(Error::InvalidArgument("grid_step_factor must lie in (0, 1)".into()));
        }
        if !(self.delta_margin > 0.0 && self.delta_margin.is_finite()) {
            return Err(Error::InvalidArgument("delta_margin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub resolution: (usize, usize),
    /// Row-major with `b` as the slow index.
    pub cells: Vec<Cell>,
    /// Number of cells on which a rectangle root search ran.
    pub root_searches: usize,
}

impl SweepGrid {
    pub fn cell(&self, i_a: usize, i_b: usize) -> &Cell {
        &self.cells[i_b * self.resolution.0 + i_a]
    }

    pub fn counts(&self) -> [(Verdict, usize); 4] {
        [Verdict::Ss, Verdict::Es, Verdict::Marginal, Verdict::Unstable]
            .map(|v| (v, self.cells.iter().filter(|c| c.verdict == v).count()))
    }
}

/// Classifies a single `(a, b)`; returns the cell and whether a root search ran.
pub fn classify_cell(a: f64, b: f64, opts: &ExpStabilityOptions) -> (Cell, bool) {
    let tv = affine_total_variation(a, b);
    let mut cell = Cell { a, b, verdict: Verdict::Ss, tv, worst_root: None, failed: false };
    if affine_region_membership(a, b).strongly_stable {
        return (cell, false);
    }
    if half_space_value(a, b) <= 0.0 {
        cell.verdict = Verdict::Unstable;
        return (cell, false);
    }
    match exp_stability_affine(a, b, opts) {
        Ok(v) => {
            cell.verdict = if v.stable {
                Verdict::Es
            } else if v.marginal {
                Verdict::Marginal
            } else {
                Verdict::Unstable
            };
            cell.worst_root = v.worst_root.map(|s| (s.re, s.im));
        }
        Err(_) => {
            cell.verdict = Verdict::Marginal;
            cell.failed = true;
        }
    }
    (cell, true)
}

pub fn sweep_affine(config: &SweepConfig) -> Result<SweepGrid> {
    config.validate()?;
    let opts = ExpStabilityOptions { grid_step_factor: config.grid_step_factor, delta_margin: config.delta_margin };
    let (na, nb) = (config.a.n, config.b.n);
    let searches = AtomicUsize::new(0);
    let cells: Vec<Cell> = (0..na * nb)
        .into_par_iter()
        .map(|idx| {
            let (cell, searched) = classify_cell(config.a.point(idx % na), config.b.point(idx / na), &opts);
            if searched {
                searches.fetch_add(1, Ordering::Relaxed);
            }
            cell
        })
        .collect();
    Ok(SweepGrid {
        a_min: config.a.min,
        a_max: config.a.max,
        b_min: config.b.min,
        b_max: config.b.max,
        resolution: (na, nb),
        cells,
        root_searches: searches.into_inner(),
    })
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// CSV `a,b,verdict,tv,worst_root_re,worst_root_im`, `b`-major.
pub fn write_region_csv<W: Write>(grid: &SweepGrid, mut out: W) -> std::io::Result<()> {
    writeln!(out, "a,b,verdict,tv,worst_root_re,worst_root_im")?;
    for c in &grid.cells {
        writeln!(
            out,
            "{:.16e},{:.16e},{},{:.16e},{},{}",
            c.a,
            c.b,
            c.verdict.as_str(),
            c.tv,
            opt_field(c.worst_root.map(|r| r.0)),
            opt_field(c.worst_root.map(|r| r.1))
        )?;
    }
    Ok(())
}

pub fn emit_region_csv(grid: &SweepGrid, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_region_csv(grid, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// SVG map: one rectangle per cell, axes with ticks and a legend.
pub fn render_region_svg(grid: &SweepGrid) -> String {
    let (na, nb) = grid.resolution;
    let plot = 600.0;
    let (left, top) = (70.0, 20.0);
    let legend_w = 150.0;
    let width = left + plot + 20.0 + legend_w;
    let height = top + plot + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    if na > 0 && nb > 0 {
        // cells are centred on grid points
        let cw = plot / na as f64;
        let ch = plot / nb as f64;
        let _ = writeln!(s, r#"<g id="cells" shape-rendering="crispEdges">"#);
        for (idx, c) in grid.cells.iter().enumerate() {
            let (i, j) = (idx % na, idx / na);
            let x = left + i as f64 * cw;
            let y = top + plot - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{ch:.3}" fill="{}" data-verdict="{}"/>"#,
                c.verdict.color(),
                c.verdict.as_str()
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#
    );
    let ticks = 5;
    for k in 0..=ticks {
        let f = k as f64 / ticks as f64;
        let av = grid.a_min + (grid.a_max - grid.a_min) * f;
        let bv = grid.b_min + (grid.b_max - grid.b_min) * f;
        let x = left + plot * f;
        let y = top + plot * (1.0 - f);
        let yb = top + plot;
        let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{yb}" x2="{x:.3}" y2="{:.3}" stroke="black"/>"#, yb + 6.0);
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{av:.2}</text>"#, yb + 20.0);
        let _ = writeln!(s, r#"<line x1="{:.3}" y1="{y:.3}" x2="{left}" y2="{y:.3}" stroke="black"/>"#, left - 6.0);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{bv:.2}</text>"#, left - 9.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">a</text>"#, left + plot / 2.0, top + plot + 45.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.3}" text-anchor="middle" transform="rotate(-90 20 {:.3})">b</text>"#,
        top + plot / 2.0,
        top + plot / 2.0
    );
    let lx = left + plot + 20.0;
    let _ = writeln!(s, r#"<g id="legend">"#);
    for (k, v) in [Verdict::Ss, Verdict::Es, Verdict::Marginal, Verdict::Unstable].iter().enumerate() {
        let y = top + 10.0 + 24.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{y}" width="16" height="16" fill="{}" stroke="black"/>"#, v.color());
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, y + 12.0, v.as_str());
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

pub fn emit_region_svg(grid: &SweepGrid, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, render_region_svg(grid)).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: (f64, f64, usize), b: (f64, f64, usize)) -> SweepConfig {
        SweepConfig { a: a.into(), b: b.into(), ..SweepConfig::default() }
    }

    #[test]
    fn example_cells() {
        let opts = ExpStabilityOptions::default();
        assert_eq!(classify_cell(0.5, 2.1, &opts).0.verdict, Verdict::Ss);
        assert_eq!(classify_cell(-2.0, 0.0, &opts).0.verdict, Verdict::Es);
        let (cell, searched) = classify_cell(2.0, 1.0, &opts);
        assert_eq!(cell.verdict, Verdict::Unstable);
        assert!(!searched);
    }

    #[test]
    fn small_grid_layout_and_csv() {
        let grid = sweep_affine(&cfg((-2.0, 2.0, 2), (0.0, 1.0, 2))).unwrap();
        assert_eq!(grid.cells.len(), 4);
        assert_eq!((grid.cell(1, 0).a, grid.cell(1, 0).b), (2.0, 0.0));
        assert_eq!((grid.cell(0, 1).a, grid.cell(0, 1).b), (-2.0, 1.0));
        assert_eq!(grid.cell(0, 0).verdict, Verdict::Es);
        assert_eq!(grid.cell(1, 1).verdict, Verdict::Unstable);
        let mut buf = Vec::new();
        write_region_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,b,verdict,tv,worst_root_re,worst_root_im");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].contains(",UNSTABLE,"));
    }

    #[test]
    fn empty_grid_csv_is_header_only() {
        let grid = SweepGrid {
            a_min: 0.0,
            a_max: 1.0,
            b_min: 0.0,
            b_max: 1.0,
            resolution: (0, 0),
            cells: vec![],
            root_searches: 0,
        };
        let mut buf = Vec::new();
        write_region_csv(&grid, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,verdict,tv,worst_root_re,worst_root_im\n");
    }

    #[test]
    fn svg_has_one_rect_per_cell_and_legend() {
        let grid = sweep_affine(&cfg((-2.0, 2.0, 2), (0.0, 1.0, 2))).unwrap();
        let svg = render_region_svg(&grid);
        assert_eq!(svg.matches("data-verdict=").count(), 4);
        assert!(svg.contains(r#"<g id="legend">"#));
        for v in ["SS", "ES", "MARGINAL", "UNSTABLE"] {
            assert!(svg.contains(&format!(">{v}</text>")));
        }
        assert_eq!(svg, render_region_svg(&sweep_affine(&cfg((-2.0, 2.0, 2), (0.0, 1.0, 2))).unwrap()));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(sweep_affine(&cfg((0.0, 1.0, 1), (0.0, 1.0, 2))).is_err());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"a":[0,1,2],"b":[0,1,2],"extra":1}"#).is_err());
        let c: SweepConfig = serde_json::from_str(r#"{"a":[-4,4,3],"b":[-4,4,3]}"#).unwrap();
        assert_eq!(c.grid_step_factor, DEFAULT_GRID_STEP_FACTOR);
    }
}
