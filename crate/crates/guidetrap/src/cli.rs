//! Config-driven front end shared by the `guidetrap` binary and the tests.
//!
//! A run is described by one JSON document with a versioned `schema` key:
//!
//! ```json
//! {
//!   "schema": "guidetrap-run/1",
//!   "strip": { "b": 1.0 },
//!   "density": { "profile": "slab", "amplitude": 0.1, "width": 0.5 },
//!   "eta": 1.0,
//!   "tolerances": { "quad_rel_4d": 1e-5 },
//!   "grid": { "l": 12.0, "nx": 95, "ny": 20, "refinements": 3 }
//! }
//! ```
//!
//! Density profiles: `slab` (amplitude, width, optional center), `gaussian`
//! (amplitude, center `[x, y]`, widths `[wx, wy]`) and `sum` of profiles.
//! Every tolerance has a default and is overridable per run. Reports render
//! either as a human table or as line-delimited `key=value` records whose
//! floating-point values reparse bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::domain::{
    make_slab, validate_field, DensityField, GaussianProfile, ShiftedSlab, StripConfig,
    SumDensity,
};
use crate::fd::{localization_metric, lowest_mode, refine, EigenResult, GridSpec};
use crate::perturbation::{assemble, AssembleOptions};
use crate::quadrature::QuadratureSpec;
use crate::slab::{slab_series, solve_slab};
use crate::variational::variational_estimate;

pub const CONFIG_SCHEMA: &str = "guidetrap-run/1";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Exit-code contract: 2 for config problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub strip: StripCfg,
    pub density: DensitySpec,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub tolerances: TolerancesCfg,
    #[serde(default)]
    pub grid: Option<GridCfg>,
}

fn default_eta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripCfg {
    pub b: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Slab {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        widths: [f64; 2],
    },
    Sum {
        terms: Vec<DensitySpec>,
    },
}

/// All optional; the defaults are quadrature rel 1e-6 for generic 2D work
/// (1e-8 for the squared moment), 1e-5 for the 4D integrals, Green's tail
/// 1e-10, slab residual 1e-12 and FD residual 1e-10.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesCfg {
    pub quad_rel_2d: Option<f64>,
    pub quad_rel_4d: Option<f64>,
    pub quad_abs: Option<f64>,
    pub greens_tail: Option<f64>,
    pub slab_residual: Option<f64>,
    pub fd_residual: Option<f64>,
}

impl TolerancesCfg {
    pub fn m1_rel(&self) -> f64 {
        self.quad_rel_2d.unwrap_or(1e-8)
    }

    pub fn quad_rel_4d(&self) -> f64 {
        self.quad_rel_4d.unwrap_or(1e-5)
    }

    pub fn quad_abs(&self) -> f64 {
        self.quad_abs.unwrap_or(1e-15)
    }

    pub fn greens_tail(&self) -> f64 {
        self.greens_tail.unwrap_or(1e-10)
    }

    pub fn slab_residual(&self) -> f64 {
        self.slab_residual.unwrap_or(1e-12)
    }

    pub fn fd_residual(&self) -> f64 {
        self.fd_residual.unwrap_or(1e-10)
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("tolerances.quad_rel_2d", self.quad_rel_2d),
            ("tolerances.quad_rel_4d", self.quad_rel_4d),
            ("tolerances.quad_abs", self.quad_abs),
            ("tolerances.greens_tail", self.greens_tail),
            ("tolerances.slab_residual", self.slab_residual),
            ("tolerances.fd_residual", self.fd_residual),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::Config(format!("{name}: must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn assemble_options(&self) -> AssembleOptions {
        AssembleOptions {
            m1_spec: QuadratureSpec::default()
                .with_rel_tol(self.m1_rel())
                .with_abs_tol(self.quad_abs()),
            pair_spec: QuadratureSpec::default()
                .with_rel_tol(self.quad_rel_4d())
                .with_abs_tol(self.quad_abs()),
            greens_tol: self.greens_tail(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub l: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    #[serde(default)]
    pub l_sweep: Option<Vec<f64>>,
}

fn default_refinements() -> usize {
    3
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{e}")))?;
    if cfg.schema != CONFIG_SCHEMA {
        return Err(CliError::Config(format!(
            "schema: expected \"{CONFIG_SCHEMA}\", got \"{}\"",
            cfg.schema
        )));
    }
    if !(cfg.strip.b > 0.0) || !cfg.strip.b.is_finite() {
        return Err(CliError::Config(format!(
            "strip.b: must be positive, got {}",
            cfg.strip.b
        )));
    }
    if !cfg.eta.is_finite() {
        return Err(CliError::Config(format!("eta: must be finite, got {}", cfg.eta)));
    }
    cfg.tolerances.check()?;
    if let Some(g) = &cfg.grid {
        if !(g.l > 0.0) {
            return Err(CliError::Config(format!("grid.l: must be positive, got {}", g.l)));
        }
        if g.refinements < 2 {
            return Err(CliError::Config(format!(
                "grid.refinements: need at least 2, got {}",
                g.refinements
            )));
        }
    }
    Ok(cfg)
}

pub fn build_field(spec: &DensitySpec) -> Result<Box<dyn DensityField>, CliError> {
    match spec {
        DensitySpec::Slab {
            amplitude,
            width,
            center,
        } => {
            let slab = make_slab(*amplitude, *width)
                .map_err(|e| CliError::Config(format!("density: {e}")))?;
            if *center == 0.0 {
                Ok(Box::new(slab))
            } else {
                Ok(Box::new(ShiftedSlab {
                    slab,
                    center_x: *center,
                }))
            }
        }
        DensitySpec::Gaussian {
            amplitude,
            center,
            widths,
        } => {
            let g = GaussianProfile::new(*amplitude, (center[0], center[1]), (widths[0], widths[1]))
                .map_err(|e| CliError::Config(format!("density: {e}")))?;
            Ok(Box::new(g))
        }
        DensitySpec::Sum { terms } => {
            if terms.is_empty() {
                return Err(CliError::Config("density.terms: empty sum".into()));
            }
            let built: Result<Vec<_>, _> = terms.iter().map(build_field).collect();
            Ok(Box::new(SumDensity::new(built?)))
        }
    }
}

fn density_label(spec: &DensitySpec) -> String {
    match spec {
        DensitySpec::Slab {
            amplitude,
            width,
            center,
        } => {
            if *center == 0.0 {
                format!("slab(sigma={amplitude}, delta={width})")
            } else {
                format!("slab(sigma={amplitude}, delta={width}, center={center})")
            }
        }
        DensitySpec::Gaussian {
            amplitude,
            center,
            widths,
        } => format!(
            "gaussian(A={amplitude}, center=({}, {}), widths=({}, {}))",
            center[0], center[1], widths[0], widths[1]
        ),
        DensitySpec::Sum { terms } => format!("sum of {} terms", terms.len()),
    }
}

/// Output format of the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Records,
}

/// A finished report: ordered key/value fields plus the convergence flag
/// that drives the exit code.
#[derive(Debug, Clone)]
pub struct Report {
    pub schema: &'static str,
    pub fields: Vec<(String, String)>,
    pub converged: bool,
}

impl Report {
    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.fields.push((key.to_string(), format!("{value}")));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Records => {
                let mut out = String::new();
                writeln!(out, "schema={}", self.schema).unwrap();
                for (k, v) in &self.fields {
                    writeln!(out, "{k}={v}").unwrap();
                }
                writeln!(out, "converged={}", self.converged).unwrap();
                out
            }
            Format::Human => {
                let width = self
                    .fields
                    .iter()
                    .map(|(k, _)| k.len())
                    .max()
                    .unwrap_or(0)
                    .max("converged".len());
                let mut out = String::new();
                writeln!(out, "[{}]", self.schema).unwrap();
                for (k, v) in &self.fields {
                    writeln!(out, "  {k:<width$}  {v}").unwrap();
                }
                writeln!(out, "  {:<width$}  {}", "converged", self.converged).unwrap();
                out
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn strip_of(config: &RunConfig) -> Result<StripConfig, CliError> {
    StripConfig::new(config.strip.b).map_err(|e| CliError::Config(format!("strip.b: {e}")))
}

fn checked_field(config: &RunConfig, cfg: &StripConfig) -> Result<Box<dyn DensityField>, CliError> {
    let field = build_field(&config.density)?;
    validate_field(cfg, field.as_ref(), 2000)
        .map_err(|e| CliError::Config(format!("density: {e}")))?;
    Ok(field)
}

/// Perturbative + variational energy report.
pub fn run_energy(config: &RunConfig) -> Result<Report, CliError> {
    let cfg = strip_of(config)?;
    let field = checked_field(config, &cfg)?;
    let opts = config.tolerances.assemble_options();
    let energy = assemble(&cfg, field.as_ref(), config.eta, &opts);
    let var = variational_estimate(&cfg, field.as_ref(), &opts.m1_spec);

    let mut report = Report {
        schema: "guidetrap.energy/1",
        fields: Vec::new(),
        converged: energy.converged,
    };
    report.push("b", cfg.width());
    report.push("density", density_label(&config.density));
    report.push("eta", energy.eta);
    report.push("e0", energy.e0);
    report.push("m1", energy.m1);
    report.push("m1_err", energy.err_estimates.m1);
    report.push("e2", energy.e2);
    report.push("e2_err", energy.err_estimates.e2);
    report.push("e3", energy.e3);
    report.push("e3_err", energy.err_estimates.e3);
    report.push("total", energy.total());
    report.push("total_err", energy.total_err());
    report.push("variational_a", var.a);
    report.push("variational_w", var.w);
    report.push("variational_bound_exists", var.bound_exists);
    report.push("verdict", energy.verdict);
    report.push("max_abs_sigma", energy.max_abs_sigma);
    report.push("n_evals", energy.n_evals);
    let mut warnings = Vec::new();
    if config.eta.abs() > 1.0 {
        warnings.push(format!(
            "eta = {} outside the recommended weak-coupling range |eta| <= 1",
            config.eta
        ));
    }
    if !var.weak_field_ok() {
        warnings.push(format!(
            "max |sigma| = {} exceeds the weak-field range (~0.3); closed forms are stretched",
            energy.max_abs_sigma
        ));
    }
    for (i, w) in warnings.iter().enumerate() {
        report.push(&format!("warning.{i}"), w);
    }
    Ok(report)
}

/// Exact slab report: root, residual, series coefficients and the
/// series-vs-root error sweep.
pub fn run_slab(config: &RunConfig) -> Result<Report, CliError> {
    let cfg = strip_of(config)?;
    let (amplitude, width) = match &config.density {
        DensitySpec::Slab {
            amplitude,
            width,
            center,
        } if *center == 0.0 => (*amplitude, *width),
        _ => {
            return Err(CliError::Config(
                "density: the slab command needs a centered slab profile".into(),
            ))
        }
    };
    let slab =
        make_slab(amplitude, width).map_err(|e| CliError::Config(format!("density: {e}")))?;
    let tol = config.tolerances.slab_residual();
    let sol = solve_slab(&cfg, &slab, tol).map_err(|e| CliError::Config(format!("density: {e}")))?;
    let series = slab_series(&cfg, &slab, 5).expect("order 5 is always valid");

    let mut report = Report {
        schema: "guidetrap.slab/1",
        fields: Vec::new(),
        converged: sol.residual <= tol,
    };
    report.push("b", cfg.width());
    report.push("sigma", sol.sigma0);
    report.push("delta", sol.delta);
    report.push("p2", sol.p2);
    report.push("p1", sol.p1);
    report.push("energy", sol.energy);
    report.push("residual", sol.residual);
    report.push("a1", sol.amplitudes.0);
    report.push("a2", sol.amplitudes.1);
    report.push("a3", sol.amplitudes.2);
    for (k, c) in series.energy.iter().enumerate() {
        report.push(&format!("energy_series_c{k}"), c);
    }

    // series-vs-root error over a sigma sweep; the error scales like sigma^6
    let sweep = [0.02, 0.04, 0.08];
    let mut logs: Vec<(f64, f64)> = Vec::new();
    for (i, &s) in sweep.iter().enumerate() {
        let probe = make_slab(s, width).map_err(|e| CliError::Config(format!("density: {e}")))?;
        let root = solve_slab(&cfg, &probe, 1e-14)
            .map_err(|e| CliError::Numeric(format!("sweep sigma={s}: {e}")))?;
        let approx = series.eval_energy(s);
        let err = (root.energy - approx).abs();
        report.push(&format!("sweep.{i}.sigma"), s);
        report.push(&format!("sweep.{i}.root_energy"), root.energy);
        report.push(&format!("sweep.{i}.series_energy"), approx);
        report.push(&format!("sweep.{i}.abs_err"), err);
        logs.push((s.ln(), err.max(f64::MIN_POSITIVE).ln()));
    }
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|(x, _)| x).sum();
    let sy: f64 = logs.iter().map(|(_, y)| y).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    report.push("series_error_order", slope);
    Ok(report)
}

/// Everything `run_oracle` computed beyond the printable report.
pub struct OracleExtras {
    pub cfg: StripConfig,
    pub finest: EigenResult,
}

fn default_grid(cfg: &StripConfig, field: &dyn DensityField) -> GridCfg {
    let b = cfg.width();
    let support = field.support_x();
    let half_support = support.lo.abs().max(support.hi.abs());
    let required = 3.0 * half_support + 3.0 * b;
    let l = required.max(6.0 * b).ceil();
    let ny = 24usize;
    let nx = ((l * (ny as f64 + 1.0) / b).round() as usize).max(32);
    GridCfg {
        l,
        nx,
        ny,
        refinements: 3,
        l_sweep: None,
    }
}

/// Finite-difference oracle report: L-sweep, h-sweep with Richardson
/// extrapolation, and comparison rows against the perturbative total and the
/// exact slab energy where applicable.
pub fn run_oracle(config: &RunConfig) -> Result<(Report, OracleExtras), CliError> {
    let cfg = strip_of(config)?;
    let field = checked_field(config, &cfg)?;
    let grid_cfg = config
        .grid
        .clone()
        .unwrap_or_else(|| default_grid(&cfg, field.as_ref()));
    let fd_tol = config.tolerances.fd_residual();
    let b = cfg.width();

    let support = field.support_x();
    let required = 3.0 * support.lo.abs().max(support.hi.abs()) + 3.0 * b;
    if grid_cfg.l < required {
        return Err(CliError::Config(format!(
            "grid.l: need at least {required} for this field, got {}",
            grid_cfg.l
        )));
    }
    let sweep = grid_cfg.l_sweep.clone().unwrap_or_else(|| {
        let l = grid_cfg.l;
        let mut ls = vec![(0.7 * l).max(required), (0.85 * l).max(required), l];
        ls.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        ls
    });

    let mut report = Report {
        schema: "guidetrap.oracle/1",
        fields: Vec::new(),
        converged: true,
    };
    report.push("b", b);
    report.push("density", density_label(&config.density));

    // truncation study at fixed resolution
    for (i, &l) in sweep.iter().enumerate() {
        if l < required {
            return Err(CliError::Config(format!(
                "grid.l_sweep[{i}] = {l} below the decay margin {required}"
            )));
        }
        let nx = ((grid_cfg.nx as f64 + 1.0) * l / grid_cfg.l).round() as usize;
        let spec = GridSpec {
            l_half: l,
            nx: nx.max(16),
            ny: grid_cfg.ny,
            shift: None,
        };
        let r = lowest_mode(&cfg, field.as_ref(), &spec, fd_tol)
            .map_err(|e| CliError::Numeric(format!("L-sweep at L={l}: {e}")))?;
        report.push(&format!("lsweep.{i}.l"), l);
        report.push(&format!("lsweep.{i}.nx"), spec.nx);
        report.push(&format!("lsweep.{i}.e_min"), r.e_min);
    }

    // h-refinement study at the final L
    let mut grid = GridSpec {
        l_half: *sweep.last().unwrap(),
        nx: grid_cfg.nx,
        ny: grid_cfg.ny,
        shift: None,
    };
    let mut results = Vec::new();
    for i in 0..grid_cfg.refinements {
        let r = lowest_mode(&cfg, field.as_ref(), &grid, fd_tol)
            .map_err(|e| CliError::Numeric(format!("h-sweep level {i}: {e}")))?;
        report.push(&format!("hsweep.{i}.h"), r.hy.max(r.hx));
        report.push(&format!("hsweep.{i}.nx"), grid.nx);
        report.push(&format!("hsweep.{i}.ny"), grid.ny);
        report.push(&format!("hsweep.{i}.e_min"), r.e_min);
        report.push(&format!("hsweep.{i}.residual"), r.residual_norm);
        results.push(r);
        grid = grid.refined();
    }
    let ext = refine(&results).map_err(|e| CliError::Numeric(format!("refine: {e}")))?;
    report.push("extrapolated_energy", ext.energy);
    report.push("error_bar", ext.error_bar);
    match ext.observed_order {
        Some(p) => report.push("observed_order", p),
        None => report.push("observed_order", "n/a"),
    }
    report.push("extrapolation_valid", ext.extrapolated);
    if !ext.extrapolated {
        report.converged = false;
    }

    // comparisons
    let opts = config.tolerances.assemble_options();
    let energy = assemble(&cfg, field.as_ref(), config.eta, &opts);
    report.push("compare.perturbative_total", energy.total());
    report.push("compare.perturbative_verdict", energy.verdict);
    report.push(
        "compare.delta_perturbative",
        ext.energy - energy.total(),
    );
    if !energy.converged {
        report.converged = false;
    }
    if let DensitySpec::Slab {
        amplitude,
        width,
        center,
    } = &config.density
    {
        if *center == 0.0 && *amplitude > 0.0 {
            let slab = make_slab(*amplitude, *width)
                .map_err(|e| CliError::Config(format!("density: {e}")))?;
            let exact = solve_slab(&cfg, &slab, config.tolerances.slab_residual())
                .map_err(|e| CliError::Numeric(format!("slab comparison: {e}")))?;
            report.push("compare.exact_energy", exact.energy);
            report.push(
                "compare.rel_err_vs_exact",
                ((ext.energy - exact.energy) / exact.energy).abs(),
            );
        }
    }

    let finest = results.pop().expect("refinements >= 2");
    report.push("localization_tail_fraction", localization_metric(&finest));
    Ok((report, OracleExtras { cfg, finest }))
}

/// Point evaluation of the transverse-excited correlator for debugging.
pub fn run_greens(
    config: &RunConfig,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    tol: Option<f64>,
) -> Result<Report, CliError> {
    let cfg = strip_of(config)?;
    let tol = tol.unwrap_or_else(|| config.tolerances.greens_tail());
    let eval = crate::greens::g2_zero(x1, y1, x2, y2, &cfg, tol)
        .map_err(|e| CliError::Config(format!("greens: {e}")))?;
    let mut report = Report {
        schema: "guidetrap.greens/1",
        fields: Vec::new(),
        converged: true,
    };
    report.push("b", cfg.width());
    report.push("x1", x1);
    report.push("y1", y1);
    report.push("x2", x2);
    report.push("y2", y2);
    report.push("value", eval.value);
    report.push("n_terms", eval.n_terms_used);
    report.push("tail_bound", eval.tail_bound);
    report.push("regime", eval.regime);
    Ok(report)
}
