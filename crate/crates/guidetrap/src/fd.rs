//! Independent finite-difference oracle.
//!
//! Discretizes `-Laplacian phi = E (1 + sigma) phi` on the truncated strip
//! `[-L, L] x [-b/2, b/2]` with Dirichlet rows on all four sides: 5-point
//! Laplacian stiffness against a lumped (diagonal) mass from nodal density
//! values. The lowest eigenpair comes from shifted inverse iteration with a
//! direct banded LDL^T factorization; the shift defaults to the perturbative
//! guess `pi^2/b^2 - pi^4 M1^2 / b^6` and is lowered automatically if the
//! factorization shows the shift landed above the lowest eigenvalue.
//!
//! Truncation in `x` raises the computed eigenvalue, discretization in `h`
//! lowers it; both are swept by the callers, and [`refine`] performs the
//! Richardson extrapolation in `h` with an empirical order estimate.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{DensityField, StripConfig};
use crate::perturbation::{moment_m1, second_order_from_moment};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Error)]
pub enum FdError {
    #[error("grid too small: need L >= 3 x support half-width + 3 b = {required}, got {got}")]
    GridTooSmall { required: f64, got: f64 },
    #[error("grid too coarse: nx, ny must both be >= 16, got ({nx}, {ny})")]
    GridTooCoarse { nx: usize, ny: usize },
    #[error("density 1 + sigma = {density} not positive at node ({x}, {y})")]
    NonPositiveDensity { x: f64, y: f64, density: f64 },
    #[error("shift placement stayed indefinite after {retries} retries (last shift {last_shift})")]
    IndefiniteShift { retries: usize, last_shift: f64 },
    #[error("inverse iteration did not converge: {iterations} iterations, residual {residual}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("refine needs at least two grids at fixed L, got {0}")]
    TooFewGrids(usize),
    #[error("refine needs a common truncation length, got L = {0} and {1}")]
    MixedTruncation(f64, f64),
    #[error("eigenvector data malformed: {0}")]
    BadEigenvectorData(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Truncated-strip grid: interior points only, Dirichlet boundaries
/// eliminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-length of the truncated strip; the domain is `[-L, L]`.
    pub l_half: f64,
    /// Interior grid points along x.
    pub nx: usize,
    /// Interior grid points along y.
    pub ny: usize,
    /// Spectral shift for inverse iteration; `None` uses the perturbative
    /// guess.
    pub shift: Option<f64>,
}

impl GridSpec {
    pub fn hx(&self) -> f64 {
        2.0 * self.l_half / (self.nx + 1) as f64
    }

    pub fn hy(&self, cfg: &StripConfig) -> f64 {
        cfg.width() / (self.ny + 1) as f64
    }

    /// Grid with both spacings halved (node counts `2n + 1`).
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            l_half: self.l_half,
            nx: 2 * self.nx + 1,
            ny: 2 * self.ny + 1,
            shift: self.shift,
        }
    }
}

/// Lowest discrete eigenpair.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub e_min: f64,
    /// Interior samples, row-major over x then y, max-normalized with a
    /// positive peak.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `||K v - e M v||_2 / (e ||M v||_2)` at the returned pair.
    pub residual_norm: f64,
    pub grid: GridSpec,
    pub hx: f64,
    pub hy: f64,
}

/// Symmetric banded matrix in lower band-by-row storage.
struct BandMatrix {
    n: usize,
    band: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, band: usize) -> Self {
        Self {
            n,
            band,
            data: vec![0.0; n * (band + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // j in [i - band, i]
        i * (self.band + 1) + (j + self.band - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// In-place LDL^T; returns false when a pivot is non-positive
    /// (shift at or above the lowest eigenvalue).
    fn factor_ldlt(&mut self) -> bool {
        let n = self.n;
        let band = self.band;
        let mut pivot_floor = 0.0f64;
        for i in 0..n {
            pivot_floor = pivot_floor.max(self.get(i, i).abs());
        }
        let pivot_floor = pivot_floor * 1e-14;
        for i in 0..n {
            let j_lo = i.saturating_sub(band);
            for j in j_lo..=i {
                let k_lo = j.saturating_sub(band).max(j_lo);
                let mut sum = self.get(i, j);
                for k in k_lo..j {
                    sum -= self.get(i, k) * self.get(j, k) * self.get(k, k);
                }
                if i == j {
                    if sum <= pivot_floor {
                        return false;
                    }
                    self.set(i, i, sum);
                } else {
                    self.set(i, j, sum / self.get(j, j));
                }
            }
        }
        true
    }

    /// Solve `L D L^T x = b` after `factor_ldlt`.
    fn solve(&self, b: &[f64], x: &mut Vec<f64>) {
        let n = self.n;
        let band = self.band;
        x.clear();
        x.extend_from_slice(b);
        for i in 0..n {
            let k_lo = i.saturating_sub(band);
            let mut v = x[i];
            for k in k_lo..i {
                v -= self.get(i, k) * x[k];
            }
            x[i] = v;
        }
        for i in 0..n {
            x[i] /= self.get(i, i);
        }
        for i in (0..n).rev() {
            let k_hi = (i + band).min(n - 1);
            let mut v = x[i];
            for k in (i + 1)..=k_hi {
                v -= self.get(k, i) * x[k];
            }
            x[i] = v;
        }
    }
}

/// 5-point stiffness matvec, assembled on the fly from the grid geometry.
fn stiffness_matvec(grid: &GridSpec, hx: f64, hy: f64, v: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let cx = 1.0 / (hx * hx);
    let cy = 1.0 / (hy * hy);
    let diag = 2.0 * (cx + cy);
    out.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        for j in 0..ny {
            let m = i * ny + j;
            let mut acc = diag * v[m];
            if i > 0 {
                acc -= cx * v[m - ny];
            }
            if i + 1 < nx {
                acc -= cx * v[m + ny];
            }
            if j > 0 {
                acc -= cy * v[m - 1];
            }
            if j + 1 < ny {
                acc -= cy * v[m + 1];
            }
            row[j] = acc;
        }
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compute the lowest eigenpair of the discretized problem.
pub fn lowest_mode(
    cfg: &StripConfig,
    field: &dyn DensityField,
    grid: &GridSpec,
    tol: f64,
) -> Result<EigenResult, FdError> {
    let b = cfg.width();
    let support = field.support_x();
    let half_support = support.lo.abs().max(support.hi.abs());
    let required = 3.0 * half_support + 3.0 * b;
    if grid.l_half < required {
        return Err(FdError::GridTooSmall {
            required,
            got: grid.l_half,
        });
    }
    if grid.nx < 16 || grid.ny < 16 {
        return Err(FdError::GridTooCoarse {
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let n = nx * ny;
    let hx = grid.hx();
    let hy = grid.hy(cfg);

    // nodal density, rows of nodes evaluated in parallel
    let mass: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|m| {
            let i = m / ny;
            let j = m % ny;
            let x = -grid.l_half + (i + 1) as f64 * hx;
            let y = -0.5 * b + (j + 1) as f64 * hy;
            1.0 + field.sigma(x, y)
        })
        .collect();
    for m in 0..n {
        if !(mass[m] > 0.0) {
            let i = m / ny;
            let j = m % ny;
            return Err(FdError::NonPositiveDensity {
                x: -grid.l_half + (i + 1) as f64 * hx,
                y: -0.5 * b + (j + 1) as f64 * hy,
                density: mass[m],
            });
        }
    }

    let mut shift = match grid.shift {
        Some(s) => s,
        None => {
            let m1 = moment_m1(cfg, field, &QuadratureSpec::default()).value;
            cfg.threshold() + second_order_from_moment(cfg, m1)
        }
    };

    let cx = 1.0 / (hx * hx);
    let cy = 1.0 / (hy * hy);
    let diag_k = 2.0 * (cx + cy);

    let build = |shift: f64| -> BandMatrix {
        let mut a = BandMatrix::zeros(n, ny);
        for m in 0..n {
            let j = m % ny;
            a.set(m, m, diag_k - shift * mass[m]);
            if j > 0 {
                a.set(m, m - 1, -cy);
            }
            if m >= ny {
                a.set(m, m - ny, -cx);
            }
        }
        a
    };

    let mut factor = build(shift);
    let mut retries = 0usize;
    let mut margin = (cfg.threshold() - shift).max(1e-3 * cfg.threshold());
    while !factor.factor_ldlt() {
        retries += 1;
        if retries > 60 {
            return Err(FdError::IndefiniteShift {
                retries,
                last_shift: shift,
            });
        }
        shift -= margin;
        margin *= 2.0;
        factor = build(shift);
    }

    // positive start: transverse ground profile times a centered bump
    let mut v: Vec<f64> = (0..n)
        .map(|m| {
            let i = m / ny;
            let j = m % ny;
            let x = -grid.l_half + (i + 1) as f64 * hx;
            let y = -0.5 * b + (j + 1) as f64 * hy;
            (std::f64::consts::PI * y / b).cos() * (-x.abs() / b).exp()
        })
        .collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut z = Vec::with_capacity(n);
    let mut kz = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut rho = shift;
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    for iter in 1..=400 {
        iterations = iter;
        for m in 0..n {
            rhs[m] = mass[m] * v[m];
        }
        factor.solve(&rhs, &mut z);
        stiffness_matvec(grid, hx, hy, &z, &mut kz);
        let zmz: f64 = z.iter().zip(&mass).map(|(zi, mi)| zi * zi * mi).sum();
        let zkz = dot(&z, &kz);
        rho = zkz / zmz;
        let mut res2 = 0.0;
        let mut mz2 = 0.0;
        for m in 0..n {
            let mz = mass[m] * z[m];
            let r = kz[m] - rho * mz;
            res2 += r * r;
            mz2 += mz * mz;
        }
        residual = res2.sqrt() / (rho.abs() * mz2.sqrt());
        let scale = 1.0 / zmz.sqrt();
        for m in 0..n {
            v[m] = z[m] * scale;
        }
        if residual <= tol {
            break;
        }
    }
    if residual > tol {
        return Err(FdError::NoConvergence {
            iterations,
            residual,
        });
    }

    // max-normalize with positive peak
    let mut peak = 0.0f64;
    let mut peak_val = 0.0f64;
    for &x in &v {
        if x.abs() > peak {
            peak = x.abs();
            peak_val = x;
        }
    }
    let scale = 1.0 / peak_val;
    v.iter_mut().for_each(|x| *x *= scale);

    Ok(EigenResult {
        e_min: rho,
        vector: v,
        iterations,
        residual_norm: residual,
        grid: *grid,
        hx,
        hy,
    })
}

/// Richardson-extrapolated energy with an error bar from the extrapolation
/// spread.
#[derive(Debug, Clone)]
pub struct Extrapolated {
    pub energy: f64,
    pub error_bar: f64,
    /// Empirical convergence order, available with three or more grids.
    pub observed_order: Option<f64>,
    /// False when the sequence was non-monotone and the finest raw value is
    /// reported instead.
    pub extrapolated: bool,
    /// `(h, e_min)` pairs actually used, coarse to fine.
    pub raw: Vec<(f64, f64)>,
}

/// Extrapolate `h -> 0` from two or more refinements at fixed L.
pub fn refine(results: &[EigenResult]) -> Result<Extrapolated, FdError> {
    if results.len() < 2 {
        return Err(FdError::TooFewGrids(results.len()));
    }
    let l0 = results[0].grid.l_half;
    for r in results {
        if (r.grid.l_half - l0).abs() > 1e-12 * l0.abs() {
            return Err(FdError::MixedTruncation(l0, r.grid.l_half));
        }
    }
    let mut seq: Vec<(f64, f64)> = results.iter().map(|r| (r.hy.max(r.hx), r.e_min)).collect();
    seq.sort_by(|a, b| b.0.total_cmp(&a.0));
    let raw = seq.clone();
    let m = seq.len();
    let (h_prev, e_prev) = seq[m - 2];
    let (h_last, e_last) = seq[m - 1];
    let r = h_prev / h_last;

    let extrap = |p: f64| e_last + (e_last - e_prev) / (r.powf(p) - 1.0);
    if m == 2 {
        let energy = extrap(2.0);
        return Ok(Extrapolated {
            energy,
            error_bar: (energy - e_last).abs(),
            observed_order: None,
            extrapolated: true,
            raw,
        });
    }
    let (_, e_prev2) = seq[m - 3];
    let d1 = e_prev - e_prev2;
    let d2 = e_last - e_prev;
    if d1 * d2 <= 0.0 || !d1.is_finite() || !d2.is_finite() {
        // non-monotone: report the finest raw value, no extrapolation
        let spread = seq
            .iter()
            .map(|&(_, e)| (e - e_last).abs())
            .fold(0.0f64, f64::max);
        return Ok(Extrapolated {
            energy: e_last,
            error_bar: spread,
            observed_order: None,
            extrapolated: false,
            raw,
        });
    }
    let p = (d1 / d2).abs().ln() / r.ln();
    let p_used = p.clamp(0.5, 4.0);
    let energy = extrap(p_used);
    let error_bar = (energy - extrap(2.0)).abs().max(0.05 * (energy - e_last).abs());
    Ok(Extrapolated {
        energy,
        error_bar,
        observed_order: Some(p),
        extrapolated: true,
        raw,
    })
}

/// Fraction of the peak amplitude found at `|x| >= L/2`; small values mean a
/// well-localized bound state.
pub fn localization_metric(res: &EigenResult) -> f64 {
    let (nx, ny) = (res.grid.nx, res.grid.ny);
    let mut tail: f64 = 0.0;
    for i in 0..nx {
        let x = -res.grid.l_half + (i + 1) as f64 * res.hx;
        if x.abs() >= 0.5 * res.grid.l_half {
            for j in 0..ny {
                tail = tail.max(res.vector[i * ny + j].abs());
            }
        }
    }
    tail
}

/// Self-describing text export: header `b L nx ny`, then one row of `ny`
/// values per x-node.
pub fn write_eigenvector(
    w: &mut impl Write,
    cfg: &StripConfig,
    res: &EigenResult,
) -> Result<(), FdError> {
    writeln!(w, "guidetrap-eigenvector 1")?;
    writeln!(
        w,
        "b {} L {} nx {} ny {}",
        cfg.width(),
        res.grid.l_half,
        res.grid.nx,
        res.grid.ny
    )?;
    for i in 0..res.grid.nx {
        let row: Vec<String> = (0..res.grid.ny)
            .map(|j| format!("{}", res.vector[i * res.grid.ny + j]))
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Parse the text export back; returns `(b, L, nx, ny, values)`.
pub fn read_eigenvector(r: impl BufRead) -> Result<(f64, f64, usize, usize, Vec<f64>), FdError> {
    let mut lines = r.lines();
    let magic = lines
        .next()
        .ok_or_else(|| FdError::BadEigenvectorData("empty file".into()))??;
    if magic.trim() != "guidetrap-eigenvector 1" {
        return Err(FdError::BadEigenvectorData(format!(
            "unexpected magic line: {magic}"
        )));
    }
    let header = lines
        .next()
        .ok_or_else(|| FdError::BadEigenvectorData("missing header".into()))??;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 8 || toks[0] != "b" || toks[2] != "L" || toks[4] != "nx" || toks[6] != "ny" {
        return Err(FdError::BadEigenvectorData(format!("bad header: {header}")));
    }
    let parse_f = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| FdError::BadEigenvectorData(format!("{s}: {e}")))
    };
    let b = parse_f(toks[1])?;
    let l = parse_f(toks[3])?;
    let nx: usize = toks[5]
        .parse()
        .map_err(|e| FdError::BadEigenvectorData(format!("nx: {e}")))?;
    let ny: usize = toks[7]
        .parse()
        .map_err(|e| FdError::BadEigenvectorData(format!("ny: {e}")))?;
    let mut values = Vec::with_capacity(nx * ny);
    for line in lines {
        for tok in line?.split_whitespace() {
            values.push(parse_f(tok)?);
        }
    }
    if values.len() != nx * ny {
        return Err(FdError::BadEigenvectorData(format!(
            "expected {} values, got {}",
            nx * ny,
            values.len()
        )));
    }
    Ok((b, l, nx, ny, values))
}
