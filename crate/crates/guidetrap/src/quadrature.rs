//! Adaptive panel quadrature over the strip cross-section and over products
//! of strip domains.
//!
//! The scheme is a nested fixed-order rule (7-point Gauss embedded in a
//! 15-point Kronrod rule, applied as a tensor product on rectangles) with
//! adaptive bisection of the largest-error panel. Integrand kinks along x are
//! handled by forced panel boundaries (`split_points_x`); the 4D pair
//! integrals run as an iterated 2D x 2D pass with a forced split of the inner
//! x-range at the outer x, so the `|x1 - x2|` kink and the logarithmic
//! diagonal singularity always sit on panel edges where the rule has no
//! nodes.
//!
//! Subdivision order and the final accumulation order are deterministic, so
//! results are reproducible run to run even with parallel panel evaluation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering as AtomicOrdering};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::domain::{Interval, StripConfig};

/// 15-point Kronrod nodes on [-1, 1], ascending.
const GK_NODES: [f64; 15] = [
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
];

const GK_WEIGHTS: [f64; 15] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
];

/// Embedded 7-point Gauss weights; zero at pure Kronrod nodes.
const GAUSS_WEIGHTS: [f64; 15] = [
    0.0,
    0.129484966168869693270611432679082,
    0.0,
    0.279705391489276667901467771423780,
    0.0,
    0.381830050505118944950369775488975,
    0.0,
    0.417959183673469387755102040816327,
    0.0,
    0.381830050505118944950369775488975,
    0.0,
    0.279705391489276667901467771423780,
    0.0,
    0.129484966168869693270611432679082,
    0.0,
];

const POINTS_PER_CELL: u64 = 225;

#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub split_points_x: Vec<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-15,
            max_subdivisions: 4000,
            split_points_x: Vec::new(),
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_splits(mut self, splits: Vec<f64>) -> Self {
        self.split_points_x = splits;
        self
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
    pub n_evals: u64,
    pub converged: bool,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            err_estimate: 0.0,
            n_evals: 0,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    value: f64,
    err: f64,
    /// Per-axis Gauss-vs-Kronrod differences, used to pick the split axis.
    err_x: f64,
    err_y: f64,
}

struct HeapEntry {
    err: f64,
    seq: u64,
    cell: Cell,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on error; older cells win ties so the pop order is fixed
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn eval_cell<F: Fn(f64, f64) -> f64 + Sync>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    parallel: bool,
) -> Cell {
    let cx = 0.5 * (x0 + x1);
    let hx = 0.5 * (x1 - x0);
    let cy = 0.5 * (y0 + y1);
    let hy = 0.5 * (y1 - y0);

    let values: Vec<f64> = if parallel {
        (0..225usize)
            .into_par_iter()
            .map(|idx| {
                let i = idx / 15;
                let j = idx % 15;
                f(cx + hx * GK_NODES[i], cy + hy * GK_NODES[j])
            })
            .collect()
    } else {
        let mut v = Vec::with_capacity(225);
        for i in 0..15 {
            let x = cx + hx * GK_NODES[i];
            for j in 0..15 {
                v.push(f(x, cy + hy * GK_NODES[j]));
            }
        }
        v
    };

    // four tensor combinations of the embedded rules: kron x kron is the
    // value; the mixed sums isolate the error per axis
    let mut kk = 0.0;
    let mut gk = 0.0;
    let mut kg = 0.0;
    let mut gg = 0.0;
    for i in 0..15 {
        let mut row_k = 0.0;
        let mut row_g = 0.0;
        for j in 0..15 {
            let fv = values[i * 15 + j];
            row_k += GK_WEIGHTS[j] * fv;
            row_g += GAUSS_WEIGHTS[j] * fv;
        }
        kk += GK_WEIGHTS[i] * row_k;
        kg += GK_WEIGHTS[i] * row_g;
        gk += GAUSS_WEIGHTS[i] * row_k;
        gg += GAUSS_WEIGHTS[i] * row_g;
    }
    let scale = hx * hy;
    let value = kk * scale;
    let err_x = ((kk - gk) * scale).abs();
    let err_y = ((kk - kg) * scale).abs();
    let err = (err_x + err_y)
        .max(((kk - gg) * scale).abs())
        .max(4.0 * f64::EPSILON * value.abs());
    Cell {
        x0,
        x1,
        y0,
        y1,
        value,
        err,
        err_x,
        err_y,
    }
}

/// x-interval partition induced by the forced split points.
fn initial_x_panels(x: Interval, splits: &[f64]) -> Vec<(f64, f64)> {
    let mut edges = vec![x.lo, x.hi];
    for &s in splits {
        if s > x.lo && s < x.hi {
            edges.push(s);
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

fn adaptive_2d<F: Fn(f64, f64) -> f64 + Sync>(
    f: &F,
    x: Interval,
    y: Interval,
    splits_x: &[f64],
    spec: &QuadratureSpec,
    parallel: bool,
) -> QuadResult {
    if x.length() == 0.0 || y.length() == 0.0 {
        return QuadResult::zero();
    }
    let scale_x = x.length();
    let scale_y = y.length();

    let mut heap = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut n_evals: u64 = 0;
    let mut total_value = 0.0;
    let mut total_err = 0.0;
    for (x0, x1) in initial_x_panels(x, splits_x) {
        let cell = eval_cell(f, x0, x1, y.lo, y.hi, parallel);
        n_evals += POINTS_PER_CELL;
        total_value += cell.value;
        total_err += cell.err;
        heap.push(HeapEntry {
            err: cell.err,
            seq,
            cell,
        });
        seq += 1;
    }

    let mut converged = true;
    while total_err > spec.tolerance(total_value) {
        if heap.len() >= spec.max_subdivisions {
            converged = false;
            break;
        }
        let worst = match heap.pop() {
            Some(w) => w,
            None => break,
        };
        let c = worst.cell;
        total_value -= c.value;
        total_err -= c.err;
        // split the axis whose rule difference dominates; fall back to the
        // longer scaled side when the indicators are even
        let split_x = if c.err_x > 1.25 * c.err_y {
            true
        } else if c.err_y > 1.25 * c.err_x {
            false
        } else {
            (c.x1 - c.x0) / scale_x >= (c.y1 - c.y0) / scale_y
        };
        let (a, b) = if split_x {
            let xm = 0.5 * (c.x0 + c.x1);
            (
                eval_cell(f, c.x0, xm, c.y0, c.y1, parallel),
                eval_cell(f, xm, c.x1, c.y0, c.y1, parallel),
            )
        } else {
            let ym = 0.5 * (c.y0 + c.y1);
            (
                eval_cell(f, c.x0, c.x1, c.y0, ym, parallel),
                eval_cell(f, c.x0, c.x1, ym, c.y1, parallel),
            )
        };
        n_evals += 2 * POINTS_PER_CELL;
        for child in [a, b] {
            total_value += child.value;
            total_err += child.err;
            heap.push(HeapEntry {
                err: child.err,
                seq,
                cell: child,
            });
            seq += 1;
        }
        // a cell split below the width where midpoints are representable
        // cannot shrink further; give up rather than spin
        if split_x {
            if c.x1 - c.x0 <= 4.0 * f64::EPSILON * (c.x0.abs() + c.x1.abs() + 1.0) {
                converged = false;
                break;
            }
        } else if c.y1 - c.y0 <= 4.0 * f64::EPSILON * (c.y0.abs() + c.y1.abs() + 1.0) {
            converged = false;
            break;
        }
    }

    // deterministic reduction: accumulate in geometric order
    let mut cells: Vec<Cell> = heap.into_iter().map(|e| e.cell).collect();
    cells.sort_by(|a, b| a.x0.total_cmp(&b.x0).then(a.y0.total_cmp(&b.y0)));
    let value: f64 = cells.iter().map(|c| c.value).sum();
    let err: f64 = cells.iter().map(|c| c.err).sum();
    let converged = converged && err <= spec.tolerance(value);
    QuadResult {
        value,
        err_estimate: err,
        n_evals,
        converged,
    }
}

/// Integrate `f(x, y)` over an arbitrary rectangle.
pub fn integrate_rect<F: Fn(f64, f64) -> f64 + Sync>(
    f: F,
    x: Interval,
    y: Interval,
    spec: &QuadratureSpec,
) -> QuadResult {
    adaptive_2d(&f, x, y, &spec.split_points_x, spec, false)
}

/// Integrate `f(x, y)` over `window_x x [-b/2, b/2]`.
///
/// Piecewise-smooth integrands converge to the requested tolerance provided
/// their x-breaks are listed in `spec.split_points_x`. Non-convergence within
/// `max_subdivisions` is flagged, never silently reported as converged.
pub fn integrate_strip<F: Fn(f64, f64) -> f64 + Sync>(
    cfg: &StripConfig,
    f: F,
    window_x: Interval,
    spec: &QuadratureSpec,
) -> QuadResult {
    let half = 0.5 * cfg.width();
    adaptive_2d(
        &f,
        window_x,
        Interval { lo: -half, hi: half },
        &spec.split_points_x,
        spec,
        false,
    )
}

/// Integrate a kernel `k(x1, y1, x2, y2)` over
/// `w1 x [-b/2, b/2] x w2 x [-b/2, b/2]`.
///
/// The integration runs as an outer adaptive pass over `(x1, y1)` whose
/// integrand is an inner adaptive integral over `(x2, y2)` with a forced
/// panel boundary at `x2 = x1`, so kernels with `|x1 - x2|` kinks or
/// integrable `log|x1 - x2|` singularities on the diagonal are handled
/// without ever placing a node on the diagonal itself.
pub fn integrate_pair<K: Fn(f64, f64, f64, f64) -> f64 + Sync>(
    cfg: &StripConfig,
    kernel: K,
    windows: (Interval, Interval),
    spec: &QuadratureSpec,
) -> QuadResult {
    let half = 0.5 * cfg.width();
    let y_range = Interval { lo: -half, hi: half };
    let (w1, w2) = windows;
    if w1.length() == 0.0 || w2.length() == 0.0 {
        return QuadResult::zero();
    }
    let outer_area = w1.length() * cfg.width();

    // pilot pass over the initial panels only (no refinement anywhere) to
    // learn the magnitude of the integral, which sets the absolute budget
    // handed to the inner pass
    let pilot_spec = QuadratureSpec {
        rel_tol: 1e-2,
        abs_tol: f64::INFINITY,
        max_subdivisions: 64,
        split_points_x: Vec::new(),
    };
    let pilot_inner = |x1: f64, y1: f64| {
        let mut splits = spec.split_points_x.clone();
        splits.push(x1);
        adaptive_2d(
            &|x2, y2| kernel(x1, y1, x2, y2),
            w2,
            y_range,
            &splits,
            &pilot_spec,
            false,
        )
        .value
    };
    let mut rough = 0.0;
    for (x0, x1) in initial_x_panels(w1, &spec.split_points_x) {
        rough += eval_cell(&pilot_inner, x0, x1, y_range.lo, y_range.hi, true).value;
    }

    let target_abs = spec.abs_tol.max(spec.rel_tol * rough.abs());
    let inner_spec = QuadratureSpec {
        rel_tol: 0.5 * spec.rel_tol,
        abs_tol: 0.2 * target_abs / outer_area,
        max_subdivisions: spec.max_subdivisions,
        split_points_x: Vec::new(),
    };

    let inner_err_sum = Mutex::new(0.0f64);
    let inner_count = AtomicU64::new(0);
    let inner_evals = AtomicU64::new(0);
    let any_inner_unconverged = AtomicBool::new(false);

    let outer_integrand = |x1: f64, y1: f64| {
        let mut splits = spec.split_points_x.clone();
        splits.push(x1);
        let r = adaptive_2d(
            &|x2, y2| kernel(x1, y1, x2, y2),
            w2,
            y_range,
            &splits,
            &inner_spec,
            false,
        );
        inner_evals.fetch_add(r.n_evals, AtomicOrdering::Relaxed);
        inner_count.fetch_add(1, AtomicOrdering::Relaxed);
        if !r.converged {
            any_inner_unconverged.store(true, AtomicOrdering::Relaxed);
        }
        *inner_err_sum.lock().unwrap() += r.err_estimate;
        r.value
    };

    let outer = adaptive_2d(
        &outer_integrand,
        w1,
        y_range,
        &spec.split_points_x,
        spec,
        true,
    );

    let count = inner_count.load(AtomicOrdering::Relaxed).max(1);
    let mean_inner_err = *inner_err_sum.lock().unwrap() / count as f64;
    let err_estimate = outer.err_estimate + mean_inner_err * outer_area;
    // the factor 2 leaves room for the inner contribution on top of the
    // outer pass meeting its own tolerance
    let converged = outer.converged
        && !any_inner_unconverged.load(AtomicOrdering::Relaxed)
        && err_estimate <= 2.0 * spec.tolerance(outer.value);
    QuadResult {
        value: outer.value,
        err_estimate,
        n_evals: inner_evals.load(AtomicOrdering::Relaxed),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_slab, DensityField, StripConfig};

    fn cfg1() -> StripConfig {
        StripConfig::new(1.0).unwrap()
    }

    #[test]
    fn constant_over_strip_is_area() {
        let r = integrate_strip(
            &cfg1(),
            |_x, _y| 1.0,
            Interval { lo: -1.0, hi: 1.0 },
            &QuadratureSpec::default(),
        );
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-12, "value {}", r.value);
    }

    #[test]
    fn cos2_window_quarter() {
        // int cos^2(pi y) over the full width is 1/2; window length 0.5
        let cfg = cfg1();
        let r = integrate_strip(
            &cfg,
            |_x, y| cfg.cos2(y),
            Interval { lo: -0.25, hi: 0.25 },
            &QuadratureSpec::default(),
        );
        assert!(r.converged);
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn slab_times_cos2_matches_antiderivative() {
        // closed form: sigma * delta * b / 2 = 0.1 * 0.5 * 0.5 = 0.025
        let cfg = cfg1();
        let slab = make_slab(0.1, 0.5).unwrap();
        let spec = QuadratureSpec::default()
            .with_rel_tol(1e-10)
            .with_splits(slab.split_points_x());
        let r = integrate_strip(
            &cfg,
            |x, y| slab.sigma(x, y) * cfg.cos2(y),
            Interval { lo: -1.0, hi: 1.0 },
            &spec,
        );
        assert!(r.converged);
        assert!((r.value - 0.025).abs() < 1e-12, "value {}", r.value);
    }

    #[test]
    fn pair_unit_kernel_hypervolume() {
        let r = integrate_pair(
            &cfg1(),
            |_x1, _y1, _x2, _y2| 1.0,
            (Interval { lo: 0.0, hi: 1.0 }, Interval { lo: 0.0, hi: 1.0 }),
            &QuadratureSpec::default(),
        );
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-10, "value {}", r.value);
    }

    #[test]
    fn pair_abs_difference_kernel() {
        // int_0^1 int_0^1 |x1 - x2| = 1/3, transverse factor b^2 = 1
        let spec = QuadratureSpec::default().with_rel_tol(1e-8);
        let r = integrate_pair(
            &cfg1(),
            |x1, _y1, x2, _y2| (x1 - x2).abs(),
            (Interval { lo: 0.0, hi: 1.0 }, Interval { lo: 0.0, hi: 1.0 }),
            &spec,
        );
        assert!(r.converged);
        assert!(
            (r.value - 1.0 / 3.0).abs() < 1e-8 * 3.0,
            "value {} err {}",
            r.value,
            r.err_estimate
        );
    }

    #[test]
    fn pair_log_singular_kernel() {
        // int_0^1 int_0^1 log|x1 - x2| = -3/2; validates diagonal handling
        let spec = QuadratureSpec {
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            max_subdivisions: 20_000,
            split_points_x: Vec::new(),
        };
        let r = integrate_pair(
            &cfg1(),
            |x1, _y1, x2, _y2| (x1 - x2).abs().ln(),
            (Interval { lo: 0.0, hi: 1.0 }, Interval { lo: 0.0, hi: 1.0 }),
            &spec,
        );
        assert!(r.converged, "err {} evals {}", r.err_estimate, r.n_evals);
        assert!(
            (r.value + 1.5).abs() < 3e-6,
            "value {} err {}",
            r.value,
            r.err_estimate
        );
    }

    #[test]
    fn unconverged_is_flagged() {
        // needle too sharp for the allowed number of panels
        let spec = QuadratureSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_subdivisions: 4,
            split_points_x: Vec::new(),
        };
        let r = integrate_strip(
            &cfg1(),
            |x, _y| (-(x * x) * 1e6).exp(),
            Interval { lo: -1.0, hi: 1.0 },
            &spec,
        );
        assert!(!r.converged);
    }

    #[test]
    fn linearity_within_combined_error() {
        let cfg = cfg1();
        let w = Interval { lo: -0.8, hi: 0.9 };
        let spec = QuadratureSpec::default().with_rel_tol(1e-9);
        let f = |x: f64, y: f64| (x * 1.7).sin() + y;
        let g = |x: f64, y: f64| (x - 0.3) * (y + 0.1);
        let (alpha, beta) = (2.5, -1.25);
        let rf = integrate_strip(&cfg, f, w, &spec);
        let rg = integrate_strip(&cfg, g, w, &spec);
        let rc = integrate_strip(&cfg, |x, y| alpha * f(x, y) + beta * g(x, y), w, &spec);
        let lhs = rc.value;
        let rhs = alpha * rf.value + beta * rg.value;
        let budget = rc.err_estimate + alpha.abs() * rf.err_estimate + beta.abs() * rg.err_estimate;
        assert!((lhs - rhs).abs() <= budget + 1e-13);
    }

    #[test]
    fn refinement_monotonicity_on_closed_forms() {
        // halving rel_tol never increases the true error
        let cfg = cfg1();
        let slab = make_slab(0.1, 0.5).unwrap();
        let w = Interval { lo: -1.0, hi: 1.0 };
        let exact = 0.025;
        let mut last_err = f64::INFINITY;
        let mut tol = 1e-3;
        while tol > 1e-11 {
            let spec = QuadratureSpec::default()
                .with_rel_tol(tol)
                .with_splits(slab.split_points_x());
            let r = integrate_strip(&cfg, |x, y| slab.sigma(x, y) * cfg.cos2(y), w, &spec);
            let err = (r.value - exact).abs();
            assert!(
                err <= last_err + 4.0 * f64::EPSILON * exact,
                "tol {tol}: err {err} > previous {last_err}"
            );
            last_err = err;
            tol *= 0.5;
        }
    }

    #[test]
    fn error_estimate_honesty_randomized_windows() {
        // |value - exact| <= 3 x err_estimate on >= 99% of randomized windows
        let cfg = cfg1();
        let spec = QuadratureSpec::default().with_rel_tol(1e-7);
        let mut state: u64 = 0x9e3779b97f4a7c15;
        let mut next = move || {
            // xorshift*
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut failures = 0;
        let trials = 300;
        for _ in 0..trials {
            let a = -1.5 + 2.0 * next();
            let b = a + 0.1 + 1.5 * next();
            let k = 1.0 + 4.0 * next();
            // exact: int_a^b int_{-1/2}^{1/2} sin(kx) dy dx = (cos(ka) - cos(kb))/k
            let exact = ((k * a).cos() - (k * b).cos()) / k;
            let r = integrate_strip(&cfg, |x, _y| (k * x).sin(), Interval { lo: a, hi: b }, &spec);
            if (r.value - exact).abs() > 3.0 * r.err_estimate + 1e-14 {
                failures += 1;
            }
        }
        assert!(
            (failures as f64) <= 0.01 * trials as f64,
            "{failures}/{trials} windows outside 3x error estimate"
        );
    }

    #[test]
    fn pair_is_deterministic_across_runs() {
        let spec = QuadratureSpec::default().with_rel_tol(1e-6);
        let run = || {
            integrate_pair(
                &cfg1(),
                |x1, y1, x2, y2| (x1 - x2).abs() * (1.0 + y1 * y2),
                (Interval { lo: -0.5, hi: 0.5 }, Interval { lo: -0.5, hi: 0.5 }),
                &spec,
            )
            .value
        };
        let a = run();
        let b = run();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
