//! Exactly solvable slab benchmark.
//!
//! For the piecewise-constant slab (`sigma0` on `|x| < delta/2`) the bound
//! state is `cos(p2 x)` inside and `e^(-p1 |x|)` outside, matched at the slab
//! edges. Matching fixes `p1 = p2 tan(delta p2 / 2)` and leaves one
//! transcendental equation for `p2`,
//!
//! `pi^2/b^2 - p2^2 tan^2(delta p2 / 2) = (pi^2/b^2 + p2^2) / (1 + sigma0)`,
//!
//! solved on the first branch `0 < delta p2 / 2 < pi/2` by bracketed
//! bisection with a secant polish. The module also evaluates the closed-form
//! power series of `p2^2`, `p1` and the energy in `sigma0` (exact through
//! fifth order), which double as the ground truth for the perturbation and
//! finite-difference modules.

use thiserror::Error;

use std::f64::consts::PI;

use crate::domain::{SlabProfile, StripConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SlabError {
    #[error("no slab bound state in this regime: requires sigma0 > 0, got {0}")]
    NoBoundState(f64),
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("root not bracketed: residual has no sign change on ({lo}, {hi}) [f(lo)={flo}, f(hi)={fhi}]")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("series order must lie in 2..=5, got {0}")]
    BadOrder(usize),
}

/// Exact slab bound state.
#[derive(Debug, Clone)]
pub struct SlabSolution {
    pub sigma0: f64,
    pub delta: f64,
    /// Interior transverse wavenumber.
    pub p2: f64,
    /// Exterior decay rate, `p1 = p2 tan(delta p2 / 2)`.
    pub p1: f64,
    /// Matching amplitudes `(a1, a2, a3)` with the `a2 = 1` normalization;
    /// `a1 = a3` by x-parity.
    pub amplitudes: (f64, f64, f64),
    /// Exact eigenvalue `pi^2/b^2 - p1^2`.
    pub energy: f64,
    /// Residual of the transcendental equation at the root.
    pub residual: f64,
}

fn matching_residual(cfg: &StripConfig, delta: f64, sigma0: f64, p2: f64) -> f64 {
    let thr = cfg.threshold();
    let t = (0.5 * delta * p2).tan();
    thr - p2 * p2 * t * t - (thr + p2 * p2) / (1.0 + sigma0)
}

/// Solve the slab matching equation on the first branch.
pub fn solve_slab(cfg: &StripConfig, slab: &SlabProfile, tol: f64) -> Result<SlabSolution, SlabError> {
    let sigma0 = slab.sigma0();
    let delta = slab.delta();
    if !(sigma0 > 0.0) {
        return Err(SlabError::NoBoundState(sigma0));
    }
    if !(tol > 0.0) {
        return Err(SlabError::NonPositiveTolerance(tol));
    }
    let b = cfg.width();
    // first branch, clear of the tan pole at delta p2 / 2 = pi / 2
    let hi = (PI / delta).min(PI / b) * (1.0 - 1e-9);
    let lo = 1e-12 * hi;
    let f = |p2: f64| matching_residual(cfg, delta, sigma0, p2);
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo * fhi > 0.0 {
        return Err(SlabError::NotBracketed { lo, hi, flo, fhi });
    }
    // bisection to a tight bracket
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    // secant polish inside the bracket
    let mut p2 = 0.5 * (lo + hi);
    for _ in 0..4 {
        let h = (hi - lo).max(1e-15 * p2);
        let d = (f(p2 + h) - f(p2 - h)) / (2.0 * h);
        if d != 0.0 {
            let step = f(p2) / d;
            let candidate = p2 - step;
            if candidate > lo && candidate < hi {
                p2 = candidate;
            }
        }
    }
    let residual = f(p2).abs();
    if residual > tol {
        // fall back to the bisection midpoint if polishing did not help
        let mid = 0.5 * (lo + hi);
        if f(mid).abs() < residual {
            p2 = mid;
        }
    }
    let residual = f(p2).abs();

    let half_phase = 0.5 * delta * p2;
    let p1 = p2 * half_phase.tan();
    let energy = cfg.threshold() - p1 * p1;
    // amplitude relation as printed; continuity at x = +-delta/2 is exact
    // because the exponent equals p1 delta / 2
    let a_out = half_phase.cos() * (half_phase * half_phase.tan()).exp();
    Ok(SlabSolution {
        sigma0,
        delta,
        p2,
        p1,
        amplitudes: (a_out, 1.0, a_out),
        energy,
        residual,
    })
}

/// Power-series coefficients in `sigma0`, index = power. `order` selects how
/// many corrections are kept (2..=5); higher entries are zeroed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabSeries {
    pub p2_sq: [f64; 6],
    pub p1: [f64; 6],
    pub energy: [f64; 6],
}

impl SlabSeries {
    pub fn eval_energy(&self, sigma: f64) -> f64 {
        horner(&self.energy, sigma)
    }

    pub fn eval_p2_sq(&self, sigma: f64) -> f64 {
        horner(&self.p2_sq, sigma)
    }

    pub fn eval_p1(&self, sigma: f64) -> f64 {
        horner(&self.p1, sigma)
    }
}

fn horner(c: &[f64; 6], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

/// Closed-form series coefficients evaluated at `(b, delta)`.
pub fn slab_series(cfg: &StripConfig, slab: &SlabProfile, order: usize) -> Result<SlabSeries, SlabError> {
    if !(2..=5).contains(&order) {
        return Err(SlabError::BadOrder(order));
    }
    let b = cfg.width();
    let d = slab.delta();
    let (pi2, b2, d2) = (PI * PI, b * b, d * d);
    let pi4 = pi2 * pi2;
    let pi6 = pi4 * pi2;
    let pi8 = pi6 * pi2;
    let (b4, b6, b8, b10) = (b2 * b2, b2.powi(3), b2.powi(4), b2.powi(5));
    let d3 = d2 * d;
    let d4 = d2 * d2;
    let d5 = d2 * d3;
    let d6 = d3 * d3;
    let d7 = d3 * d4;

    let mut p2_sq = [
        0.0,
        pi2 / b2,
        -pi4 * d2 / (4.0 * b4),
        pi4 * d2 * (pi2 * d2 - 3.0 * b2) / (12.0 * b6),
        (150.0 * pi6 * b2 * d4 - 23.0 * pi8 * d6) / (720.0 * b8),
        pi6 * d4 * (630.0 * b4 - 686.0 * pi2 * b2 * d2 + 67.0 * pi4 * d4) / (5040.0 * b10),
    ];
    let mut p1 = [
        0.0,
        pi2 * d / (2.0 * b2),
        -pi4 * d3 / (12.0 * b4),
        (pi6 * d5 - 5.0 * pi4 * b2 * d3) / (40.0 * b6),
        (210.0 * pi6 * b2 * d5 - 23.0 * pi8 * d7) / (2520.0 * b8),
        pi6 * d5 * (1134.0 * b4 - 882.0 * pi2 * b2 * d2 + 67.0 * pi4 * d4) / (18144.0 * b10),
    ];
    let mut energy = [
        pi2 / b2,
        0.0,
        -pi4 * d2 / (4.0 * b4),
        pi6 * d4 / (12.0 * b6),
        (90.0 * pi6 * b2 * d4 - 23.0 * pi8 * d6) / (720.0 * b8),
        pi8 * d6 * (67.0 * pi2 * d2 - 525.0 * b2) / (5040.0 * b10),
    ];
    for k in (order + 1)..6 {
        p2_sq[k] = 0.0;
        p1[k] = 0.0;
        energy[k] = 0.0;
    }
    Ok(SlabSeries { p2_sq, p1, energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_slab;

    fn cfg1() -> StripConfig {
        StripConfig::new(1.0).unwrap()
    }

    #[test]
    fn canonical_slab_energy() {
        let cfg = cfg1();
        let slab = make_slab(0.1, 0.5).unwrap();
        let sol = solve_slab(&cfg, &slab, 1e-12).unwrap();
        assert!(sol.residual <= 1e-12);
        assert!(sol.energy > 9.8139 && sol.energy < 9.8141, "E {}", sol.energy);
        // frozen from an independent high-precision bisection
        assert!((sol.energy - 9.813911498891092).abs() < 1e-9);
        assert!((sol.p2 - 0.9621321362946168).abs() < 1e-9);
        assert!((sol.p1 - 0.23599343676947067).abs() < 1e-9);
    }

    #[test]
    fn matching_identity_and_eigenvalue_relations() {
        let cfg = cfg1();
        let slab = make_slab(0.1, 0.5).unwrap();
        let sol = solve_slab(&cfg, &slab, 1e-12).unwrap();
        // p1 = p2 tan(delta p2 / 2) holds by construction
        let rhs = sol.p2 * (0.5 * slab.delta() * sol.p2).tan();
        assert!((sol.p1 - rhs).abs() < 1e-12);
        // inside and outside eigenvalue relations hold simultaneously
        let thr = cfg.threshold();
        let inside = sol.energy * (1.0 + slab.sigma0()) - (thr + sol.p2 * sol.p2);
        assert!(inside.abs() < 1e-9, "inside residual {inside}");
        let outside = sol.energy - (thr - sol.p1 * sol.p1);
        assert_eq!(outside, 0.0);
        // first branch
        assert!(0.0 < 0.5 * slab.delta() * sol.p2 && 0.5 * slab.delta() * sol.p2 < 0.5 * PI);
    }

    #[test]
    fn wavefunction_continuity_at_slab_edges() {
        // a1 = a2 cos(d p2/2) e^{(d p2/2) tan(d p2/2)} makes psi and psi'
        // continuous at x = +-delta/2; check numerically
        let cfg = cfg1();
        let slab = make_slab(0.2, 0.7).unwrap();
        let sol = solve_slab(&cfg, &slab, 1e-12).unwrap();
        let xe = 0.5 * slab.delta();
        let inside = |x: f64| sol.amplitudes.1 * (sol.p2 * x).cos();
        let outside = |x: f64| sol.amplitudes.2 * (-sol.p1 * x).exp();
        assert!((inside(xe) - outside(xe)).abs() < 1e-12);
        let d_in = -sol.amplitudes.1 * sol.p2 * (sol.p2 * xe).sin();
        let d_out = -sol.p1 * outside(xe);
        assert!((d_in - d_out).abs() < 1e-9, "{d_in} vs {d_out}");
    }

    #[test]
    fn small_sigma_leading_behavior() {
        // p2^2 -> pi^2 sigma / b^2 as sigma -> 0+
        let cfg = cfg1();
        for &s in &[1e-3, 1e-4] {
            let slab = make_slab(s, 0.5).unwrap();
            let sol = solve_slab(&cfg, &slab, 1e-13).unwrap();
            let leading = PI * PI * s;
            assert!(
                ((sol.p2 * sol.p2 - leading) / leading).abs() < 0.05,
                "sigma {s}"
            );
        }
    }

    #[test]
    fn rejects_non_positive_sigma_and_tolerance() {
        let cfg = cfg1();
        let rare = make_slab(-0.1, 0.5).unwrap();
        assert!(matches!(
            solve_slab(&cfg, &rare, 1e-12),
            Err(SlabError::NoBoundState(_))
        ));
        let slab = make_slab(0.1, 0.5).unwrap();
        assert!(matches!(
            solve_slab(&cfg, &slab, 0.0),
            Err(SlabError::NonPositiveTolerance(_))
        ));
    }

    #[test]
    fn series_coefficients_at_unit_parameters() {
        let cfg = cfg1();
        let slab = make_slab(0.1, 1.0).unwrap();
        let s = slab_series(&cfg, &slab, 5).unwrap();
        assert!((s.energy[2] - (-PI.powi(4) / 4.0)).abs() < 1e-10);
        assert!((s.energy[3] - PI.powi(6) / 12.0).abs() < 1e-9);
        assert!((s.p1[1] - PI * PI / 2.0).abs() < 1e-12);
        assert!(matches!(slab_series(&cfg, &slab, 6), Err(SlabError::BadOrder(6))));
        assert!(matches!(slab_series(&cfg, &slab, 1), Err(SlabError::BadOrder(1))));
    }

    #[test]
    fn series_order_truncation() {
        let cfg = cfg1();
        let slab = make_slab(0.1, 0.5).unwrap();
        let s3 = slab_series(&cfg, &slab, 3).unwrap();
        assert_eq!(s3.energy[4], 0.0);
        assert_eq!(s3.energy[5], 0.0);
        assert_ne!(s3.energy[3], 0.0);
    }

    #[test]
    fn root_matches_series_to_expected_order() {
        let cfg = cfg1();
        let slab = make_slab(0.02, 0.5).unwrap();
        let sol = solve_slab(&cfg, &slab, 1e-14).unwrap();
        let series = slab_series(&cfg, &slab, 5).unwrap();
        let err = (sol.energy - series.eval_energy(0.02)).abs();
        // frozen from the independent high-precision run: 5.4073e-10
        assert!(err < 1e-9, "err {err}");
        assert!(err > 1e-11, "err suspiciously small: {err}");
    }
}
