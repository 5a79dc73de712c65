//! Variational upper bound from the exponential-times-sine trial state
//! `sqrt(a) e^(-a|x|) sqrt(2/b) sin(pi (y + b/2) / b)`.
//!
//! In the weak-field limit the optimal decay rate and the bound are closed
//! forms in the moment `M1`:
//!
//! `a = (pi^2 / b^3) M1`,  `W = pi^2/b^2 - (pi^4 / b^6) M1^2`,
//!
//! and `W - threshold` coincides with the second-order perturbative
//! coefficient by construction (it is computed through the same expression,
//! so the agreement is bitwise). A bound state is signalled only when
//! `a > 0`; the full Rayleigh-quotient minimization is out of scope since
//! the finite-difference oracle provides the sharper numerical check.

use std::f64::consts::PI;

use crate::domain::{max_abs_sigma_sampled, DensityField, StripConfig};
use crate::perturbation::second_order_from_moment;
use crate::quadrature::{QuadResult, QuadratureSpec};

/// Sampled `max |sigma|` above which the weak-field closed forms are
/// flagged as stretched.
pub const WEAK_FIELD_LIMIT: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct VariationalResult {
    /// Optimal decay rate of the trial state (inverse length).
    pub a: f64,
    /// Energy upper bound in the weak-field limit.
    pub w: f64,
    /// A localized trial state exists only for `a > 0`.
    pub bound_exists: bool,
    /// Moment quadrature backing `a` and `w`.
    pub m1: QuadResult,
    /// Sampled `max |sigma|`, for the weak-field warning.
    pub max_abs_sigma: f64,
}

impl VariationalResult {
    pub fn weak_field_ok(&self) -> bool {
        self.max_abs_sigma <= WEAK_FIELD_LIMIT
    }
}

/// Closed forms from a known moment.
pub fn variational_from_moment(cfg: &StripConfig, m1: f64) -> (f64, f64) {
    let b = cfg.width();
    let a = PI * PI / b.powi(3) * m1;
    let w = cfg.threshold() + second_order_from_moment(cfg, m1);
    (a, w)
}

/// Variational estimate for an arbitrary localized field.
pub fn variational_estimate(
    cfg: &StripConfig,
    field: &dyn DensityField,
    spec: &QuadratureSpec,
) -> VariationalResult {
    let m1 = crate::perturbation::moment_m1(cfg, field, spec);
    let (a, w) = variational_from_moment(cfg, m1.value);
    VariationalResult {
        a,
        w,
        bound_exists: a > 0.0,
        m1,
        max_abs_sigma: max_abs_sigma_sampled(cfg, field, 2000),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_slab;

    fn cfg1() -> StripConfig {
        StripConfig::new(1.0).unwrap()
    }

    #[test]
    fn slab_closed_forms() {
        // M1 = 0.025: a = pi^2 0.025, W = pi^2 - pi^4 0.025^2
        let cfg = cfg1();
        let slab = make_slab(0.1, 0.5).unwrap();
        let r = variational_estimate(&cfg, &slab, &QuadratureSpec::default().with_rel_tol(1e-10));
        assert!(r.bound_exists);
        assert!((r.a - 0.2467401100272340).abs() < 1e-10, "a {}", r.a);
        assert!((r.w - 9.808723719193107).abs() < 1e-9, "w {}", r.w);
    }

    #[test]
    fn zero_field_has_no_bound_state() {
        use crate::domain::{FnDensity, Interval, Smoothness};
        let cfg = cfg1();
        let zero = FnDensity::new(
            |_, _| 0.0,
            Interval { lo: -0.5, hi: 0.5 },
            Smoothness::Smooth,
        );
        let r = variational_estimate(&cfg, &zero, &QuadratureSpec::default());
        assert_eq!(r.a, 0.0);
        assert!(!r.bound_exists);
    }

    #[test]
    fn rarefied_slab_negative_moment_no_bound() {
        let cfg = cfg1();
        let slab = make_slab(-0.1, 0.5).unwrap();
        let r = variational_estimate(&cfg, &slab, &QuadratureSpec::default());
        assert!(r.a < 0.0);
        assert!(!r.bound_exists);
    }

    #[test]
    fn w_minus_threshold_equals_e2_bitwise() {
        let cfg = cfg1();
        let slab = make_slab(0.17, 0.8) .unwrap();
        let spec = QuadratureSpec::default().with_rel_tol(1e-8);
        let (e2, m1) = crate::perturbation::second_order(&cfg, &slab, &spec);
        let (_, w) = variational_from_moment(&cfg, m1.value);
        assert_eq!((w - cfg.threshold()).to_bits(), e2.to_bits());
    }

    #[test]
    fn strong_field_flagged() {
        let cfg = cfg1();
        let slab = make_slab(0.5, 0.5).unwrap();
        let r = variational_estimate(&cfg, &slab, &QuadratureSpec::default());
        assert!(!r.weak_field_ok());
    }
}
