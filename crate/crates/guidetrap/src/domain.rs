//! Strip geometry and localized density perturbations.
//!
//! The waveguide is the infinite strip `-inf < x < inf`, `|y| <= b/2` with
//! Dirichlet walls at `y = +-b/2`. The medium density is `1 + sigma(x, y)`
//! where `sigma` vanishes outside a declared x-window. Everything downstream
//! (quadrature, perturbation theory, the finite-difference oracle) consumes
//! these two ingredients and nothing else.

use std::f64::consts::PI;

use thiserror::Error;

/// Tail tolerance for "localized": fields with smooth decay must declare a
/// support window outside which |sigma| stays below this.
pub const SUPPORT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("strip width must be positive, got b = {0}")]
    NonPositiveWidth(f64),
    #[error("slab amplitude must be > -1 to keep the density positive, got {0}")]
    AmplitudeNotAboveMinusOne(f64),
    #[error("slab width must be positive, got {0}")]
    NonPositiveSlabWidth(f64),
    #[error("gaussian widths must be positive, got ({0}, {1})")]
    NonPositiveGaussianWidth(f64, f64),
    #[error("interval endpoints out of order: [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("density 1 + sigma = {density} is not positive at ({x}, {y})")]
    NonPositiveDensity { x: f64, y: f64, density: f64 },
    #[error("|sigma({x}, {y})| = {value} exceeds the tail tolerance outside the declared support")]
    SupportViolation { x: f64, y: f64, value: f64 },
}

/// Strip cross-section configuration: just the width `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripConfig {
    b: f64,
}

impl StripConfig {
    pub fn new(b: f64) -> Result<Self, DomainError> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(DomainError::NonPositiveWidth(b));
        }
        Ok(Self { b })
    }

    pub fn width(&self) -> f64 {
        self.b
    }

    /// Bottom of the essential spectrum of the empty guide, `pi^2 / b^2`.
    /// An eigenvalue strictly below this is a bound state.
    pub fn threshold(&self) -> f64 {
        PI * PI / (self.b * self.b)
    }

    /// Transverse ground-mode profile squared weight, `cos^2(pi y / b)`.
    pub fn cos2(&self, y: f64) -> f64 {
        let c = (PI * y / self.b).cos();
        c * c
    }
}

/// Continuum threshold of the straight guide.
pub fn threshold(cfg: &StripConfig) -> f64 {
    cfg.threshold()
}

/// Closed x-interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DomainError> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(DomainError::BadInterval(lo, hi));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

/// How the quadrature should treat the field along x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    PiecewiseConstant,
    Smooth,
}

/// A localized density perturbation `sigma(x, y)` on the strip.
///
/// Implementations must be pure and reentrant: evaluation happens
/// concurrently from quadrature workers. All invariants (positivity of
/// `1 + sigma`, vanishing outside `support_x` up to [`SUPPORT_TAIL_TOL`])
/// are the implementor's responsibility; [`validate_field`] spot-checks them.
pub trait DensityField: Send + Sync {
    fn sigma(&self, x: f64, y: f64) -> f64;

    /// Window outside which sigma is zero (or certified below the tail tolerance).
    fn support_x(&self) -> Interval;

    fn smoothness_hint(&self) -> Smoothness;

    /// x-coordinates where sigma is non-smooth; quadrature forces panel
    /// boundaries there. Defaults to the support endpoints.
    fn split_points_x(&self) -> Vec<f64> {
        let s = self.support_x();
        vec![s.lo, s.hi]
    }
}

impl<T: DensityField + ?Sized> DensityField for &T {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        (**self).sigma(x, y)
    }
    fn support_x(&self) -> Interval {
        (**self).support_x()
    }
    fn smoothness_hint(&self) -> Smoothness {
        (**self).smoothness_hint()
    }
    fn split_points_x(&self) -> Vec<f64> {
        (**self).split_points_x()
    }
}

impl DensityField for Box<dyn DensityField> {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        (**self).sigma(x, y)
    }
    fn support_x(&self) -> Interval {
        (**self).support_x()
    }
    fn smoothness_hint(&self) -> Smoothness {
        (**self).smoothness_hint()
    }
    fn split_points_x(&self) -> Vec<f64> {
        (**self).split_points_x()
    }
}

/// Piecewise-constant slab: `sigma0` for `|x| < delta/2`, zero outside.
///
/// At the jumps `x = +-delta/2` the interior value is returned; quadrature
/// never relies on pointwise values on measure-zero sets, the convention
/// just keeps evaluation deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabProfile {
    sigma0: f64,
    delta: f64,
}

impl SlabProfile {
    pub fn new(sigma0: f64, delta: f64) -> Result<Self, DomainError> {
        if !(sigma0 > -1.0) || !sigma0.is_finite() {
            return Err(DomainError::AmplitudeNotAboveMinusOne(sigma0));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(DomainError::NonPositiveSlabWidth(delta));
        }
        Ok(Self { sigma0, delta })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl DensityField for SlabProfile {
    fn sigma(&self, x: f64, _y: f64) -> f64 {
        if x.abs() <= 0.5 * self.delta {
            self.sigma0
        } else {
            0.0
        }
    }

    fn support_x(&self) -> Interval {
        Interval {
            lo: -0.5 * self.delta,
            hi: 0.5 * self.delta,
        }
    }

    fn smoothness_hint(&self) -> Smoothness {
        Smoothness::PiecewiseConstant
    }
}

/// Slab constructor used throughout the tests and the CLI.
pub fn make_slab(sigma0: f64, delta: f64) -> Result<SlabProfile, DomainError> {
    SlabProfile::new(sigma0, delta)
}

/// Anisotropic gaussian bump
/// `A exp(-((x-x0)/wx)^2 - ((y-y0)/wy)^2)`.
///
/// The declared support is wide enough that the tail stays below
/// [`SUPPORT_TAIL_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    amplitude: f64,
    center: (f64, f64),
    widths: (f64, f64),
    support: Interval,
}

impl GaussianProfile {
    pub fn new(amplitude: f64, center: (f64, f64), widths: (f64, f64)) -> Result<Self, DomainError> {
        if !(amplitude > -1.0) || !amplitude.is_finite() {
            return Err(DomainError::AmplitudeNotAboveMinusOne(amplitude));
        }
        if !(widths.0 > 0.0 && widths.1 > 0.0) {
            return Err(DomainError::NonPositiveGaussianWidth(widths.0, widths.1));
        }
        // |A| e^{-(dx/wx)^2} < tail  =>  dx > wx sqrt(ln(|A|/tail))
        let ratio = (amplitude.abs().max(SUPPORT_TAIL_TOL) / SUPPORT_TAIL_TOL).ln();
        let reach = widths.0 * ratio.sqrt() * 1.05;
        Ok(Self {
            amplitude,
            center,
            widths,
            support: Interval {
                lo: center.0 - reach,
                hi: center.0 + reach,
            },
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

impl DensityField for GaussianProfile {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.center.0) / self.widths.0;
        let dy = (y - self.center.1) / self.widths.1;
        self.amplitude * (-dx * dx - dy * dy).exp()
    }

    fn support_x(&self) -> Interval {
        self.support
    }

    fn smoothness_hint(&self) -> Smoothness {
        Smoothness::Smooth
    }
}

/// Pointwise sum of component fields.
pub struct SumDensity {
    terms: Vec<Box<dyn DensityField>>,
}

impl SumDensity {
    /// The caller is responsible for the summed field keeping `1 + sigma > 0`;
    /// [`validate_field`] checks it by sampling.
    pub fn new(terms: Vec<Box<dyn DensityField>>) -> Self {
        Self { terms }
    }
}

impl DensityField for SumDensity {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|t| t.sigma(x, y)).sum()
    }

    fn support_x(&self) -> Interval {
        let mut it = self.terms.iter();
        let first = it
            .next()
            .map(|t| t.support_x())
            .unwrap_or(Interval { lo: 0.0, hi: 0.0 });
        it.fold(first, |acc, t| acc.hull(&t.support_x()))
    }

    fn smoothness_hint(&self) -> Smoothness {
        if self
            .terms
            .iter()
            .any(|t| t.smoothness_hint() == Smoothness::PiecewiseConstant)
        {
            Smoothness::PiecewiseConstant
        } else {
            Smoothness::Smooth
        }
    }

    fn split_points_x(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.terms.iter().flat_map(|t| t.split_points_x()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// A slab displaced along x, used to build balanced (zero-moment) fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedSlab {
    pub slab: SlabProfile,
    pub center_x: f64,
}

impl DensityField for ShiftedSlab {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        self.slab.sigma(x - self.center_x, y)
    }

    fn support_x(&self) -> Interval {
        let s = self.slab.support_x();
        Interval {
            lo: s.lo + self.center_x,
            hi: s.hi + self.center_x,
        }
    }

    fn smoothness_hint(&self) -> Smoothness {
        Smoothness::PiecewiseConstant
    }
}

/// Closure-backed field for tests and ad-hoc profiles.
pub struct FnDensity<F: Fn(f64, f64) -> f64 + Send + Sync> {
    f: F,
    support: Interval,
    smoothness: Smoothness,
    splits: Vec<f64>,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> FnDensity<F> {
    pub fn new(f: F, support: Interval, smoothness: Smoothness) -> Self {
        let splits = vec![support.lo, support.hi];
        Self {
            f,
            support,
            smoothness,
            splits,
        }
    }

    pub fn with_splits(mut self, splits: Vec<f64>) -> Self {
        self.splits = splits;
        self
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> DensityField for FnDensity<F> {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    fn support_x(&self) -> Interval {
        self.support
    }

    fn smoothness_hint(&self) -> Smoothness {
        self.smoothness
    }

    fn split_points_x(&self) -> Vec<f64> {
        self.splits.clone()
    }
}

/// Geometric rescaling harness: maps `(b, x, y) -> (lambda b, lambda x, lambda y)`
/// keeping sigma values unchanged, so every energy output must scale by
/// `1 / lambda^2`.
pub struct ScaledDensity<F: DensityField> {
    pub inner: F,
    pub lambda: f64,
}

impl<F: DensityField> DensityField for ScaledDensity<F> {
    fn sigma(&self, x: f64, y: f64) -> f64 {
        self.inner.sigma(x / self.lambda, y / self.lambda)
    }

    fn support_x(&self) -> Interval {
        let s = self.inner.support_x();
        Interval {
            lo: s.lo * self.lambda,
            hi: s.hi * self.lambda,
        }
    }

    fn smoothness_hint(&self) -> Smoothness {
        self.inner.smoothness_hint()
    }

    fn split_points_x(&self) -> Vec<f64> {
        self.inner.split_points_x().iter().map(|p| p * self.lambda).collect()
    }
}

/// Spot-check the field invariants on a quasi-random sample: density
/// positivity inside the strip and support declaration outside the window.
pub fn validate_field(
    cfg: &StripConfig,
    field: &dyn DensityField,
    n_samples: usize,
) -> Result<(), DomainError> {
    let support = field.support_x();
    let b = cfg.width();
    // golden-ratio lattice, deterministic
    const PHI: f64 = 0.618_033_988_749_894_9;
    const PSI: f64 = 0.754_877_666_246_692_9;
    let margin = (3.0 * b).max(support.length());
    let lo = support.lo - margin;
    let hi = support.hi + margin;
    for i in 0..n_samples {
        let u = (i as f64 * PHI).fract();
        let v = (i as f64 * PSI).fract();
        let x = lo + u * (hi - lo);
        let y = (v - 0.5) * b;
        let s = field.sigma(x, y);
        let density = 1.0 + s;
        if !(density > 0.0) {
            return Err(DomainError::NonPositiveDensity { x, y, density });
        }
        if !support.contains(x) && s.abs() > SUPPORT_TAIL_TOL {
            return Err(DomainError::SupportViolation { x, y, value: s.abs() });
        }
    }
    Ok(())
}

/// Maximum of |sigma| over a deterministic lattice on the support, used for
/// weak-field warnings.
pub fn max_abs_sigma_sampled(cfg: &StripConfig, field: &dyn DensityField, n_samples: usize) -> f64 {
    let support = field.support_x();
    let b = cfg.width();
    const PHI: f64 = 0.618_033_988_749_894_9;
    const PSI: f64 = 0.754_877_666_246_692_9;
    let mut worst: f64 = 0.0;
    for i in 0..n_samples {
        let u = (i as f64 * PHI).fract();
        let v = (i as f64 * PSI).fract();
        let x = support.lo + u * support.length();
        let y = (v - 0.5) * b;
        worst = worst.max(field.sigma(x, y).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        let cfg = StripConfig::new(1.0).unwrap();
        assert!((cfg.threshold() - 9.869604401089358).abs() < 1e-14);
        let cfg2 = StripConfig::new(2.0).unwrap();
        assert!((cfg2.threshold() - PI * PI / 4.0).abs() < 1e-14);
        let cfgpi = StripConfig::new(PI).unwrap();
        assert!((cfgpi.threshold() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_scaling_covariance() {
        let cfg = StripConfig::new(0.7).unwrap();
        let scaled = StripConfig::new(1.4).unwrap();
        assert!((scaled.threshold() - cfg.threshold() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn slab_values_and_support() {
        let slab = make_slab(0.1, 0.5).unwrap();
        assert_eq!(slab.sigma(0.0, 0.0), 0.1);
        assert_eq!(slab.sigma(1.0, 0.0), 0.0);
        // jump convention: interior value on the closed interval
        assert_eq!(slab.sigma(0.25, 0.3), 0.1);
        let rare = make_slab(-0.5, 1.0).unwrap();
        assert_eq!(rare.sigma(0.0, 0.2), -0.5);
    }

    #[test]
    fn slab_rejects_bad_parameters() {
        assert!(matches!(
            make_slab(-1.0, 0.5),
            Err(DomainError::AmplitudeNotAboveMinusOne(_))
        ));
        assert!(matches!(
            make_slab(-1.5, 0.5),
            Err(DomainError::AmplitudeNotAboveMinusOne(_))
        ));
        assert!(matches!(
            make_slab(0.1, 0.0),
            Err(DomainError::NonPositiveSlabWidth(_))
        ));
        assert!(matches!(
            make_slab(0.1, -1.0),
            Err(DomainError::NonPositiveSlabWidth(_))
        ));
    }

    #[test]
    fn strip_rejects_bad_width() {
        assert!(StripConfig::new(0.0).is_err());
        assert!(StripConfig::new(-2.0).is_err());
        assert!(StripConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn validate_field_catches_support_violation() {
        let cfg = StripConfig::new(1.0).unwrap();
        // declared support too small for the actual profile
        let lying = FnDensity::new(
            |_x, _y| 0.1,
            Interval { lo: -0.5, hi: 0.5 },
            Smoothness::Smooth,
        );
        assert!(matches!(
            validate_field(&cfg, &lying, 1000),
            Err(DomainError::SupportViolation { .. })
        ));
    }

    #[test]
    fn validate_field_catches_negative_density() {
        let cfg = StripConfig::new(1.0).unwrap();
        let bad = FnDensity::new(
            |x: f64, _y| if x.abs() < 0.5 { -1.5 } else { 0.0 },
            Interval { lo: -0.5, hi: 0.5 },
            Smoothness::PiecewiseConstant,
        );
        assert!(matches!(
            validate_field(&cfg, &bad, 4000),
            Err(DomainError::NonPositiveDensity { .. })
        ));
    }

    #[test]
    fn sampled_invariants_hold_for_builtin_profiles() {
        let cfg = StripConfig::new(1.0).unwrap();
        let slab = make_slab(0.2, 0.8).unwrap();
        validate_field(&cfg, &slab, 10_000).unwrap();
        let gauss = GaussianProfile::new(-0.4, (0.3, 0.1), (0.6, 0.5)).unwrap();
        validate_field(&cfg, &gauss, 10_000).unwrap();
        let sum = SumDensity::new(vec![Box::new(slab), Box::new(gauss)]);
        validate_field(&cfg, &sum, 10_000).unwrap();
    }

    #[test]
    fn gaussian_tail_below_tolerance_outside_support() {
        let g = GaussianProfile::new(0.3, (-0.2, 0.0), (0.4, 0.3)).unwrap();
        let s = g.support_x();
        assert!(g.sigma(s.lo, 0.0).abs() <= SUPPORT_TAIL_TOL);
        assert!(g.sigma(s.hi, 0.0).abs() <= SUPPORT_TAIL_TOL);
        assert!(g.sigma(s.hi + 1.0, 0.0).abs() <= SUPPORT_TAIL_TOL);
    }

    #[test]
    fn sum_density_merges_supports_and_splits() {
        let a = ShiftedSlab {
            slab: make_slab(0.1, 0.5).unwrap(),
            center_x: -1.0,
        };
        let b = ShiftedSlab {
            slab: make_slab(-0.1, 0.5).unwrap(),
            center_x: 1.0,
        };
        let sum = SumDensity::new(vec![Box::new(a), Box::new(b)]);
        let s = sum.support_x();
        assert_eq!((s.lo, s.hi), (-1.25, 1.25));
        assert_eq!(sum.split_points_x(), vec![-1.25, -0.75, 0.75, 1.25]);
        assert_eq!(sum.smoothness_hint(), Smoothness::PiecewiseConstant);
    }
}
