//! Weakly bound modes of heterogeneous Dirichlet strip waveguides.
//!
//! An infinite 2D strip of width `b` with Dirichlet walls has a purely
//! continuous spectrum starting at `pi^2 / b^2`. A localized density
//! heterogeneity `1 + eta sigma(x, y)` can pull an isolated eigenvalue below
//! that threshold — a trapped mode. This crate computes that weakly bound
//! ground-state energy four independent ways and cross-checks them:
//!
//! * [`perturbation`] — closed-form second and third order corrections in
//!   the heterogeneity, driven by adaptive [`quadrature`] and the
//!   transverse-excited correlator in [`greens`];
//! * [`variational`] — the exponential-times-sine trial state, whose
//!   weak-field optimum reproduces the second-order result;
//! * [`slab`] — the exactly solvable piecewise-constant slab (transcendental
//!   matching equation plus its power series), the analytic ground truth;
//! * [`fd`] — a brute-force finite-difference generalized eigensolver on a
//!   truncated strip with Richardson extrapolation, independent of
//!   everything above.
//!
//! # Quick start
//!
//! ```
//! use guidetrap::domain::{make_slab, StripConfig};
//! use guidetrap::perturbation::{assemble, AssembleOptions, Verdict};
//!
//! let cfg = StripConfig::new(1.0).unwrap();
//! let slab = make_slab(0.1, 0.5).unwrap();
//! let energy = assemble(&cfg, &slab, 1.0, &AssembleOptions::default());
//! assert_eq!(energy.verdict, Verdict::Bound);
//! assert!(energy.total() < cfg.threshold());
//! ```
//!
//! # Runnable examples
//!
//! Each major capability has a focused example under `examples/`:
//!
//! * `slab_exact` — exact slab root vs its power series
//! * `perturbative_energy` — E2/E3 assembly and the bound-state verdict
//! * `variational_bound` — the trial-state upper bound
//! * `fd_oracle_sweep` — truncation/resolution sweeps and extrapolation
//! * `greens_correlator` — mode-sum regimes and tail bounds
//! * `balanced_moment` — the vanishing-moment degenerate case
//!
//! ```text
//! cargo run --release -p guidetrap --example slab_exact
//! ```
//!
//! The same functionality is scriptable through the thin `guidetrap` binary
//! (`energy`, `slab`, `oracle`, `greens` subcommands) documented in the
//! repository README.

pub mod cli;
pub mod domain;
pub mod fd;
pub mod greens;
pub mod perturbation;
pub mod quadrature;
pub mod slab;
mod special;
pub mod variational;

pub use domain::{make_slab, threshold, DensityField, StripConfig};
pub use perturbation::{assemble, AssembleOptions, PerturbativeEnergy, Verdict};
pub use quadrature::{QuadResult, QuadratureSpec};
