//! Radial shooting for the conformally invariant polyharmonic equations
//! `Δ^m u = -u^p` in `R³`: `m = 2, p = -7` and `m = 3, p = -3`.
//!
//! Radial solutions are determined by their Laplacian jet at the origin.
//! This crate launches them with a Taylor series, integrates them
//! adaptively, classifies them as collapsing or entire, measures their
//! conformal volume, and searches jets for critical or prescribed behaviour.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod integrator;
pub mod oracle;
pub mod quadrature;
pub mod radial;
pub mod scalar;
pub mod shooting;
pub mod trajectory;
pub mod volume;

pub use error::{Error, Result};
pub use integrator::{
    classify_growth, divergence_radius, formula1_check, integrate, GrowthFit, IntegratorConfig,
};
pub use oracle::{lambda_star, ClosedForm, ClosedFormKind};
pub use radial::{rhs, taylor_launch, EquationSpec, Jet, RadialState};
pub use scalar::Precision;
pub use shooting::{
    collapse_boundary_m2, critical_eps, critical_eps_residual, fate, prescribe_volume, CriticalEps,
    Fate, ShootingConfig, VolumeSolve,
};
pub use trajectory::{scale, Event, EventKind, Trajectory, Verdict};
pub use volume::{volume, volume_of_jet, volume_with, TailModel, VolumeEstimate, VolumeOptions};
