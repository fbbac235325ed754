//! Adaptive integration of the radial system from the Taylor launch to the
//! horizon, with collapse and sign-change events.

mod dopri;
mod formula1;
mod growth;

pub use formula1::{formula1_check, formula1_check_until};
pub(crate) use growth::tail_fit;
pub use growth::{classify_growth, GrowthFit, MIN_WINDOW_SAMPLES};

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::radial::{EquationSpec, Jet};
use crate::scalar::Precision;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Horizon radius.
    pub r_max: f64,
    pub max_steps: usize,
    /// Collapse threshold for `u`.
    pub u_floor: f64,
    /// Launch radius `r0` for the Taylor start.
    pub launch_radius: f64,
    /// Spacing of the output grid.
    pub dense_output_stride: f64,
    pub precision: Precision,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            r_max: 1e3,
            max_steps: 2_000_000,
            u_floor: 1e-8,
            launch_radius: 1e-3,
            dense_output_stride: 1e-2,
            precision: Precision::Double,
        }
    }
}

impl IntegratorConfig {
    /// Defaults with the horizon for the given order: `10³` for m = 2, `10²` for m = 3.
    pub fn for_spec(spec: EquationSpec) -> Self {
        IntegratorConfig {
            r_max: if spec.m() == 2 { 1e3 } else { 1e2 },
            ..Default::default()
        }
    }

    pub fn with_horizon(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.dense_output_stride = stride;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return bad(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            ));
        }
        let attainable = 4.0 * self.precision.epsilon();
        if self.rel_tol < attainable {
            return bad(format!(
                "rel_tol = {:e} is below the attainable {attainable:e} in {:?} precision",
                self.rel_tol, self.precision
            ));
        }
        if !(self.launch_radius > 0.0)
            || !(self.r_max > self.launch_radius)
            || !self.r_max.is_finite()
        {
            return bad(format!(
                "need r_max > r0 > 0 (r_max = {}, r0 = {})",
                self.r_max, self.launch_radius
            ));
        }
        if !(self.u_floor > 0.0) {
            return bad(format!("u_floor must be positive, got {}", self.u_floor));
        }
        if !(self.dense_output_stride > 0.0) {
            return bad(format!(
                "dense_output_stride must be positive, got {}",
                self.dense_output_stride
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

/// Integrate the radial initial-value problem given by `jet`.
pub fn integrate(spec: EquationSpec, jet: &Jet, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    match cfg.precision {
        Precision::Double => dopri::run::<f64>(spec, jet, cfg),
        Precision::Extended => dopri::run::<TwoFloat>(spec, jet, cfg),
    }
}

/// Global error estimate of one integration from a companion run at a
/// tenth of the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalError {
    /// The run at the configured tolerance.
    pub trajectory: Trajectory,
    /// Estimated error of `u(r_end)` for entire trajectories, of `r*` for
    /// collapsed ones.
    pub error: f64,
}

/// Estimate the global error of `integrate(spec, jet, cfg)` by
/// tolerance extrapolation: with error ≈ C·rel_tol, the difference to a run
/// at `rel_tol/10` is 9/10 of the coarse error.
pub fn global_error(spec: EquationSpec, jet: &Jet, cfg: &IntegratorConfig) -> Result<GlobalError> {
    let coarse = integrate(spec, jet, cfg)?;
    let fine_cfg = IntegratorConfig {
        rel_tol: cfg.rel_tol / 10.0,
        abs_tol: cfg.abs_tol / 10.0,
        ..cfg.clone()
    };
    let fine = integrate(spec, jet, &fine_cfg)?;
    let diff = match (coarse.r_star(), fine.r_star()) {
        (Some(a), Some(b)) => (a - b).abs(),
        (None, None) => (coarse.last().u() - fine.last().u()).abs(),
        _ => {
            return Err(Error::Inconclusive(format!(
                "verdict changes with tolerance: {} at rel_tol = {:e}, {} at {:e}",
                coarse.verdict, cfg.rel_tol, fine.verdict, fine_cfg.rel_tol
            )))
        }
    };
    Ok(GlobalError {
        trajectory: coarse,
        error: diff * 10.0 / 9.0,
    })
}

/// First common sample where `|u_a - u_b| > threshold · max(|u_a|, 1)`.
///
/// Both trajectories must share a grid (same stride); compares up to the
/// shorter one.
pub fn divergence_radius(a: &Trajectory, b: &Trajectory, threshold: f64) -> Option<f64> {
    a.samples
        .iter()
        .zip(&b.samples)
        .find(|(x, y)| (x.u() - y.u()).abs() > threshold * x.u().abs().max(1.0))
        .map(|(x, _)| x.r)
}
