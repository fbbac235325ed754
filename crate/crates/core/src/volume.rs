//! Conformal volume `∫_{R³} u^q dx = 4π ∫₀^∞ u(r)^q r² dr`, `q = 6/(3-2m)`.
//!
//! The integral is split at the end of the trajectory: Simpson on the
//! sampled grid for the core, and the closed-form integral of a fitted power
//! law `u ≈ c r^γ` for the tail.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::GrowthFit;
use crate::integrator::{integrate, IntegratorConfig};
use crate::quadrature::simpson;
use crate::radial::{EquationSpec, Jet};
use crate::trajectory::{Trajectory, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TailModel {
    /// `u ≈ c r^γ` beyond the horizon.
    PowerFit { gamma: f64, coeff: f64 },
    /// `u ≈ c r^γ (1 + b r⁻²)` with integer `γ`.
    PowerFitCorrected {
        gamma: f64,
        coeff: f64,
        correction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    /// Quadrature over `[0, r_end]`.
    pub core: f64,
    /// Modelled contribution of `(r_end, ∞)`.
    pub tail: f64,
    pub total: f64,
    pub err_estimate: f64,
    pub tail_model: TailModel,
    pub r_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VolumeOptions {
    /// Use the corrected tail `c r^γ (1 + b r⁻²)`.
    pub second_order_tail: bool,
}

pub fn volume(spec: EquationSpec, traj: &Trajectory) -> Result<VolumeEstimate> {
    volume_with(spec, traj, VolumeOptions::default())
}

pub fn volume_with(
    spec: EquationSpec,
    traj: &Trajectory,
    opts: VolumeOptions,
) -> Result<VolumeEstimate> {
    match &traj.verdict {
        Verdict::Collapsed { r_star } => return Err(Error::UndefinedVolume { r_star: *r_star }),
        Verdict::Inconclusive { reason } => return Err(Error::Inconclusive(reason.clone())),
        Verdict::EntirePositive { .. } => {}
    }
    let q = spec.vol_exponent();
    let r: Vec<f64> = traj.radii();
    let f: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| 4.0 * PI * s.r * s.r * s.u().powi(q))
        .collect();
    let core = simpson(&r, &f);
    let quad_err = richardson_error(&r, &f, core);

    let big_r = traj.r_end;
    let last = traj.last();
    let u_end = last.u();
    let fit = crate::integrator::tail_fit(traj)?;
    let gamma = fit.exponent;
    let first = power_tail(q, gamma, u_end, big_r)?;
    let local_gamma = big_r * last.lap_deriv(0) / u_end;
    let local = power_tail(q, local_gamma, u_end, big_r).unwrap_or(first);
    let corrected = corrected_tail(traj, q, &fit);

    let (tail, tail_model) = match (opts.second_order_tail, corrected) {
        (true, Some((value, model))) => (value, model),
        _ => (
            first,
            TailModel::PowerFit {
                gamma,
                coeff: u_end / big_r.powf(gamma),
            },
        ),
    };
    let second_gap = corrected.map_or(0.0, |(value, _)| (value - first).abs());
    let tail_err = (first - local).abs() + second_gap + tail * (q as f64).abs() * fit.rms_residual;
    // u carries a relative error of about 2 rel_tol, amplified by |q| in u^q
    let ode_err = (q as f64).abs() * 2.0 * traj.stats.rel_tol * (core + tail);

    Ok(VolumeEstimate {
        core,
        tail,
        total: core + tail,
        err_estimate: quad_err + tail_err + ode_err,
        tail_model,
        r_end: big_r,
    })
}

/// `4π ∫_R^∞ r² (c r^γ)^q dr` with `c = u(R)/R^γ`.
fn power_tail(q: i32, gamma: f64, u_end: f64, big_r: f64) -> Result<f64> {
    let e = 3.0 + gamma * q as f64;
    if !(e < 0.0) {
        return Err(Error::DivergentTail { gamma, exponent: e });
    }
    Ok(4.0 * PI * u_end.powi(q) * big_r.powi(3) / (-e))
}

/// Tail of `u ≈ c r^γ (1 + b r⁻²)` with `γ` rounded to the growth class,
/// matched at `R/2` and `R`; the integrand is expanded to first order in `b`.
fn corrected_tail(traj: &Trajectory, q: i32, fit: &GrowthFit) -> Option<(f64, TailModel)> {
    let gamma = fit.exponent.round();
    let big_r = traj.r_end;
    let mid = traj.interpolate(0.5 * big_r)?;
    let (r1, r2) = (mid.r, big_r);
    let a1 = mid.u() / r1.powf(gamma);
    let a2 = traj.last().u() / r2.powf(gamma);
    let cb = (a1 - a2) / (r1.powi(-2) - r2.powi(-2));
    let c = a2 - cb / (r2 * r2);
    if !(c > 0.0) {
        return None;
    }
    let b = cb / c;
    let e = 3.0 + gamma * q as f64;
    if !(e < 0.0) {
        return None;
    }
    let qf = q as f64;
    let value =
        4.0 * PI * c.powi(q) * (big_r.powf(e) / (-e) + qf * b * big_r.powf(e - 2.0) / (2.0 - e));
    Some((
        value,
        TailModel::PowerFitCorrected {
            gamma,
            coeff: c,
            correction: b,
        },
    ))
}

/// `|S_h - S_2h| / 15` using every other sample for the coarse rule.
fn richardson_error(r: &[f64], f: &[f64], fine: f64) -> f64 {
    if r.len() < 5 {
        return 0.0;
    }
    let mut rc: Vec<f64> = r.iter().step_by(2).copied().collect();
    let mut fc: Vec<f64> = f.iter().step_by(2).copied().collect();
    if (r.len() - 1) % 2 == 1 {
        rc.push(*r.last().unwrap());
        fc.push(*f.last().unwrap());
    }
    (fine - simpson(&rc, &fc)).abs() / 15.0
}

/// Integrate the jet and take its volume.
pub fn volume_of_jet(
    spec: EquationSpec,
    jet: &Jet,
    cfg: &IntegratorConfig,
) -> Result<VolumeEstimate> {
    let traj = integrate(spec, jet, cfg)?;
    volume(spec, &traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialState;
    use crate::trajectory::{IntegrationStats, Trajectory};

    fn synthetic(
        spec: EquationSpec,
        u: impl Fn(f64) -> f64,
        du: impl Fn(f64) -> f64,
        r_end: f64,
        n: usize,
    ) -> Trajectory {
        let jet = Jet::new(
            spec,
            (0..spec.m())
                .map(|j| if j == 0 { u(0.0) } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let samples = (0..=n)
            .map(|i| {
                let r = r_end * i as f64 / n as f64;
                let mut y = vec![0.0; spec.state_dim()];
                y[0] = u(r);
                y[1] = du(r);
                RadialState::new(r, &y)
            })
            .collect();
        Trajectory {
            spec,
            jet,
            samples,
            verdict: Verdict::EntirePositive {
                growth_exponent: 4.0,
            },
            r_end,
            events: vec![],
            stats: IntegrationStats::default(),
        }
    }

    #[test]
    fn quartic_tail_closed_form() {
        let spec = EquationSpec::TRIHARMONIC;
        let c = 0.5;
        let r_end = 40.0;
        let traj = synthetic(
            spec,
            |r| 1.0 + c * r.powi(4),
            |r| 4.0 * c * r.powi(3),
            r_end,
            4000,
        );
        let v = volume(spec, &traj).unwrap();
        // u(R) = 1 + c R^4 so compare against the same endpoint value
        let expected = 4.0 * PI * (1.0 + c * r_end.powi(4)).powi(-2) * r_end.powi(3) / 5.0;
        let gamma = match v.tail_model {
            TailModel::PowerFit { gamma, .. } => gamma,
            _ => unreachable!(),
        };
        assert!((gamma - 4.0).abs() < 1e-3);
        assert!((v.tail - expected).abs() < 1e-3 * expected);
        let pure = 4.0 * PI * c.powi(-2) * r_end.powi(-5) / 5.0;
        assert!((v.tail - pure).abs() < 1e-3 * pure);
    }

    #[test]
    fn collapsed_volume_is_undefined() {
        let spec = EquationSpec::BIHARMONIC;
        let mut traj = synthetic(spec, |r| 1.0 + r, |_| 1.0, 10.0, 100);
        traj.verdict = Verdict::Collapsed { r_star: 10.0 };
        assert!(matches!(
            volume(spec, &traj),
            Err(Error::UndefinedVolume { .. })
        ));
    }

    #[test]
    fn slow_growth_tail_diverges() {
        let spec = EquationSpec::TRIHARMONIC;
        // u ~ r^1 with q = -2: 3 - 2 = 1 > 0
        let traj = synthetic(spec, |r| 1.0 + r, |_| 1.0, 50.0, 5000);
        assert!(matches!(
            volume(spec, &traj),
            Err(Error::DivergentTail { .. })
        ));
    }
}
