//! Root finding over the integrator: the critical parameter `ε_k*` for
//! m = 3, the collapse boundary in `ρ` for m = 2, and prescribed-volume
//! solves.
//!
//! Bisection acts on the *fate* of a trajectory rather than on the raw
//! verdict. A trajectory is doomed if it collapses, if `Δ^{m-1}u` changes
//! sign, or if the extrapolated limit `L(R) = w(R) + R w'(R)` of
//! `w = Δ^{m-1}u` is negative. Since `(r² w')' = r² Δw < 0`, `L` is
//! decreasing and bounds `w(∞)` from above, so `L(R) < 0` rules out an
//! entire solution even though collapse may lie far beyond the horizon.

mod cache;
mod prescribe;

pub use cache::{CacheEntry, VolumeCache, CACHE_FILE, CACHE_SCHEMA};
pub use prescribe::{prescribe_volume, volume_table, TableEntry, VolumeParameter, VolumeSolve};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{divergence_radius, integrate, IntegratorConfig};
use crate::oracle::ClosedForm;
use crate::quadrature::cumulative_simpson;
use crate::radial::{EquationSpec, Jet};
use crate::scalar::Precision;
use crate::trajectory::{EventKind, Trajectory, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DoomReason {
    Collapsed {
        r_star: f64,
    },
    /// `Δ^{m-1}u` changed sign at `r`.
    SignChange {
        r: f64,
    },
    /// The extrapolated limit of `Δ^{m-1}u` is negative.
    NegativeLimit {
        limit: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Fate {
    /// Survives the horizon with `Δ^{m-1}u > 0` and a non-negative limit.
    Entire {
        limit: f64,
    },
    Doomed {
        reason: DoomReason,
    },
    Undecided {
        reason: String,
    },
}

impl Fate {
    pub fn is_entire(&self) -> bool {
        matches!(self, Fate::Entire { .. })
    }

    pub fn is_doomed(&self) -> bool {
        matches!(self, Fate::Doomed { .. })
    }
}

/// `L(R) = w(R) + R w'(R)` for `w = Δ^{m-1}u` at the last sample.
pub fn limit_certificate(traj: &Trajectory) -> f64 {
    let level = traj.spec.m() - 1;
    let s = traj.last();
    s.lap(level) + s.r * s.lap_deriv(level)
}

/// Classify a trajectory for shooting purposes.
pub fn fate(traj: &Trajectory) -> Fate {
    let level = traj.spec.m() - 1;
    match &traj.verdict {
        Verdict::Inconclusive { reason } => {
            return Fate::Undecided {
                reason: reason.clone(),
            }
        }
        Verdict::Collapsed { r_star } => {
            return Fate::Doomed {
                reason: DoomReason::Collapsed { r_star: *r_star },
            }
        }
        Verdict::EntirePositive { .. } => {}
    }
    if let Some(ev) = traj.first_event(EventKind::LapSignChange { level }) {
        return Fate::Doomed {
            reason: DoomReason::SignChange { r: ev.r_event },
        };
    }
    let s = traj.last();
    let (w, dw) = (s.lap(level), s.lap_deriv(level));
    let limit = w + s.r * dw;
    let noise = 10.0 * (traj.stats.abs_tol + traj.stats.rel_tol * (w.abs() + (s.r * dw).abs()));
    if limit < -noise {
        Fate::Doomed {
            reason: DoomReason::NegativeLimit { limit },
        }
    } else {
        Fate::Entire { limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingConfig {
    pub integrator: IntegratorConfig,
    /// Target bracket width for `ε_k*`.
    pub bracket_tol: f64,
    /// Allowed distance `tol_b` of the m = 2 collapse boundary below 0.
    pub boundary_tol: f64,
    /// Relative accuracy of prescribed-volume solves.
    pub volume_rel_tol: f64,
    /// Slack above `Λ*` before an m = 2 target is rejected.
    pub range_tol: f64,
    /// Smallest `k` accepted by [`critical_eps`].
    pub k_min: f64,
    /// Retry near-separatrix brackets in extended precision.
    pub auto_extended: bool,
    pub max_bisections: usize,
    /// `k` values of the m = 3 volume table.
    pub k_table: Vec<f64>,
    /// Directory of the on-disk table cache; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            integrator: IntegratorConfig::default(),
            bracket_tol: 1e-6,
            boundary_tol: 1e-3,
            volume_rel_tol: 1e-5,
            range_tol: 1e-4,
            k_min: 5.0,
            auto_extended: true,
            max_bisections: 200,
            k_table: vec![10.0, 20.0, 40.0, 80.0],
            cache_dir: None,
        }
    }
}

impl ShootingConfig {
    /// Defaults with the integrator horizon appropriate for `spec`.
    pub fn for_spec(spec: EquationSpec) -> Self {
        ShootingConfig {
            integrator: IntegratorConfig::for_spec(spec),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let positive = [
            ("bracket_tol", self.bracket_tol),
            ("boundary_tol", self.boundary_tol),
            ("volume_rel_tol", self.volume_rel_tol),
            ("range_tol", self.range_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_bisections == 0 {
            return Err(Error::InvalidConfig(
                "max_bisections must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Upper bound `√(6k/5)` on `ε` for an entire solution.
pub fn eps_upper_bound(k: f64) -> f64 {
    (6.0 * k / 5.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEps {
    pub k: f64,
    /// Largest `ε` known to be entire.
    pub eps_lo: f64,
    /// Smallest `ε` known to be doomed.
    pub eps_hi: f64,
    pub eps_star: f64,
    pub width: f64,
    pub horizon_used: f64,
    pub bisections: usize,
    /// Precision of the final bisection.
    pub precision: Precision,
    /// Whether the extended-precision retry ran.
    pub extended_retry: bool,
    /// First radius where the bracket trajectories differ by more than 1 %.
    pub divergence_radius: Option<f64>,
    pub hi_reason: DoomReason,
    /// Every bracket `(lo, hi)` visited, starting with the initial one.
    pub history: Vec<(f64, f64)>,
}

fn fate_of(spec: EquationSpec, jet: &Jet, cfg: &IntegratorConfig) -> Result<(Fate, Trajectory)> {
    let traj = integrate(spec, jet, cfg)?;
    let f = fate(&traj);
    if let Fate::Undecided { reason } = &f {
        return Err(Error::Inconclusive(reason.clone()));
    }
    Ok((f, traj))
}

struct Bisection {
    lo: f64,
    hi: f64,
    traj_lo: Trajectory,
    traj_hi: Trajectory,
    hi_reason: DoomReason,
    steps: usize,
    history: Vec<(f64, f64)>,
}

/// Bisect `param` between an entire `lo` and a doomed `hi`.
fn bisect_fate(
    make: impl Fn(f64) -> Result<Jet>,
    spec: EquationSpec,
    icfg: &IntegratorConfig,
    (lo, hi): (f64, f64),
    tol: f64,
    max_steps: usize,
) -> Result<Bisection> {
    let (f_lo, traj_lo) = fate_of(spec, &make(lo)?, icfg)?;
    let (f_hi, traj_hi) = fate_of(spec, &make(hi)?, icfg)?;
    let hi_reason = match (&f_lo, &f_hi) {
        (Fate::Entire { .. }, Fate::Doomed { reason }) => *reason,
        _ => {
            return Err(Error::BracketFailure(format!(
                "bracket [{lo}, {hi}] does not separate entire from doomed: {f_lo:?} / {f_hi:?}"
            )))
        }
    };
    let mut b = Bisection {
        lo,
        hi,
        traj_lo,
        traj_hi,
        hi_reason,
        steps: 0,
        history: vec![(lo, hi)],
    };
    while b.hi - b.lo > tol {
        if b.steps >= max_steps {
            return Err(Error::SearchFailed(format!(
                "bracket width {} above {tol} after {max_steps} bisections",
                b.hi - b.lo
            )));
        }
        let mid = 0.5 * (b.lo + b.hi);
        if mid <= b.lo || mid >= b.hi {
            break;
        }
        let (f, traj) = fate_of(spec, &make(mid)?, icfg)?;
        match f {
            Fate::Entire { .. } => {
                b.lo = mid;
                b.traj_lo = traj;
            }
            Fate::Doomed { reason } => {
                b.hi = mid;
                b.traj_hi = traj;
                b.hi_reason = reason;
            }
            Fate::Undecided { .. } => unreachable!("fate_of rejects undecided trajectories"),
        }
        b.steps += 1;
        b.history.push((b.lo, b.hi));
    }
    Ok(b)
}

/// Locate `ε_k*` for the m = 3 family `(k, -ε, 1)` by bisection on the
/// fate, starting from `[0, √(6k/5)]`.
pub fn critical_eps(k: f64, cfg: &ShootingConfig, bracket_tol: f64) -> Result<CriticalEps> {
    cfg.validate()?;
    if !(bracket_tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bracket_tol must be positive, got {bracket_tol}"
        )));
    }
    if !(k >= cfg.k_min) {
        return Err(Error::InvalidConfig(format!(
            "k = {k} is below k_min = {}",
            cfg.k_min
        )));
    }
    let spec = EquationSpec::TRIHARMONIC;
    let make = |eps: f64| Jet::k_eps(k, eps);
    let upper = eps_upper_bound(k);
    let check_ends = |icfg: &IntegratorConfig| -> Result<()> {
        let (f0, _) = fate_of(spec, &make(0.0)?, icfg)?;
        if !f0.is_entire() {
            return Err(Error::BracketFailure(format!(
                "eps = 0 is already doomed for k = {k} ({f0:?}); k is below the large-k regime at horizon {}",
                icfg.r_max
            )));
        }
        let (f1, _) = fate_of(spec, &make(upper)?, icfg)?;
        if !f1.is_doomed() {
            return Err(Error::BracketFailure(format!(
                "eps = sqrt(6k/5) = {upper} survives horizon {}; the horizon is too short",
                icfg.r_max
            )));
        }
        Ok(())
    };

    let mut icfg = cfg.integrator.clone();
    check_ends(&icfg)?;
    let mut b = bisect_fate(
        make,
        spec,
        &icfg,
        (0.0, upper),
        bracket_tol,
        cfg.max_bisections,
    )?;
    let mut div = divergence_radius(&b.traj_lo, &b.traj_hi, 1e-2);
    let mut extended_retry = false;
    let near_separatrix = div.is_some_and(|r| r < icfg.r_max / 10.0);
    if near_separatrix && cfg.auto_extended && icfg.precision == Precision::Double {
        extended_retry = true;
        icfg.precision = Precision::Extended;
        // Re-check the double-precision bracket; fall back to the full
        // bracket if extended precision disagrees with it.
        let history = std::mem::take(&mut b.history);
        b = match bisect_fate(
            make,
            spec,
            &icfg,
            (b.lo, b.hi),
            bracket_tol,
            cfg.max_bisections,
        ) {
            Ok(mut nb) => {
                let mut h = history;
                h.extend(nb.history.drain(1..));
                nb.history = h;
                nb.steps += b.steps;
                nb
            }
            Err(Error::BracketFailure(_)) => bisect_fate(
                make,
                spec,
                &icfg,
                (0.0, upper),
                bracket_tol,
                cfg.max_bisections,
            )?,
            Err(e) => return Err(e),
        };
        div = divergence_radius(&b.traj_lo, &b.traj_hi, 1e-2);
    }
    Ok(CriticalEps {
        k,
        eps_lo: b.lo,
        eps_hi: b.hi,
        eps_star: 0.5 * (b.lo + b.hi),
        width: b.hi - b.lo,
        horizon_used: icfg.r_max,
        bisections: b.steps,
        precision: icfg.precision,
        extended_retry,
        divergence_radius: div,
        hi_reason: b.hi_reason,
        history: b.history,
    })
}

/// Diagnostics of `Δ²u(∞) = 0` at the entire end of a converged bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalResidual {
    /// `Δ²u(r_max)`.
    pub lap2_at_horizon: f64,
    /// `∫₀^R t⁻² ∫₀^t s² u⁻³ ds dt`, which tends to 1 at `ε_k*`.
    pub partial_integral: f64,
    /// `L(R)`, the extrapolated `Δ²u(∞)`.
    pub limit_estimate: f64,
    pub horizon: f64,
}

/// Integrate at `ce.eps_lo` and evaluate how close `Δ²u(∞)` is to zero.
pub fn critical_eps_residual(ce: &CriticalEps, cfg: &ShootingConfig) -> Result<CriticalResidual> {
    let icfg = IntegratorConfig {
        precision: ce.precision,
        ..cfg.integrator.clone()
    };
    let traj = integrate(
        EquationSpec::TRIHARMONIC,
        &Jet::k_eps(ce.k, ce.eps_lo)?,
        &icfg,
    )?;
    residual_of(&traj)
}

pub(crate) fn residual_of(traj: &Trajectory) -> Result<CriticalResidual> {
    if traj.spec != EquationSpec::TRIHARMONIC {
        return Err(Error::InvalidConfig(
            "the critical residual is defined for m = 3".into(),
        ));
    }
    let r = traj.radii();
    let inner_f: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| s.r * s.r * s.u().powi(-3))
        .collect();
    let inner = cumulative_simpson(&r, &inner_f);
    let outer_f: Vec<f64> = r
        .iter()
        .zip(&inner)
        .map(|(t, i)| if *t > 0.0 { i / (t * t) } else { 0.0 })
        .collect();
    let outer = cumulative_simpson(&r, &outer_f);
    Ok(CriticalResidual {
        lap2_at_horizon: traj.last().lap(2),
        partial_integral: *outer.last().unwrap(),
        limit_estimate: limit_certificate(traj),
        horizon: traj.r_end,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseBoundary {
    /// Midpoint of the final bracket.
    pub boundary: f64,
    /// Largest `ρ` found doomed.
    pub rho_doomed: f64,
    /// Smallest `ρ` found entire.
    pub rho_entire: f64,
    pub horizon: f64,
    pub bisections: usize,
    pub doomed_reason: DoomReason,
}

/// Bisect `ρ` over `[-U₀(0) + δ, 0]` on the fate of the m = 2 family.
///
/// The exact boundary is 0; a located boundary below `-boundary_tol`
/// means the horizon cannot resolve collapse near `ρ = 0`.
pub fn collapse_boundary_m2(cfg: &ShootingConfig) -> Result<CollapseBoundary> {
    cfg.validate()?;
    let spec = EquationSpec::BIHARMONIC;
    let icfg = &cfg.integrator;
    let delta = 1e-3 * ClosedForm::U0.lap(0, 0.0);
    let lo_end = -ClosedForm::U0.lap(0, 0.0) + delta;
    let tol = (cfg.boundary_tol * 1e-3).max(cfg.bracket_tol.min(cfg.boundary_tol));
    // bisect_fate expects the entire end first; map ρ -> -ρ so that 0 is "lo".
    let b = bisect_fate(
        |x| Jet::rho_family(-x),
        spec,
        icfg,
        (0.0, -lo_end),
        tol,
        cfg.max_bisections,
    )?;
    let (rho_entire, rho_doomed) = (0.0 - b.lo, 0.0 - b.hi);
    let boundary = 0.5 * (rho_entire + rho_doomed);
    if rho_entire < -cfg.boundary_tol {
        // the perturbation of U₀ grows roughly linearly in r, so the collapse
        // radius scales like 1/|ρ|
        let required = icfg.r_max * rho_entire.abs() / cfg.boundary_tol;
        return Err(Error::HorizonTooShort {
            horizon: icfg.r_max,
            rho: rho_entire,
            required,
        });
    }
    Ok(CollapseBoundary {
        boundary,
        rho_doomed,
        rho_entire,
        horizon: icfg.r_max,
        bisections: b.steps,
        doomed_reason: b.hi_reason,
    })
}

/// Smallest `k` among `candidates` (ascending) whose bracket `[0, √(6k/5)]`
/// separates entire from doomed at the configured horizon.
pub fn smallest_valid_k(candidates: &[f64], cfg: &ShootingConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    let spec = EquationSpec::TRIHARMONIC;
    for &k in candidates {
        let (f0, _) = fate_of(spec, &Jet::k_eps(k, 0.0)?, &cfg.integrator)?;
        let (f1, _) = fate_of(spec, &Jet::k_eps(k, eps_upper_bound(k))?, &cfg.integrator)?;
        if f0.is_entire() && f1.is_doomed() {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m3() -> ShootingConfig {
        ShootingConfig::for_spec(EquationSpec::TRIHARMONIC)
    }

    #[test]
    fn fate_of_reference_trajectories() {
        let b = EquationSpec::BIHARMONIC;
        let icfg = IntegratorConfig::for_spec(b);
        let u0 = integrate(b, &Jet::rho_family(0.0).unwrap(), &icfg).unwrap();
        assert!(fate(&u0).is_entire());
        let neg = integrate(b, &Jet::rho_family(-0.2).unwrap(), &icfg).unwrap();
        assert!(matches!(
            fate(&neg),
            Fate::Doomed {
                reason: DoomReason::SignChange { .. } | DoomReason::Collapsed { .. }
            }
        ));
    }

    #[test]
    fn bracket_width_halves() {
        let ce = critical_eps(10.0, &m3(), 1e-2).unwrap();
        let upper = eps_upper_bound(10.0);
        assert_eq!(ce.history[0], (0.0, upper));
        for (n, (lo, hi)) in ce.history.iter().enumerate() {
            assert!((hi - lo - upper / 2f64.powi(n as i32)).abs() < 1e-12);
        }
        assert!(ce.width <= 1e-2);
    }

    #[test]
    fn k_below_minimum_is_rejected() {
        assert!(matches!(
            critical_eps(2.0, &m3(), 1e-3),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn short_horizon_fails_bracket() {
        let mut cfg = m3();
        cfg.integrator.r_max = 0.5;
        assert!(matches!(
            critical_eps(10.0, &cfg, 1e-3),
            Err(Error::BracketFailure(_))
        ));
    }

    #[test]
    fn residual_requires_m3() {
        let b = EquationSpec::BIHARMONIC;
        let traj = integrate(
            b,
            &Jet::rho_family(0.0).unwrap(),
            &IntegratorConfig::for_spec(b).with_horizon(5.0),
        )
        .unwrap();
        assert!(residual_of(&traj).is_err());
    }
}
