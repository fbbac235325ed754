use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const MIN_WINDOW_SAMPLES: usize = 10;

/// Least-squares power law `u ≈ c r^γ` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Slope of `log u` against `log r`.
    pub exponent: f64,
    /// `u(r_hi) / r_hi^{round(γ)}`.
    pub limit: f64,
    /// `exp` of the fitted intercept.
    pub coefficient: f64,
    /// RMS residual of the log-log fit.
    pub rms_residual: f64,
    pub samples: usize,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl GrowthFit {
    pub fn rounded_exponent(&self) -> f64 {
        self.exponent.round()
    }
}

/// Fit the growth exponent of an entire trajectory over `[r_lo, r_hi]`.
///
/// Requires `r_hi ≤ r_end`, a window spanning at least a factor of four
/// (`r_hi ≥ 4 r_lo`) and at least [`MIN_WINDOW_SAMPLES`] samples in it.
pub fn classify_growth(traj: &Trajectory, window: (f64, f64)) -> Result<GrowthFit> {
    if !traj.verdict.is_entire() {
        return Err(Error::NotEntire(format!(
            "growth is only defined for entire trajectories, verdict is {}",
            traj.verdict
        )));
    }
    let (r_lo, r_hi) = window;
    let slack = 1e-12 * r_hi.abs().max(1.0);
    let invalid = |reason: &str| {
        Err(Error::InvalidWindow {
            r_lo,
            r_hi,
            reason: reason.to_string(),
        })
    };
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return invalid("need 0 < r_lo < r_hi");
    }
    if r_hi > traj.r_end + slack {
        return invalid("r_hi exceeds r_end");
    }
    if r_hi < 4.0 * r_lo - slack {
        return invalid("window must span at least a factor of four (r_hi >= 4 r_lo)");
    }
    fit_window(traj, r_lo, r_hi)
}

pub(crate) fn fit_window(traj: &Trajectory, r_lo: f64, r_hi: f64) -> Result<GrowthFit> {
    let slack = 1e-12 * r_hi.abs().max(1.0);
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.r >= r_lo - slack && s.r <= r_hi + slack && s.u() > 0.0)
        .map(|s| (s.r.ln(), s.u().ln()))
        .collect();
    if pts.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::WindowTooNarrow {
            r_lo,
            r_hi,
            samples: pts.len(),
            required: MIN_WINDOW_SAMPLES,
        });
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    let (last_r, last_u) = pts.last().map(|p| (p.0.exp(), p.1.exp())).unwrap();
    Ok(GrowthFit {
        exponent: slope,
        limit: last_u / last_r.powf(slope.round()),
        coefficient: intercept.exp(),
        rms_residual: rms,
        samples: pts.len(),
        r_lo,
        r_hi,
    })
}

/// Exponent reported in the verdict: fit over `[r_end/4, r_end]`, falling
/// back to the local log-derivative `r u'/u` at the horizon.
pub(crate) fn default_exponent(traj: &Trajectory) -> f64 {
    match fit_window(traj, traj.r_end / 4.0, traj.r_end) {
        Ok(fit) => fit.exponent,
        Err(_) => {
            let s = traj.last();
            s.r * s.lap_deriv(0) / s.u()
        }
    }
}

/// Fit over the outer half `[r_end/2, r_end]`, used for the volume tail.
pub(crate) fn tail_fit(traj: &Trajectory) -> Result<GrowthFit> {
    fit_window(traj, traj.r_end / 2.0, traj.r_end)
}
