use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{EquationSpec, Jet, RadialState};
use crate::scalar::Precision;

/// Classification of an integrated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    /// `u` reached the collapse floor at `r_star`.
    Collapsed {
        r_star: f64,
    },
    /// The horizon was reached with `u` above the floor.
    EntirePositive {
        growth_exponent: f64,
    },
    Inconclusive {
        reason: String,
    },
}

impl Verdict {
    pub fn is_collapsed(&self) -> bool {
        matches!(self, Verdict::Collapsed { .. })
    }

    pub fn is_entire(&self) -> bool {
        matches!(self, Verdict::EntirePositive { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Collapsed { .. } => "Collapsed",
            Verdict::EntirePositive { .. } => "EntirePositive",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Collapsed { r_star } => write!(f, "Collapsed(r*={r_star:.12})"),
            Verdict::EntirePositive { growth_exponent } => {
                write!(f, "EntirePositive(gamma={growth_exponent:.6})")
            }
            Verdict::Inconclusive { reason } => write!(f, "Inconclusive({reason})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    UFloor,
    /// `Δ^level u` changed sign.
    LapSignChange {
        level: usize,
    },
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub r_event: f64,
}

/// Bookkeeping from one integration run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    pub precision: Precision,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub horizon: f64,
    pub u_floor: f64,
    /// Launch radius actually used (the configured one, or smaller).
    pub launch_radius: f64,
}

/// Dense numerical solution sampled on a regular grid in `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: EquationSpec,
    pub jet: Jet,
    /// Strictly increasing in `r`, starting at `r = 0`.
    pub samples: Vec<RadialState>,
    pub verdict: Verdict,
    pub r_end: f64,
    /// Events ordered by radius.
    pub events: Vec<Event>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn last(&self) -> &RadialState {
        self.samples
            .last()
            .expect("trajectory has at least the origin sample")
    }

    pub fn radii(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.r).collect()
    }

    /// Values of state slot `i` at every sample.
    pub fn slot_values(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.y[i]).collect()
    }

    /// `Δ^level u` at every sample; `level = m` gives `-u^p`.
    pub fn lap_values(&self, level: usize) -> Vec<f64> {
        if level == self.spec.m() {
            self.samples
                .iter()
                .map(|s| self.spec.forcing(s.u()))
                .collect()
        } else {
            self.slot_values(2 * level)
        }
    }

    pub fn r_star(&self) -> Option<f64> {
        match self.verdict {
            Verdict::Collapsed { r_star } => Some(r_star),
            _ => None,
        }
    }

    pub fn first_event(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == kind)
    }

    /// Smallest sampled `u`.
    pub fn min_u(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.u())
            .fold(f64::INFINITY, f64::min)
    }

    /// State at `r` by cubic Hermite interpolation between samples, using
    /// each pair's derivative slot; odd slots are interpolated linearly.
    pub fn interpolate(&self, r: f64) -> Option<RadialState> {
        let samples = &self.samples;
        if r < 0.0 || r > self.r_end || samples.len() < 2 {
            return None;
        }
        let idx = samples
            .partition_point(|s| s.r <= r)
            .clamp(1, samples.len() - 1);
        let (a, b) = (&samples[idx - 1], &samples[idx]);
        let h = b.r - a.r;
        let t = (r - a.r) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        let mut y = a.y.clone();
        for j in 0..self.spec.m() {
            let (v, d) = (2 * j, 2 * j + 1);
            y[v] = h00 * a.y[v] + h10 * h * a.y[d] + h01 * b.y[v] + h11 * h * b.y[d];
            y[d] = a.y[d] + t * (b.y[d] - a.y[d]);
        }
        Some(RadialState { r, y })
    }
}

/// Apply the conformal scaling `u_λ(r) = λ^s u(λr)`, `s = (3-2m)/2`.
///
/// Samples move to `r/λ`; the slot for `Δ^j u` picks up `λ^{s+2j}` and its
/// derivative `λ^{s+2j+1}`. The growth exponent is unchanged.
pub fn scale(spec: EquationSpec, traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidScale(lambda));
    }
    let s = spec.scaling_exponent();
    let factors: Vec<f64> = (0..spec.state_dim())
        .map(|i| lambda.powf(s + i as f64))
        .collect();
    // slot i = 2j (+1): exponent s + 2j (+1) = s + i
    let samples = traj
        .samples
        .iter()
        .map(|st| RadialState {
            r: st.r / lambda,
            y: st.y.iter().zip(&factors).map(|(v, f)| v * f).collect(),
        })
        .collect();
    let jet = Jet::new(
        spec,
        traj.jet
            .lap_values()
            .iter()
            .enumerate()
            .map(|(j, v)| v * factors[2 * j])
            .collect(),
    )?;
    let verdict = match &traj.verdict {
        Verdict::Collapsed { r_star } => Verdict::Collapsed {
            r_star: r_star / lambda,
        },
        other => other.clone(),
    };
    let events = traj
        .events
        .iter()
        .map(|e| Event {
            kind: e.kind,
            r_event: e.r_event / lambda,
        })
        .collect();
    let mut stats = traj.stats.clone();
    stats.horizon /= lambda;
    stats.launch_radius /= lambda;
    Ok(Trajectory {
        spec,
        jet,
        samples,
        verdict,
        r_end: traj.r_end / lambda,
        events,
        stats,
    })
}
