//! Dormand–Prince 5(4) with the Hairer–Wanner continuous extension.

use super::growth;
use super::IntegratorConfig;
use crate::error::Result;
use crate::radial::{adaptive_launch, rhs_into, EquationSpec, Jet, RadialState, MAX_DIM};
use crate::scalar::Scalar;
use crate::trajectory::{Event, EventKind, IntegrationStats, Trajectory, Verdict};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// 5th-order solution minus embedded 4th-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Local tolerances are tightened by this factor so the global error over a
/// long horizon stays within a small multiple of `rel_tol`.
const TOL_SCALE: f64 = 0.1;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

type Vector<T> = [T; MAX_DIM];

/// Interpolant over one accepted step `[r, r + h]`.
struct DenseStep<T: Scalar> {
    r: T,
    h: T,
    cont: [Vector<T>; 5],
    n: usize,
}

impl<T: Scalar> DenseStep<T> {
    fn new(r: T, h: T, y: &Vector<T>, y_new: &Vector<T>, k: &[Vector<T>; 7], n: usize) -> Self {
        let mut cont = [[T::zero(); MAX_DIM]; 5];
        for i in 0..n {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            let mut dsum = T::zero();
            for (s, ks) in k.iter().enumerate() {
                if D[s] != 0.0 {
                    dsum += T::from_f64(D[s]) * ks[i];
                }
            }
            cont[0][i] = y[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * k[6][i] - bspl;
            cont[4][i] = h * dsum;
        }
        DenseStep { r, h, cont, n }
    }

    fn slot(&self, x: T, i: usize) -> T {
        let theta = (x - self.r) / self.h;
        let theta1 = T::from_f64(1.0) - theta;
        let c = &self.cont;
        c[0][i] + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i])))
    }

    fn state(&self, x: f64) -> RadialState {
        let xt = T::from_f64(x);
        RadialState {
            r: x,
            y: (0..self.n).map(|i| self.slot(xt, i).to_f64()).collect(),
        }
    }

    /// Bisection for a sign change of `slot(x, i) - level` in `[lo, hi]`.
    fn locate(&self, i: usize, level: f64, lo: f64, hi: f64, tol: f64) -> f64 {
        let f = |x: f64| self.slot(T::from_f64(x), i).to_f64() - level;
        let (mut a, mut b) = (lo, hi);
        let fa_neg = f(a) < 0.0;
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let mid = 0.5 * (a + b);
            if (f(mid) < 0.0) == fa_neg {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// Output grid `k · stride`, with the last point snapped onto the horizon.
struct Grid {
    stride: f64,
    r_max: f64,
    next: usize,
}

impl Grid {
    fn point(&self, k: usize) -> f64 {
        let x = k as f64 * self.stride;
        if (x - self.r_max).abs() <= 1e-9 * self.stride {
            self.r_max
        } else {
            x
        }
    }

    fn peek(&self) -> f64 {
        self.point(self.next)
    }
}

fn push_sample(samples: &mut Vec<RadialState>, state: RadialState, stride: f64) {
    if let Some(last) = samples.last() {
        if state.r <= last.r {
            return;
        }
        if state.r - last.r < 1e-6 * stride && samples.len() > 1 {
            samples.pop();
        }
    }
    samples.push(state);
}

fn is_finite<T: Scalar>(y: &Vector<T>, n: usize) -> bool {
    y[..n].iter().all(|v| v.is_finite())
}

pub(super) fn run<T: Scalar>(
    spec: EquationSpec,
    jet: &Jet,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = spec.state_dim();
    let m = spec.m();
    let p = spec.rhs_exponent();
    let eps = cfg.precision.epsilon();
    let (r0, y0, series) =
        adaptive_launch::<T>(spec, jet, cfg.launch_radius, cfg.rel_tol, cfg.abs_tol)?;

    let mut stats = IntegrationStats {
        precision: cfg.precision,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        horizon: cfg.r_max,
        u_floor: cfg.u_floor,
        launch_radius: r0,
        ..Default::default()
    };
    let stride = cfg.dense_output_stride;
    let mut grid = Grid {
        stride,
        r_max: cfg.r_max,
        next: 1,
    };
    let mut samples = vec![jet.origin_state()];
    while grid.peek() <= r0 {
        let x = grid.peek();
        let st = series.state(T::from_f64(x));
        samples.push(RadialState {
            r: x,
            y: st.iter().map(|v| v.to_f64()).collect(),
        });
        grid.next += 1;
    }

    let f = |r: T, y: &Vector<T>, out: &mut Vector<T>| rhs_into(m, p, r, &y[..n], &mut out[..n]);

    let mut r = T::from_f64(r0);
    let mut y: Vector<T> = [T::zero(); MAX_DIM];
    y[..n].copy_from_slice(&y0[..n]);
    let mut k1 = [T::zero(); MAX_DIM];
    f(r, &y, &mut k1);
    stats.rhs_evals += 1;

    let r_max = T::from_f64(cfg.r_max);
    let mut h = T::from_f64(r0.min(0.1));
    let mut events: Vec<Event> = Vec::new();
    let verdict: Verdict;
    let r_end: f64;

    loop {
        if stats.accepted_steps + stats.rejected_steps >= cfg.max_steps {
            verdict = Verdict::Inconclusive {
                reason: format!(
                    "max_steps = {} exhausted at r = {}",
                    cfg.max_steps,
                    r.to_f64()
                ),
            };
            r_end = r.to_f64();
            push_sample(&mut samples, to_state(r, &y, n), stride);
            break;
        }
        let rf = r.to_f64();
        let cap = T::from_f64(0.1f64.max(rf / 20.0));
        h = h.min(cap);
        let last_step = h >= r_max - r;
        if last_step {
            h = r_max - r;
        }
        let h_min = 64.0 * eps * rf.max(1.0);
        if h.to_f64() < h_min {
            let (u, du) = (y[0].to_f64(), y[1].to_f64());
            r_end = rf;
            push_sample(&mut samples, to_state(r, &y, n), stride);
            if u < cfg.u_floor.sqrt() && du < 0.0 {
                // Square-root type collapse u ≈ c·sqrt(r* - r): the remaining
                // distance u / (2|u'|) is below the resolution of r.
                let r_star = rf + 0.5 * u / du.abs();
                events.push(Event {
                    kind: EventKind::UFloor,
                    r_event: r_star,
                });
                verdict = Verdict::Collapsed { r_star };
            } else {
                verdict = Verdict::Inconclusive {
                    reason: format!("step size underflow (h = {:e}) at r = {rf}", h.to_f64()),
                };
            }
            break;
        }

        let mut k = [[T::zero(); MAX_DIM]; 7];
        k[0] = k1;
        let mut y_stage = [T::zero(); MAX_DIM];
        let mut stage_ok = true;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += T::from_f64(A[s][j]) * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            if !(y_stage[0].to_f64() > 0.0) || !is_finite(&y_stage, n) {
                stage_ok = false;
                break;
            }
            let mut out = [T::zero(); MAX_DIM];
            f(r + T::from_f64(C[s]) * h, &y_stage, &mut out);
            stats.rhs_evals += 1;
            k[s] = out;
        }
        if !stage_ok || !is_finite(&k[6], n) {
            stats.rejected_steps += 1;
            h = h * T::from_f64(0.25);
            continue;
        }
        let y_new = y_stage;

        let mut err = 0.0_f64;
        for i in 0..n {
            let mut e = T::zero();
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    e += T::from_f64(E[s]) * ks[i];
                }
            }
            let sc =
                TOL_SCALE * (cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs()).to_f64());
            err = err.max((h * e).abs().to_f64() / sc);
        }
        if !(err <= 1.0) {
            stats.rejected_steps += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).max(FAC_MIN)
            } else {
                0.25
            };
            h = h * T::from_f64(fac);
            continue;
        }

        stats.accepted_steps += 1;
        let r_new = if last_step { r_max } else { r + h };
        let dense = DenseStep::new(r, h, &y, &y_new, &k, n);
        let (lo, hi) = (rf, r_new.to_f64());
        let loc_tol = cfg.abs_tol.max(4.0 * f64::EPSILON * hi);

        let mut stop_at: Option<f64> = None;
        if y_new[0].to_f64() < cfg.u_floor {
            stop_at = Some(dense.locate(0, cfg.u_floor, lo, hi, loc_tol));
        }
        for level in 1..m {
            let (a, b) = (y[2 * level].to_f64(), y_new[2 * level].to_f64());
            if (a < 0.0) != (b < 0.0) {
                let re = dense.locate(2 * level, 0.0, lo, hi, loc_tol);
                if stop_at.map_or(true, |rs| re <= rs) {
                    events.push(Event {
                        kind: EventKind::LapSignChange { level },
                        r_event: re,
                    });
                }
            }
        }
        while grid.peek() <= hi && stop_at.map_or(true, |rs| grid.peek() < rs) {
            push_sample(&mut samples, dense.state(grid.peek()), stride);
            grid.next += 1;
        }
        if let Some(r_star) = stop_at {
            push_sample(&mut samples, dense.state(r_star), stride);
            events.push(Event {
                kind: EventKind::UFloor,
                r_event: r_star,
            });
            verdict = Verdict::Collapsed { r_star };
            r_end = r_star;
            break;
        }

        r = r_new;
        y = y_new;
        k1 = k[6];
        if !is_finite(&y, n) {
            verdict = Verdict::Inconclusive {
                reason: format!("non-finite state at r = {hi}"),
            };
            r_end = hi;
            break;
        }
        if last_step {
            push_sample(&mut samples, to_state(r_max, &y, n), stride);
            events.push(Event {
                kind: EventKind::HorizonReached,
                r_event: cfg.r_max,
            });
            r_end = cfg.r_max;
            verdict = Verdict::EntirePositive {
                growth_exponent: f64::NAN,
            };
            break;
        }
        let fac = if err == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
        };
        h = h * T::from_f64(fac);
    }

    events.sort_by(|a, b| a.r_event.total_cmp(&b.r_event));
    let mut traj = Trajectory {
        spec,
        jet: jet.clone(),
        samples,
        verdict,
        r_end,
        events,
        stats,
    };
    if traj.verdict.is_entire() {
        let gamma = growth::default_exponent(&traj);
        traj.verdict = Verdict::EntirePositive {
            growth_exponent: gamma,
        };
    }
    Ok(traj)
}

fn to_state<T: Scalar>(r: T, y: &Vector<T>, n: usize) -> RadialState {
    RadialState {
        r: r.to_f64(),
        y: y[..n].iter().map(|v| v.to_f64()).collect(),
    }
}
