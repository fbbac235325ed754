//! Problem instances, the first-order radial system and the launch off the
//! origin.
//!
//! A radial solution of `Δ^m u = -u^p` in three dimensions is carried as the
//! paired state `(u, u', Δu, (Δu)', ..., Δ^{m-1}u, (Δ^{m-1}u)')`. With the
//! radial Laplacian `Δw = w'' + (2/r) w'`, each pair obeys
//!
//! ```text
//! (Δ^j u)'' = Δ^{j+1} u - (2/r) (Δ^j u)',     Δ^m u = -u^p,
//! ```
//!
//! which is singular at `r = 0`. The integrator therefore starts at a small
//! `r0 > 0` from the even Taylor series fixed by the jet at the origin.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle;
use crate::scalar::Scalar;

/// Largest supported state dimension (`2m` with `m = 3`).
pub const MAX_DIM: usize = 6;

pub type StateVec = ArrayVec<f64, MAX_DIM>;

/// One of the two equations `Δ²u = -u⁻⁷` (m = 2) or `Δ³u = -u⁻³` (m = 3) in R³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct EquationSpec {
    m: u32,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    m: u32,
}

impl TryFrom<RawSpec> for EquationSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        EquationSpec::new(raw.m)
    }
}

impl From<EquationSpec> for RawSpec {
    fn from(spec: EquationSpec) -> Self {
        RawSpec { m: spec.m }
    }
}

impl EquationSpec {
    pub const BIHARMONIC: EquationSpec = EquationSpec { m: 2 };
    pub const TRIHARMONIC: EquationSpec = EquationSpec { m: 3 };

    pub fn new(m: u32) -> Result<Self> {
        match m {
            2 | 3 => Ok(EquationSpec { m }),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn m(self) -> usize {
        self.m as usize
    }

    /// The exponent `p = (3+2m)/(3-2m)` of the right-hand side `-u^p`.
    pub fn rhs_exponent(self) -> i32 {
        let m = self.m as i32;
        (3 + 2 * m) / (3 - 2 * m)
    }

    /// The exponent `q = 6/(3-2m)` of the volume integrand `u^q`.
    pub fn vol_exponent(self) -> i32 {
        let m = self.m as i32;
        6 / (3 - 2 * m)
    }

    /// Exponent `(3-2m)/2` of the scaling `u_λ(x) = λ^s u(λx)`.
    pub fn scaling_exponent(self) -> f64 {
        (3.0 - 2.0 * self.m as f64) / 2.0
    }

    /// Ambient dimension; always 3.
    pub fn dimension(self) -> usize {
        3
    }

    /// Length of the first-order state, `2m`.
    pub fn state_dim(self) -> usize {
        2 * self.m as usize
    }

    /// Right-hand side `-u^p` of the top-level equation.
    pub fn forcing(self, u: f64) -> f64 {
        -u.powi(self.rhs_exponent())
    }
}

impl std::fmt::Display for EquationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Δ^{} u = -u^{}", self.m, self.rhs_exponent())
    }
}

/// Initial data at the origin: `[u(0), Δu(0), ..., Δ^{m-1}u(0)]`.
///
/// Odd radial derivatives vanish at the origin and are not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    lap_values: Vec<f64>,
}

impl Jet {
    pub fn new(spec: EquationSpec, lap_values: Vec<f64>) -> Result<Self> {
        if lap_values.len() != spec.m() {
            return Err(Error::InvalidJet(format!(
                "expected {} values for m = {}, got {}",
                spec.m(),
                spec.m(),
                lap_values.len()
            )));
        }
        if let Some(bad) = lap_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidJet(format!("non-finite value {bad}")));
        }
        if lap_values[0] <= 0.0 {
            return Err(Error::InvalidJet(format!(
                "u(0) must be positive, got {}",
                lap_values[0]
            )));
        }
        Ok(Jet { lap_values })
    }

    /// The m = 2 family `u(0) = U₀(0) + ρ`, `Δu(0) = ΔU₀(0)`.
    pub fn rho_family(rho: f64) -> Result<Self> {
        let u0 = oracle::ClosedForm::U0;
        Jet::new(
            EquationSpec::BIHARMONIC,
            vec![u0.lap(0, 0.0) + rho, u0.lap(1, 0.0)],
        )
    }

    /// The m = 3 family `u(0) = k`, `Δu(0) = -ε`, `Δ²u(0) = 1`.
    pub fn k_eps(k: f64, eps: f64) -> Result<Self> {
        Jet::new(EquationSpec::TRIHARMONIC, vec![k, -eps, 1.0])
    }

    pub fn lap_values(&self) -> &[f64] {
        &self.lap_values
    }

    pub fn u0(&self) -> f64 {
        self.lap_values[0]
    }

    pub fn m(&self) -> usize {
        self.lap_values.len()
    }

    /// The state at `r = 0`: Laplacian values in even slots, zeros in odd ones.
    pub fn origin_state(&self) -> RadialState {
        let mut y = StateVec::new();
        for &v in &self.lap_values {
            y.push(v);
            y.push(0.0);
        }
        RadialState { r: 0.0, y }
    }
}

/// A point of the first-order radial system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    pub r: f64,
    pub y: StateVec,
}

impl RadialState {
    pub fn new(r: f64, y: &[f64]) -> Self {
        RadialState {
            r,
            y: y.iter().copied().collect(),
        }
    }

    pub fn u(&self) -> f64 {
        self.y[0]
    }

    /// `Δ^j u` at this radius.
    pub fn lap(&self, j: usize) -> f64 {
        self.y[2 * j]
    }

    /// `(Δ^j u)'` at this radius.
    pub fn lap_deriv(&self, j: usize) -> f64 {
        self.y[2 * j + 1]
    }

    /// Largest absolute component, used to scale comparison tolerances.
    pub fn max_abs(&self) -> f64 {
        self.y.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Derivative of the radial state, `dy/dr`.
pub fn rhs(spec: EquationSpec, state: &RadialState) -> Result<StateVec> {
    if state.y.len() != spec.state_dim() {
        return Err(Error::InvalidJet(format!(
            "state has {} slots, expected {}",
            state.y.len(),
            spec.state_dim()
        )));
    }
    if state.r == 0.0 {
        return Err(Error::OriginSingularity);
    }
    if !(state.u() > 0.0) {
        return Err(Error::NonPositiveU {
            r: state.r,
            u: state.u(),
        });
    }
    let mut out = [0.0; MAX_DIM];
    rhs_into(spec.m(), spec.rhs_exponent(), state.r, &state.y, &mut out);
    Ok(out[..spec.state_dim()].iter().copied().collect())
}

#[inline]
pub(crate) fn rhs_into<T: Scalar>(m: usize, p: i32, r: T, y: &[T], out: &mut [T]) {
    let two_over_r = T::from_f64(2.0) / r;
    for j in 0..m {
        let next = if j + 1 < m {
            y[2 * j + 2]
        } else {
            -y[0].powi(p)
        };
        out[2 * j] = y[2 * j + 1];
        out[2 * j + 1] = next - two_over_r * y[2 * j + 1];
    }
}

/// Even Taylor expansion of a radial solution about the origin.
///
/// Writing `u(r) = Σ c_n r^{2n}`, the three-dimensional identity
/// `Δ r^{2n} = 2n(2n+1) r^{2n-2}` gives `c_n = Δ^n u(0) / (2n+1)!`, and
/// `Δ^i u(r) = Σ_n Δ^{n+i}u(0) r^{2n} / (2n+1)!`. The values `Δ^n u(0)` for
/// `n ≥ m` follow from the power series of `-u^p`.
#[derive(Debug, Clone)]
pub struct TaylorSeries<T: Scalar = f64> {
    m: usize,
    order: usize,
    /// `Δ^n u(0)` for `n = 0..=order+1`.
    origin_laps: Vec<T>,
}

impl<T: Scalar> TaylorSeries<T> {
    /// Series whose `u` slot keeps `Δ^n u(0)` for `n ≤ order`; one extra
    /// coefficient is kept for the truncation estimate. `order ≥ m - 1`.
    pub fn new(spec: EquationSpec, jet: &Jet, order: usize) -> Self {
        let m = spec.m();
        let order = order.max(m - 1);
        let p = spec.rhs_exponent();
        let n_terms = order + 2;

        // Coefficients c_n of u in powers of x = r^2, and g_n of u^p.
        let mut c: Vec<T> = Vec::with_capacity(n_terms);
        let mut g: Vec<T> = Vec::with_capacity(n_terms);
        let mut laps: Vec<T> = Vec::with_capacity(n_terms);
        for n in 0..n_terms {
            let d_n = if n < m {
                T::from_f64(jet.lap_values()[n])
            } else {
                // Δ^n u(0) = Δ^{n-m}(-u^p)(0) = -(2(n-m)+1)! g_{n-m}
                let k = n - m;
                while g.len() <= k {
                    let i = g.len();
                    g.push(power_series_term(&c, &g, p, i));
                }
                -(g[k] * T::from_f64(factorial(2 * k + 1)))
            };
            laps.push(d_n);
            c.push(d_n / T::from_f64(factorial(2 * n + 1)));
        }
        TaylorSeries {
            m,
            order,
            origin_laps: laps,
        }
    }

    /// `Δ^n u(0)` for `n ≤ order + 1`.
    pub fn origin_lap(&self, n: usize) -> T {
        self.origin_laps[n]
    }

    /// Truncated series for `Δ^level u` (or its r-derivative) at `r`.
    pub fn eval(&self, level: usize, derivative: bool, r: T) -> T {
        self.eval_terms(level, derivative, r, self.order)
    }

    fn eval_terms(&self, level: usize, derivative: bool, r: T, last: usize) -> T {
        let r2 = r * r;
        let mut acc = T::zero();
        // Horner in r^2 from the highest kept term.
        if derivative {
            for n in (1..=last.saturating_sub(level)).rev() {
                let coef = self.origin_laps[n + level]
                    * T::from_f64(2.0 * n as f64 / factorial(2 * n + 1));
                acc = acc * r2 + coef;
            }
            acc * r
        } else {
            for n in (0..=last.saturating_sub(level)).rev() {
                let coef = self.origin_laps[n + level] / T::from_f64(factorial(2 * n + 1));
                acc = acc * r2 + coef;
            }
            acc
        }
    }

    /// Magnitude of the first omitted term in the given slot.
    pub fn next_term(&self, level: usize, derivative: bool, r: T) -> T {
        let n = self.order + 1 - level;
        let d = self.origin_laps[self.order + 1];
        let rn = r.powi((2 * n) as i32);
        let term = if derivative {
            d * T::from_f64(2.0 * n as f64 / factorial(2 * n + 1)) * rn / r
        } else {
            d * rn / T::from_f64(factorial(2 * n + 1))
        };
        term.abs()
    }

    /// Full state vector at `r`.
    pub fn state(&self, r: T) -> ArrayVec<T, MAX_DIM> {
        let mut y = ArrayVec::new();
        for level in 0..self.m {
            y.push(self.eval(level, false, r));
            y.push(self.eval(level, true, r));
        }
        y
    }
}

/// Next coefficient of `V = U^p` given the coefficients of `U` (power-series
/// exponentiation: `n c_0 V_n = Σ_{k=1}^n (k p - n + k) c_k V_{n-k}`).
fn power_series_term<T: Scalar>(c: &[T], v: &[T], p: i32, n: usize) -> T {
    if n == 0 {
        return c[0].powi(p);
    }
    let mut acc = T::zero();
    for k in 1..=n {
        let w = (k as f64) * (p as f64) - (n - k) as f64;
        acc += T::from_f64(w) * c[k] * v[n - k];
    }
    acc / (T::from_f64(n as f64) * c[0])
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Default series order used for the launch: two terms beyond the forcing.
pub fn launch_order(spec: EquationSpec) -> usize {
    spec.m() + 2
}

/// State at `r0` from the even Taylor series of the jet.
///
/// Fails with `LaunchRadiusTooLarge` when the first omitted term in any
/// slot exceeds `abs_tol + rel_tol·|slot|`.
pub fn taylor_launch(
    spec: EquationSpec,
    jet: &Jet,
    r0: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<RadialState> {
    let (y, _) = launch_state::<f64>(spec, jet, r0, rel_tol, abs_tol)?;
    Ok(RadialState {
        r: r0,
        y: y.into_iter().collect(),
    })
}

/// Largest number of times the launch radius is divided by four.
pub const MAX_LAUNCH_SHRINKS: usize = 24;

/// [`launch_state`] at `r0`, shrinking the radius by factors of four while
/// the truncation test fails (jets with tiny `u(0)` have huge higher
/// Laplacians). Returns the radius actually used.
pub(crate) fn adaptive_launch<T: Scalar>(
    spec: EquationSpec,
    jet: &Jet,
    r0: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(f64, ArrayVec<T, MAX_DIM>, TaylorSeries<T>)> {
    let mut r = r0;
    let mut shrinks = 0;
    loop {
        match launch_state::<T>(spec, jet, r, rel_tol, abs_tol) {
            Ok((y, series)) => return Ok((r, y, series)),
            Err(Error::LaunchRadiusTooLarge { .. }) if shrinks < MAX_LAUNCH_SHRINKS => {
                r *= 0.25;
                shrinks += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

pub(crate) fn launch_state<T: Scalar>(
    spec: EquationSpec,
    jet: &Jet,
    r0: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(ArrayVec<T, MAX_DIM>, TaylorSeries<T>)> {
    if jet.m() != spec.m() {
        return Err(Error::InvalidJet(format!(
            "jet has {} values, spec has m = {}",
            jet.m(),
            spec.m()
        )));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "launch radius must be positive, got {r0}"
        )));
    }
    let series = TaylorSeries::<T>::new(spec, jet, launch_order(spec));
    let r = T::from_f64(r0);
    let y = series.state(r);
    for level in 0..spec.m() {
        for (slot, derivative) in [(2 * level, false), (2 * level + 1, true)] {
            let est = series.next_term(level, derivative, r).to_f64();
            let tol = abs_tol + rel_tol * y[slot].to_f64().abs();
            if !est.is_finite() || est > tol {
                return Err(Error::LaunchRadiusTooLarge {
                    r0,
                    estimate: est,
                    tolerance: tol,
                });
            }
        }
    }
    if !(y[0].to_f64() > 0.0) {
        return Err(Error::NonPositiveU {
            r: r0,
            u: y[0].to_f64(),
        });
    }
    Ok((y, series))
}
