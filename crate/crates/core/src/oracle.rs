//! Closed-form reference solutions.
//!
//! `U₀(r) = (a + r²)^{1/2}` with `a = 15^{-1/2}` solves `Δ²u = -u⁻⁷` and grows
//! linearly; `U₁(r) = (a + r²)^{3/2}` with `a = 315^{-1/3}` solves
//! `Δ³u = -u⁻³` and grows cubically. The Laplacian chains below were derived
//! by hand and are locked against finite differences in the tests.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::radial::{EquationSpec, Jet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedFormKind {
    U0,
    U1,
}

/// An explicit radial profile `(a + r²)^{γ/2}` with its shift constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub kind: ClosedFormKind,
    pub a: f64,
}

/// `15^{-1/2}`
pub const U0_SHIFT: f64 = 0.258_198_889_747_161_15;
/// `315^{-1/3}`
pub const U1_SHIFT: f64 = 0.146_970_379_436_123_1;

impl ClosedForm {
    pub const U0: ClosedForm = ClosedForm {
        kind: ClosedFormKind::U0,
        a: U0_SHIFT,
    };
    pub const U1: ClosedForm = ClosedForm {
        kind: ClosedFormKind::U1,
        a: U1_SHIFT,
    };

    /// Same profile with a different shift; only `U0`/`U1` shifts solve the equation.
    pub fn with_shift(kind: ClosedFormKind, a: f64) -> Self {
        ClosedForm { kind, a }
    }

    pub fn spec(&self) -> EquationSpec {
        match self.kind {
            ClosedFormKind::U0 => EquationSpec::BIHARMONIC,
            ClosedFormKind::U1 => EquationSpec::TRIHARMONIC,
        }
    }

    /// Growth exponent at infinity.
    pub fn growth(&self) -> f64 {
        match self.kind {
            ClosedFormKind::U0 => 1.0,
            ClosedFormKind::U1 => 3.0,
        }
    }

    /// `Δ^j u(r)` for `j ≤ m`.
    pub fn lap(&self, j: usize, r: f64) -> f64 {
        let a = self.a;
        let s = a + r * r;
        let r2 = r * r;
        match (self.kind, j) {
            (ClosedFormKind::U0, 0) => s.sqrt(),
            (ClosedFormKind::U0, 1) => (3.0 * a + 2.0 * r2) * s.powf(-1.5),
            (ClosedFormKind::U0, 2) => -15.0 * a * a * s.powf(-3.5),
            (ClosedFormKind::U1, 0) => s.powf(1.5),
            (ClosedFormKind::U1, 1) => 3.0 * (3.0 * a + 4.0 * r2) / s.sqrt(),
            (ClosedFormKind::U1, 2) => {
                3.0 * (15.0 * a * a + 20.0 * a * r2 + 8.0 * r2 * r2) * s.powf(-2.5)
            }
            (ClosedFormKind::U1, 3) => -315.0 * a * a * a * s.powf(-4.5),
            _ => panic!("Laplacian level {j} not tabulated for {:?}", self.kind),
        }
    }

    /// `(Δ^j u)'(r)` for `j ≤ m`.
    pub fn lap_deriv(&self, j: usize, r: f64) -> f64 {
        let a = self.a;
        let s = a + r * r;
        let r2 = r * r;
        match (self.kind, j) {
            (ClosedFormKind::U0, 0) => r / s.sqrt(),
            (ClosedFormKind::U0, 1) => -r * (5.0 * a + 2.0 * r2) * s.powf(-2.5),
            (ClosedFormKind::U0, 2) => 105.0 * a * a * r * s.powf(-4.5),
            (ClosedFormKind::U1, 0) => 3.0 * r * s.sqrt(),
            (ClosedFormKind::U1, 1) => 3.0 * r * (5.0 * a + 4.0 * r2) * s.powf(-1.5),
            (ClosedFormKind::U1, 2) => {
                -3.0 * r * (35.0 * a * a + 28.0 * a * r2 + 8.0 * r2 * r2) * s.powf(-3.5)
            }
            (ClosedFormKind::U1, 3) => 2835.0 * a * a * a * r * s.powf(-5.5),
            _ => panic!("Laplacian level {j} not tabulated for {:?}", self.kind),
        }
    }

    /// Radial-state slot `i` (`2j` → `Δ^j u`, `2j+1` → `(Δ^j u)'`).
    pub fn slot(&self, i: usize, r: f64) -> f64 {
        if i % 2 == 0 {
            self.lap(i / 2, r)
        } else {
            self.lap_deriv(i / 2, r)
        }
    }

    /// Jet of the profile at the origin.
    pub fn jet(&self) -> Jet {
        let spec = self.spec();
        Jet::new(spec, (0..spec.m()).map(|j| self.lap(j, 0.0)).collect())
            .expect("closed-form jets are valid")
    }

    /// `Δ^m u + u^p` from the closed-form chain.
    pub fn residual(&self, r: f64) -> f64 {
        let spec = self.spec();
        self.lap(spec.m(), r) + self.lap(0, r).powi(spec.rhs_exponent())
    }

    /// `Δ^m u + u^p` with the top Laplacian taken by Richardson-extrapolated
    /// central differences of the closed-form `(Δ^{m-1}u)'`.
    pub fn residual_fd(&self, r: f64, h: f64) -> f64 {
        let spec = self.spec();
        let top = spec.m() - 1;
        let lap_fd = |h: f64| {
            let w1 = |x: f64| self.lap_deriv(top, x);
            if r == 0.0 {
                // Δw(0) = 3 w''(0), w' odd
                3.0 * w1(h) / h
            } else {
                (w1(r + h) - w1(r - h)) / (2.0 * h) + 2.0 / r * w1(r)
            }
        };
        let top_lap = (4.0 * lap_fd(h / 2.0) - lap_fd(h)) / 3.0;
        top_lap + self.lap(0, r).powi(spec.rhs_exponent())
    }

    /// `4π ∫₀^∞ r² (a + r²)^{-3} dr = π² / (4 a^{3/2})`; the conformal volume of `U₀`-type profiles.
    pub fn u0_volume(&self) -> f64 {
        PI * PI / (4.0 * self.a.powf(1.5))
    }
}

/// `Λ* = ∫ dx / U₀⁶ = π² 15^{3/4} / 4`.
pub fn lambda_star() -> f64 {
    PI * PI * 15f64.powf(0.75) / 4.0
}

/// `4π ∫₀^∞ r² (a + r²)^{-3} dr` by double-exponential quadrature after `r = t/(1-t)`.
///
/// Independent of the closed form; returns `(value, error_estimate)`.
pub fn shifted_volume_quadrature(a: f64, tol: f64) -> (f64, f64) {
    let integrand = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - t;
        let r = t / one_minus;
        let jac = 1.0 / (one_minus * one_minus);
        r * r * (a + r * r).powi(-3) * jac
    };
    let out = quadrature::double_exponential::integrate(integrand, 0.0, 1.0, tol);
    (4.0 * PI * out.integral, 4.0 * PI * out.error_estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, r: f64, h: f64) -> f64 {
        (f(r + h) - f(r - h)) / (2.0 * h)
    }

    #[test]
    fn constants() {
        assert!((U0_SHIFT - 15f64.powf(-0.5)).abs() < 1e-16);
        assert!((U1_SHIFT - 315f64.powf(-1.0 / 3.0)).abs() < 1e-16);
        let u0 = ClosedForm::U0;
        assert!((u0.lap(0, 0.0) - 15f64.powf(-0.25)).abs() < 1e-15);
        assert!((u0.lap(0, 0.0) - 0.508133).abs() < 1e-6);
        assert!((u0.lap(1, 0.0) - 3.0 * 15f64.powf(0.25)).abs() < 1e-13);
        assert!((u0.lap(1, 0.0) - 5.903969).abs() < 1e-6);
        let u1 = ClosedForm::U1;
        assert!((u1.lap(0, 0.0) - 315f64.powf(-0.5)).abs() < 1e-16);
        assert!((u1.lap(0, 0.0) - 0.0563436).abs() < 1e-7);
    }

    #[test]
    fn derivative_slots_match_finite_differences_at_order_two() {
        for cf in [ClosedForm::U0, ClosedForm::U1] {
            let m = cf.spec().m();
            for j in 0..=m {
                for r in [0.3, 1.0, 4.0] {
                    let exact = cf.lap_deriv(j, r);
                    let e1 = (central(|x| cf.lap(j, x), r, 1e-3) - exact).abs();
                    let e2 = (central(|x| cf.lap(j, x), r, 1e-4) - exact).abs();
                    let scale = 1.0 + exact.abs();
                    assert!(e2 < 1e-6 * scale, "{:?} j={j} r={r}: {e2}", cf.kind);
                    // order-2 decay: a tenfold smaller step cuts the error ~100x
                    if e1 > 1e-10 * scale {
                        assert!(
                            e1 / e2 > 50.0,
                            "{:?} j={j} r={r}: ratio {}",
                            cf.kind,
                            e1 / e2
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn laplacian_chain_matches_finite_differences() {
        for cf in [ClosedForm::U0, ClosedForm::U1] {
            let m = cf.spec().m();
            for j in 0..m {
                for r in [0.2, 1.0, 3.0] {
                    let h = 1e-4;
                    let d2 = (cf.lap(j, r + h) - 2.0 * cf.lap(j, r) + cf.lap(j, r - h)) / (h * h);
                    let fd = d2 + 2.0 / r * cf.lap_deriv(j, r);
                    let exact = cf.lap(j + 1, r);
                    assert!(
                        (fd - exact).abs() < 1e-5 * (1.0 + exact.abs()),
                        "{:?} j={j} r={r}",
                        cf.kind
                    );
                }
            }
        }
    }

    #[test]
    fn residuals_vanish() {
        for r in [0.0, 0.1, 1.0, 10.0, 100.0] {
            assert!(ClosedForm::U0.residual(r).abs() <= 1e-8, "U0 r={r}");
            assert!(ClosedForm::U1.residual(r).abs() <= 1e-6, "U1 r={r}");
        }
        for r in [0.0, 1.0, 10.0] {
            assert!(
                ClosedForm::U0.residual_fd(r, 1e-3).abs() <= 1e-6 * 15f64.powf(1.75),
                "U0 fd r={r}"
            );
        }
        let fd = ClosedForm::U1.residual_fd(1.0, 1e-3);
        assert!(fd.abs() <= 1e-6, "U1 fd residual {fd}");
    }

    #[test]
    fn wrong_shift_fails_residual() {
        let bad = ClosedForm::with_shift(ClosedFormKind::U0, 2.0 * U0_SHIFT);
        for r in [0.0, 1.0] {
            assert!(bad.residual(r).abs() > 1e-2 * bad.lap(0, r).powi(-7));
        }
    }

    #[test]
    fn lambda_star_against_quadrature() {
        let (q, _) = shifted_volume_quadrature(U0_SHIFT, 1e-14);
        assert!(
            (q - lambda_star()).abs() <= 1e-10 * lambda_star(),
            "{q} vs {}",
            lambda_star()
        );
        assert!((lambda_star() - 18.8065).abs() < 1e-4);
        assert!((ClosedForm::U0.u0_volume() - lambda_star()).abs() < 1e-12);
    }

    #[test]
    fn shifted_volume_generic_shift() {
        let (q1, _) = shifted_volume_quadrature(1.0, 1e-14);
        assert!((q1 - PI * PI / 4.0).abs() < 1e-10);
        let (q4, _) = shifted_volume_quadrature(4.0, 1e-14);
        // r -> 2r: the integral scales by (1/4)^{3/2}
        assert!((q4 / q1 - 0.125).abs() < 1e-10);
    }
}
