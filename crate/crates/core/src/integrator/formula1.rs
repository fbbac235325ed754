use crate::error::{Error, Result};
use crate::quadrature::cumulative_simpson;
use crate::trajectory::Trajectory;

/// Largest relative defect of the radial identity
/// `w(r) = w(0) + ∫₀^r t⁻² ∫₀^t s² Δw(s) ds dt` with `w = Δ^level u`.
///
/// Both integrals use cumulative Simpson on the sample grid. The defect at a
/// sample is `|reconstructed - w| / max(|w(r)|, |w(0)|)`. Collapsed
/// trajectories are checked on `[0, 0.9 r*]`.
pub fn formula1_check(traj: &Trajectory, level: usize) -> Result<f64> {
    let r_hi = match traj.r_star() {
        Some(r_star) => 0.9 * r_star,
        None => traj.r_end,
    };
    formula1_check_until(traj, level, r_hi)
}

pub fn formula1_check_until(traj: &Trajectory, level: usize, r_hi: f64) -> Result<f64> {
    let m = traj.spec.m();
    if level >= m {
        return Err(Error::InvalidConfig(format!(
            "formula check level must be below m = {m}, got {level}"
        )));
    }
    let n = traj.samples.partition_point(|s| s.r <= r_hi);
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least three samples below r = {r_hi}"
        )));
    }
    let r: Vec<f64> = traj.samples[..n].iter().map(|s| s.r).collect();
    let w: Vec<f64> = traj.samples[..n].iter().map(|s| s.lap(level)).collect();
    let lap_w: Vec<f64> = traj.lap_values(level + 1)[..n].to_vec();

    let inner_integrand: Vec<f64> = r.iter().zip(&lap_w).map(|(s, g)| s * s * g).collect();
    let inner = cumulative_simpson(&r, &inner_integrand);
    let outer_integrand: Vec<f64> = r
        .iter()
        .zip(&inner)
        .map(|(t, i)| if *t > 0.0 { i / (t * t) } else { 0.0 })
        .collect();
    let outer = cumulative_simpson(&r, &outer_integrand);

    let w0 = w[0];
    let defect = w
        .iter()
        .zip(&outer)
        .skip(1)
        .map(|(wi, oi)| {
            let scale = wi.abs().max(w0.abs()).max(f64::MIN_POSITIVE);
            (w0 + oi - wi).abs() / scale
        })
        .fold(0.0, f64::max);
    Ok(defect)
}
