//! Prescribed-volume solves.
//!
//! m = 2: the volume of the `ρ` family decreases from `Λ*` at `ρ = 0` to 0,
//! so a geometric scan brackets the target and bisection refines it.
//! m = 3: a table of volumes at the entire end of the `ε_k*` bracket picks
//! `k` with enough volume; the second datum `Δu(0)` is then raised from
//! `-ε_k*` until the volume drops to the target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{cache_key, CacheEntry, VolumeCache};
use super::{critical_eps, ShootingConfig};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::oracle::lambda_star;
use crate::radial::{EquationSpec, Jet};
use crate::volume::volume_of_jet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum VolumeParameter {
    /// m = 2 jet `(U₀(0) + ρ, ΔU₀(0))`.
    Rho { rho: f64 },
    /// m = 3 jet `(k, lap1, 1)` with `lap1 = Δu(0)`.
    KLap { k: f64, lap1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub k: f64,
    pub eps_star: f64,
    pub eps_lo: f64,
    /// Volume at `ε = eps_lo`.
    pub volume: f64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSolve {
    pub m: usize,
    pub target: f64,
    pub parameter: VolumeParameter,
    pub achieved: f64,
    pub rel_error: f64,
    /// Error estimate of the achieved volume.
    pub err_estimate: f64,
    pub iterations: usize,
    /// Scan samples `(parameter, volume)` used to bracket the root.
    pub scan: Vec<(f64, f64)>,
    /// Whether the scan volumes decreased strictly.
    pub monotone: bool,
    /// Whether the volume crossed the target more than once in the scan.
    pub multi_root: bool,
    /// m = 3 volume table; empty for m = 2.
    pub table: Vec<TableEntry>,
}

pub fn prescribe_volume(
    spec: EquationSpec,
    target: f64,
    cfg: &ShootingConfig,
) -> Result<VolumeSolve> {
    cfg.validate()?;
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "target volume must be positive, got {target}"
        )));
    }
    match spec.m() {
        2 => prescribe_m2(target, cfg),
        _ => prescribe_m3(target, cfg),
    }
}

struct Root {
    x: f64,
    value: f64,
    err: f64,
    iterations: usize,
}

/// Bisection for `f(x) = target` with `f(lo) ≥ target > f(hi)`.
fn bisect_decreasing(
    f: impl Fn(f64) -> Result<(f64, f64)>,
    (mut lo, mut hi): (f64, f64),
    target: f64,
    rel_tol: f64,
    max_steps: usize,
) -> Result<Root> {
    for it in 1..=max_steps {
        let mid = 0.5 * (lo + hi);
        let (v, err) = f(mid)?;
        if (v - target).abs() <= rel_tol * target || mid <= lo || mid >= hi {
            return Ok(Root {
                x: mid,
                value: v,
                err,
                iterations: it,
            });
        }
        if v >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::SearchFailed(format!(
        "volume bisection did not reach {rel_tol:e} relative accuracy in {max_steps} steps"
    )))
}

/// Samples `(parameter, volume)` of a scan.
type Scan = Vec<(f64, f64)>;

/// Walk `x_k = x0 · 2^k` until the volume drops below `target`, then take one
/// more sample to detect a crossing back above the target.
fn scan_down(
    f: &impl Fn(f64) -> Result<(f64, f64)>,
    start: (f64, f64),
    x0: f64,
    target: f64,
) -> Result<(Scan, (f64, f64))> {
    let mut scan = vec![start];
    let mut x = x0;
    while x < 1e8 {
        let (v, _) = f(x)?;
        scan.push((x, v));
        if v < target {
            let (lo, _) = scan[scan.len() - 2];
            let (v2, _) = f(2.0 * x)?;
            scan.push((2.0 * x, v2));
            return Ok((scan, (lo, x)));
        }
        x *= 2.0;
    }
    Err(Error::SearchFailed(format!(
        "volume stays above {target} up to parameter {x}"
    )))
}

fn scan_flags(scan: &[(f64, f64)], target: f64) -> (bool, bool) {
    let monotone = scan.windows(2).all(|w| w[1].1 < w[0].1);
    let crossings = scan
        .windows(2)
        .filter(|w| (w[0].1 >= target) != (w[1].1 >= target))
        .count();
    (monotone, crossings > 1)
}

fn prescribe_m2(target: f64, cfg: &ShootingConfig) -> Result<VolumeSolve> {
    let spec = EquationSpec::BIHARMONIC;
    let lstar = lambda_star();
    if target > lstar * (1.0 + cfg.range_tol) {
        return Err(Error::TargetOutOfRange { target, max: lstar });
    }
    let icfg = &cfg.integrator;
    let f = |rho: f64| -> Result<(f64, f64)> {
        let v = volume_of_jet(spec, &Jet::rho_family(rho)?, icfg)?;
        Ok((v.total, v.err_estimate))
    };
    let (v0, e0) = f(0.0)?;
    let done = |rho: f64, value: f64, err: f64, iterations: usize, scan: Vec<(f64, f64)>| {
        let (monotone, multi_root) = scan_flags(&scan, target);
        VolumeSolve {
            m: 2,
            target,
            parameter: VolumeParameter::Rho { rho },
            achieved: value,
            rel_error: (value - target).abs() / target,
            err_estimate: err,
            iterations,
            scan,
            monotone,
            multi_root,
            table: Vec::new(),
        }
    };
    if (v0 - target).abs() <= cfg.volume_rel_tol * target || target >= v0 {
        // at or above the ρ = 0 volume, within the admitted range
        return Ok(done(0.0, v0, e0, 1, vec![(0.0, v0)]));
    }
    let (scan, bracket) = scan_down(&f, (0.0, v0), 0.125, target)?;
    let root = bisect_decreasing(f, bracket, target, cfg.volume_rel_tol, cfg.max_bisections)?;
    let iterations = scan.len() + root.iterations;
    Ok(done(root.x, root.value, root.err, iterations, scan))
}

fn table_entry(k: f64, cfg: &ShootingConfig, cache: Option<&VolumeCache>) -> Result<TableEntry> {
    let icfg = &cfg.integrator;
    let key = cache_key(3, k, icfg.r_max, icfg.rel_tol, cfg.bracket_tol);
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        return Ok(TableEntry {
            k,
            eps_star: hit.eps_star,
            eps_lo: hit.eps_lo,
            volume: hit.volume,
            cache_hit: true,
        });
    }
    let ce = critical_eps(k, cfg, cfg.bracket_tol)?;
    let vcfg = IntegratorConfig {
        precision: ce.precision,
        ..icfg.clone()
    };
    let v = volume_of_jet(EquationSpec::TRIHARMONIC, &Jet::k_eps(k, ce.eps_lo)?, &vcfg)?;
    if let Some(c) = cache {
        c.insert(CacheEntry {
            m: 3,
            k,
            horizon: icfg.r_max,
            rel_tol: icfg.rel_tol,
            bracket_tol: cfg.bracket_tol,
            eps_star: ce.eps_star,
            eps_lo: ce.eps_lo,
            volume: v.total,
        })?;
    }
    Ok(TableEntry {
        k,
        eps_star: ce.eps_star,
        eps_lo: ce.eps_lo,
        volume: v.total,
        cache_hit: false,
    })
}

/// Volumes at the entire end of the `ε_k*` bracket for every tabulated `k`,
/// computed in parallel and sorted by `k`.
pub fn volume_table(cfg: &ShootingConfig) -> Result<Vec<TableEntry>> {
    let cache = match &cfg.cache_dir {
        Some(dir) => Some(VolumeCache::open(dir)?),
        None => None,
    };
    let mut table = cfg
        .k_table
        .par_iter()
        .map(|&k| table_entry(k, cfg, cache.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    table.sort_by(|a, b| a.k.total_cmp(&b.k));
    Ok(table)
}

fn prescribe_m3(target: f64, cfg: &ShootingConfig) -> Result<VolumeSolve> {
    let spec = EquationSpec::TRIHARMONIC;
    let table = volume_table(cfg)?;
    let Some(entry) = table.iter().find(|e| e.volume >= target).cloned() else {
        let last = table.last();
        return Err(Error::TableExhausted {
            target,
            max_k: last.map_or(f64::NAN, |e| e.k),
            max_volume: last.map_or(f64::NAN, |e| e.volume),
        });
    };
    let k = entry.k;
    let icfg = &cfg.integrator;
    let f = |lap1: f64| -> Result<(f64, f64)> {
        let v = volume_of_jet(spec, &Jet::new(spec, vec![k, lap1, 1.0])?, icfg)?;
        Ok((v.total, v.err_estimate))
    };
    let x_lo = -entry.eps_lo;
    let (scan, bracket, first) = if (entry.volume - target).abs() <= cfg.volume_rel_tol * target {
        (vec![(x_lo, entry.volume)], None, Some(x_lo))
    } else {
        let x0 = 1f64.max(x_lo + 1.0);
        let (scan, bracket) = scan_down(&f, (x_lo, entry.volume), x0, target)?;
        (scan, Some(bracket), None)
    };
    let (lap1, value, err, iters) = match (bracket, first) {
        (Some(b), _) => {
            let root = bisect_decreasing(f, b, target, cfg.volume_rel_tol, cfg.max_bisections)?;
            (root.x, root.value, root.err, root.iterations)
        }
        (None, Some(x)) => {
            let (v, e) = f(x)?;
            (x, v, e, 0)
        }
        (None, None) => unreachable!(),
    };
    let (monotone, multi_root) = scan_flags(&scan, target);
    Ok(VolumeSolve {
        m: 3,
        target,
        parameter: VolumeParameter::KLap { k, lap1 },
        achieved: value,
        rel_error: (value - target).abs() / target,
        err_estimate: err,
        iterations: scan.len() + iters,
        scan,
        monotone,
        multi_root,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m2_target_above_lambda_star_is_out_of_range() {
        let cfg = ShootingConfig::for_spec(EquationSpec::BIHARMONIC);
        let err = prescribe_volume(EquationSpec::BIHARMONIC, 25.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfRange { .. }));
    }

    #[test]
    fn non_positive_target_rejected() {
        let cfg = ShootingConfig::for_spec(EquationSpec::TRIHARMONIC);
        assert!(prescribe_volume(EquationSpec::TRIHARMONIC, 0.0, &cfg).is_err());
    }

    #[test]
    fn scan_flags_detect_recrossing() {
        let scan = [(0.0, 10.0), (1.0, 4.0), (2.0, 6.0), (4.0, 1.0)];
        assert_eq!(scan_flags(&scan, 5.0), (false, true));
        let mono = [(0.0, 10.0), (1.0, 4.0), (2.0, 1.0)];
        assert_eq!(scan_flags(&mono, 5.0), (true, false));
    }

    #[test]
    fn table_exhausted_for_tiny_table() {
        let mut cfg = ShootingConfig::for_spec(EquationSpec::TRIHARMONIC);
        cfg.k_table = vec![10.0];
        cfg.bracket_tol = 1e-4;
        let err = prescribe_volume(EquationSpec::TRIHARMONIC, 1e4, &cfg).unwrap_err();
        assert!(matches!(err, Error::TableExhausted { max_k, .. } if max_k == 10.0));
    }
}
