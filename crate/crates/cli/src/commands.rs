use polyshoot_core::oracle::shifted_volume_quadrature;
use polyshoot_core::shooting::{volume_table, TableEntry};
use polyshoot_core::*;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, json, num, opt, Csv};
use crate::Usage;

#[derive(Debug, Serialize)]
pub struct Check {
    pub check: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn at_most(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            check: check.into(),
            value: Some(value),
            tolerance,
            pass: value.abs() <= tolerance,
            detail: None,
        }
    }

    fn failed(check: impl Into<String>, tolerance: f64, err: impl ToString) -> Self {
        Check {
            check: check.into(),
            value: None,
            tolerance,
            pass: false,
            detail: Some(err.to_string()),
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    checks: Vec<Check>,
    pass: bool,
}

/// Largest relative deviation of `u` from the closed form on `[r0, r_hi]`.
fn tracking(cf: ClosedForm, cfg: &RunConfig, r_hi: f64) -> Result<f64> {
    let icfg = cfg.integrator().with_horizon(r_hi);
    let traj = integrate(cf.spec(), &cf.jet(), &icfg)?;
    if !traj.verdict.is_entire() {
        return Err(Error::NotEntire(traj.verdict.to_string()));
    }
    Ok(traj
        .samples
        .iter()
        .filter(|s| s.r >= icfg.launch_radius)
        .map(|s| (s.u() - cf.lap(0, s.r)).abs() / cf.lap(0, s.r))
        .fold(0.0, f64::max))
}

/// Returns whether every check passed.
pub fn verify(cfg: &RunConfig) -> anyhow::Result<bool> {
    let radii = [0.0, 0.1, 1.0, 10.0, 100.0];
    let mut checks = Vec::new();
    let (cf, res_tol, track_to) = match cfg.m {
        2 => (ClosedForm::U0, 1e-8, 50.0),
        _ => (ClosedForm::U1, 1e-6, 10.0),
    };
    let name = if cfg.m == 2 { "U0" } else { "U1" };
    for r in radii {
        checks.push(Check::at_most(
            format!("{name} residual r={r}"),
            cf.residual(r),
            res_tol,
        ));
    }
    let track_tol = 10.0 * cfg.rel_tol;
    let label = format!("{name} tracking on [r0, {track_to}]");
    checks.push(match tracking(cf, cfg, track_to) {
        Ok(dev) => Check::at_most(label, dev, track_tol),
        Err(e) => Check::failed(label, track_tol, e),
    });
    if cfg.m == 2 {
        let ls = lambda_star();
        let (quad, quad_err) = shifted_volume_quadrature(15f64.powf(-0.5), 1e-12);
        let rel = (quad - ls).abs() / ls;
        checks.push(Check {
            check: "lambda_star".into(),
            value: Some(ls),
            tolerance: 1e-10,
            pass: rel <= 1e-10,
            detail: Some(format!(
                "quadrature {quad} (±{quad_err:.1e}), relative difference {rel:.1e}"
            )),
        });
        let label = "U0 volume vs lambda_star";
        checks.push(
            match volume_of_jet(EquationSpec::BIHARMONIC, &cf.jet(), &cfg.integrator()) {
                Ok(v) => Check {
                    detail: Some(format!("volume {} ± {:.1e}", v.total, v.err_estimate)),
                    ..Check::at_most(label, (v.total - ls) / ls, 1e-4)
                },
                Err(e) => Check::failed(label, 1e-4, e),
            },
        );
    }
    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        command: "verify",
        config: cfg,
        checks,
        pass,
    };
    emit(cfg.out.as_deref(), &json(&report)?)?;
    Ok(pass)
}

pub struct JetArgs {
    pub rho: Option<f64>,
    pub k: Option<f64>,
    pub eps: Option<f64>,
    pub jet: Option<Vec<f64>>,
}

fn jet_from(spec: EquationSpec, a: &JetArgs) -> anyhow::Result<Jet> {
    let jet = match (spec.m(), a.rho, a.k, a.eps, &a.jet) {
        (_, None, None, None, Some(values)) => Jet::new(spec, values.clone()),
        (2, Some(rho), None, None, None) => Jet::rho_family(rho),
        (3, None, Some(k), Some(eps), None) => Jet::k_eps(k, eps),
        _ => {
            return Err(Usage(format!(
                "give the initial data as --jet, or as {} for m = {}",
                if spec.m() == 2 {
                    "--rho"
                } else {
                    "--k with --eps"
                },
                spec.m()
            ))
            .into())
        }
    };
    jet.map_err(|e| Usage(e.to_string()).into())
}

pub fn shoot(cfg: &RunConfig, args: &JetArgs) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let jet = jet_from(spec, args)?;
    let traj = integrate(spec, &jet, &cfg.integrator())?;
    let names = ["r", "u", "u1", "lap_u", "lap_u1", "lap2_u", "lap2_u1"];
    let mut csv = Csv::new("shoot", cfg, &names[..1 + spec.state_dim()])?;
    for s in &traj.samples {
        let mut row = vec![num(s.r)];
        row.extend(s.y.iter().map(|v| num(*v)));
        csv.row(&row);
    }
    csv.comment(&format!("verdict {}", traj.verdict));
    emit(cfg.out.as_deref(), &csv.into_bytes())?;

    let mut summary = format!("verdict: {}\n", traj.verdict);
    match &traj.verdict {
        Verdict::EntirePositive { growth_exponent } => {
            summary.push_str(&format!("growth exponent: {growth_exponent}\n"))
        }
        Verdict::Collapsed { r_star } => summary.push_str(&format!("r*: {r_star}\n")),
        Verdict::Inconclusive { .. } => {}
    }
    if cfg.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    if let Verdict::Inconclusive { reason } = traj.verdict {
        return Err(Error::Inconclusive(reason).into());
    }
    Ok(())
}

/// Grid `a, a + step, …, ≤ b` from `a:b:step`.
pub fn parse_range(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || {
        Usage(format!(
            "range must be a:b:step with step > 0, got {text:?}"
        ))
    };
    let [a, b, step] = parts.as_slice() else {
        return Err(bad().into());
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
    if step.is_nan() || step <= 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(bad().into());
    }
    if a > b {
        return Err(Usage(format!("range {text:?} is empty")).into());
    }
    let n = ((b - a) / step * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

pub struct SweepArgs {
    pub rho: Option<String>,
    pub k: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub at_critical: bool,
    pub bracket_tol: f64,
}

struct Point {
    verdict: &'static str,
    volume: Option<VolumeEstimate>,
    r_star: Option<f64>,
}

fn evaluate(spec: EquationSpec, jet: &Jet, icfg: &IntegratorConfig) -> Result<Point> {
    let traj = integrate(spec, jet, icfg)?;
    let volume = match &traj.verdict {
        Verdict::EntirePositive { .. } => Some(volume(spec, &traj)?),
        _ => None,
    };
    Ok(Point {
        verdict: traj.verdict.label(),
        volume,
        r_star: traj.r_star(),
    })
}

pub fn sweep(cfg: &RunConfig, args: &SweepArgs) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let icfg = cfg.integrator();
    let csv = match (spec.m(), &args.rho, &args.k) {
        (2, Some(range), None) => {
            let mut grid = parse_range(range)?;
            grid.sort_by(f64::total_cmp);
            let points = grid
                .par_iter()
                .map(|&rho| evaluate(spec, &Jet::rho_family(rho)?, &icfg))
                .collect::<Result<Vec<_>>>()?;
            let ls = lambda_star();
            let mut csv = Csv::new(
                "sweep",
                cfg,
                &[
                    "rho",
                    "verdict",
                    "volume",
                    "err_estimate",
                    "lambda_star",
                    "r_star",
                ],
            )?;
            for (rho, p) in grid.iter().zip(&points) {
                csv.row(&[
                    num(*rho),
                    p.verdict.into(),
                    opt(p.volume.as_ref().map(|v| v.total)),
                    opt(p.volume.as_ref().map(|v| v.err_estimate)),
                    num(ls),
                    opt(p.r_star),
                ]);
            }
            csv
        }
        (3, None, Some(ks)) if !ks.is_empty() => {
            let mut ks = ks.clone();
            ks.sort_by(f64::total_cmp);
            ks.dedup();
            match (args.at_critical, args.eps) {
                (true, None) => {
                    let scfg = ShootingConfig {
                        k_table: ks,
                        bracket_tol: args.bracket_tol,
                        ..cfg.shooting()
                    };
                    let table = volume_table(&scfg)?;
                    let mut csv = Csv::new(
                        "sweep",
                        cfg,
                        &["k", "eps_star", "eps_lo", "volume", "cache_hit"],
                    )?;
                    for TableEntry {
                        k,
                        eps_star,
                        eps_lo,
                        volume,
                        cache_hit,
                    } in table
                    {
                        csv.row(&[
                            num(k),
                            num(eps_star),
                            num(eps_lo),
                            num(volume),
                            cache_hit.to_string(),
                        ]);
                    }
                    csv
                }
                (false, Some(eps)) => {
                    let points = ks
                        .par_iter()
                        .map(|&k| evaluate(spec, &Jet::k_eps(k, eps)?, &icfg))
                        .collect::<Result<Vec<_>>>()?;
                    let mut csv = Csv::new(
                        "sweep",
                        cfg,
                        &["k", "eps", "verdict", "volume", "err_estimate", "r_star"],
                    )?;
                    for (k, p) in ks.iter().zip(&points) {
                        csv.row(&[
                            num(*k),
                            num(eps),
                            p.verdict.into(),
                            opt(p.volume.as_ref().map(|v| v.total)),
                            opt(p.volume.as_ref().map(|v| v.err_estimate)),
                            opt(p.r_star),
                        ]);
                    }
                    csv
                }
                _ => {
                    return Err(Usage(
                        "m = 3 sweeps take --k with exactly one of --at-critical or --eps".into(),
                    )
                    .into())
                }
            }
        }
        (2, ..) => return Err(Usage("m = 2 sweeps take --rho a:b:step".into()).into()),
        _ => return Err(Usage("m = 3 sweeps take a non-empty --k list".into()).into()),
    };
    emit(cfg.out.as_deref(), &csv.into_bytes())
}

#[derive(Serialize)]
struct CriticalReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    critical: CriticalEps,
    residual: polyshoot_core::shooting::CriticalResidual,
    /// Volume at `eps_lo`, recorded in the cache when one is configured.
    table_entry: Option<TableEntry>,
}

pub fn critical(cfg: &RunConfig, k: f64, bracket_tol: f64) -> anyhow::Result<()> {
    if cfg.m != 3 {
        return Err(Usage("critical-eps is defined for m = 3".into()).into());
    }
    let scfg = ShootingConfig {
        bracket_tol,
        k_table: vec![k],
        ..cfg.shooting()
    };
    let ce = critical_eps(k, &scfg, bracket_tol)?;
    let residual = critical_eps_residual(&ce, &scfg)?;
    let table_entry = match scfg.cache_dir {
        Some(_) => volume_table(&scfg)?.pop(),
        None => None,
    };
    let report = CriticalReport {
        command: "critical-eps",
        config: cfg,
        critical: ce,
        residual,
        table_entry,
    };
    emit(cfg.out.as_deref(), &json(&report)?)
}

pub struct PrescribeArgs {
    pub lambda: f64,
    pub volume_tol: f64,
    pub bracket_tol: f64,
    pub k_table: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct PrescribeReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    solve: VolumeSolve,
}

pub fn prescribe(cfg: &RunConfig, args: &PrescribeArgs) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let defaults = cfg.shooting();
    let scfg = ShootingConfig {
        volume_rel_tol: args.volume_tol,
        bracket_tol: args.bracket_tol,
        k_table: args.k_table.clone().unwrap_or(defaults.k_table.clone()),
        ..defaults
    };
    let solve = prescribe_volume(spec, args.lambda, &scfg)?;
    let report = PrescribeReport {
        command: "prescribe-volume",
        config: cfg,
        solve,
    };
    emit(cfg.out.as_deref(), &json(&report)?)
}
