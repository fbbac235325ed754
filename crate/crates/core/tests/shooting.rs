use polyshoot_core::shooting::{eps_upper_bound, volume_table, DoomReason, VolumeParameter};
use polyshoot_core::*;

const M2: EquationSpec = EquationSpec::BIHARMONIC;
const M3: EquationSpec = EquationSpec::TRIHARMONIC;

fn m3() -> ShootingConfig {
    ShootingConfig::for_spec(M3)
}

#[test]
fn critical_eps_k10_bracket_and_envelope() {
    let cfg = m3();
    let ce = critical_eps(10.0, &cfg, 1e-6).unwrap();
    assert!(ce.width <= 1e-6 && ce.eps_lo < ce.eps_hi);
    assert!(ce.eps_star > 0.0 && ce.eps_star <= eps_upper_bound(10.0));
    assert!((ce.eps_star - 3.0751762).abs() < 1e-6, "{}", ce.eps_star);

    // every recorded bracket still classifies the same way
    let (lo, hi) = *ce.history.last().unwrap();
    let at =
        |eps: f64| fate(&integrate(M3, &Jet::k_eps(10.0, eps).unwrap(), &cfg.integrator).unwrap());
    assert!(at(lo).is_entire());
    assert!(at(hi).is_doomed());
    for w in ce.history.windows(2) {
        assert!(w[1].0 >= w[0].0 && w[1].1 <= w[0].1);
    }

    let traj = integrate(M3, &Jet::k_eps(10.0, ce.eps_lo).unwrap(), &cfg.integrator).unwrap();
    for s in &traj.samples {
        let upper = 10.0 - ce.eps_lo * s.r * s.r / 6.0 + s.r.powi(4) / 120.0;
        assert!(s.u() <= upper + 1e-6, "upper envelope fails at r = {}", s.r);
        assert!(s.u() > 0.0);
    }
    for w in traj.samples.windows(2) {
        assert!(w[1].lap(2) <= w[0].lap(2) + 1e-8 * (1.0 + w[0].max_abs()));
    }
}

#[test]
fn critical_limit_identity() {
    let cfg = m3();
    let ce = critical_eps(10.0, &cfg, 1e-6).unwrap();
    let res = critical_eps_residual(&ce, &cfg).unwrap();
    assert!(
        res.partial_integral >= 0.9 && res.partial_integral < 1.0,
        "{res:?}"
    );

    // at ε = 0 the limit of Δ²u stays well above zero
    let zero = integrate(M3, &Jet::k_eps(10.0, 0.0).unwrap(), &cfg.integrator).unwrap();
    let l0 = zero.last().lap(2);
    assert!(l0 >= 2.0 / 3.0, "{l0}");
    assert!(res.lap2_at_horizon.abs() < 0.1 * l0);

    // the partial integral rises towards 1 with the horizon
    let mut long = cfg.clone();
    long.integrator.r_max *= 2.0;
    let res_long = critical_eps_residual(&ce, &long).unwrap();
    assert!(res_long.partial_integral > res.partial_integral);
    assert!(res_long.partial_integral < 1.0 + 1e-6);
}

#[test]
fn critical_eps_is_robust_to_horizon() {
    let cfg = m3();
    let a = critical_eps(10.0, &cfg, 1e-6).unwrap();
    let mut long = cfg.clone();
    long.integrator.r_max *= 2.0;
    let b = critical_eps(10.0, &long, 1e-6).unwrap();
    assert!(
        (a.eps_star - b.eps_star).abs() < 2e-6,
        "{} vs {}",
        a.eps_star,
        b.eps_star
    );
}

#[test]
fn critical_eps_grows_with_k() {
    let cfg = m3();
    let e10 = critical_eps(10.0, &cfg, 1e-4).unwrap().eps_star;
    let e20 = critical_eps(20.0, &cfg, 1e-4).unwrap().eps_star;
    assert!(e20 > e10);
    assert!(e20 <= eps_upper_bound(20.0));
}

#[test]
fn m2_collapse_boundary_is_zero() {
    let cfg = ShootingConfig::for_spec(M2);
    let b = collapse_boundary_m2(&cfg).unwrap();
    assert!(b.boundary >= -1e-3 && b.boundary <= 0.0, "{b:?}");
    assert!(b.rho_doomed < b.rho_entire && b.rho_entire <= 0.0);

    let traj = integrate(M2, &Jet::rho_family(-0.3).unwrap(), &cfg.integrator).unwrap();
    assert!(traj.verdict.is_collapsed());
    assert!(matches!(
        fate(&traj),
        Fate::Doomed {
            reason: DoomReason::Collapsed { .. } | DoomReason::SignChange { .. }
        }
    ));
}

#[test]
fn short_horizon_cannot_resolve_boundary() {
    let mut cfg = ShootingConfig::for_spec(M2);
    cfg.integrator.r_max = 1.0;
    cfg.boundary_tol = 1e-4;
    assert!(matches!(
        collapse_boundary_m2(&cfg),
        Err(Error::HorizonTooShort { .. })
    ));
}

#[test]
fn prescribe_m2_at_lambda_star_and_half() {
    let cfg = ShootingConfig::for_spec(M2);
    let ls = lambda_star();
    let top = prescribe_volume(M2, ls, &cfg).unwrap();
    assert_eq!(top.parameter, VolumeParameter::Rho { rho: 0.0 });

    let half = prescribe_volume(M2, 0.5 * ls, &cfg).unwrap();
    let VolumeParameter::Rho { rho } = half.parameter else {
        panic!()
    };
    assert!(rho > 0.0);
    assert!(half.rel_error <= 1e-3);
    assert!(half.monotone && !half.multi_root);
    let check = volume_of_jet(M2, &Jet::rho_family(rho).unwrap(), &cfg.integrator).unwrap();
    assert!((check.total - half.achieved).abs() <= 1e-12 * half.achieved);
}

#[test]
fn prescribe_m2_above_lambda_star_is_out_of_range() {
    let cfg = ShootingConfig::for_spec(M2);
    assert!(matches!(
        prescribe_volume(M2, 25.0, &cfg),
        Err(Error::TargetOutOfRange { .. })
    ));
}

#[test]
fn prescribe_m3_uses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = m3();
    cfg.k_table = vec![10.0, 20.0];
    cfg.bracket_tol = 1e-5;
    cfg.cache_dir = Some(dir.path().to_path_buf());
    let first = prescribe_volume(M3, 1.0, &cfg).unwrap();
    assert!(first.table.iter().all(|e| !e.cache_hit));
    assert!(first.rel_error <= 1e-3);
    let VolumeParameter::KLap { k, .. } = first.parameter else {
        panic!()
    };
    assert_eq!(k, 10.0);

    let second = prescribe_volume(M3, 1.0, &cfg).unwrap();
    assert!(second.table.iter().all(|e| e.cache_hit));
    assert_eq!(first.parameter, second.parameter);

    let table = volume_table(&cfg).unwrap();
    assert!(table[1].volume > table[0].volume);
}
