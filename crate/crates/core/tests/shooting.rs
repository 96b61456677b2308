use nbody_returns::dynamics::Problem;
use nbody_returns::harness::{oracle_discrepancy, GoldenError, GoldenTable};
use nbody_returns::integrator::{
    integrate, integrate_reduced, FailureKind, IntegratorConfig, ReducedSystem,
};
use nbody_returns::shooting::{err, periodicity_check, residual, ReturnSpec, Unknowns};
use std::f64::consts::PI;

fn n6_row(deg: f64) -> (Unknowns, ReturnSpec) {
    let table = GoldenTable::builtin(Problem::SixBody);
    let row = table.row(deg).unwrap();
    (row.z, row.spec(Problem::SixBody))
}

#[test]
fn residual_is_continuous_near_a_solution() {
    let cfg = IntegratorConfig::default();
    let (z, spec) = n6_row(90.0);
    let base = err(&z, &spec, &cfg);
    let arr = z.to_array();
    for i in 0..6 {
        for sign in [-1.0, 1.0] {
            let mut p = arr;
            p[i] += sign * 1e-8;
            let e = err(&Unknowns::from_slice(&p), &spec, &cfg);
            assert!((e - base).abs() <= 1e-3, "coordinate {i}: {base} -> {e}");
        }
    }
}

#[test]
fn inadmissible_points_score_infinity() {
    let cfg = IntegratorConfig::default();
    let (z, spec) = n6_row(120.0);
    for (i, bad) in [(0, 0.0), (1, -1.0), (4, -0.5), (5, 0.0), (2, f64::NAN)] {
        let mut p = z.to_array();
        p[i] = bad;
        assert_eq!(err(&Unknowns::from_slice(&p), &spec, &cfg), f64::INFINITY);
    }
}

#[test]
fn failed_integrations_score_infinity() {
    let (z, spec) = n6_row(120.0);
    let tiny_budget = IntegratorConfig {
        max_steps: 3,
        ..IntegratorConfig::default()
    };
    let r = residual(&z, &spec, &tiny_budget);
    assert!(!r.evaluable);
    assert_eq!(r.err(), f64::INFINITY);

    // Radial infall with no angular momentum collides.
    let collide = Unknowns {
        x1: 1.0,
        x2: 1.0,
        x3: 0.0,
        x4: 0.0,
        m2: 1.0,
        period: 50.0,
    };
    let out = integrate_reduced(
        &ReducedSystem::new(Problem::FourBody, 1.0),
        &collide.initial_state(),
        collide.period,
        &IntegratorConfig::default(),
    );
    assert!(matches!(
        out.failure().map(|f| f.kind),
        Some(FailureKind::Collision | FailureKind::StepUnderflow | FailureKind::NonFinite)
    ));
    assert_eq!(err(&collide, &ReturnSpec::new(Problem::FourBody, PI / 3.0), &IntegratorConfig::default()), f64::INFINITY);
}

#[test]
fn rk4_error_drops_sixteenfold_when_step_halves() {
    let (z, _) = n6_row(90.0);
    let sys = ReducedSystem::new(Problem::SixBody, z.m2);
    let y0 = z.initial_state().to_array();
    let reference = integrate(&sys, &y0, z.period, &IntegratorConfig::adaptive(1e-14))
        .result
        .unwrap();
    let error = |n: f64| {
        let y = integrate(&sys, &y0, z.period, &IntegratorConfig::fixed_rk4(z.period / n))
            .result
            .unwrap();
        y.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let coarse = error(1000.0);
    let fine = error(2000.0);
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "coarse {coarse:e}, fine {fine:e}, ratio {ratio}");
}

#[test]
fn reduced_flow_matches_cartesian_flow() {
    let cfg = IntegratorConfig::default();
    let table = GoldenTable::builtin(Problem::SixBody);
    for deg in [60.0, 180.0] {
        let z = table.row(deg).unwrap().z;
        let d = oracle_discrepancy(Problem::SixBody, &z, z.period, 400, &cfg).unwrap();
        assert!(d < 1e-7, "{deg}: {d:e}");
    }
    let z = GoldenTable::builtin(Problem::FourBody).row(60.0).unwrap().z;
    let d = oracle_discrepancy(Problem::FourBody, &z, z.period, 400, &cfg).unwrap();
    assert!(d < 1e-7, "n=4: {d:e}");
}

#[test]
fn massless_second_group_matches_cartesian_flow() {
    let cfg = IntegratorConfig::default();
    let mut z = GoldenTable::builtin(Problem::SixBody).row(90.0).unwrap().z;
    z.m2 = 0.0;
    let d = oracle_discrepancy(Problem::SixBody, &z, z.period, 200, &cfg).unwrap();
    assert!(d < 1e-7, "{d:e}");
}

#[test]
fn six_body_rows_return_with_a_three_cycle() {
    let cfg = IntegratorConfig::default();
    let (z, spec) = n6_row(150.0);
    let report = periodicity_check(&z, &spec, &cfg).unwrap();
    assert!(report.max_mismatch < 1e-5);
    assert_eq!(report.cycle_notation(), "(4 5 6)");
}

#[test]
fn tampered_tables_are_rejected() {
    let text = GoldenTable::builtin_text(Problem::SixBody);
    let tampered = text.replacen("1.921530148592 ", "1.921530148593 ", 1);
    assert_ne!(text, tampered);
    let table = GoldenTable::parse(Problem::SixBody, &tampered).unwrap();
    assert!(matches!(table.check_integrity(), Err(GoldenError::Checksum { .. })));
    assert!(GoldenTable::builtin(Problem::SixBody).check_integrity().is_ok());
    assert!(GoldenTable::builtin(Problem::FourBody).check_integrity().is_ok());
    assert!(GoldenTable::parse(Problem::SixBody, "30 1 2 3\n").is_err());
}
