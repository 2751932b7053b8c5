use std::f64::consts::PI;

use kr_morse::critical::{find_critical_points, newton, CriticalPoint, NewtonOptions, OrbitKind, SearchConfig};
use kr_morse::dynamics::{conservation_report, integrate, velocity, DynamicsConfig, Integrator};
use kr_morse::geometry::{DomainSpec, PerturbationField, Point};
use kr_morse::green::{BackendChoice, GreenEngine};
use kr_morse::kr::{f_omega, Configuration, InteractionSpec, VortexStrengths};
use kr_morse::shape::{continue_critical_point, dgradf_shape, ContinuationOptions, ShapeError};

const KR: InteractionSpec = InteractionSpec::KirchhoffRouth;

fn disk(nodes: usize) -> GreenEngine {
    GreenEngine::build(&DomainSpec::unit_disk(), nodes, BackendChoice::Auto).unwrap()
}

fn lam(v: &[f64]) -> VortexStrengths {
    VortexStrengths::new(v.to_vec()).unwrap()
}

fn dipole_radius() -> f64 {
    (5f64.sqrt() - 2.0).sqrt()
}

fn dipole_point(engine: &GreenEngine) -> CriticalPoint {
    let a = dipole_radius();
    let start = Configuration(vec![Point::new(a + 0.02, 0.01), Point::new(-a + 0.01, -0.01)]);
    let out = newton(engine, &lam(&[1.0, -1.0]), &KR, &start, &NewtonOptions::default()).unwrap();
    CriticalPoint::from_outcome(engine.domain(), out).unwrap()
}

#[test]
fn refined_discretization_keeps_critical_points() {
    let domain = DomainSpec::unit_disk().apply_perturbation(&PerturbationField::cos_mode(3), 0.05).unwrap();
    let tol = 1e-10;
    let coarse = GreenEngine::build(&domain, 256, BackendChoice::Integral).unwrap();
    let fine = GreenEngine::build(&domain, 512, BackendChoice::Integral).unwrap();
    let config = SearchConfig { starts: 20, tolerance: tol, ..SearchConfig::for_domain(&domain) };
    let report = find_critical_points(&coarse, &lam(&[1.0]), &KR, &config).unwrap();
    assert!(!report.points.is_empty());
    for p in &report.points {
        let g = f_omega(&fine, &lam(&[1.0]), &KR, &p.configuration, 0.0).unwrap().gradient;
        assert!(g.norm() <= 10.0 * tol, "residual {:.3e} on the refined engine", g.norm());
    }
}

#[test]
fn doubling_starts_keeps_the_critical_set() {
    let engine = disk(256);
    let domain = engine.domain().clone();
    for strengths in [lam(&[1.0]), lam(&[1.0, 1.0])] {
        let few = find_critical_points(&engine, &strengths, &KR, &SearchConfig { starts: 50, ..SearchConfig::for_domain(&domain) }).unwrap();
        let many = find_critical_points(&engine, &strengths, &KR, &SearchConfig { starts: 100, ..SearchConfig::for_domain(&domain) }).unwrap();
        assert_eq!(few.points.len(), many.points.len());
        for p in &few.points {
            let near = many.points.iter().any(|q| (p.configuration.to_vector() - q.configuration.to_vector()).norm() < 1e-6);
            assert!(near);
        }
    }
    let a = dipole_radius();
    let config = SearchConfig { starts: 100, ..SearchConfig::for_domain(&domain) };
    for p in &find_critical_points(&engine, &lam(&[1.0, -1.0]), &KR, &config).unwrap().points {
        for q in p.configuration.points() {
            assert!((q.norm() - a).abs() < 1e-8);
        }
        assert_eq!(p.orbit.kind, OrbitKind::RotationOrbit);
    }
}

#[test]
fn rotated_dipole_is_critical() {
    let engine = disk(256);
    let p = dipole_point(&engine);
    for angle in [0.3, 1.0, 2.5] {
        let (c, s) = (f64::cos(angle), f64::sin(angle));
        let rotated = Configuration(p.configuration.points().iter().map(|q| Point::new(c * q.x - s * q.y, s * q.x + c * q.y)).collect());
        let g = f_omega(&engine, &lam(&[1.0, -1.0]), &KR, &rotated, 0.0).unwrap().gradient;
        assert!(g.norm() < 1e-9, "residual {:.3e} at angle {angle}", g.norm());
    }
}

#[test]
fn isotropic_field_moves_dipole_along_no_orbit_direction() {
    // A constant normal velocity is a dilation near the boundary; its first-order
    // effect on grad f must be orthogonal to the rotation tangent.
    let engine = disk(256);
    let p = dipole_point(&engine);
    let field = PerturbationField::normal_fourier(vec![1.0], vec![]);
    let d = dgradf_shape(&engine, &lam(&[1.0, -1.0]), &KR, &p.configuration, &field).unwrap();
    let tangent = Configuration(p.configuration.points().iter().map(|q| Point::new(-q.y, q.x)).collect()).to_vector();
    assert!(d.dot(&tangent.normalize()).abs() <= 1e-8 * d.norm().max(1.0));
}

#[test]
fn radial_field_keeps_the_center_critical() {
    let engine = disk(256);
    let origin = Configuration(vec![Point::new(0.0, 0.0)]);
    let field = PerturbationField::normal_fourier(vec![0.7], vec![]);
    let d = dgradf_shape(&engine, &lam(&[1.0]), &KR, &origin, &field).unwrap();
    assert!(d.norm() <= 1e-8, "{:.3e}", d.norm());
}

#[test]
fn fields_moving_interior_points_are_rejected() {
    let engine = disk(256);
    let origin = Configuration(vec![Point::new(0.0, 0.0)]);
    let err = dgradf_shape(&engine, &lam(&[1.0]), &KR, &origin, &PerturbationField::identity_dilation());
    assert!(matches!(err, Err(ShapeError::UnsupportedField { index: 0, .. })));
}

#[test]
fn trivial_continuation_returns_the_start() {
    let engine = disk(256);
    let p = dipole_point(&engine);
    let trace = continue_critical_point(
        engine.domain(),
        &lam(&[1.0, -1.0]),
        &KR,
        &PerturbationField::cos_mode(3),
        &[0.0],
        &p,
        &ContinuationOptions::default(),
    )
    .unwrap();
    assert!(trace.is_complete());
    assert_eq!(trace.steps.len(), 1);
    let moved = (trace.steps[0].configuration.to_vector() - p.configuration.to_vector()).norm();
    assert!(moved <= 1e-10, "{moved:.3e}");
}

#[test]
fn continuation_regression_margin() {
    let engine = disk(256);
    let a = dipole_radius();
    let start = Configuration(vec![Point::new(a, 0.0), Point::new(-a, 0.0)]);
    let out = newton(&engine, &lam(&[1.0, -1.0]), &KR, &start, &NewtonOptions::default()).unwrap();
    let p = CriticalPoint::from_outcome(engine.domain(), out).unwrap();
    let grid: Vec<f64> = (0..=10).map(|i| 0.005 * i as f64).collect();
    let trace = continue_critical_point(
        engine.domain(),
        &lam(&[1.0, -1.0]),
        &KR,
        &PerturbationField::cos_mode(3),
        &grid,
        &p,
        &ContinuationOptions::default(),
    )
    .unwrap();
    assert!(trace.is_complete(), "{:?}", trace.diagnostic);
    let last = trace.steps.last().unwrap().min_abs_eigenvalue;
    assert!((last - 2.0724068433e-2).abs() <= 1e-6, "{last:.10e}");
}

#[test]
fn midpoint_is_time_reversible() {
    let engine = disk(256);
    let x0 = Configuration(vec![Point::new(0.3, 0.1), Point::new(-0.2, 0.4)]);
    let cfg = DynamicsConfig { integrator: Integrator::ImplicitMidpoint, dt: 0.01, horizon: 1.0, ..Default::default() };
    let fwd = integrate(&engine, &lam(&[1.0, 0.5]), &KR, &x0, &cfg).unwrap();
    let end = fwd.configurations.last().unwrap();
    let back = integrate(&engine, &lam(&[-1.0, -0.5]), &KR, end, &cfg).unwrap();
    let err = (back.configurations.last().unwrap().to_vector() - x0.to_vector()).norm();
    assert!(err <= 1e-8, "{err:.3e}");
}

#[test]
fn equal_pair_conserves_angular_impulse() {
    let engine = disk(256);
    let x0 = Configuration(vec![Point::new(0.4, 0.0), Point::new(-0.1, 0.3)]);
    let cfg = DynamicsConfig { dt: 0.005, horizon: 2.0, ..Default::default() };
    let traj = integrate(&engine, &lam(&[1.0, 1.0]), &KR, &x0, &cfg).unwrap();
    assert!(traj.diagnostic.is_none());
    let drift = conservation_report(&traj, true).angular_impulse_drift.unwrap();
    assert!(drift <= 1e-8, "{drift:.3e}");
}

#[test]
fn single_vortex_conserves_energy() {
    let engine = disk(256);
    let x0 = Configuration(vec![Point::new(0.5, 0.0)]);
    let cfg = DynamicsConfig { dt: 0.01, horizon: 2.0 * PI * PI * 0.75, ..Default::default() };
    let traj = integrate(&engine, &lam(&[1.0]), &KR, &x0, &cfg).unwrap();
    let drift = conservation_report(&traj, true).hamiltonian_drift;
    assert!(drift <= 1e-8, "{drift:.3e}");
    let end = traj.configurations.last().unwrap().points()[0];
    assert!((end - Point::new(0.5, 0.0)).norm() < 1e-3);
}

#[test]
fn equilibria_stay_put() {
    let engine = disk(256);
    let origin = Configuration(vec![Point::new(0.0, 0.0)]);
    assert!(velocity(&engine, &lam(&[1.0]), &KR, &origin).unwrap().norm() <= 1e-12);
    for integrator in [Integrator::Rk4, Integrator::ImplicitMidpoint] {
        let cfg = DynamicsConfig { integrator, dt: 0.05, horizon: 10.0, ..Default::default() };
        let traj = integrate(&engine, &lam(&[1.0]), &KR, &origin, &cfg).unwrap();
        for x in &traj.configurations {
            assert!(x.points()[0].norm() <= 1e-6);
        }
    }
}
