use std::f64::consts::PI;
use std::sync::OnceLock;

use kr_morse::dynamics::velocity;
use kr_morse::geometry::{DomainSpec, PerturbationField, Point};
use kr_morse::green::{BackendChoice, GreenEngine};
use kr_morse::kr::{f_omega, Configuration, InteractionSpec, VortexStrengths};
use kr_morse::report::csv_float;
use kr_morse::shape::dh_shape;
use proptest::prelude::*;

fn closed() -> &'static GreenEngine {
    static E: OnceLock<GreenEngine> = OnceLock::new();
    E.get_or_init(|| GreenEngine::build(&DomainSpec::unit_disk(), 256, BackendChoice::ClosedForm).unwrap())
}

fn integral() -> &'static GreenEngine {
    static E: OnceLock<GreenEngine> = OnceLock::new();
    E.get_or_init(|| GreenEngine::build(&DomainSpec::unit_disk(), 256, BackendChoice::Integral).unwrap())
}

fn lobed() -> &'static GreenEngine {
    static E: OnceLock<GreenEngine> = OnceLock::new();
    E.get_or_init(|| {
        let d = DomainSpec::unit_disk().apply_perturbation(&PerturbationField::cos_mode(3), 0.05).unwrap();
        GreenEngine::build(&d, 256, BackendChoice::Integral).unwrap()
    })
}

/// Points with `|p| <= r`.
fn point_in(r: f64) -> impl Strategy<Value = Point> {
    (0.0..r, 0.0..2.0 * PI).prop_map(|(rho, t)| Point::new(rho * t.cos(), rho * t.sin()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regular_part_is_symmetric(x in point_in(0.85), y in point_in(0.85)) {
        let a = closed().regular_part(&x, &y).unwrap();
        let b = closed().regular_part(&y, &x).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-10);
        let a = integral().regular_part(&x, &y).unwrap();
        let b = integral().regular_part(&y, &x).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-7);
        prop_assert!((a.hess_xy - b.hess_xy.transpose()).norm() <= 1e-6 * a.hess_xy.norm().max(1e-3));
    }

    #[test]
    fn regular_part_is_harmonic(x in point_in(0.8), y in point_in(0.8)) {
        for engine in [closed(), integral(), lobed()] {
            let e = engine.regular_part(&x, &y).unwrap();
            prop_assert!(e.hess_xx.trace().abs() <= 1e-6 * e.hess_xx.norm().max(1e-300));
            prop_assert!(e.hess_yy.trace().abs() <= 1e-6 * e.hess_yy.norm().max(1e-300));
        }
    }

    #[test]
    fn harmonic_measure_is_a_probability(x in point_in(0.85)) {
        for engine in [closed(), integral()] {
            let t = engine.boundary_normal_derivative(&x).unwrap();
            prop_assert!(t.values.iter().all(|v| *v < 0.0));
            let mass = engine.quadrature().integrate(t.values.iter().copied());
            prop_assert!((1.0 + mass).abs() <= 1e-8);
        }
    }

    #[test]
    fn green_is_positive(x in point_in(0.85), y in point_in(0.85)) {
        prop_assume!((x - y).norm() > 1e-6);
        prop_assert!(closed().green(&x, &y).unwrap() > 0.0);
    }

    #[test]
    fn f_omega_relabeling(a in point_in(0.7), b in point_in(0.7), c in point_in(0.7)) {
        prop_assume!((a - b).norm() > 0.05 && (b - c).norm() > 0.05 && (a - c).norm() > 0.05);
        let lam = VortexStrengths::new(vec![1.0, -0.5, 2.0]).unwrap();
        let perm = VortexStrengths::new(vec![2.0, 1.0, -0.5]).unwrap();
        let x = Configuration(vec![a, b, c]);
        let y = Configuration(vec![c, a, b]);
        let kr = InteractionSpec::KirchhoffRouth;
        let u = f_omega(closed(), &lam, &kr, &x, 0.0).unwrap();
        let v = f_omega(closed(), &perm, &kr, &y, 0.0).unwrap();
        prop_assert!((u.value - v.value).abs() <= 1e-12 * u.value.abs().max(1.0));
    }

    #[test]
    fn velocity_is_orthogonal_to_gradient(a in point_in(0.7), b in point_in(0.7), l in 0.2f64..2.0) {
        prop_assume!((a - b).norm() > 0.05);
        let lam = VortexStrengths::new(vec![1.0, -l]).unwrap();
        let x = Configuration(vec![a, b]);
        let kr = InteractionSpec::KirchhoffRouth;
        let g = f_omega(closed(), &lam, &kr, &x, 0.0).unwrap().gradient;
        let v = velocity(closed(), &lam, &kr, &x).unwrap();
        prop_assert!(v.dot(&g).abs() <= 1e-12 * (1.0 + g.norm() * v.norm()));
    }

    #[test]
    fn dh_linear_and_symmetric(x in point_in(0.6), y in point_in(0.6), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let f1 = PerturbationField::cos_mode(3);
        let f2 = PerturbationField::normal_fourier(vec![0.2, 0.0, 0.5], vec![0.0, 0.3]);
        let combo = PerturbationField::normal_fourier(vec![0.2 * t, 0.0, 0.5 * t, s], vec![0.0, 0.3 * t]);
        for engine in [closed(), integral()] {
            let a = dh_shape(engine, &x, &y, &f1).unwrap();
            let b = dh_shape(engine, &x, &y, &f2).unwrap();
            let c = dh_shape(engine, &x, &y, &combo).unwrap();
            prop_assert!((s * a + t * b - c).abs() <= 1e-10 * (a.abs() + b.abs()).max(1e-6) * (1.0 + s.abs() + t.abs()));
            prop_assert_eq!(dh_shape(engine, &y, &x, &f1).unwrap(), a);
        }
    }

    #[test]
    fn expansion_lowers_robin(x in point_in(0.6), c0 in 0.0f64..1.0, c2 in -0.4f64..0.4) {
        // g = c0 + |c2| + c2 cos 2t >= 0 on the whole boundary.
        let f = PerturbationField::normal_fourier(vec![c0 + c2.abs(), 0.0, c2], vec![]);
        prop_assert!(dh_shape(closed(), &x, &x, &f).unwrap() <= 0.0);
    }

    #[test]
    fn csv_floats_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(csv_float(v).parse::<f64>().unwrap(), v);
    }
}

/// Central differences of `u` with step `h`: gradient and Hessian.
fn differences(u: impl Fn(&[f64; 4]) -> f64, at: [f64; 4], h: f64) -> ([f64; 4], [[f64; 4]; 4]) {
    let shift = |i: usize, d: f64, p: [f64; 4]| {
        let mut q = p;
        q[i] += d;
        q
    };
    let mut g = [0.0; 4];
    let mut hess = [[0.0; 4]; 4];
    for i in 0..4 {
        g[i] = (u(&shift(i, h, at)) - u(&shift(i, -h, at))) / (2.0 * h);
        for j in 0..4 {
            let pp = u(&shift(j, h, shift(i, h, at)));
            let pm = u(&shift(j, -h, shift(i, h, at)));
            let mp = u(&shift(j, h, shift(i, -h, at)));
            let mm = u(&shift(j, -h, shift(i, -h, at)));
            hess[i][j] = (pp - pm - mp + mm) / (4.0 * h * h);
        }
    }
    (g, hess)
}

#[test]
fn derivatives_of_h_converge_at_second_order() {
    for engine in [closed(), lobed()] {
        let at = [0.3, -0.1, -0.2, 0.35];
        let h_of = |p: &[f64; 4]| engine.regular_part(&Point::new(p[0], p[1]), &Point::new(p[2], p[3])).unwrap().value;
        let e = engine.regular_part(&Point::new(at[0], at[1]), &Point::new(at[2], at[3])).unwrap();
        let grad = [e.grad_x.x, e.grad_x.y, e.grad_y.x, e.grad_y.y];
        let mut hess = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = e.hess_xx[(i, j)];
                hess[2 + i][2 + j] = e.hess_yy[(i, j)];
                hess[i][2 + j] = e.hess_xy[(i, j)];
                hess[2 + j][i] = e.hess_xy[(i, j)];
            }
        }
        let errors: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&h| {
                let (g, hh) = differences(h_of, at, h);
                let eg = (0..4).map(|i| (g[i] - grad[i]).abs()).fold(0.0, f64::max);
                let eh = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| (hh[i][j] - hess[i][j]).abs()).fold(0.0, f64::max);
                eg.max(eh)
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.5 || w[1] < 1e-7, "errors {errors:?}");
        }
    }
}

#[test]
fn f_omega_derivatives_match_differences() {
    let lam = VortexStrengths::new(vec![1.0, -0.7]).unwrap();
    let kr = InteractionSpec::KirchhoffRouth;
    let at = [0.3, 0.1, -0.25, 0.2];
    for engine in [closed(), lobed()] {
        let f = |p: &[f64; 4]| f_omega(engine, &lam, &kr, &Configuration::from_slice(p), 0.0).unwrap().value;
        let e = f_omega(engine, &lam, &kr, &Configuration::from_slice(&at), 0.0).unwrap();
        let (g, h) = differences(f, at, 1e-4);
        for i in 0..4 {
            assert!((g[i] - e.gradient[i]).abs() < 1e-6, "gradient {i}");
            for j in 0..4 {
                assert!((h[i][j] - e.hessian[(i, j)]).abs() < 1e-4, "hessian {i} {j}");
            }
        }
    }
}
