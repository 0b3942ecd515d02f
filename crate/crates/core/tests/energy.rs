use approx::assert_relative_eq;
use boostedgs::energy::*;
use boostedgs::solver::{petviashvili, PetviashviliOpts};
use boostedgs::spectral::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump(g: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let w = rng.random_range(0.8..2.0);
    let k = rng.random_range(-1.0..1.0);
    let smooth = Field::from_fn(g, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        Complex64::from_polar((-r2 / (2.0 * w * w)).exp(), k * x[0])
    });
    let values = smooth
        .values()
        .iter()
        .map(|z| z * Complex64::new(1.0 + 0.1 * rng.random::<f64>(), 0.1 * rng.random::<f64>()))
        .collect();
    Field::new(g, values).unwrap()
}

fn params(rng: &mut ChaCha8Rng) -> Params {
    Params {
        dim: 2,
        m: rng.random_range(0.0..2.0),
        v: Velocity([rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0]),
        mu: rng.random_range(-2.0..2.0),
        q: rng.random_range(0.1..0.9),
        a: 1.0,
    }
}

#[test]
fn gradient_matches_central_differences() {
    let g = Grid::new(2, 8.0, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for pair in 0..50 {
        let p = params(&mut rng);
        let f = bump(&g, &mut rng);
        let h = bump(&g, &mut rng).scaled(0.5);
        let grad = energy_gradient(&f, &p).unwrap();
        let analytic = grad.inner(&h).re;
        let t = 1e-4;
        let ep = energy(&f.axpy(t, &h), &p).unwrap().total;
        let em = energy(&f.axpy(-t, &h), &p).unwrap().total;
        let fd = (ep - em) / (2.0 * t);
        let scale = analytic.abs().max(1e-3);
        assert!((fd - analytic).abs() <= 1e-5 * scale, "pair {pair}: fd {fd} vs {analytic}");
    }
}

#[test]
fn energy_components_add_up() {
    let g = Grid::new(2, 8.0, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = params(&mut rng);
    let f = bump(&g, &mut rng);
    let e = energy(&f, &p).unwrap();
    assert_relative_eq!(e.total, e.kinetic - e.power_crit - e.power_sub, max_relative = 1e-14);
    let t = quadratic_form_tmv(&f, p.m, &p.v).unwrap();
    assert_relative_eq!(e.kinetic, t / 2.0, max_relative = 1e-14);
    assert_relative_eq!(e.power_crit, lp_norm_pow(&f, 3.0) / 3.0, max_relative = 1e-14);
}

#[test]
fn params_are_validated() {
    let ok = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 1.0 };
    assert!(ok.validate().is_ok());
    assert!(Params { q: 1.0, ..ok }.validate().is_err());
    assert!(Params { q: 0.0, ..ok }.validate().is_err());
    assert!(Params { a: 0.0, ..ok }.validate().is_err());
    assert!(Params { m: -1.0, ..ok }.validate().is_err());
    assert!(Params { v: Velocity::along_x(1.0), ..ok }.validate().is_err());
    assert!(Params { mu: f64::NAN, ..ok }.validate().is_err());
    assert!(Params { dim: 3, q: 0.7, ..ok }.validate().is_err());
}

#[test]
fn params_reject_unknown_keys() {
    let text = r#"{"dim":2,"m":1,"v":[0,0,0],"mu":0,"q":0.5,"a":1,"extra":3}"#;
    assert!(serde_json::from_str::<Params>(text).is_err());
    let text = r#"{"dim":2,"m":1,"v":[0,0,0],"mu":0,"q":0.5,"a":1}"#;
    assert!(serde_json::from_str::<Params>(text).is_ok());
}

#[test]
fn ground_state_satisfies_identities() {
    let g = Grid::new(2, 16.0, 256).unwrap();
    let v = Velocity::along_x(0.3);
    let r = petviashvili(&g, &v, 1.0, &PetviashviliOpts { boundary_tol: 1.0, ..Default::default() }, None)
        .unwrap();
    let q = r.state();
    let poh = pohozaev_residuals(q, &v).unwrap();
    assert!(poh.max() < 5e-3, "{poh:?}");
    // Q_v solves the equation with m = mu = 0 and lambda = 1.
    let p = Params { dim: 2, m: 0.0, v, mu: 0.0, q: 0.5, a: q.mass() };
    assert!(el_residual(q, &p, 1.0).unwrap() < 1e-8);
    assert_relative_eq!(lagrange_multiplier(q, &p).unwrap(), -1.0, max_relative = 1e-8);
    assert_relative_eq!(multiplier_from_identity(q, &p).unwrap(), -1.0, max_relative = 5e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_phase_invariant(seed in 0u64..10_000, theta in -4.0f64..4.0) {
        let g = Grid::new(2, 8.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params(&mut rng);
        let f = bump(&g, &mut rng);
        let e0 = energy(&f, &p).unwrap().total;
        let e1 = energy(&f.rotated(theta), &p).unwrap().total;
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1.0));
    }

    #[test]
    fn gradient_is_phase_equivariant(seed in 0u64..10_000, theta in -4.0f64..4.0) {
        let g = Grid::new(2, 8.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params(&mut rng);
        let f = bump(&g, &mut rng);
        let lhs = energy_gradient(&f.rotated(theta), &p).unwrap();
        let rhs = energy_gradient(&f, &p).unwrap().rotated(theta);
        prop_assert!(lhs.sub(&rhs).l2_norm() <= 1e-11 * rhs.l2_norm().max(1.0));
    }
}
