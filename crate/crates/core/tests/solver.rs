use approx::assert_relative_eq;
use boostedgs::energy::{energy, Params};
use boostedgs::solver::*;
use boostedgs::spectral::*;
use boostedgs::Error;

fn small() -> Grid {
    Grid::new(2, 12.0, 128).unwrap()
}

fn loose() -> PetviashviliOpts {
    PetviashviliOpts { boundary_tol: 1.0, ..Default::default() }
}

#[test]
fn petviashvili_converges_and_is_seed_independent() {
    let g = small();
    let v = Velocity::along_x(0.3);
    let masses: Vec<f64> = [1u64, 2, 3]
        .iter()
        .map(|&seed| {
            let o = PetviashviliOpts { seed, jitter: 0.05, ..loose() };
            let r = petviashvili(&g, &v, 1.0, &o, None).unwrap();
            assert!(r.converged, "{:?}", r.verdict);
            assert!(r.residual <= o.tol);
            r.mass
        })
        .collect();
    for m in &masses[1..] {
        assert_relative_eq!(*m, masses[0], max_relative = 1e-9);
    }
}

#[test]
fn petviashvili_reports_boundary_mass() {
    let g = Grid::new(2, 6.0, 64).unwrap();
    let r = petviashvili(&g, &Velocity::ZERO, 1.0, &PetviashviliOpts::default(), None).unwrap();
    assert_eq!(r.verdict, Verdict::BoundaryMass);
    assert!(!r.converged);
    assert!(r.boundary_mass > 1e-4);
}

#[test]
fn minimiser_keeps_the_mass_and_lowers_the_energy() {
    let g = Grid::new(2, 12.0, 256).unwrap();
    let q = petviashvili(&g, &Velocity::ZERO, 1.0, &loose(), None).unwrap();
    let p = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 1.0, q: 0.5, a: 0.5 * q.mass };
    let opts = SolverOpts { boundary_tol: 1.0, ..Default::default() };
    let r = constrained_minimize(&g, &p, &opts, None).unwrap();
    assert!(r.converged, "{:?}", r.verdict);
    assert_relative_eq!(r.state().mass(), p.a, max_relative = 1e-12);
    assert_relative_eq!(r.mass, p.a, max_relative = 1e-12);
    let e0 = r.trace[0].energy;
    assert!(r.energy.total < e0);
    assert_relative_eq!(energy(r.state(), &p).unwrap().total, r.energy.total, max_relative = 1e-12);
    // Energy never rises by more than rounding between accepted steps.
    for w in r.trace.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs().max(1.0));
    }
}

#[test]
fn conjugate_directions_reach_the_same_minimiser() {
    let g = small();
    let p = Params { dim: 2, m: 1.0, v: Velocity::along_x(0.2), mu: 0.5, q: 0.5, a: 4.0 };
    let base = SolverOpts { boundary_tol: 1.0, ..Default::default() };
    let gf = constrained_minimize(&g, &p, &base, None).unwrap();
    let cg = constrained_minimize(&g, &p, &SolverOpts { method: Method::ConjugateGradient, ..base }, None)
        .unwrap();
    assert!(gf.converged && cg.converged);
    assert_relative_eq!(gf.energy.total, cg.energy.total, max_relative = 1e-9);
    assert!((gf.multiplier - cg.multiplier).abs() < 1e-7, "{} vs {}", gf.multiplier, cg.multiplier);
}

#[test]
fn runs_are_deterministic() {
    let g = small();
    let p = Params { dim: 2, m: 1.0, v: Velocity::along_x(0.2), mu: -0.3, q: 0.5, a: 3.0 };
    let opts = SolverOpts { seed: 9, jitter: 0.1, boundary_tol: 1.0, ..Default::default() };
    let a = constrained_minimize(&g, &p, &opts, None).unwrap();
    let b = constrained_minimize(&g, &p, &opts, None).unwrap();
    assert_eq!(a.energy.total.to_bits(), b.energy.total.to_bits());
    assert_eq!(a.iters, b.iters);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn supercritical_mass_is_flagged() {
    let g = small();
    let q = petviashvili(&g, &Velocity::ZERO, 1.0, &loose(), None).unwrap();
    let p = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 1.5 * q.mass };
    let r = constrained_minimize(&g, &p, &SolverOpts { max_iter: 5000, ..Default::default() }, None)
        .unwrap();
    assert_eq!(r.verdict, Verdict::Unbounded);
    assert!(!r.converged);
}

#[test]
fn initial_guess_is_normalised_and_seeded() {
    let g = small();
    let v = Velocity::along_x(0.4);
    let a = gaussian_guess(&g, 2.5, 1.5, &v, 1.0, 0.1, 4).unwrap();
    let b = gaussian_guess(&g, 2.5, 1.5, &v, 1.0, 0.1, 4).unwrap();
    let c = gaussian_guess(&g, 2.5, 1.5, &v, 1.0, 0.1, 5).unwrap();
    assert_relative_eq!(a.mass(), 2.5, max_relative = 1e-12);
    assert_eq!(a.values(), b.values());
    assert!(a.sub(&c).l2_norm() > 0.0);
}

#[test]
fn centring_removes_integer_offsets() {
    let g = small();
    let f = gaussian_guess(&g, 1.0, 1.0, &Velocity::ZERO, 0.0, 0.0, 0).unwrap();
    let moved = f.rolled(&[7, -5, 0]);
    let back = pin_translation(&moved);
    assert!(back.sub(&f).l2_norm() < 1e-12);
    let c = centre_of_mass(&f.translated(&[0.3, -0.2, 0.0]));
    assert!((c[0] - 0.3).abs() < 1e-6 && (c[1] + 0.2).abs() < 1e-6, "{c:?}");
}

#[test]
fn options_are_validated_strictly() {
    assert!(serde_json::from_str::<SolverOpts>(r#"{"tol":1e-6,"bogus":1}"#).is_err());
    let o: SolverOpts = serde_json::from_str(r#"{"tol":1e-6,"method":"conjugate_gradient"}"#).unwrap();
    assert_eq!(o.method, Method::ConjugateGradient);
    assert_eq!(o.max_iter, SolverOpts::default().max_iter);
    let g = small();
    let p = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 1.0 };
    let bad = SolverOpts { tol: 0.0, ..Default::default() };
    assert!(matches!(constrained_minimize(&g, &p, &bad, None), Err(Error::Invalid(_))));
    let wrong_dim = Params { dim: 3, q: 0.3, ..p };
    assert!(constrained_minimize(&g, &wrong_dim, &SolverOpts::default(), None).is_err());
}

#[test]
fn high_frequency_fraction_detects_grid_scale_states() {
    let g = small();
    let smooth = gaussian_guess(&g, 1.0, 1.5, &Velocity::ZERO, 0.0, 0.0, 0).unwrap();
    assert!(high_frequency_fraction(&smooth) < 1e-12);
    let spike = Field::from_fn(&g, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        num_complex::Complex64::new(if r2 < 1e-12 { 1.0 } else { 0.0 }, 0.0)
    });
    assert!(high_frequency_fraction(&spike) > 0.3);
}

#[test]
fn jittered_boosted_descent_reaches_tolerance() {
    let g = Grid::new(2, 12.0, 128).unwrap();
    let p = Params { dim: 2, m: 1.0, v: Velocity::along_x(0.2), mu: -0.3, q: 0.5, a: 3.0 };
    for seed in [3, 11] {
        let o = SolverOpts { boundary_tol: 1.0, seed, jitter: 0.05, ..Default::default() };
        let r = constrained_minimize(&g, &p, &o, None).unwrap();
        assert_eq!(r.verdict, Verdict::Converged, "seed {seed}");
        assert!(r.trace.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12), "seed {seed}");
    }
}
