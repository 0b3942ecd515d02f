use std::sync::OnceLock;

use approx::assert_relative_eq;
use boostedgs::reference::*;
use boostedgs::solver::PetviashviliOpts;
use boostedgs::spectral::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> PetviashviliOpts {
    PetviashviliOpts { boundary_tol: 1e-3, ..Default::default() }
}

fn bundle() -> &'static ReferenceBundle {
    static B: OnceLock<ReferenceBundle> = OnceLock::new();
    B.get_or_init(|| {
        let g = Grid::new(2, 16.0, 256).unwrap();
        build_reference(&g, &Velocity::along_x(0.3), 0.5, &opts()).unwrap()
    })
}

#[test]
fn bundle_constants_are_consistent() {
    let b = bundle();
    assert_relative_eq!(b.a_star, b.q_field().mass(), max_relative = 1e-14);
    assert_relative_eq!(b.a_star_v, b.qv_field().mass(), max_relative = 1e-14);
    assert!(b.a_star_v < b.a_star);
    assert!(b.a_star_v >= 0.7f64.powi(2) * b.a_star);
    assert!(b.diagnostics.pohozaev_qv.max() < 5e-3);
    assert_relative_eq!(b.i_v, spectral_integral_i(b.qv_field()), max_relative = 1e-14);
    let c = b.constants();
    assert_eq!(c.a_star_v, b.a_star_v);
    assert_eq!(c.q, 0.5);
}

#[test]
fn ground_state_saturates_the_critical_inequality() {
    let b = bundle();
    let ratio = verify_gn(b.qv_field(), b, GnKind::Critical).unwrap();
    assert!((0.999..=1.001).contains(&ratio), "{ratio}");
}

#[test]
fn subcritical_optimiser_saturates_the_subcritical_inequality() {
    let b = bundle();
    // The closed-form constant uses continuum identities; on the L = 16 box
    // the algebraic tails of the optimiser leave a ~1e-3 defect.
    let ratio = verify_gn(b.uv_field(), b, GnKind::Subcritical).unwrap();
    assert!((ratio - 1.0).abs() < 3e-3, "{ratio}");
}

#[test]
fn random_bumps_stay_below_the_sharp_constants() {
    let b = bundle();
    let g = b.qv_field().grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let c = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let w = rng.random_range(0.3..3.0);
        let k = rng.random_range(-2.0..2.0);
        let s = rng.random_range(1.0..3.0);
        let f = Field::from_fn(&g, |x| {
            let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() / w;
            Complex64::from_polar((-r.powf(s)).exp(), k * x[1])
        });
        assert!(verify_gn(&f, b, GnKind::Critical).unwrap() < 1.0 + 1e-6);
        assert!(verify_gn(&f, b, GnKind::Subcritical).unwrap() < 1.0 + 1e-6);
    }
}

#[test]
fn sharp_constant_reproduces_equality() {
    let b = bundle();
    assert_relative_eq!(b.gn_sub_const, sharp_gn_constant(0.5, 2, b.uv_mass), max_relative = 1e-14);
    // At the critical power the formula reduces to (N+1)/(N a*^{1/N}).
    assert_relative_eq!(
        sharp_gn_constant(1.0, 2, b.a_star_v),
        b.gn_crit_const,
        max_relative = 1e-12
    );
}

#[test]
fn ground_state_decays_algebraically() {
    let d = decay_profile(bundle().qv_field());
    assert!(d.bounded, "trend {}", d.trend);
}

#[test]
fn bundle_round_trips_through_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let b = bundle();
    let base = dir.path().join(b.key.slug());
    save_bundle(&base, b).unwrap();
    let back = load_bundle(&base).unwrap();
    assert_eq!(back.key, b.key);
    assert_eq!(back.a_star_v.to_bits(), b.a_star_v.to_bits());
    assert_eq!(back.qv_field().values(), b.qv_field().values());
    let g = b.qv_field().grid().clone();
    let cached = load_or_build_in(dir.path(), &g, &b.key.v, 0.5, &opts()).unwrap();
    assert_eq!(cached.a_star.to_bits(), b.a_star.to_bits());
}

#[test]
fn critical_mass_decreases_with_speed() {
    let g = Grid::new(2, 12.0, 128).unwrap();
    let o = PetviashviliOpts { boundary_tol: 1.0, ..Default::default() };
    let masses: Vec<f64> =
        [0.0, 0.1, 0.2].iter().map(|&b| critical_mass_along_x(&g, b, &o).unwrap().0).collect();
    assert!(masses.windows(2).all(|w| w[1] < w[0]), "{masses:?}");
    for (m, beta) in masses.iter().zip([0.0f64, 0.1, 0.2]) {
        assert!(*m >= (1.0 - beta).powi(2) * masses[0]);
    }
}

#[test]
fn inadmissible_requests_are_rejected() {
    let g = Grid::new(2, 8.0, 32).unwrap();
    assert!(build_reference(&g, &Velocity::along_x(1.0), 0.5, &opts()).is_err());
    assert!(build_reference(&g, &Velocity::ZERO, 1.0, &opts()).is_err());
}
