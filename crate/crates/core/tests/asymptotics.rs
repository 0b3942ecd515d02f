use approx::assert_relative_eq;
use boostedgs::asymptotics::*;
use boostedgs::spectral::*;
use boostedgs::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_power_law() {
    let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
    let fit = fit_power_law(&xs, &ys).unwrap();
    assert_relative_eq!(fit.exponent, 2.0, epsilon = 1e-12);
    assert_relative_eq!(fit.prefactor, 3.0, max_relative = 1e-12);
    assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    assert_eq!(fit.window, 5);
}

#[test]
fn constant_data_has_zero_exponent() {
    let fit = fit_power_law(&[0.1, 0.2, 0.4, 0.8], &[5.0; 4]).unwrap();
    assert_eq!(fit.exponent, 0.0);
    assert_relative_eq!(fit.prefactor, 5.0, max_relative = 1e-14);
}

#[test]
fn noisy_power_law_recovers_the_exponent() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let xs: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
        let ys: Vec<f64> =
            xs.iter().map(|x| 2.0 * x.powf(-2.0 / 3.0) * (1.0 + rng.random_range(-0.01..0.01))).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent + 2.0 / 3.0).abs() < 0.05);
    }
}

#[test]
fn fits_reject_bad_input() {
    assert!(matches!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::Invalid(_))));
    assert!(fit_power_law(&[1.0, 2.0, 3.0, 4.0], &[1.0, -2.0, 3.0, 4.0]).is_err());
    assert!(fit_power_law(&[1.0, 2.0, 3.0, 0.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
    assert!(fit_power_law(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(fit_power_law(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
}

#[test]
fn prefactor_at_fixed_exponent() {
    let xs = [0.1, 0.05, 0.025, 0.0125];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 7.0 * x.powf(-0.5)).collect();
    assert_relative_eq!(prefactor_at(&xs, &ys, -0.5), 7.0, max_relative = 1e-12);
}

fn bump(g: &Grid, c: [f64; 2], phase: f64) -> Field {
    Field::from_fn(g, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        Complex64::from_polar((-r2).exp() * (1.0 + 0.2 * x[0].tanh()), phase)
    })
}

#[test]
fn alignment_removes_translation_and_phase() {
    let g = Grid::new(2, 8.0, 64).unwrap();
    let reference = bump(&g, [0.0, 0.0], 0.0);
    let moved = reference.translated(&[1.3, -0.4, 0.0]).rotated(2.1);
    let d = aligned_l2_distance(&moved, &reference).unwrap();
    assert!(d < 1e-3 * reference.l2_norm(), "{d}");
    let other = Grid::new(2, 9.0, 64).unwrap();
    assert!(matches!(
        aligned_l2_distance(&bump(&other, [0.0, 0.0], 0.0), &reference),
        Err(Error::GridMismatch)
    ));
}

#[test]
fn monotone_trend_allows_one_step_back() {
    assert!(mostly_decreasing(&[5.0, 4.0, 3.0, 2.0]));
    assert!(mostly_decreasing(&[5.0, 4.0, 4.5, 2.0]));
    assert!(!mostly_decreasing(&[5.0, 6.0, 4.0, 4.5]));
}

#[test]
fn checks_compare_relatively() {
    assert!(Check::relative("x", 1.04, 1.0, 0.05).pass);
    assert!(!Check::relative("x", 1.06, 1.0, 0.05).pass);
    assert!(!Check::relative("x", f64::NAN, 1.0, 0.05).pass);
    assert!(Check::flag("y", true).pass);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rescaling_preserves_mass(eps in 0.01f64..10.0, seed in 0u64..1000) {
        let g = Grid::new(2, 6.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let f = bump(&g, c, rng.random_range(0.0..6.0));
        let w = rescaled_state(&f, eps).unwrap();
        prop_assert!((w.mass() - f.mass()).abs() <= 1e-12 * f.mass());
        prop_assert!((w.grid().half_width() - 6.0 / eps).abs() <= 1e-12 * 6.0 / eps);
    }

    #[test]
    fn power_law_fit_is_exact_on_clean_data(p in -3.0f64..3.0, c in 0.01f64..100.0) {
        let xs: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
    }
}
