use approx::assert_relative_eq;
use boostedgs::bounds::*;
use boostedgs::energy::{energy, Params};
use boostedgs::solver::{petviashvili, PetviashviliOpts};
use boostedgs::spectral::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain golden-section search on `ln t`, independent of the crate's helper.
fn golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..400 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c.exp()) <= f(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    ((a + b) / 2.0).exp()
}

/// Minimiser located as the zero of `t^k g'(t)`, which is monotone in `t`.
fn oracle_t_star(kind: GKind, a: f64, b: f64, n: usize, e: f64) -> f64 {
    let h = n as f64 * e / 2.0;
    let merit = move |t: f64| -> f64 {
        match kind {
            GKind::One => a * t.powf(1.0 - h) - b * h,
            GKind::Two => -a + b * h * t.powf(h + 1.0),
            GKind::Three => a * (2.0 - h) * t - b * (1.0 - h),
            GKind::Four => a * t.powf(h + 1.0) - b * h,
        }
        .abs()
    };
    golden(merit, 1e-12, 1e12)
}

fn direct_g(kind: GKind, a: f64, b: f64, n: usize, e: f64, t: f64) -> f64 {
    let h = n as f64 * e / 2.0;
    match kind {
        GKind::One => a * t - b * t.powf(h),
        GKind::Two => a / t + b * t.powf(h),
        GKind::Three => a * t.powf(2.0 - h) - b * t.powf(1.0 - h),
        GKind::Four => a * t + b * t.powf(-h),
    }
}

#[test]
fn g_min_matches_golden_section_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let kinds = [GKind::One, GKind::Two, GKind::Three, GKind::Four];
    for draw in 0..100 {
        let kind = kinds[draw % 4];
        let n = if rng.random::<bool>() { 2 } else { 3 };
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(0.1..10.0);
        let top = 2.0 / n as f64;
        let e = rng.random_range(0.05..0.95) * top;
        let closed = g_min(kind, a, b, n, e).unwrap();
        let t = oracle_t_star(kind, a, b, n, e);
        let v = direct_g(kind, a, b, n, e, t);
        assert!(
            (closed.t_star - t).abs() <= 1e-10 * t,
            "{kind:?} t*: {} vs {t}",
            closed.t_star
        );
        assert!((closed.value - v).abs() <= 1e-12, "{kind:?} value: {} vs {v}", closed.value);
    }
}

#[test]
fn g_min_rejects_inadmissible_exponents() {
    assert!(g_min(GKind::One, 1.0, 1.0, 2, 1.0).is_err());
    assert!(g_min(GKind::Two, 1.0, 1.0, 2, 1.0).is_ok());
    assert!(g_min(GKind::Three, 0.0, 1.0, 2, 0.5).is_err());
    assert!(g_min(GKind::Four, 1.0, -1.0, 3, 0.5).is_err());
}

fn h_inputs(a: f64, a_star_v: f64, m: f64, i_v: f64) -> HInputs {
    HInputs { a, a_star_v, dim: 2, m, mu: 0.0, q: 0.5, i_v, norm_q2: 1.0 }
}

#[test]
fn h_min_worked_example() {
    let h = h_inputs(1.0, 16.0, 2.0, 4.0);
    let num = h_min(&h).unwrap();
    let closed = h_min_closed_form(&h).unwrap();
    let tau = 3f64.powf(-0.5);
    assert_relative_eq!(num.value, 0.75f64.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(closed.value, 0.75f64.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(num.tau_star.unwrap(), tau, max_relative = 1e-6);
    assert_relative_eq!(closed.tau_star.unwrap(), tau, max_relative = 1e-14);
}

#[test]
fn h_min_matches_closed_form_for_zero_mu() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let a_star_v = rng.random_range(5.0..20.0);
        let h = HInputs {
            a: rng.random_range(0.01..0.99) * a_star_v,
            a_star_v,
            dim: if rng.random::<bool>() { 2 } else { 3 },
            m: rng.random_range(0.1..5.0),
            mu: 0.0,
            q: 0.3,
            i_v: rng.random_range(0.5..50.0),
            norm_q2: 1.0,
        };
        let num = h_min(&h).unwrap();
        let closed = h_min_closed_form(&h).unwrap();
        assert!((num.value - closed.value).abs() <= 1e-10 * closed.value);
    }
}

#[test]
fn h_min_degenerate_cases() {
    let massless = h_inputs(1.0, 16.0, 0.0, 4.0);
    let r = h_min(&massless).unwrap();
    assert!(!r.attained && r.value == 0.0 && r.tau_star.is_none());
    let above = h_inputs(20.0, 16.0, 1.0, 4.0);
    assert!(h_min(&above).is_err());
    let focusing_at_threshold = HInputs { mu: 1.0, ..h_inputs(16.0, 16.0, 1.0, 4.0) };
    assert!(h_min(&focusing_at_threshold).is_err());
    assert!(h_min_closed_form(&HInputs { mu: -1.0, ..massless }).is_err());
}

#[test]
fn cases_partition_parameter_space() {
    let a_star_v = 10.0;
    let base = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 5.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let a = [5.0, 10.0, 15.0][rng.random_range(0..3)];
        let m = [0.0, 1.0][rng.random_range(0..2)];
        let mu = [-1.0, 0.0, 1.0][rng.random_range(0..3)];
        let p = Params { a, m, mu, ..base };
        let hits: Vec<_> = CaseId::ALL.iter().filter(|c| c.matches(&p, a_star_v)).collect();
        // At a = a*_v with m > 0, mu = 0 the value statement (3ii) and the
        // non-attainment statement (4iv) both apply.
        let overlap = hits == [&CaseId::Case3ii, &CaseId::Case4iv];
        assert!(hits.len() == 1 || overlap, "a={a} m={m} mu={mu}: {hits:?}");
    }
    for c in CaseId::ALL {
        assert_eq!(CaseId::parse(c.label()).unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, format!("\"{}\"", c.label()));
    }
    assert!(CaseId::parse("5").is_err());
}

fn constants(a_star_v: f64) -> ReferenceConstants {
    ReferenceConstants {
        dim: 2,
        a_star: a_star_v,
        a_star_v,
        q: 0.5,
        gn_sub_const: 0.3,
        i_v: 12.0,
        norm_q2: 17.0,
    }
}

#[test]
fn regime_bounds_by_case() {
    let c = constants(10.0);
    let base = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 10.0 };
    let r = regime_bounds(CaseId::Case3ii, &base, &c, Some(0.0)).unwrap();
    assert_eq!(r.lower, BoundValue::Finite(0.0));
    assert_eq!(r.upper, BoundValue::Finite(0.0));
    assert_eq!(r.sandwich_holds(1e-6), Some(true));
    let above = Params { a: 12.0, ..base };
    let r = regime_bounds(CaseId::Case4iii, &above, &c, None).unwrap();
    assert_eq!(r.lower, BoundValue::NegInfinity);
    assert!(regime_bounds(CaseId::Case1, &above, &c, None).is_err());
    let sub = Params { a: 5.0, ..base };
    let r = regime_bounds(CaseId::Case3i, &sub, &c, None).unwrap();
    let (lo, hi) = (r.lower.finite().unwrap(), r.upper.finite().unwrap());
    assert!(0.0 < lo && lo <= hi);
    assert!(r.strict_upper.is_some());
    let json = serde_json::to_string(&r).unwrap();
    assert!(!json.contains("inf") && !json.contains("NaN"));
}

#[test]
fn massive_lower_bound_reduces_at_rest() {
    // v = 0: (m a / 2) sqrt(1 - r) sqrt(1 + r) = (m a / 2) sqrt(1 - r^2).
    let p = Params { dim: 2, m: 2.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 4.0 };
    let r: f64 = (4.0f64 / 16.0).sqrt();
    assert_relative_eq!(massive_lower_bound(&p, 16.0), 4.0 * (1.0 - r * r).sqrt(), max_relative = 1e-14);
}

fn gaussian(g: &Grid, width: f64) -> Field {
    Field::from_fn(g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / (2.0 * width * width)).exp(), 0.0))
}

#[test]
fn coupling_quotient_matches_quadrature() {
    let g = Grid::new(2, 16.0, 256).unwrap();
    let (a, q) = (3.0, 0.5);
    // Smooth profiles converge spectrally; the cusp of s = 1.5 only algebraically.
    for (s, tol) in [(1.5, 2e-3), (2.0, 1e-8), (4.0, 1e-8)] {
        let f = Field::from_fn(&g, |x| {
            Complex64::new((-(x[0] * x[0] + x[1] * x[1]).sqrt().powf(s)).exp(), 0.0)
        })
        .normalized_to(a)
        .unwrap();
        let crit = lp_norm_pow(&f, 3.0).powf(1.0 / 3.0);
        let grad = gradient_norm_sq(&f);
        let quotient = crit.powf(3.0 * 3.0 / 2.0) / (grad.powf(0.5) * lp_norm_pow(&f, q + 2.0));
        assert_relative_eq!(log_coupling_quotient(s, a, q, 2), quotient.ln(), max_relative = tol);
    }
}

#[test]
fn mu_star_family_is_conservative() {
    let gauss = mu_star(1.0, 3.0, 0.5, 2, 0.2, &MuStarSearch::Gaussian).unwrap();
    let wide = mu_star(
        1.0,
        3.0,
        0.5,
        2,
        0.2,
        &MuStarSearch::GeneralizedGaussian { shape_min: 0.5, shape_max: 8.0 },
    )
    .unwrap();
    assert!(gauss.value < 0.0);
    assert!(wide.value <= gauss.value);
    let heavier = mu_star(4.0, 3.0, 0.5, 2, 0.2, &MuStarSearch::Gaussian).unwrap();
    // mu*_m scales like m^{(2-Nq)/2}.
    assert_relative_eq!(heavier.value / gauss.value, 4f64.powf(0.5), max_relative = 1e-12);
    assert!(mu_star(0.0, 3.0, 0.5, 2, 0.2, &MuStarSearch::Gaussian).is_err());
}

fn reference_q() -> Field {
    let g = Grid::new(2, 12.0, 128).unwrap();
    petviashvili(&g, &Velocity::ZERO, 1.0, &PetviashviliOpts { boundary_tol: 1.0, ..Default::default() }, None)
        .unwrap()
        .state()
        .clone()
}

#[test]
fn trial_energy_is_an_exact_dilation() {
    let q = reference_q();
    let a_star = q.mass();
    let p = Params { dim: 2, m: 0.7, v: Velocity::along_x(0.2), mu: 0.4, q: 0.5, a: 0.8 * a_star };
    for tau in [0.5, 1.0, 2.0] {
        let g = q.grid().rescaled(1.0 / tau).unwrap();
        let amp = tau * (p.a / a_star).sqrt();
        let dilated = Field::new(&g, q.values().iter().map(|z| z * amp).collect()).unwrap();
        let direct = energy(&dilated, &p).unwrap().total;
        assert_relative_eq!(trial_energy(&q, &p, a_star, tau).unwrap(), direct, max_relative = 1e-12);
    }
}

#[test]
fn witness_supercritical_slope() {
    let q = reference_q();
    let a_star = q.mass();
    let p = Params { dim: 2, m: 1.0, v: Velocity::ZERO, mu: 0.5, q: 0.5, a: 1.2 * a_star };
    let schedule: Vec<f64> = (0..12).map(|k| 2f64.powi(k)).collect();
    let w = nonexistence_witness(CaseId::Case4iii, &p, &q, a_star, &schedule).unwrap();
    assert!(!w.truncated);
    assert!(w.points.windows(2).skip(3).all(|x| x[1].energy < x[0].energy));
    let (s, m) = (w.last_slope.unwrap(), w.model_slope.unwrap());
    assert!((s - m).abs() <= 0.05 * m.abs(), "{s} vs {m}");
}

#[test]
fn witness_flags_scales_outside_the_window() {
    let q = reference_q();
    let a_star = q.mass();
    let p = Params { dim: 2, m: 0.0, v: Velocity::ZERO, mu: 0.0, q: 0.5, a: 0.5 * a_star };
    let w = nonexistence_witness(CaseId::Case4v, &p, &q, a_star, &[1e-8, 1e-3, 1e-2]).unwrap();
    assert!(w.truncated);
    assert_eq!(w.points.len(), 2);
    assert!(w.points.iter().all(|pt| pt.energy > 0.0));
    assert!(nonexistence_witness(CaseId::Case1, &p, &q, a_star, &[1.0, 2.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_min_is_a_lower_bound(a in 0.1f64..10.0, b in 0.1f64..10.0, e in 0.05f64..0.95, t in -6.0f64..6.0) {
        for kind in [GKind::One, GKind::Two, GKind::Three, GKind::Four] {
            let gm = g_min(kind, a, b, 2, e).unwrap();
            let val = g_eval(kind, a, b, 2, e, t.exp());
            prop_assert!(val >= gm.value - 1e-12 * (1.0 + val.abs()));
        }
    }

    #[test]
    fn h_min_is_a_lower_bound(frac in 0.05f64..0.95, m in 0.1f64..3.0, mu in -1.0f64..1.0, t in -5.0f64..5.0) {
        let h = HInputs { a: frac * 10.0, a_star_v: 10.0, dim: 2, m, mu, q: 0.5, i_v: 12.0, norm_q2: 17.0 };
        let hm = h_min(&h).unwrap();
        prop_assert!(h_eval(&h, t.exp()) >= hm.value - 1e-10 * (1.0 + hm.value.abs()));
    }
}

#[test]
fn gaussian_quotient_is_dilation_invariant() {
    let g = Grid::new(2, 24.0, 256).unwrap();
    let values: Vec<f64> = [0.8, 1.6]
        .iter()
        .map(|w| {
            let f = gaussian(&g, *w).normalized_to(2.0).unwrap();
            let crit = lp_norm_pow(&f, 3.0).powf(1.0 / 3.0);
            crit.powf(4.5) / (gradient_norm_sq(&f).sqrt() * lp_norm_pow(&f, 2.5))
        })
        .collect();
    assert_relative_eq!(values[0], values[1], max_relative = 1e-8);
}
