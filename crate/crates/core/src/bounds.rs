//! Closed-form minima, energy bounds, the critical coupling estimate and
//! trial-family witnesses for nonexistence.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::energy::Params;
use crate::error::{Error, Result};
use crate::spectral::{lp_norm_pow, quadratic_form_tmv, Field};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimisation of `f` over `ln t` on `[lo, hi]`.
///
/// Returns `(t, f(t))`. The objective is assumed unimodal in `ln t`.
pub fn golden_section_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d.exp());
        }
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    let (t, ft) = if fc <= fd { (c.exp(), fc) } else { (d.exp(), fd) };
    (t, ft)
}

/// The four one-variable profiles whose minima enter the energy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    /// `a t - b t^{Nq/2}`
    One,
    /// `a / t + b t^{Ns/2}`
    Two,
    /// `a t^{2-Nq/2} - b t^{1-Nq/2}`
    Three,
    /// `a t + b t^{-Nq/2}`
    Four,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GMin {
    pub t_star: f64,
    pub value: f64,
}

fn check_g(kind: GKind, a: f64, b: f64, n: usize, e: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Params("coefficients a, b must be positive".into()));
    }
    if n == 0 {
        return Err(Error::Params("dimension must be positive".into()));
    }
    let top = 2.0 / n as f64;
    let ok = match kind {
        GKind::Two => e > 0.0 && e <= top,
        _ => e > 0.0 && e < top,
    };
    if !ok {
        return Err(Error::Params(format!("exponent {e} outside the admissible range for {kind:?}")));
    }
    Ok(())
}

pub fn g_eval(kind: GKind, a: f64, b: f64, n: usize, e: f64, t: f64) -> f64 {
    let h = n as f64 * e / 2.0;
    match kind {
        GKind::One => a * t - b * t.powf(h),
        GKind::Two => a / t + b * t.powf(h),
        GKind::Three => a * t.powf(2.0 - h) - b * t.powf(1.0 - h),
        GKind::Four => a * t + b * t.powf(-h),
    }
}

/// Minimiser and minimum of a profile in closed form.
pub fn g_min(kind: GKind, a: f64, b: f64, n: usize, e: f64) -> Result<GMin> {
    check_g(kind, a, b, n, e)?;
    let ne = n as f64 * e;
    let (t_star, value) = match kind {
        GKind::One => {
            let t = (b * ne / (2.0 * a)).powf(2.0 / (2.0 - ne));
            let v = -(2.0 - ne) / 2.0
                * (ne / 2.0).powf(ne / (2.0 - ne))
                * a.powf(-ne / (2.0 - ne))
                * b.powf(2.0 / (2.0 - ne));
            (t, v)
        }
        GKind::Two => {
            let t = (2.0 * a / (b * ne)).powf(2.0 / (2.0 + ne));
            let v = (2.0 + ne) / 2.0
                * (2.0 * a / ne).powf(ne / (2.0 + ne))
                * b.powf(2.0 / (2.0 + ne));
            (t, v)
        }
        GKind::Three => {
            let t = b * (2.0 - ne) / (a * (4.0 - ne));
            let v = -2.0 / (4.0 - ne)
                * a.powf(ne / 2.0 - 1.0)
                * b.powf(2.0 - ne / 2.0)
                * ((2.0 - ne) / (4.0 - ne)).powf(1.0 - ne / 2.0);
            (t, v)
        }
        GKind::Four => {
            let t = (ne * b / (2.0 * a)).powf(2.0 / (2.0 + ne));
            let v = (1.0 + 2.0 / ne) * a.powf(ne / (2.0 + ne)) * (ne * b / 2.0).powf(2.0 / (2.0 + ne));
            (t, v)
        }
    };
    Ok(GMin { t_star, value })
}

/// Reference constants consumed by the bounds; a subset of a reference bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub dim: usize,
    pub a_star: f64,
    pub a_star_v: f64,
    /// Subcritical exponent the sharp constant refers to.
    pub q: f64,
    /// Sharp constant of the subcritical inequality.
    pub gn_sub_const: f64,
    /// `\int |Q_v^|^2 / |k| dk`.
    pub i_v: f64,
    /// `||Q_v||_{q+2}^{q+2}`.
    pub norm_q2: f64,
}

/// Inputs of `h(tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HInputs {
    pub a: f64,
    pub a_star_v: f64,
    pub dim: usize,
    pub m: f64,
    pub mu: f64,
    pub q: f64,
    pub i_v: f64,
    pub norm_q2: f64,
}

impl HInputs {
    pub fn new(p: &Params, c: &ReferenceConstants) -> Self {
        HInputs {
            a: p.a,
            a_star_v: c.a_star_v,
            dim: p.dim,
            m: p.m,
            mu: p.mu,
            q: p.q,
            i_v: c.i_v,
            norm_q2: c.norm_q2,
        }
    }

    fn ratio(&self) -> f64 {
        (self.a / self.a_star_v).powf(1.0 / self.dim as f64)
    }

    fn coefficients(&self) -> (f64, f64, f64) {
        let n = self.dim as f64;
        let big_a = self.a * self.m * self.m * self.i_v / (4.0 * self.a_star_v);
        let big_b = self.a * n / 2.0 * (1.0 - self.ratio());
        let big_c = self.mu / (self.q + 2.0)
            * (self.a / self.a_star_v).powf((self.q + 2.0) / 2.0)
            * self.norm_q2;
        (big_a, big_b, big_c)
    }

    fn check(&self) -> Result<()> {
        let fin = [self.a, self.a_star_v, self.m, self.mu, self.q, self.i_v, self.norm_q2];
        if fin.iter().any(|x| !x.is_finite()) {
            return Err(Error::Params("h inputs must be finite".into()));
        }
        if !(self.a > 0.0 && self.a_star_v > 0.0 && self.i_v > 0.0 && self.m >= 0.0) {
            return Err(Error::Params("h requires a, a*_v, I_v > 0 and m >= 0".into()));
        }
        Ok(())
    }
}

pub fn h_eval(h: &HInputs, tau: f64) -> f64 {
    let (a, b, c) = h.coefficients();
    let nq = h.dim as f64 * h.q;
    a / tau + b * tau - c * tau.powf(nq / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HMin {
    /// Minimiser, absent when the infimum is only approached.
    pub tau_star: Option<f64>,
    pub value: f64,
    pub attained: bool,
}

/// `inf_{tau>0} h(tau)` by golden section over `[1e-8, 1e8]`.
pub fn h_min(h: &HInputs) -> Result<HMin> {
    h.check()?;
    let (a, b, c) = h.coefficients();
    if b == 0.0 && c == 0.0 {
        return Ok(HMin { tau_star: None, value: 0.0, attained: false });
    }
    if b < 0.0 || (b == 0.0 && c > 0.0) {
        return Err(Error::Params("h is unbounded below".into()));
    }
    if a == 0.0 && c <= 0.0 {
        return Ok(HMin { tau_star: None, value: 0.0, attained: false });
    }
    let (lo, hi) = (1e-8, 1e8);
    let (t, v) = golden_section_log(|t| h_eval(h, t), lo, hi, 400);
    let edge = (t / lo).ln() < 1e-6 || (hi / t).ln() < 1e-6;
    if edge {
        return Err(Error::Invalid("minimiser of h left the search bracket".into()));
    }
    Ok(HMin { tau_star: Some(t), value: v, attained: true })
}

/// Closed form of `min h` for `mu = 0`, with its minimiser.
pub fn h_min_closed_form(h: &HInputs) -> Result<HMin> {
    h.check()?;
    if h.mu != 0.0 {
        return Err(Error::Params("closed form requires mu = 0".into()));
    }
    let (a, b, _) = h.coefficients();
    let r = h.ratio();
    if r > 1.0 {
        return Err(Error::Params("a exceeds a*_v".into()));
    }
    let n = h.dim as f64;
    let value = h.a * h.m * (1.0 - r).sqrt() * (n * h.i_v / (2.0 * h.a_star_v)).sqrt();
    if b == 0.0 || a == 0.0 {
        return Ok(HMin { tau_star: None, value, attained: false });
    }
    Ok(HMin { tau_star: Some((a / b).sqrt()), value, attained: true })
}

/// `C(q, N, v)` in the definition of the critical coupling.
pub fn coupling_prefactor(q: f64, n: usize, vnorm: f64) -> f64 {
    let nq = n as f64 * q;
    let nf = n as f64;
    (q + 2.0) / (4.0 - nq).powf(2.0 - nq / 2.0)
        * (2.0 * (2.0 - nq) / (1.0 - vnorm * vnorm).sqrt()).powf(1.0 - nq / 2.0)
        * (nf / (nf + 1.0)).powf(2.0 - nq / 2.0)
}

/// Trial family for the supremum in the critical coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MuStarSearch {
    /// Gaussians; the quotient is dilation invariant so this is a single value.
    Gaussian,
    /// `exp(-|x|^s)` with shape `s` refined by golden-section ascent.
    GeneralizedGaussian { shape_min: f64, shape_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuStar {
    pub value: f64,
    /// Estimated supremum of the quotient over mass-`a` profiles.
    pub sup_estimate: f64,
    /// Shape exponent of the best trial profile.
    pub shape: f64,
}

/// Logarithm of the quotient
/// `||phi||_{2+2/N}^{(N+1)(4-Nq)/N} / (||grad phi||^{2-Nq} ||phi||_{q+2}^{q+2})`
/// for `phi = c exp(-|x|^s)` normalised to mass `a`.
pub fn log_coupling_quotient(shape: f64, a: f64, q: f64, n: usize) -> f64 {
    let nf = n as f64;
    let s = shape;
    let ln_omega = (nf / 2.0) * std::f64::consts::PI.ln() + 2f64.ln() - ln_gamma(nf / 2.0);
    // \int exp(-p r^s) r^{N-1} dr = Gamma(N/s) / (s p^{N/s})
    let ln_radial = |p: f64| ln_gamma(nf / s) - s.ln() - (nf / s) * p.ln();
    let ln_mass1 = ln_omega + ln_radial(2.0);
    let ln_c2 = a.ln() - ln_mass1;
    let ln_pow = |r: f64| ln_omega + ln_radial(r) + (r / 2.0) * ln_c2;
    let beta = (2.0 * s + nf - 2.0) / s;
    let ln_grad = ln_omega + 2.0 * s.ln() + ln_gamma(beta) - s.ln() - beta * 2f64.ln() + ln_c2;
    let crit = 2.0 + 2.0 / nf;
    let nq = nf * q;
    let ln_crit_norm = ln_pow(crit) / crit;
    (nf + 1.0) * (4.0 - nq) / nf * ln_crit_norm
        - (2.0 - nq) / 2.0 * ln_grad
        - ln_pow(q + 2.0)
}

/// Estimate of the critical coupling `mu*_m` over a trial family.
pub fn mu_star(m: f64, a: f64, q: f64, n: usize, vnorm: f64, search: &MuStarSearch) -> Result<MuStar> {
    if !(m > 0.0 && a > 0.0 && m.is_finite() && a.is_finite()) {
        return Err(Error::Params("mu* requires m > 0 and a > 0".into()));
    }
    if !(q > 0.0 && q < 2.0 / n as f64) || !(0.0..1.0).contains(&vnorm) {
        return Err(Error::Params("mu* requires 0 < q < 2/N and |v| < 1".into()));
    }
    let (ln_sup, shape) = match *search {
        MuStarSearch::Gaussian => (log_coupling_quotient(2.0, a, q, n), 2.0),
        MuStarSearch::GeneralizedGaussian { shape_min, shape_max } => {
            let lower = ((2.0 - n as f64) / 2.0).max(0.0);
            if !(shape_min.is_finite() && shape_max.is_finite())
                || shape_min <= lower
                || shape_max <= shape_min
            {
                return Err(Error::Params(format!(
                    "degenerate trial family [{shape_min}, {shape_max}]"
                )));
            }
            let f = |s: f64| -log_coupling_quotient(s, a, q, n);
            let (mut best_s, mut best) = (2.0f64.clamp(shape_min, shape_max), f64::INFINITY);
            let samples = 64;
            for i in 0..=samples {
                let s = shape_min * (shape_max / shape_min).powf(i as f64 / samples as f64);
                let val = f(s);
                if val < best {
                    best = val;
                    best_s = s;
                }
            }
            let step = (shape_max / shape_min).powf(1.0 / samples as f64);
            let lo = (best_s / step).max(shape_min);
            let hi = (best_s * step).min(shape_max);
            let (s_ref, v_ref) = golden_section_log(f, lo, hi, 200);
            if v_ref < best {
                best = v_ref;
                best_s = s_ref;
            }
            let gauss = f(2.0);
            if (shape_min..=shape_max).contains(&2.0) && gauss < best {
                best = gauss;
                best_s = 2.0;
            }
            (-best, best_s)
        }
    };
    let sup = ln_sup.exp();
    let nq = n as f64 * q;
    let value = -m.powf((2.0 - nq) / 2.0) * coupling_prefactor(q, n, vnorm) * sup;
    Ok(MuStar { value, sup_estimate: sup, shape })
}

/// Parameter regimes for existence and nonexistence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "1")]
    Case1,
    #[serde(rename = "2")]
    Case2,
    #[serde(rename = "3i")]
    Case3i,
    #[serde(rename = "3ii")]
    Case3ii,
    #[serde(rename = "4i")]
    Case4i,
    #[serde(rename = "4ii")]
    Case4ii,
    #[serde(rename = "4iii")]
    Case4iii,
    #[serde(rename = "4iv")]
    Case4iv,
    #[serde(rename = "4v")]
    Case4v,
}

impl CaseId {
    pub const ALL: [CaseId; 9] = [
        CaseId::Case1,
        CaseId::Case2,
        CaseId::Case3i,
        CaseId::Case3ii,
        CaseId::Case4i,
        CaseId::Case4ii,
        CaseId::Case4iii,
        CaseId::Case4iv,
        CaseId::Case4v,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CaseId::Case1 => "1",
            CaseId::Case2 => "2",
            CaseId::Case3i => "3i",
            CaseId::Case3ii => "3ii",
            CaseId::Case4i => "4i",
            CaseId::Case4ii => "4ii",
            CaseId::Case4iii => "4iii",
            CaseId::Case4iv => "4iv",
            CaseId::Case4v => "4v",
        }
    }

    pub fn parse(s: &str) -> Result<CaseId> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::Params(format!("unknown case '{s}'")))
    }

    /// Whether `(a, m, mu)` lies in this regime given the critical mass.
    pub fn matches(&self, p: &Params, a_star_v: f64) -> bool {
        let rel = (p.a - a_star_v) / a_star_v;
        let eq = rel.abs() <= MASS_EQ_TOL;
        let below = rel < -MASS_EQ_TOL;
        let above = rel > MASS_EQ_TOL;
        match self {
            CaseId::Case1 => below && p.mu > 0.0,
            CaseId::Case2 => (below || eq) && p.m > 0.0 && p.mu < 0.0,
            CaseId::Case3i => below && p.m > 0.0 && p.mu == 0.0,
            CaseId::Case3ii => eq && p.mu == 0.0,
            CaseId::Case4i => eq && p.mu > 0.0,
            CaseId::Case4ii => (below || eq) && p.m == 0.0 && p.mu < 0.0,
            CaseId::Case4iii => above,
            CaseId::Case4iv => eq && p.m > 0.0 && p.mu == 0.0,
            CaseId::Case4v => below && p.m == 0.0 && p.mu == 0.0,
        }
    }
}

/// Relative tolerance used to decide `a = a*_v`.
pub const MASS_EQ_TOL: f64 = 1e-9;

/// A bound that may be infinite; stored without literal infinities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum BoundValue {
    Finite(f64),
    NegInfinity,
}

impl BoundValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            BoundValue::Finite(x) => Some(*x),
            BoundValue::NegInfinity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub case: CaseId,
    pub lower: BoundValue,
    pub upper: BoundValue,
    /// Whether the upper bound is strict.
    pub upper_strict: bool,
    /// Additional strict upper bound `sqrt(1-|v|^2) m a / 2`, when it applies.
    pub strict_upper: Option<f64>,
    pub computed_e: Option<f64>,
    pub slack_low: Option<f64>,
    pub slack_high: Option<f64>,
}

impl BoundReport {
    /// Scale used for the absolute tolerance of the sandwich test.
    pub fn scale(&self) -> f64 {
        [self.lower.finite(), self.upper.finite(), self.computed_e, self.strict_upper]
            .into_iter()
            .flatten()
            .map(f64::abs)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// `lower - tol <= e <= upper + tol` (strict where required).
    pub fn sandwich_holds(&self, rel_tol: f64) -> Option<bool> {
        let e = self.computed_e?;
        let tol = rel_tol * self.scale();
        let lo = self.lower.finite().is_none_or(|l| e >= l - tol);
        let hi = match self.upper.finite() {
            Some(u) => {
                if self.upper_strict {
                    e < u + tol
                } else {
                    e <= u + tol
                }
            }
            None => false,
        };
        let extra = self.strict_upper.is_none_or(|s| e < s + tol);
        Some(lo && hi && extra)
    }
}

/// `(m a / 2) sqrt((1-r)(1-|v|)) sqrt(1+|v|+r(1-|v|))`, `r = (a/a*_v)^{1/N}`.
pub fn massive_lower_bound(p: &Params, a_star_v: f64) -> f64 {
    let r = (p.a / a_star_v).powf(1.0 / p.dim as f64);
    let vn = p.v.norm();
    p.m * p.a / 2.0 * ((1.0 - r).max(0.0) * (1.0 - vn)).sqrt() * (1.0 + vn + r * (1.0 - vn)).sqrt()
}

/// `sqrt(1-|v|^2) m a / 2`.
pub fn rest_energy_bound(p: &Params) -> f64 {
    p.v.contraction() * p.m * p.a / 2.0
}

/// Lower bound of the focusing regime in terms of the subcritical sharp constant.
pub fn focusing_lower_bound(p: &Params, a_star_v: f64, gn_sub_const: f64) -> f64 {
    let nq = p.dim as f64 * p.q;
    let r = (p.a / a_star_v).powf(1.0 / p.dim as f64);
    let inner = p.mu * gn_sub_const / (p.q + 2.0) * p.a.powf((p.q + 2.0 - nq) / 2.0);
    -(2.0 - nq) / 2.0
        * nq.powf(nq / (2.0 - nq))
        * (1.0 - r).powf(-nq / (2.0 - nq))
        * inner.powf(2.0 / (2.0 - nq))
}

/// Bounds of the regime `case`, checked against the parameters.
pub fn regime_bounds(
    case: CaseId,
    p: &Params,
    c: &ReferenceConstants,
    computed_e: Option<f64>,
) -> Result<BoundReport> {
    p.validate()?;
    if p.dim != c.dim {
        return Err(Error::Params("reference dimension differs from parameters".into()));
    }
    if !case.matches(p, c.a_star_v) {
        return Err(Error::Params(format!(
            "parameters (a = {}, m = {}, mu = {}) are not in case {} (a*_v = {})",
            p.a,
            p.m,
            p.mu,
            case.label(),
            c.a_star_v
        )));
    }
    let h = HInputs::new(p, c);
    let (lower, upper, upper_strict, strict_upper) = match case {
        CaseId::Case1 => {
            if (p.q - c.q).abs() > 1e-12 {
                return Err(Error::Params("sharp constant computed for a different q".into()));
            }
            (
                BoundValue::Finite(focusing_lower_bound(p, c.a_star_v, c.gn_sub_const)),
                BoundValue::Finite(rest_energy_bound(p)),
                true,
                None,
            )
        }
        CaseId::Case2 | CaseId::Case3i => {
            let hm = h_min(&h)?;
            let strict = if case == CaseId::Case3i { Some(rest_energy_bound(p)) } else { None };
            (
                BoundValue::Finite(massive_lower_bound(p, c.a_star_v)),
                BoundValue::Finite(hm.value),
                false,
                strict,
            )
        }
        CaseId::Case3ii | CaseId::Case4ii | CaseId::Case4iv | CaseId::Case4v => {
            (BoundValue::Finite(0.0), BoundValue::Finite(0.0), false, None)
        }
        CaseId::Case4i | CaseId::Case4iii => {
            (BoundValue::NegInfinity, BoundValue::NegInfinity, false, None)
        }
    };
    let slack_low = computed_e.and_then(|e| lower.finite().map(|l| e - l));
    let slack_high = computed_e.and_then(|e| upper.finite().map(|u| u - e));
    Ok(BoundReport { case, lower, upper, upper_strict, strict_upper, computed_e, slack_low, slack_high })
}

/// Energy of the trial state `tau^{N/2} sqrt(a/a*_v) Q_v(tau x)`.
///
/// Evaluated through exact dilation identities on the samples of `Q_v`,
/// so any `tau > 0` is representable.
pub fn trial_energy(qv: &Field, p: &Params, a_star_v: f64, tau: f64) -> Result<f64> {
    p.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Params(format!("trial scale {tau} must be positive")));
    }
    let n = p.dim as f64;
    let s = p.a / a_star_v;
    let kin = 0.5 * s * tau * quadratic_form_tmv(qv, p.m / tau, &p.v)?;
    let crit = n / (2.0 * n + 2.0) * s.powf(1.0 + 1.0 / n) * tau * lp_norm_pow(qv, 2.0 + 2.0 / n);
    let sub = p.mu / (p.q + 2.0)
        * s.powf((p.q + 2.0) / 2.0)
        * tau.powf(n * p.q / 2.0)
        * lp_norm_pow(qv, p.q + 2.0);
    Ok(kin - crit - sub)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub tau: f64,
    pub energy: f64,
    /// Whether `tau` lies inside the admissible scale window.
    pub resolvable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessTrace {
    pub case: CaseId,
    pub points: Vec<WitnessPoint>,
    /// Set when part of the schedule fell outside the scale window.
    pub truncated: bool,
    /// Secant slope of the last two resolvable points.
    pub last_slope: Option<f64>,
    /// Same secant for the analytic leading-order model.
    pub model_slope: Option<f64>,
}

/// Admissible trial scales; outside this window the trace is truncated.
pub const TAU_WINDOW: (f64, f64) = (1e-6, 1e6);

/// Leading-order model of the trial energy for large or small `tau`.
pub fn witness_model(case: CaseId, p: &Params, a_star_v: f64, norm_q2: f64, tau: f64) -> f64 {
    let n = p.dim as f64;
    let s = p.a / a_star_v;
    let r = s.powf(1.0 / n);
    let sub = p.mu / (p.q + 2.0) * s.powf((p.q + 2.0) / 2.0) * tau.powf(n * p.q / 2.0) * norm_q2;
    match case {
        CaseId::Case4iii => n * p.a / 2.0 * (1.0 - r) * tau - sub,
        CaseId::Case4i => -sub,
        _ => 0.0,
    }
}

/// Energies of the trial family along `schedule`.
pub fn nonexistence_witness(
    case: CaseId,
    p: &Params,
    qv: &Field,
    a_star_v: f64,
    schedule: &[f64],
) -> Result<WitnessTrace> {
    if !case.matches(p, a_star_v) {
        return Err(Error::Params(format!("parameters are not in case {}", case.label())));
    }
    if !matches!(
        case,
        CaseId::Case4i | CaseId::Case4ii | CaseId::Case4iii | CaseId::Case4iv | CaseId::Case4v
    ) {
        return Err(Error::Params(format!("case {} admits minimisers", case.label())));
    }
    if schedule.len() < 2 || schedule.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Params("schedule needs at least two positive scales".into()));
    }
    let mut points = Vec::with_capacity(schedule.len());
    let mut truncated = false;
    for &tau in schedule {
        let resolvable = tau >= TAU_WINDOW.0 && tau <= TAU_WINDOW.1;
        if !resolvable {
            truncated = true;
            continue;
        }
        points.push(WitnessPoint { tau, energy: trial_energy(qv, p, a_star_v, tau)?, resolvable });
    }
    let norm_q2 = lp_norm_pow(qv, p.q + 2.0);
    let (last_slope, model_slope) = if points.len() >= 2 {
        let a = points[points.len() - 2];
        let b = points[points.len() - 1];
        let ms = (witness_model(case, p, a_star_v, norm_q2, b.tau)
            - witness_model(case, p, a_star_v, norm_q2, a.tau))
            / (b.tau - a.tau);
        (Some((b.energy - a.energy) / (b.tau - a.tau)), Some(ms))
    } else {
        (None, None)
    };
    Ok(WitnessTrace { case, points, truncated, last_slope, model_slope })
}
