//! Energy functional, L2 gradient, Lagrange multiplier and identity residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    apply_symbol, lp_norm_pow, power_nonlinearity, quadratic_form_tmv, quadratic_form_tv, Field,
    Symbol, Velocity,
};

/// Physical parameters of the constrained problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub dim: usize,
    /// Particle mass `m >= 0`.
    pub m: f64,
    pub v: Velocity,
    /// Coefficient of the subcritical term.
    pub mu: f64,
    /// Subcritical exponent, `0 < q < 2/N`.
    pub q: f64,
    /// Prescribed mass `a = ||u||_2^2`.
    pub a: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Params(format!("dimension {} not supported", self.dim)));
        }
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(Error::Params(format!("m = {} must be finite and >= 0", self.m)));
        }
        self.v.check_subluminal(self.dim)?;
        if !self.mu.is_finite() {
            return Err(Error::Params("mu must be finite".into()));
        }
        let qmax = self.critical_power();
        if !(self.q > 0.0 && self.q < qmax) {
            return Err(Error::Params(format!("q = {} must lie in (0, {qmax})", self.q)));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Params(format!("a = {} must be positive", self.a)));
        }
        Ok(())
    }

    /// Exponent `2/N` of the mass-critical nonlinearity.
    pub fn critical_power(&self) -> f64 {
        2.0 / self.dim as f64
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        self.validate()?;
        if f.grid().dim() != self.dim {
            return Err(Error::Params(format!(
                "field dimension {} differs from parameter dimension {}",
                f.grid().dim(),
                self.dim
            )));
        }
        if !f.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `T_{m,v}(f) / 2`.
    pub kinetic: f64,
    /// `N/(2N+2) ||f||_{2+2/N}^{2+2/N}`.
    pub power_crit: f64,
    /// `mu/(q+2) ||f||_{q+2}^{q+2}`.
    pub power_sub: f64,
    pub total: f64,
}

pub fn energy(f: &Field, p: &Params) -> Result<EnergyBreakdown> {
    p.check_field(f)?;
    let n = p.dim as f64;
    let kinetic = 0.5 * quadratic_form_tmv(f, p.m, &p.v)?;
    let power_crit = n / (2.0 * n + 2.0) * lp_norm_pow(f, 2.0 + 2.0 / n);
    let power_sub = p.mu / (p.q + 2.0) * lp_norm_pow(f, p.q + 2.0);
    Ok(EnergyBreakdown { kinetic, power_crit, power_sub, total: kinetic - power_crit - power_sub })
}

/// `(sqrt(-Lap+m^2) + i v.grad) f - |f|^{2/N} f - mu |f|^q f`.
pub fn energy_gradient(f: &Field, p: &Params) -> Result<Field> {
    p.check_field(f)?;
    let lin = apply_symbol(f, &Symbol::Relativistic { m: p.m, v: p.v })?;
    let crit = power_nonlinearity(f, p.critical_power());
    let sub = power_nonlinearity(f, p.q);
    Ok(lin.axpy(-1.0, &crit).axpy(-p.mu, &sub))
}

/// `Re <grad E(f), f> / ||f||^2`; negative at minimisers with `m = mu = 0`.
pub fn lagrange_multiplier(f: &Field, p: &Params) -> Result<f64> {
    let g = energy_gradient(f, p)?;
    let mass = f.mass();
    if mass == 0.0 {
        return Err(Error::Invalid("zero field has no multiplier".into()));
    }
    Ok(g.inner(f).re / mass)
}

/// Multiplier reconstructed from energy and norms, valid at critical points.
pub fn multiplier_from_identity(f: &Field, p: &Params) -> Result<f64> {
    let e = energy(f, p)?;
    let n = p.dim as f64;
    let pc = lp_norm_pow(f, 2.0 + 2.0 / n);
    let pq = lp_norm_pow(f, p.q + 2.0);
    Ok((2.0 * e.total - p.q * p.mu / (p.q + 2.0) * pq - pc / (n + 1.0)) / f.mass())
}

/// `||(sqrt + i v.grad) f + lambda f - |f|^{2/N} f - mu |f|^q f|| / ||f||`.
pub fn el_residual(f: &Field, p: &Params, lambda: f64) -> Result<f64> {
    let g = energy_gradient(f, p)?;
    let norm = f.l2_norm();
    if norm == 0.0 {
        return Err(Error::Invalid("residual of the zero field is undefined".into()));
    }
    Ok(g.axpy(lambda, f).l2_norm() / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResiduals {
    /// `|T_v - N ||f||^2| / T_v`.
    pub mass_identity: f64,
    /// `|T_v - N/(N+1) ||f||_{2+2/N}^{2+2/N}| / T_v`.
    pub power_identity: f64,
}

impl PohozaevResiduals {
    pub fn max(&self) -> f64 {
        self.mass_identity.max(self.power_identity)
    }
}

pub fn pohozaev_residuals(f: &Field, v: &Velocity) -> Result<PohozaevResiduals> {
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = f.grid().dim() as f64;
    let t = quadratic_form_tv(f, v)?;
    if t <= 0.0 {
        return Err(Error::Invalid("kinetic form vanishes".into()));
    }
    let crit = lp_norm_pow(f, 2.0 + 2.0 / n);
    Ok(PohozaevResiduals {
        mass_identity: (t - n * f.mass()).abs() / t,
        power_identity: (t - n / (n + 1.0) * crit).abs() / t,
    })
}
