//! Ground states, critical masses and sharp interpolation constants.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::ReferenceConstants;
use crate::energy::{pohozaev_residuals, PohozaevResiduals};
use crate::error::{Error, Result};
use crate::io::{read_field, write_field};
use crate::solver::{petviashvili, PetviashviliOpts, SolveResult};
use crate::spectral::{lp_norm_pow, quadratic_form_tv, spectral_integral_i, Field, Grid, Velocity};

pub use crate::spectral::reflection_momentum;

/// Identifies a cached bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceKey {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub v: Velocity,
    pub q: f64,
    pub tol: f64,
}

impl ReferenceKey {
    pub fn slug(&self) -> String {
        format!(
            "N{}_L{}_M{}_v{}_{}_{}_q{}_tol{:e}",
            self.dim,
            self.half_width,
            self.points,
            self.v.0[0],
            self.v.0[1],
            self.v.0[2],
            self.q,
            self.tol
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceDiagnostics {
    pub pohozaev_q: PohozaevResiduals,
    pub pohozaev_qv: PohozaevResiduals,
    pub residual_q: f64,
    pub residual_qv: f64,
    pub residual_uv: f64,
    pub boundary_mass_qv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceBundle {
    pub key: ReferenceKey,
    #[serde(skip)]
    pub q: Option<Field>,
    #[serde(skip)]
    pub qv: Option<Field>,
    /// Optimiser of the subcritical inequality with exponent `q`.
    #[serde(skip)]
    pub uv: Option<Field>,
    pub a_star: f64,
    pub a_star_v: f64,
    /// `(N+1) / (N (a*_v)^{1/N})`.
    pub gn_crit_const: f64,
    /// Sharp constant of the subcritical inequality with exponent `q`.
    pub gn_sub_const: f64,
    /// `||U_v||_2^2` of the subcritical optimiser.
    pub uv_mass: f64,
    /// `\int |Q_v^|^2/|k| dk`.
    pub i_v: f64,
    /// `\int |Q^|^2/|k| dk`.
    pub i_0: f64,
    /// `||Q_v||_{q+2}^{q+2}`.
    pub norm_q2: f64,
    /// `||Q||_{q+2}^{q+2}`.
    pub norm_q2_0: f64,
    pub diagnostics: ReferenceDiagnostics,
}

impl ReferenceBundle {
    pub fn q_field(&self) -> &Field {
        self.q.as_ref().expect("bundle carries Q")
    }
    pub fn qv_field(&self) -> &Field {
        self.qv.as_ref().expect("bundle carries Q_v")
    }
    pub fn uv_field(&self) -> &Field {
        self.uv.as_ref().expect("bundle carries U_v")
    }

    pub fn constants(&self) -> ReferenceConstants {
        ReferenceConstants {
            dim: self.key.dim,
            a_star: self.a_star,
            a_star_v: self.a_star_v,
            q: self.key.q,
            gn_sub_const: self.gn_sub_const,
            i_v: self.i_v,
            norm_q2: self.norm_q2,
        }
    }
}

/// `C_{v,N,p}` from the mass of an optimiser of the inequality with exponent `p`.
pub fn sharp_gn_constant(p: f64, n: usize, optimiser_mass: f64) -> f64 {
    let nf = n as f64;
    let np = nf * p;
    (p + 2.0) / (p + 2.0 - np) * (((p + 2.0 - np) / np).powf(nf) / optimiser_mass).powf(p / 2.0)
}

fn require(r: SolveResult, what: &str) -> Result<SolveResult> {
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NotConverged(format!(
            "{what}: {:?} after {} iterations, residual {:.3e}, boundary mass {:.3e}",
            r.verdict, r.iters, r.residual, r.boundary_mass
        )))
    }
}

/// Computes `Q`, `Q_v`, the subcritical optimiser and derived constants.
pub fn build_reference(
    grid: &Grid,
    v: &Velocity,
    q: f64,
    opts: &PetviashviliOpts,
) -> Result<ReferenceBundle> {
    let n = grid.dim();
    v.check_subluminal(n)?;
    if !(q > 0.0 && q < 2.0 / n as f64) {
        return Err(Error::Params(format!("q = {q} must lie in (0, 2/N)")));
    }
    let crit = 2.0 / n as f64;
    let rq = require(petviashvili(grid, &Velocity::ZERO, crit, opts, None)?, "Q")?;
    let rqv = if v.norm() == 0.0 {
        rq.clone()
    } else {
        require(petviashvili(grid, v, crit, opts, None)?, "Q_v")?
    };
    let ruv = require(petviashvili(grid, v, q, opts, None)?, "U_v")?;
    let q_field = rq.state.clone().unwrap();
    let qv_field = rqv.state.clone().unwrap();
    let uv_field = ruv.state.clone().unwrap();
    let a_star = q_field.mass();
    let a_star_v = qv_field.mass();
    let uv_mass = uv_field.mass();
    let diagnostics = ReferenceDiagnostics {
        pohozaev_q: pohozaev_residuals(&q_field, &Velocity::ZERO)?,
        pohozaev_qv: pohozaev_residuals(&qv_field, v)?,
        residual_q: rq.residual,
        residual_qv: rqv.residual,
        residual_uv: ruv.residual,
        boundary_mass_qv: rqv.boundary_mass,
    };
    Ok(ReferenceBundle {
        key: ReferenceKey {
            dim: n,
            half_width: grid.half_width(),
            points: grid.points(),
            v: *v,
            q,
            tol: opts.tol,
        },
        a_star,
        a_star_v,
        gn_crit_const: (n as f64 + 1.0) / (n as f64 * a_star_v.powf(1.0 / n as f64)),
        gn_sub_const: sharp_gn_constant(q, n, uv_mass),
        uv_mass,
        i_v: spectral_integral_i(&qv_field),
        i_0: spectral_integral_i(&q_field),
        norm_q2: lp_norm_pow(&qv_field, q + 2.0),
        norm_q2_0: lp_norm_pow(&q_field, q + 2.0),
        diagnostics,
        q: Some(q_field),
        qv: Some(qv_field),
        uv: Some(uv_field),
    })
}

/// Loads a bundle from `BOOSTEDGS_CACHE` or builds and stores it.
pub fn load_or_build(
    grid: &Grid,
    v: &Velocity,
    q: f64,
    opts: &PetviashviliOpts,
) -> Result<ReferenceBundle> {
    match std::env::var_os("BOOSTEDGS_CACHE") {
        Some(dir) => load_or_build_in(Path::new(&dir), grid, v, q, opts),
        None => build_reference(grid, v, q, opts),
    }
}

pub fn load_or_build_in(
    dir: &Path,
    grid: &Grid,
    v: &Velocity,
    q: f64,
    opts: &PetviashviliOpts,
) -> Result<ReferenceBundle> {
    let key = ReferenceKey {
        dim: grid.dim(),
        half_width: grid.half_width(),
        points: grid.points(),
        v: *v,
        q,
        tol: opts.tol,
    };
    let base = dir.join(key.slug());
    if let Ok(b) = load_bundle(&base) {
        if b.key == key {
            return Ok(b);
        }
    }
    let b = build_reference(grid, v, q, opts)?;
    save_bundle(&base, &b)?;
    Ok(b)
}

fn bundle_files(base: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    (
        base.join("bundle.json"),
        base.join("q.bin"),
        base.join("qv.bin"),
        base.join("uv.bin"),
    )
}

pub fn save_bundle(base: &Path, b: &ReferenceBundle) -> Result<()> {
    std::fs::create_dir_all(base)?;
    let (json, q, qv, uv) = bundle_files(base);
    let meta = serde_json::to_value(b.key)?;
    write_field(&q, b.q_field(), meta.clone())?;
    write_field(&qv, b.qv_field(), meta.clone())?;
    write_field(&uv, b.uv_field(), meta)?;
    std::fs::write(json, serde_json::to_string_pretty(b)?)?;
    Ok(())
}

pub fn load_bundle(base: &Path) -> Result<ReferenceBundle> {
    let (json, q, qv, uv) = bundle_files(base);
    let mut b: ReferenceBundle = serde_json::from_str(&std::fs::read_to_string(json)?)?;
    b.q = Some(read_field(&q)?.0);
    b.qv = Some(read_field(&qv)?.0);
    b.uv = Some(read_field(&uv)?.0);
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnKind {
    /// Mass-critical inequality with the sharp constant from `a*_v`.
    Critical,
    /// Subcritical inequality with exponent `q` of the bundle.
    Subcritical,
}

/// Ratio of the left to the right side of the interpolation inequality; at most one.
pub fn verify_gn(f: &Field, b: &ReferenceBundle, which: GnKind) -> Result<f64> {
    let n = f.grid().dim();
    if n != b.key.dim {
        return Err(Error::Params("field and bundle dimensions differ".into()));
    }
    let nf = n as f64;
    let t = quadratic_form_tv(f, &b.key.v)?;
    let mass = f.mass();
    if mass == 0.0 || t <= 0.0 {
        return Err(Error::Invalid("inequality undefined for the zero field".into()));
    }
    match which {
        GnKind::Critical => {
            let lhs = lp_norm_pow(f, 2.0 + 2.0 / nf);
            Ok(lhs / (b.gn_crit_const * t * mass.powf(1.0 / nf)))
        }
        GnKind::Subcritical => {
            let q = b.key.q;
            let lhs = lp_norm_pow(f, q + 2.0);
            let rhs = b.gn_sub_const * t.powf(nf * q / 2.0) * mass.powf((q + 2.0 - nf * q) / 2.0);
            Ok(lhs / rhs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    /// `(r, max_{bin} |f| r^{N+1})` per radial bin of one cell width.
    pub rows: Vec<(f64, f64)>,
    /// Log-log slope of the weighted profile over `[L/8, L/2]`.
    pub trend: f64,
    /// No growth trend: the slope stays below one.
    pub bounded: bool,
}

pub fn decay_profile(f: &Field) -> DecayProfile {
    let g = f.grid();
    let dx = g.dx();
    let nbins = (g.half_width() / dx).floor() as usize;
    let mut maxima = vec![0.0f64; nbins];
    for (i, z) in f.values().iter().enumerate() {
        let x = g.position(i);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let bin = (r / dx) as usize;
        if bin < nbins {
            maxima[bin] = maxima[bin].max(z.norm());
        }
    }
    let p = g.dim() as i32 + 1;
    let rows: Vec<(f64, f64)> = maxima
        .iter()
        .enumerate()
        .map(|(b, &v)| {
            let r = (b as f64 + 0.5) * dx;
            (r, v * r.powi(p))
        })
        .collect();
    let (lo, hi) = (g.half_width() / 8.0, g.half_width() / 2.0);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(r, v)| *r >= lo && *r <= hi && *v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    let trend = slope(&pts);
    DecayProfile { rows, trend, bounded: trend.is_finite() && trend < 1.0 }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Critical mass of the boosted equation at velocity `beta e_1`.
pub fn critical_mass_along_x(grid: &Grid, beta: f64, opts: &PetviashviliOpts) -> Result<(f64, Field)> {
    let v = Velocity::along_x(beta);
    let r = require(petviashvili(grid, &v, 2.0 / grid.dim() as f64, opts, None)?, "Q_beta")?;
    let f = r.state.unwrap();
    Ok((f.mass(), f))
}
