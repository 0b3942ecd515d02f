//! Petviashvili iteration for the free ground-state equation and a
//! preconditioned, mass-projected descent for the constrained problem.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, energy_gradient, EnergyBreakdown, Params};
use crate::error::{Error, Result};
use crate::spectral::{
    apply_symbol, lp_norm_pow, power_nonlinearity, quadratic_form_tv, Field, Grid, Symbol,
    Velocity,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Normalised preconditioned gradient flow.
    #[default]
    GradientFlow,
    /// Polak-Ribiere conjugate directions in the preconditioned metric.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOpts {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial pseudo-time step.
    pub dt: f64,
    pub dt_max: f64,
    pub method: Method,
    /// Descent below `energy_floor * (1 + m a)` is reported as unbounded.
    pub energy_floor: f64,
    /// Iterations without residual progress before declaring stagnation.
    pub stagnation_window: usize,
    /// Spectral mass fraction beyond two thirds of Nyquist that counts as collapse.
    pub collapse_fraction: f64,
    /// Admissible `\int_{|x|>L/2} |u|^2 / a` for an accepted solution.
    pub boundary_tol: f64,
    pub pin_translation: bool,
    pub seed: u64,
    /// Relative amplitude of seeded noise on the initial guess.
    pub jitter: f64,
    /// Phase factor `theta` in `exp(i theta v.x)` of the initial guess.
    pub phase_theta: f64,
    /// Gaussian width of the initial guess in units of `L`.
    pub width_fraction: f64,
    pub trace_every: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            tol: 1e-8,
            max_iter: 20_000,
            dt: 0.5,
            dt_max: 50.0,
            method: Method::GradientFlow,
            energy_floor: -1e6,
            stagnation_window: 10_000,
            collapse_fraction: 1e-3,
            boundary_tol: 1e-4,
            pin_translation: true,
            seed: 0,
            jitter: 0.0,
            phase_theta: 0.0,
            width_fraction: 0.125,
            trace_every: 1,
        }
    }
}

impl SolverOpts {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Invalid(format!("solver option {name} = {x} must be positive")))
            }
        };
        pos(self.tol, "tol")?;
        pos(self.dt, "dt")?;
        pos(self.dt_max, "dt_max")?;
        pos(self.collapse_fraction, "collapse_fraction")?;
        pos(self.boundary_tol, "boundary_tol")?;
        pos(self.width_fraction, "width_fraction")?;
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::Invalid("jitter must be >= 0".into()));
        }
        if self.max_iter == 0 || self.trace_every == 0 || self.stagnation_window == 0 {
            return Err(Error::Invalid("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIterations,
    /// Energy fell below the floor or the state collapsed to the grid scale.
    Unbounded,
    Stagnated,
    StepFailure,
    /// Residual met but too much mass near the box boundary.
    BoundaryMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub multiplier: f64,
    /// `||u||_2^2` of the iterate.
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub state: Option<Field>,
    pub energy: EnergyBreakdown,
    /// `Re <grad E, u> / ||u||^2`.
    pub multiplier: f64,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    pub verdict: Verdict,
    pub mass: f64,
    /// `\int_{|x|>L/2} |u|^2 / ||u||^2`.
    pub boundary_mass: f64,
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    pub fn state(&self) -> &Field {
        self.state.as_ref().expect("solve result carries its state")
    }
}

/// Gaussian of width `sigma`, normalised to `mass`, with optional boost phase and noise.
pub fn gaussian_guess(
    grid: &Grid,
    mass: f64,
    sigma: f64,
    v: &Velocity,
    theta: f64,
    jitter: f64,
    seed: u64,
) -> Result<Field> {
    if !(sigma > 0.0 && mass > 0.0) {
        return Err(Error::Invalid("guess width and mass must be positive".into()));
    }
    let base = Field::from_fn(grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let phase = theta * v.dot(x);
        Complex64::from_polar((-r2 / (2.0 * sigma * sigma)).exp(), phase)
    });
    if jitter == 0.0 {
        return base.normalized_to(mass);
    }
    // Noise is band-limited to half the Nyquist wavenumber and scaled to unit peak.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let cut = 0.5 * std::f64::consts::PI / grid.dx();
    let mut spec = grid.fft(&white);
    for (i, z) in spec.iter_mut().enumerate() {
        if grid.kabs(i) > cut {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    let noise = grid.ifft(&spec);
    let peak = noise.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let values = base
        .values()
        .iter()
        .zip(&noise)
        .map(|(&z, e)| z * (Complex64::new(1.0, 0.0) + e * (jitter / peak)))
        .collect();
    Field::new(grid, values)?.normalized_to(mass)
}

fn default_guess(grid: &Grid, mass: f64, v: &Velocity, opts: &SolverOpts) -> Result<Field> {
    gaussian_guess(
        grid,
        mass,
        opts.width_fraction * grid.half_width(),
        v,
        opts.phase_theta,
        opts.jitter,
        opts.seed,
    )
}

/// Integer-cell shift that moves the circular centre of `|u|^2` to the origin.
pub fn centering_shift(f: &Field) -> [i64; 3] {
    let g = f.grid();
    let m = g.points();
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    let tw: Vec<Complex64> = (0..m)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64))
        .collect();
    for (i, z) in f.values().iter().enumerate() {
        let w = z.norm_sqr();
        let mi = g.multi_index(i);
        for a in 0..g.dim() {
            acc[a] += tw[mi[a]] * w;
        }
    }
    let mut shift = [0i64; 3];
    for a in 0..g.dim() {
        if acc[a].norm() == 0.0 {
            continue;
        }
        let centre = acc[a].arg().rem_euclid(2.0 * std::f64::consts::PI) * m as f64
            / (2.0 * std::f64::consts::PI);
        let s = (m as f64 / 2.0 - centre).round() as i64;
        shift[a] = s.rem_euclid(m as i64);
        if shift[a] > m as i64 / 2 {
            shift[a] -= m as i64;
        }
    }
    shift
}

/// Circular centre of `|u|^2` in physical coordinates.
pub fn centre_of_mass(f: &Field) -> [f64; 3] {
    let g = f.grid();
    let m = g.points();
    let shift = centering_shift(f);
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    let two_pi = 2.0 * std::f64::consts::PI;
    for (i, z) in f.values().iter().enumerate() {
        let w = z.norm_sqr();
        let mi = g.multi_index(i);
        for a in 0..g.dim() {
            acc[a] += Complex64::from_polar(w, two_pi * mi[a] as f64 / m as f64);
        }
    }
    let mut c = [0.0; 3];
    for a in 0..g.dim() {
        // Unwrap around the node nearest to the centre found by whole-cell search.
        let near = (m as f64 / 2.0 - shift[a] as f64) * two_pi / m as f64;
        let delta = (acc[a] * Complex64::from_polar(1.0, -near)).arg();
        let idx = near / two_pi * m as f64 + delta / two_pi * m as f64;
        c[a] = -g.half_width() + idx * g.dx();
    }
    c
}

pub fn pin_translation(f: &Field) -> Field {
    f.rolled(&centering_shift(f))
}

/// `\int_{|x|>L/2} |u|^2 / \int |u|^2`.
pub fn boundary_mass_fraction(f: &Field) -> f64 {
    let g = f.grid();
    let r0 = 0.5 * g.half_width();
    let outer: f64 = f
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let x = g.position(*i);
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > r0 * r0
        })
        .map(|(_, z)| z.norm_sqr())
        .sum();
    let total: f64 = f.values().iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

/// Fraction of `\int |f^|^2` carried by `|k|` above two thirds of Nyquist.
pub fn high_frequency_fraction(f: &Field) -> f64 {
    let g = f.grid();
    let cut = 2.0 / 3.0 * g.dk() * (g.points() / 2) as f64;
    let hi = f.spectral_quadrature(|i| if g.kabs(i) > cut { 1.0 } else { 0.0 });
    let all = f.spectral_mass();
    if all == 0.0 {
        0.0
    } else {
        hi / all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PetviashviliOpts {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub jitter: f64,
    pub width_fraction: f64,
    pub phase_theta: f64,
    pub pin_translation: bool,
    pub boundary_tol: f64,
}

impl Default for PetviashviliOpts {
    fn default() -> Self {
        PetviashviliOpts {
            tol: 1e-10,
            max_iter: 5000,
            seed: 0,
            jitter: 0.0,
            width_fraction: 0.125,
            phase_theta: 0.0,
            pin_translation: true,
            boundary_tol: 1e-4,
        }
    }
}

/// Solves `(sqrt(-Lap) + i v.grad + 1) u = |u|^p u` by Petviashvili iteration.
///
/// The returned `mass` is `||u||_2^2`; for `p = 2/N` this is the critical mass.
pub fn petviashvili(
    grid: &Grid,
    v: &Velocity,
    p: f64,
    opts: &PetviashviliOpts,
    init: Option<&Field>,
) -> Result<SolveResult> {
    let dim = grid.dim();
    v.check_subluminal(dim)?;
    let pmax = if dim == 1 { f64::INFINITY } else { 2.0 / (dim as f64 - 1.0) };
    if !(p > 0.0 && p < pmax) {
        return Err(Error::Params(format!("power {p} outside (0, {pmax})")));
    }
    let lin = Symbol::Relativistic { m: 0.0, v: *v };
    let inv = Symbol::InvShifted { m: 0.0, v: *v, c: 1.0 };
    let alpha = (p + 1.0) / p;
    let mut u = match init {
        Some(f) => f.clone(),
        None => {
            let so = SolverOpts {
                seed: opts.seed,
                jitter: opts.jitter,
                width_fraction: opts.width_fraction,
                phase_theta: opts.phase_theta,
                ..SolverOpts::default()
            };
            default_guess(grid, 1.0, v, &so)?
        }
    };
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;
    for it in 0..opts.max_iter {
        iters = it;
        let nu = power_nonlinearity(&u, p);
        let lu = apply_symbol(&u, &lin)?.axpy(1.0, &u);
        let num = lu.inner(&u).re;
        let den = nu.inner(&u).re;
        if !(den > 0.0 && num > 0.0) {
            return Err(Error::Invalid("Petviashvili iteration degenerated".into()));
        }
        let s = num / den;
        residual = lu.sub(&nu).l2_norm() / u.l2_norm();
        trace.push(TraceRow { iter: it, energy: s, residual, multiplier: -1.0, mass: u.mass() });
        if residual <= opts.tol && (s - 1.0).abs() <= opts.tol {
            converged = true;
            break;
        }
        u = apply_symbol(&nu, &inv)?.scaled(s.powf(alpha));
        if opts.pin_translation {
            // Sub-cell recentring suppresses the slow drift along lattice translations.
            let c = centre_of_mass(&u);
            u = u.translated(&[-c[0], -c[1], -c[2]]);
        }
        if !u.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    if opts.pin_translation {
        u = pin_translation(&u);
    }
    let t = quadratic_form_tv(&u, v)?;
    let pw = lp_norm_pow(&u, p + 2.0) / (p + 2.0);
    let e = EnergyBreakdown { kinetic: 0.5 * t, power_crit: pw, power_sub: 0.0, total: 0.5 * t - pw };
    let mass = u.mass();
    let multiplier = (t - (p + 2.0) * pw) / mass;
    let boundary_mass = boundary_mass_fraction(&u);
    let verdict = if !converged {
        Verdict::MaxIterations
    } else if boundary_mass > opts.boundary_tol {
        Verdict::BoundaryMass
    } else {
        Verdict::Converged
    };
    Ok(SolveResult {
        state: Some(u),
        energy: e,
        multiplier,
        residual,
        iters,
        converged: verdict == Verdict::Converged,
        verdict,
        mass,
        boundary_mass,
        trace,
    })
}

struct Probe {
    u: Field,
    e: EnergyBreakdown,
}

fn probe(u: &Field, dir: &Field, t: f64, p: &Params) -> Result<Probe> {
    let w = u.axpy(t, dir).normalized_to(p.a)?;
    let e = energy(&w, p)?;
    Ok(Probe { u: w, e })
}

/// Largest relative change of the iterate in one step.
const TRUST_RADIUS: f64 = 0.2;

/// Minimises the energy on the sphere `||u||_2^2 = a`.
pub fn constrained_minimize(
    grid: &Grid,
    p: &Params,
    opts: &SolverOpts,
    init: Option<&Field>,
) -> Result<SolveResult> {
    p.validate()?;
    opts.validate()?;
    if grid.dim() != p.dim {
        return Err(Error::Params("grid and parameter dimensions differ".into()));
    }
    let mut u = match init {
        Some(f) => {
            if f.grid().dim() != grid.dim() || f.grid().points() != grid.points() {
                return Err(Error::GridMismatch);
            }
            f.with_grid(grid)?.normalized_to(p.a)?
        }
        None => default_guess(grid, p.a, &p.v, opts)?,
    };
    let mut shift = f64::NAN;
    let floor = opts.energy_floor * (1.0 + p.m * p.a);
    let mut e = energy(&u, p)?;
    let mut dt = opts.dt;
    let mut trace = Vec::new();
    let mut best_res = f64::INFINITY;
    let mut best_iter = 0;
    let mut prev: Option<(Field, Field, f64)> = None; // (r, direction, <r, P r>)
    let mut cached_g: Option<Field> = None;
    let mut verdict = Verdict::MaxIterations;
    let mut residual = f64::INFINITY;
    let mut multiplier = 0.0;
    let mut iters = 0;
    for it in 0..=opts.max_iter {
        iters = it;
        let g = match cached_g.take() {
            Some(g) => g,
            None => energy_gradient(&u, p)?,
        };
        multiplier = g.inner(&u).re / p.a;
        residual = g.axpy(-multiplier, &u).l2_norm() / p.a.sqrt();
        if it % opts.trace_every == 0 {
            trace.push(TraceRow { iter: it, energy: e.total, residual, multiplier, mass: u.mass() });
        }
        if !residual.is_finite() || !e.total.is_finite() {
            return Err(Error::NonFinite);
        }
        if residual <= opts.tol {
            verdict = Verdict::Converged;
            break;
        }
        if e.total < floor || high_frequency_fraction(&u) > opts.collapse_fraction {
            verdict = Verdict::Unbounded;
            break;
        }
        if residual < best_res * (1.0 - 1e-6) {
            best_res = residual;
            best_iter = it;
        } else if it - best_iter >= opts.stagnation_window {
            verdict = Verdict::Stagnated;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        // The shift tracks the multiplier so that P approximates the inverse
        // constrained Hessian; it is only updated on large relative changes.
        let target = (-multiplier).max(0.05 * 2.0 * e.kinetic.abs() / p.a);
        if !(shift.is_finite() && (target / shift - 1.0).abs() < 0.1) {
            shift = target;
            if let Some((r_old, dir_old, _)) = prev.take() {
                drop((r_old, dir_old));
            }
        }
        let precond = Symbol::InvShifted { m: p.m, v: p.v, c: shift.max(1e-12) };
        // Riemannian gradient in the metric induced by the preconditioner.
        let pg = apply_symbol(&g, &precond)?;
        let pu = apply_symbol(&u, &precond)?;
        let lam_p = pg.inner(&u).re / pu.inner(&u).re;
        let r = g.axpy(-lam_p, &u);
        let d = pg.axpy(-lam_p, &pu);
        let rd = r.inner(&d).re;
        let mut dir = d.scaled(-1.0);
        if opts.method == Method::ConjugateGradient {
            if let Some((r_old, dir_old, rd_old)) = &prev {
                let beta = (r.sub(r_old).inner(&d).re / rd_old).max(0.0);
                if beta > 0.0 {
                    let cand = dir.axpy(beta, dir_old);
                    let cand = cand.axpy(-cand.inner(&u).re / p.a, &u);
                    if r.inner(&cand).re < 0.0 {
                        dir = cand;
                    }
                }
            }
        }
        // `dir` is tangent, so pairing it with `r` avoids the cancellation
        // against the large multiplier component of `g`.
        let slope = r.inner(&dir).re;
        let noise = 1e-13 * (e.kinetic.abs() + e.power_crit.abs() + e.power_sub.abs());
        let mut accepted = None;
        let mut t = dt.min(TRUST_RADIUS * p.a.sqrt() / dir.l2_norm());
        for halving in 0..=30 {
            let trial = probe(&u, &dir, t, p)?;
            if trial.e.total < e.total - noise {
                let mut best = (trial, t);
                let curv = best.0.e.total - e.total - slope * t;
                if curv > 0.0 {
                    let tq = -slope * t * t / (2.0 * curv);
                    if tq > 0.2 * t && tq < 5.0 * t && (tq - t).abs() > 0.1 * t {
                        let alt = probe(&u, &dir, tq, p)?;
                        if alt.e.total < best.0.e.total {
                            best = (alt, tq);
                        }
                    }
                }
                accepted = Some((best, halving, None));
                break;
            }
            if trial.e.total <= e.total + noise {
                // Energy differences are at rounding level: use the directional
                // derivative instead, with one secant correction if it changed sign.
                let gt = energy_gradient(&trial.u, p)?;
                let lt = gt.inner(&trial.u).re / p.a;
                let slope_t = gt.axpy(-lt, &trial.u).inner(&dir).re;
                if slope_t <= 0.0 {
                    accepted = Some(((trial, t), halving, Some(gt)));
                } else {
                    let ts = t * slope / (slope - slope_t);
                    let ts = if ts.is_finite() && ts > 0.0 && ts < t { ts } else { 0.5 * t };
                    accepted = Some(((probe(&u, &dir, ts, p)?, ts), halving + 1, None));
                }
                break;
            }
            t *= 0.5;
        }
        let Some(((trial, t_used), halvings, g_next)) = accepted else {
            verdict = Verdict::StepFailure;
            break;
        };
        dt = if halvings == 0 && t_used >= dt { (t_used * 1.25).min(opts.dt_max) } else { t_used };
        dt = dt.min(opts.dt_max);
        u = trial.u;
        e = trial.e;
        cached_g = g_next;
        prev = Some((r, dir, rd));
    }
    if verdict == Verdict::Converged && opts.pin_translation {
        u = pin_translation(&u);
    }
    let boundary_mass = boundary_mass_fraction(&u);
    if verdict == Verdict::Converged && boundary_mass > opts.boundary_tol {
        verdict = Verdict::BoundaryMass;
    }
    let mass = u.mass();
    Ok(SolveResult {
        state: Some(u),
        energy: e,
        multiplier,
        residual,
        iters,
        converged: verdict == Verdict::Converged,
        verdict,
        mass,
        boundary_mass,
        trace,
    })
}
