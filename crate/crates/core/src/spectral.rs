//! Periodic grids, complex fields and Fourier-multiplier algebra.
//!
//! Transforms follow the unitary convention on the continuum,
//! `f^(k) = (2 pi)^{-N/2} \int f(x) e^{-i k.x} dx`, discretised by the DFT
//! on the box `[-L, L)^N`. Integrals of the form `\int s(k) |f^(k)|^2 dk`
//! reduce to `cellvol / M^N * sum s(k_n) |c_n|^2` where `c_n` are the raw
//! DFT coefficients.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boost velocity. Components past the grid dimension must vanish.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity(pub [f64; 3]);

impl Velocity {
    pub const ZERO: Velocity = Velocity([0.0; 3]);

    pub fn along_x(v: f64) -> Self {
        Velocity([v, 0.0, 0.0])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() > 3 {
            return Err(Error::Params(format!("velocity has {} components", v.len())));
        }
        let mut c = [0.0; 3];
        c[..v.len()].copy_from_slice(v);
        Ok(Velocity(c))
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, k: &[f64; 3]) -> f64 {
        self.0[0] * k[0] + self.0[1] * k[1] + self.0[2] * k[2]
    }

    /// Lorentz factor `sqrt(1 - |v|^2)`.
    pub fn contraction(&self) -> f64 {
        (1.0 - self.norm().powi(2)).max(0.0).sqrt()
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::Params("velocity is not finite".into()));
        }
        if self.0[dim..].iter().any(|&c| c != 0.0) {
            return Err(Error::Params(format!("velocity has components beyond dimension {dim}")));
        }
        Ok(())
    }

    pub fn check_subluminal(&self, dim: usize) -> Result<()> {
        self.check(dim)?;
        if self.norm() >= 1.0 {
            return Err(Error::Params(format!("|v| = {} must be < 1", self.norm())));
        }
        Ok(())
    }
}

struct GridInner {
    dim: usize,
    half_width: f64,
    points: usize,
    len: usize,
    dx: f64,
    k: Vec<[f64; 3]>,
    kabs: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[-L, L)^N` with `M` points per axis.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("half_width", &self.half_width())
            .field("points", &self.points())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.points() == other.points()
                && self.half_width() == other.half_width())
    }
}

impl Grid {
    /// Production grid; `dim` must be 2 or 3.
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Grid(format!(
                "dimension {dim} not supported (use Grid::smoke for 1-D)"
            )));
        }
        Self::build(dim, half_width, points)
    }

    /// Smoke-test grid; also admits `dim = 1`.
    pub fn smoke(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Grid(format!("dimension {dim} not supported")));
        }
        Self::build(dim, half_width, points)
    }

    /// Default two-dimensional grid, `L = 32`, `M = 256`.
    pub fn default_2d() -> Self {
        Self::new(2, 32.0, 512).expect("default grid is valid")
    }

    fn build(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Grid(format!("half width {half_width} must be positive")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::Grid(format!("{points} points per axis: need a power of two >= 8")));
        }
        let len = points
            .checked_pow(dim as u32)
            .filter(|&n| n <= 1 << 27)
            .ok_or_else(|| Error::Grid("grid too large".into()))?;
        let dk = std::f64::consts::PI / half_width;
        let axis: Vec<f64> = (0..points)
            .map(|j| {
                let n = if j < points / 2 { j as i64 } else { j as i64 - points as i64 };
                n as f64 * dk
            })
            .collect();
        let mut k = vec![[0.0; 3]; len];
        let mut kabs = vec![0.0; len];
        for (idx, (kv, ka)) in k.iter_mut().zip(kabs.iter_mut()).enumerate() {
            let mut rem = idx;
            for a in (0..dim).rev() {
                kv[a] = axis[rem % points];
                rem /= points;
            }
            *ka = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]).sqrt();
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(points);
        let inv = planner.plan_fft_inverse(points);
        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                half_width,
                points,
                len,
                dx: 2.0 * half_width / points as f64,
                k,
                kabs,
                fwd,
                inv,
            }),
        })
    }

    /// Same dimension and resolution, box rescaled by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::build(self.dim(), self.half_width() * factor, self.points())
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }
    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }
    pub fn points(&self) -> usize {
        self.inner.points
    }
    pub fn len(&self) -> usize {
        self.inner.len
    }
    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }
    pub fn dx(&self) -> f64 {
        self.inner.dx
    }
    /// Lattice spacing in frequency, `pi / L`.
    pub fn dk(&self) -> f64 {
        std::f64::consts::PI / self.inner.half_width
    }
    pub fn cell_volume(&self) -> f64 {
        self.inner.dx.powi(self.inner.dim as i32)
    }
    /// Box volume `(2L)^N`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.inner.half_width).powi(self.inner.dim as i32)
    }
    /// Wavevector of spectral index `idx` (FFT ordering, Nyquist negative).
    pub fn k(&self, idx: usize) -> &[f64; 3] {
        &self.inner.k[idx]
    }
    pub fn kabs(&self, idx: usize) -> f64 {
        self.inner.kabs[idx]
    }
    pub fn wavevectors(&self) -> &[[f64; 3]] {
        &self.inner.k
    }
    /// Signed wavenumbers of one axis in FFT ordering.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        let m = self.points() as i64;
        (0..m)
            .map(|j| (if j < m / 2 { j } else { j - m }) as f64 * self.dk())
            .collect()
    }
    /// Coordinates of the axis nodes, `-L + j dx`.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points())
            .map(|j| -self.half_width() + j as f64 * self.dx())
            .collect()
    }
    /// Physical position of the node with flat index `idx`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rem = idx;
        let m = self.points();
        for a in (0..self.dim()).rev() {
            x[a] = -self.half_width() + (rem % m) as f64 * self.dx();
            rem /= m;
        }
        x
    }
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = idx;
        let m = self.points();
        for a in (0..self.dim()).rev() {
            out[a] = rem % m;
            rem /= m;
        }
        out
    }
    pub fn flat_index(&self, mi: &[usize; 3]) -> usize {
        let m = self.points();
        (0..self.dim()).fold(0, |acc, a| acc * m + mi[a] % m)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let m = self.points();
        let plan = if inverse { &self.inner.inv } else { &self.inner.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let dim = self.dim();
        let mut buf = Vec::new();
        for axis in 0..dim {
            let stride = m.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = m * stride;
            buf.resize(block, Complex64::new(0.0, 0.0));
            for chunk in data.chunks_exact_mut(block) {
                for j in 0..m {
                    for s in 0..stride {
                        buf[s * m + j] = chunk[j * stride + s];
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for j in 0..m {
                    for s in 0..stride {
                        chunk[j * stride + s] = buf[s * m + j];
                    }
                }
            }
        }
        if inverse {
            let norm = 1.0 / self.len() as f64;
            data.iter_mut().for_each(|z| *z *= norm);
        }
    }

    /// Raw forward DFT over all axes.
    pub fn fft(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.transform(&mut data, false);
        data
    }

    /// Inverse DFT including the `1/M^N` factor.
    pub fn ifft(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut data = spectrum.to_vec();
        self.transform(&mut data, true);
        data
    }
}

/// Complex field sampled on a grid, row-major, with a lazily cached spectrum.
#[derive(Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("mass", &self.mass())
            .finish()
    }
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid: grid.clone(), values, spectrum: OnceLock::new() })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field::new(grid, vec![Complex64::new(0.0, 0.0); grid.len()]).unwrap()
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Field::new(grid, values).unwrap()
    }

    /// Field from raw DFT coefficients.
    pub fn from_spectrum(grid: &Grid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::Invalid("spectrum length does not match grid".into()));
        }
        let values = grid.ifft(&spectrum);
        let field = Field::new(grid, values)?;
        let _ = field.spectrum.set(spectrum);
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Same samples reinterpreted on another grid of equal shape.
    pub fn with_grid(&self, grid: &Grid) -> Result<Self> {
        if grid.dim() != self.grid.dim() || grid.points() != self.grid.points() {
            return Err(Error::GridMismatch);
        }
        Field::new(grid, self.values.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Raw DFT coefficients (computed once).
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.fft(&self.values))
    }

    /// `\int |f|^2 dx` by the trapezoid (exact for the periodic lattice).
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `\int |f^|^2 dk` from the spectrum.
    pub fn spectral_mass(&self) -> f64 {
        self.spectral_quadrature(|_| 1.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `\int conj(self) other dx`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.cell_volume()
    }

    /// `\int s(k) |f^(k)|^2 dk`.
    pub fn spectral_quadrature(&self, s: impl Fn(usize) -> f64) -> f64 {
        let spec = self.spectrum();
        let sum: f64 = spec.iter().enumerate().map(|(i, c)| s(i) * c.norm_sqr()).sum();
        sum * self.grid.cell_volume() / self.grid.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|z| z * c)
    }

    pub fn rotated(&self, phase: f64) -> Field {
        let w = Complex64::from_polar(1.0, phase);
        self.map(|z| z * w)
    }

    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Field {
        Field::new(&self.grid, self.values.iter().map(|&z| f(z)).collect()).unwrap()
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b * c).collect();
        Field::new(&self.grid, values).unwrap()
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    /// Rescales to `\int |f|^2 = mass`.
    pub fn normalized_to(&self, mass: f64) -> Result<Field> {
        let m0 = self.mass();
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(Error::Invalid("cannot normalise a zero or non-finite field".into()));
        }
        Ok(self.scaled((mass / m0).sqrt()))
    }

    /// Circular shift by whole cells along each axis.
    pub fn rolled(&self, shift: &[i64; 3]) -> Field {
        let g = &self.grid;
        let m = g.points() as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        for (i, z) in self.values.iter().enumerate() {
            let mi = g.multi_index(i);
            let mut dst = [0usize; 3];
            for a in 0..g.dim() {
                dst[a] = (mi[a] as i64 + shift[a]).rem_euclid(m) as usize;
            }
            out[g.flat_index(&dst)] = *z;
        }
        Field::new(g, out).unwrap()
    }

    /// Translation `f(x - d)` by an arbitrary vector via Fourier phases.
    pub fn translated(&self, d: &[f64; 3]) -> Field {
        let g = &self.grid;
        let spec: Vec<Complex64> = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = g.k(i);
                let phase = -(k[0] * d[0] + k[1] * d[1] + k[2] * d[2]);
                c * Complex64::from_polar(1.0, phase)
            })
            .collect();
        Field::from_spectrum(g, spec).unwrap()
    }
}

/// Fourier multipliers used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symbol {
    SqrtLap,
    SqrtLapMass { m: f64 },
    Drift { v: Velocity },
    Relativistic { m: f64, v: Velocity },
    InvShifted { m: f64, v: Velocity, c: f64 },
    RieszInv,
}

impl Symbol {
    pub fn check(&self, dim: usize) -> Result<()> {
        let mass_ok = |m: f64| {
            if m.is_finite() && m >= 0.0 {
                Ok(())
            } else {
                Err(Error::Symbol(format!("mass {m} must be finite and >= 0")))
            }
        };
        match *self {
            Symbol::SqrtLap | Symbol::RieszInv => Ok(()),
            Symbol::SqrtLapMass { m } => mass_ok(m),
            Symbol::Drift { v } => v.check(dim).map_err(|e| Error::Symbol(e.to_string())),
            Symbol::Relativistic { m, v } => {
                mass_ok(m)?;
                v.check(dim).map_err(|e| Error::Symbol(e.to_string()))
            }
            Symbol::InvShifted { m, v, c } => {
                mass_ok(m)?;
                v.check_subluminal(dim).map_err(|e| Error::Symbol(e.to_string()))?;
                let floor = -v.contraction() * m;
                if !(c.is_finite() && c > floor) {
                    return Err(Error::Symbol(format!(
                        "shift c = {c} must exceed -sqrt(1-|v|^2) m = {floor}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Value at wavevector `k` with modulus `kabs`.
    pub fn eval(&self, k: &[f64; 3], kabs: f64) -> f64 {
        match *self {
            Symbol::SqrtLap => kabs,
            Symbol::SqrtLapMass { m } => kabs.hypot(m),
            Symbol::Drift { v } => -v.dot(k),
            Symbol::Relativistic { m, v } => kabs.hypot(m) - v.dot(k),
            Symbol::InvShifted { m, v, c } => 1.0 / (kabs.hypot(m) - v.dot(k) + c),
            Symbol::RieszInv => {
                if kabs == 0.0 {
                    0.0
                } else {
                    1.0 / kabs
                }
            }
        }
    }

    /// Symbol sampled on the grid in FFT ordering.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval(grid.k(i), grid.kabs(i))).collect()
    }
}

/// Applies a Fourier multiplier.
pub fn apply_symbol(f: &Field, s: &Symbol) -> Result<Field> {
    s.check(f.grid().dim())?;
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    let g = f.grid();
    let spec: Vec<Complex64> = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(i, c)| c * s.eval(g.k(i), g.kabs(i)))
        .collect();
    Field::from_spectrum(g, spec)
}

/// `\int |f|^p dx` (the p-th power of the norm).
pub fn lp_norm_pow(f: &Field, p: f64) -> f64 {
    let sum: f64 = if p == 2.0 {
        f.values().iter().map(|z| z.norm_sqr()).sum()
    } else {
        let h = p / 2.0;
        f.values()
            .iter()
            .map(|z| {
                let r = z.norm_sqr();
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(h)
                }
            })
            .sum()
    };
    sum * f.grid().cell_volume()
}

pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Invalid(format!("L^p exponent {p} must be >= 1")));
    }
    Ok(lp_norm_pow(f, p).powf(1.0 / p))
}

/// `|f|^p f`, with the value 0 where `f = 0`.
pub fn power_nonlinearity(f: &Field, p: f64) -> Field {
    let h = p / 2.0;
    f.map(|z| {
        let r = z.norm_sqr();
        if r == 0.0 {
            z
        } else {
            z * r.powf(h)
        }
    })
}

/// `\int s(k) |f^|^2 dk` for an arbitrary symbol.
pub fn quadratic_form(f: &Field, s: &Symbol) -> Result<f64> {
    s.check(f.grid().dim())?;
    let g = f.grid();
    Ok(f.spectral_quadrature(|i| s.eval(g.k(i), g.kabs(i))))
}

/// `T_v(f) = \int (|k| - v.k) |f^|^2 dk`.
pub fn quadratic_form_tv(f: &Field, v: &Velocity) -> Result<f64> {
    quadratic_form_tmv(f, 0.0, v)
}

/// `T_{m,v}(f) = \int (sqrt(|k|^2+m^2) - v.k) |f^|^2 dk`.
pub fn quadratic_form_tmv(f: &Field, m: f64, v: &Velocity) -> Result<f64> {
    v.check_subluminal(f.grid().dim())?;
    quadratic_form(f, &Symbol::Relativistic { m, v: *v })
}

/// Finite part of `sum_{n != 0} |n|^{-1}` on the unit lattice in 2 and 3 dimensions.
pub const LATTICE_ZETA: [f64; 2] = [-3.900264920001955, -2.837297479480620];

/// `\int |k|^{-1} |f^|^2 dk`.
///
/// The sum over `k != 0` is completed by the lattice term
/// `-Z_N dk^{N-1} |f^(0)|^2`, which accounts for the integrable singularity at
/// the origin. One-dimensional grids get the bare sum.
pub fn spectral_integral_i(f: &Field) -> f64 {
    let g = f.grid();
    let bare = f.spectral_quadrature(|i| {
        let ka = g.kabs(i);
        if ka == 0.0 {
            0.0
        } else {
            1.0 / ka
        }
    });
    let n = g.dim();
    if n < 2 {
        return bare;
    }
    let c0 = f.spectrum()[0] * g.cell_volume();
    let f0_sq = c0.norm_sqr() / (2.0 * PI).powi(n as i32);
    bare - LATTICE_ZETA[n - 2] * g.dk().powi(n as i32 - 1) * f0_sq
}

/// Homogeneous Sobolev seminorm `\int |k| |f^|^2 dk`.
pub fn half_sobolev_seminorm_sq(f: &Field) -> f64 {
    let g = f.grid();
    f.spectral_quadrature(|i| g.kabs(i))
}

/// `\int |grad f|^2 dx`.
pub fn gradient_norm_sq(f: &Field) -> f64 {
    let g = f.grid();
    f.spectral_quadrature(|i| g.kabs(i).powi(2))
}

/// `Re \int conj(f) (i d/dx_1) f dx`.
pub fn reflection_momentum(f: &Field) -> f64 {
    let g = f.grid();
    f.spectral_quadrature(|i| -g.k(i)[0])
}
