//! Periodic-grid spectral infrastructure: transforms, anisotropic Fourier
//! multipliers and dealiased products.
//!
//! Normalization: the forward transform is unnormalized and the inverse
//! divides by `nx * ny`. With `F_k` the forward coefficients, the grid L²
//! norm satisfies `‖f‖² = lx*ly/(nx*ny)² * Σ|F_k|²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Periodic 2-D grid geometry and dealiasing policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dealias_fraction: f64,
}

impl GridSpec {
    pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let g = GridSpec { nx, ny, lx, ly, dealias_fraction: Self::DEFAULT_DEALIAS };
        g.validate()?;
        Ok(g)
    }

    /// Square `n x n` grid on `[0, 2π)²`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n, 2.0 * PI, 2.0 * PI)
    }

    pub fn with_dealias(mut self, fraction: f64) -> Result<Self> {
        self.dealias_fraction = fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.ny < 16 || self.nx % 2 != 0 || self.ny % 2 != 0 {
            return Err(Error::Argument(format!(
                "grid sizes must be even and >= 16, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite()) {
            return Err(Error::Argument(format!(
                "domain periods must be positive, got ({}, {})",
                self.lx, self.ly
            )));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "dealias_fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn k1(&self, i: usize) -> i64 {
        wavenumber(i, self.nx)
    }

    #[inline]
    pub fn k2(&self, j: usize) -> i64 {
        wavenumber(j, self.ny)
    }

    #[inline]
    pub fn xi1(&self, i: usize) -> f64 {
        2.0 * PI * self.k1(i) as f64 / self.lx
    }

    #[inline]
    pub fn xi2(&self, j: usize) -> f64 {
        2.0 * PI * self.k2(j) as f64 / self.ly
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lx * i as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.ly * j as f64 / self.ny as f64
    }

    /// Storage index of the mode `(k1, k2)`; `None` when outside the lattice.
    pub fn mode_index(&self, k1: i64, k2: i64) -> Option<usize> {
        let i = lattice_index(k1, self.nx)?;
        let j = lattice_index(k2, self.ny)?;
        Some(i * self.ny + j)
    }

    pub fn cell_measure(&self) -> f64 {
        self.lx * self.ly / self.len() as f64
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Whether the mode at storage position `(i, j)` survives truncation.
    #[inline]
    pub fn kept(&self, i: usize, j: usize) -> bool {
        let cx = self.dealias_fraction * (self.nx / 2) as f64;
        let cy = self.dealias_fraction * (self.ny / 2) as f64;
        (self.k1(i).abs() as f64) <= cx + 1e-12 && (self.k2(j).abs() as f64) <= cy + 1e-12
    }

    #[inline]
    pub fn nyquist_x(&self, i: usize) -> bool {
        i == self.nx / 2
    }

    #[inline]
    pub fn nyquist_y(&self, j: usize) -> bool {
        j == self.ny / 2
    }

    /// Same lattice with a different domain length in y.
    pub fn with_ly(mut self, ly: f64) -> Result<Self> {
        self.ly = ly;
        self.validate()?;
        Ok(self)
    }

    /// Same periods and dealiasing on a different lattice size.
    pub fn resized(&self, nx: usize, ny: usize) -> Result<Self> {
        let g = GridSpec { nx, ny, ..*self };
        g.validate()?;
        Ok(g)
    }
}

fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn lattice_index(k: i64, n: usize) -> Option<usize> {
    let h = (n / 2) as i64;
    if k < -h || k >= h {
        return None;
    }
    Some(if k >= 0 { k as usize } else { (k + n as i64) as usize })
}

fn check_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::Argument(format!("grid mismatch: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Real samples at the uniform collocation points, row-major in x.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: GridSpec) -> Self {
        RealField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        RealField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            let x = grid.x(i);
            for j in 0..grid.ny {
                values.push(f(x, grid.y(j)));
            }
        }
        RealField { grid, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RealField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// L² inner product with the cell measure.
    pub fn inner(&self, other: &RealField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
            * self.grid.cell_measure()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Root-mean-square value (L² norm divided by the square root of the area).
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &RealField) -> Self {
        RealField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn pointwise_mul(&self, other: &RealField) -> Self {
        RealField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect(),
        }
    }
}

impl Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        self.axpy(-1.0, rhs)
    }
}

/// Complex Fourier coefficients indexed by storage position `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Coefficient of the mode `(k1, k2)`, zero outside the lattice.
    pub fn mode(&self, k1: i64, k2: i64) -> Complex64 {
        self.grid
            .mode_index(k1, k2)
            .map(|ix| self.coeffs[ix])
            .unwrap_or_default()
    }

    /// Mean value of the represented field.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / self.grid.len() as f64
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = Complex64::new(0.0, 0.0);
        out
    }

    /// Multiply by a real symbol given as a function of `(ξ1, ξ2)`.
    pub fn map_real(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let g = self.grid;
        let mut coeffs = self.coeffs.clone();
        for i in 0..g.nx {
            let xi1 = g.xi1(i);
            for j in 0..g.ny {
                coeffs[i * g.ny + j] *= f(xi1, g.xi2(j));
            }
        }
        SpectralField { grid: g, coeffs }
    }

    /// Multiply by a complex symbol evaluated from `(i, j)` storage position.
    pub fn map_indexed(&self, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let g = self.grid;
        let mut coeffs = self.coeffs.clone();
        for i in 0..g.nx {
            for j in 0..g.ny {
                coeffs[i * g.ny + j] *= f(i, j);
            }
        }
        SpectralField { grid: g, coeffs }
    }

    pub fn dx(&self) -> Self {
        let g = self.grid;
        self.map_indexed(|i, _| {
            if g.nyquist_x(i) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, g.xi1(i))
            }
        })
    }

    pub fn dy(&self) -> Self {
        let g = self.grid;
        self.map_indexed(|_, j| {
            if g.nyquist_y(j) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, g.xi2(j))
            }
        })
    }

    /// Spectral truncation to the dealiasing band.
    pub fn project(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for i in 0..g.nx {
            for j in 0..g.ny {
                if !g.kept(i, j) {
                    out.coeffs[i * g.ny + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        SpectralField { grid: self.grid, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn axpy(&self, a: f64, other: &SpectralField) -> Self {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + y * a).collect(),
        }
    }

    /// Weighted squared norm `lx*ly * Σ w(ξ) |c_k|²` with `c_k = F_k/(nx*ny)`.
    pub fn weighted_norm_sq(&self, w: impl Fn(f64, f64) -> f64) -> f64 {
        let g = self.grid;
        let n2 = (g.len() as f64).powi(2);
        let mut acc = 0.0;
        for i in 0..g.nx {
            let xi1 = g.xi1(i);
            for j in 0..g.ny {
                let c = self.coeffs[i * g.ny + j];
                if c.re != 0.0 || c.im != 0.0 {
                    acc += w(xi1, g.xi2(j)) * c.norm_sqr();
                }
            }
        }
        acc * g.area() / n2
    }

    /// L² inner product of the represented real fields.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let g = self.grid;
        let n2 = (g.len() as f64).powi(2);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            * g.area()
            / n2
    }

    pub fn l2_norm(&self) -> f64 {
        self.weighted_norm_sq(|_, _| 1.0).sqrt()
    }

    pub fn rms(&self) -> f64 {
        self.l2_norm() / self.grid.area().sqrt()
    }

    /// Dealiased product of the represented real fields.
    pub fn mul(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, other.grid, "grid mismatch in spectral product");
        let a = inverse_transform(self);
        let b = inverse_transform(other);
        transform(&a.pointwise_mul(&b)).project()
    }

    /// Apply a named symbol.
    pub fn apply(&self, sym: &SymbolSpec) -> Result<SpectralField> {
        let g = self.grid;
        let mut out = self.clone();
        for i in 0..g.nx {
            for j in 0..g.ny {
                let v = sym.value(&g, i, j)?;
                out.coeffs[i * g.ny + j] *= v;
            }
        }
        Ok(out)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<&SpectralField> for f64 {
    type Output = SpectralField;
    fn mul(self, rhs: &SpectralField) -> SpectralField {
        rhs.scale(self)
    }
}

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, dir: FftDirection) -> Plan {
    static REGISTRY: OnceLock<RwLock<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let reg = REGISTRY.get_or_init(|| RwLock::new(HashMap::new()));
    let key = (n, dir == FftDirection::Forward);
    if let Some(p) = reg.read().expect("plan registry poisoned").get(&key) {
        return p.clone();
    }
    let p = FftPlanner::new().plan_fft(n, dir);
    reg.write().expect("plan registry poisoned").entry(key).or_insert(p).clone()
}

fn fft2(data: &mut [Complex64], nx: usize, ny: usize, dir: FftDirection) {
    plan(ny, dir).process(data);
    let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            t[j * nx + i] = data[i * ny + j];
        }
    }
    plan(nx, dir).process(&mut t);
    for j in 0..ny {
        for i in 0..nx {
            data[i * ny + j] = t[j * nx + i];
        }
    }
}

/// Forward (unnormalized) transform.
pub fn transform(field: &RealField) -> SpectralField {
    let g = field.grid;
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut data, g.nx, g.ny, FftDirection::Forward);
    SpectralField { grid: g, coeffs: data }
}

/// Forward transforms of two real fields with one complex FFT.
pub fn transform_pair(a: &RealField, b: &RealField) -> (SpectralField, SpectralField) {
    assert_eq!(a.grid, b.grid, "grid mismatch in paired transform");
    let g = a.grid;
    let mut data: Vec<Complex64> =
        a.values.iter().zip(&b.values).map(|(&x, &y)| Complex64::new(x, y)).collect();
    fft2(&mut data, g.nx, g.ny, FftDirection::Forward);
    let mut fa = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut fb = vec![Complex64::new(0.0, 0.0); g.len()];
    for i in 0..g.nx {
        let mi = (g.nx - i) % g.nx;
        for j in 0..g.ny {
            let mj = (g.ny - j) % g.ny;
            let c = data[i * g.ny + j];
            let d = data[mi * g.ny + mj].conj();
            fa[i * g.ny + j] = (c + d) * 0.5;
            fb[i * g.ny + j] = (c - d) * Complex64::new(0.0, -0.5);
        }
    }
    (SpectralField { grid: g, coeffs: fa }, SpectralField { grid: g, coeffs: fb })
}

/// Inverse transforms of two spectra of real fields with one complex FFT.
pub fn inverse_transform_pair(a: &SpectralField, b: &SpectralField) -> (RealField, RealField) {
    assert_eq!(a.grid, b.grid, "grid mismatch in paired transform");
    let g = a.grid;
    let mut data: Vec<Complex64> =
        a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect();
    fft2(&mut data, g.nx, g.ny, FftDirection::Inverse);
    let s = 1.0 / g.len() as f64;
    (
        RealField { grid: g, values: data.iter().map(|c| c.re * s).collect() },
        RealField { grid: g, values: data.iter().map(|c| c.im * s).collect() },
    )
}

/// Checked forward transform.
pub fn try_transform(field: &RealField) -> Result<SpectralField> {
    if field.values.len() != field.grid.len() {
        return Err(Error::Argument(format!(
            "field has {} samples, grid expects {}",
            field.values.len(),
            field.grid.len()
        )));
    }
    Ok(transform(field))
}

/// Inverse transform (divides by `nx * ny`), keeping the real part.
pub fn inverse_transform(spec: &SpectralField) -> RealField {
    let g = spec.grid;
    let mut data = spec.coeffs.clone();
    fft2(&mut data, g.nx, g.ny, FftDirection::Inverse);
    let s = 1.0 / g.len() as f64;
    RealField { grid: g, values: data.iter().map(|c| c.re * s).collect() }
}

/// The seven model coefficients `(a, b, c, d, e, f, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

impl Coefficients {
    pub const CASE1: Coefficients = Coefficients {
        a: 0.0,
        b: 1.0 / 3.0,
        c: -1.0 / 3.0,
        d: 1.0 / 3.0,
        e: 1.0 / 3.0,
        f: 0.0,
        g: 0.0,
    };

    pub const CASE2: Coefficients = Coefficients {
        a: -1.0 / 6.0,
        b: 0.5,
        c: -0.5,
        d: 0.5,
        e: 0.5,
        f: -1.0 / 6.0,
        g: -1.0 / 6.0,
    };

    pub const ZERO: Coefficients =
        Coefficients { a: 0.0, b: 0.0, c: 0.0, d: 0.0, e: 0.0, f: 0.0, g: 0.0 };

    pub fn as_array(&self) -> [f64; 7] {
        [self.a, self.b, self.c, self.d, self.e, self.f, self.g]
    }

    /// `(a+b+c+d - 1/3, d+e+f+g - 2/3)`
    pub fn constraint_residuals(&self) -> (f64, f64) {
        (
            self.a + self.b + self.c + self.d - 1.0 / 3.0,
            self.d + self.e + self.f + self.g - 2.0 / 3.0,
        )
    }
}

/// Case-1 eigenvalue `Λ₁(ξ)`.
pub fn lambda1(eps: f64, xi1: f64, xi2: f64) -> f64 {
    let j = 1.0 + eps * xi1 * xi1 / 3.0;
    (xi1 * xi1 / j + xi2 * xi2 / (j * j)).sqrt()
}

/// Case-2 eigenvalue `Λ₂(ξ)`.
pub fn lambda2(eps: f64, xi1: f64, xi2: f64) -> f64 {
    let r = (1.0 + eps * xi1 * xi1 / 6.0) / (1.0 + eps * xi1 * xi1 / 2.0);
    (xi1 * xi1 * r + xi2 * xi2 * r * r).sqrt()
}

/// Eigenvalue of the linearized rescaled system for general coefficients.
pub fn lambda_general(co: &Coefficients, eps: f64, xi1: f64, xi2: f64) -> f64 {
    let s = eps * xi1 * xi1;
    let t1 = xi1 * xi1 * (1.0 - co.a * s) * (1.0 - co.c * s) / ((1.0 + co.b * s) * (1.0 + co.d * s));
    let t2 = xi2 * xi2 * (1.0 - co.f * s) * (1.0 - co.g * s) / ((1.0 + co.e * s) * (1.0 + co.d * s));
    (t1 + t2).sqrt()
}

/// Dispersion relation of the anisotropically scaled system (transverse
/// wavenumber weighted by ε).
pub fn lambda_anisotropic(co: &Coefficients, eps: f64, xi1: f64, xi2: f64) -> f64 {
    lambda_general(co, eps, xi1, eps.sqrt() * xi2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    /// `1 + b ε ξ₁²`
    J,
    /// `1 − g ε ξ₁²`
    Y,
    /// `(1 − c ε ξ₁²)/(1 − g ε ξ₁²)`
    K,
    /// `(K ξ₁² + ξ₂²)^{1/2}` with case-1 style coefficients
    A,
    /// `(K ξ₁² + ξ₂²)^{1/2}` with case-2 style coefficients
    B,
    Lambda1,
    Lambda2,
    Dx,
    Dy,
    AbsD,
    BracketD,
}

impl SymbolKind {
    fn vanishes_at_origin(self) -> bool {
        matches!(
            self,
            SymbolKind::A
                | SymbolKind::B
                | SymbolKind::Lambda1
                | SymbolKind::Lambda2
                | SymbolKind::AbsD
                | SymbolKind::Dx
                | SymbolKind::Dy
        )
    }
}

/// A named anisotropic Fourier multiplier raised to a real power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolSpec {
    pub kind: SymbolKind,
    pub power: f64,
    pub eps: f64,
    pub coeffs: Coefficients,
}

impl SymbolSpec {
    pub fn new(kind: SymbolKind, power: f64, eps: f64, coeffs: Coefficients) -> Self {
        SymbolSpec { kind, power, eps, coeffs }
    }

    pub fn case1(kind: SymbolKind, power: f64, eps: f64) -> Self {
        Self::new(kind, power, eps, Coefficients::CASE1)
    }

    pub fn case2(kind: SymbolKind, power: f64, eps: f64) -> Self {
        Self::new(kind, power, eps, Coefficients::CASE2)
    }

    /// Base (unpowered) value of a real even symbol.
    pub fn base(&self, xi1: f64, xi2: f64) -> f64 {
        let co = &self.coeffs;
        let s = self.eps * xi1 * xi1;
        match self.kind {
            SymbolKind::J => 1.0 + co.b * s,
            SymbolKind::Y => 1.0 - co.g * s,
            SymbolKind::K => (1.0 - co.c * s) / (1.0 - co.g * s),
            SymbolKind::A | SymbolKind::B => {
                let k = (1.0 - co.c * s) / (1.0 - co.g * s);
                (k * xi1 * xi1 + xi2 * xi2).sqrt()
            }
            SymbolKind::Lambda1 => lambda1(self.eps, xi1, xi2),
            SymbolKind::Lambda2 => lambda2(self.eps, xi1, xi2),
            SymbolKind::AbsD => xi1.hypot(xi2),
            SymbolKind::BracketD => (1.0 + xi1 * xi1 + xi2 * xi2).sqrt(),
            SymbolKind::Dx => xi1,
            SymbolKind::Dy => xi2,
        }
    }

    /// Symbol value at storage position `(i, j)` of `grid`.
    pub fn value(&self, grid: &GridSpec, i: usize, j: usize) -> Result<Complex64> {
        let (xi1, xi2) = (grid.xi1(i), grid.xi2(j));
        let p = self.power;
        let v = match self.kind {
            SymbolKind::Dx | SymbolKind::Dy => {
                if p.fract() != 0.0 {
                    return Err(Error::Argument(format!(
                        "derivative symbols need integer powers, got {p}"
                    )));
                }
                let n = p as i32;
                let nyq = match self.kind {
                    SymbolKind::Dx => grid.nyquist_x(i),
                    _ => grid.nyquist_y(j),
                };
                let xi = self.base(xi1, xi2);
                if (n.rem_euclid(2) == 1 && nyq) || (xi == 0.0 && n < 0) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, xi).powi(n)
                }
            }
            _ => {
                let b = self.base(xi1, xi2);
                if b == 0.0 && p < 0.0 && self.kind.vanishes_at_origin() {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(b.powf(p), 0.0)
                }
            }
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Internal(format!(
                "non-finite symbol value for {:?} at ({xi1}, {xi2})",
                self.kind
            )));
        }
        Ok(v)
    }
}

/// Apply a symbol to a real field.
pub fn apply_symbol(sym: &SymbolSpec, f: &RealField) -> Result<RealField> {
    let spec = try_transform(f)?;
    Ok(inverse_transform(&spec.apply(sym)?))
}

/// Pointwise product followed by spectral truncation.
pub fn dealiased_product(f: &RealField, g: &RealField) -> Result<RealField> {
    check_grid(&f.grid, &g.grid)?;
    if f.values.len() != g.values.len() || f.values.len() != f.grid.len() {
        return Err(Error::Argument("sample count mismatch".into()));
    }
    Ok(inverse_transform(&transform(&f.pointwise_mul(g)).project()))
}

/// Seeded random real field with i.i.d. Gaussian coefficients on
/// `|k1| <= kx, |k2| <= ky`, zero mean, Hermitian by construction.
pub fn random_band_limited<R: Rng + ?Sized>(
    grid: GridSpec,
    kx: usize,
    ky: usize,
    rng: &mut R,
) -> SpectralField {
    let mut spec = SpectralField::zeros(grid);
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            if grid.k1(i).unsigned_abs() as usize <= kx && grid.k2(j).unsigned_abs() as usize <= ky {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                spec.coeffs[i * grid.ny + j] = Complex64::new(re, im);
            }
        }
    }
    spec.coeffs[0] = Complex64::new(0.0, 0.0);
    // keep the real part only; this symmetrizes the spectrum
    let real = {
        let mut data = spec.coeffs.clone();
        fft2(&mut data, grid.nx, grid.ny, FftDirection::Inverse);
        RealField { grid, values: data.iter().map(|c| c.re).collect() }
    };
    let mut out = transform(&real);
    out.coeffs[0] = Complex64::new(0.0, 0.0);
    out
}

/// Zero-pad (or truncate) a spectrum onto a lattice of another size with
/// the same periods. The represented trigonometric polynomial is unchanged
/// when it fits in both lattices.
pub fn resample(spec: &SpectralField, target: GridSpec) -> SpectralField {
    let src = spec.grid;
    let mut out = SpectralField::zeros(target);
    let scale = target.len() as f64 / src.len() as f64;
    for i in 0..src.nx {
        for j in 0..src.ny {
            let (k1, k2) = (src.k1(i), src.k2(j));
            if src.nyquist_x(i) || src.nyquist_y(j) {
                continue;
            }
            if let Some(ix) = target.mode_index(k1, k2) {
                if !target.nyquist_x(ix / target.ny) && !target.nyquist_y(ix % target.ny) {
                    out.coeffs[ix] = spec.coeffs[i * src.ny + j] * scale;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::square(n).unwrap()
    }

    #[test]
    fn constant_has_only_zero_mode() {
        let g = grid(16);
        let s = transform(&RealField::constant(g, 1.0));
        assert!((s.coeffs[0].re - 256.0).abs() < 1e-12);
        assert!(s.coeffs.iter().skip(1).all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn cosine_occupies_plus_minus_one() {
        let g = grid(64);
        let s = transform(&RealField::from_fn(g, |x, _| x.cos()));
        for i in 0..g.nx {
            for j in 0..g.ny {
                let c = s.coeffs[i * g.ny + j].norm();
                if (g.k1(i).abs() == 1) && g.k2(j) == 0 {
                    assert!((c - 64.0 * 64.0 / 2.0).abs() < 1e-9);
                } else {
                    assert!(c < 1e-9);
                }
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = GridSpec::new(32, 48, 3.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = RealField::from_values(g, (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect())
            .unwrap();
        let back = inverse_transform(&transform(&f));
        let err = (&back - &f).max_abs();
        assert!(err < 1e-12 * f.max_abs());
        let s = transform(&f);
        assert!((s.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn j_symbol_on_constant_and_cosine() {
        let g = grid(32);
        let sym = SymbolSpec::case1(SymbolKind::J, 1.0, 0.1);
        let one = apply_symbol(&sym, &RealField::constant(g, 1.0)).unwrap();
        assert!(one.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let c = apply_symbol(&sym, &RealField::from_fn(g, |x, _| (2.0 * x).cos())).unwrap();
        let expect = RealField::from_fn(g, |x, _| (1.0 + 0.4 / 3.0) * (2.0 * x).cos());
        assert!((&c - &expect).max_abs() < 1e-13);
    }

    #[test]
    fn lambda1_example_value() {
        let g = grid(32);
        let sym = SymbolSpec::case1(SymbolKind::Lambda1, 1.0, 0.12);
        let f = RealField::from_fn(g, |x, y| (2.0 * x + y).cos());
        let out = transform(&apply_symbol(&sym, &f).unwrap());
        let inp = transform(&f);
        let gain = out.mode(2, 1).norm() / inp.mode(2, 1).norm();
        let expect = (4.0f64 / 1.16 + 1.0 / (1.16 * 1.16)).sqrt();
        assert!((gain - expect).abs() < 1e-12);
        assert!((gain - 2.04730).abs() < 1e-5);
    }

    #[test]
    fn negative_power_kills_zero_mode() {
        let g = grid(16);
        let sym = SymbolSpec::case1(SymbolKind::A, -1.0, 0.1);
        let f = RealField::from_fn(g, |x, _| 3.0 + x.sin());
        let out = apply_symbol(&sym, &f).unwrap();
        assert!(out.mean().abs() < 1e-14);
    }

    #[test]
    fn product_trig_identity() {
        let g = grid(32);
        let f = RealField::from_fn(g, |x, _| x.cos());
        let p = dealiased_product(&f, &f).unwrap();
        let expect = RealField::from_fn(g, |x, _| 0.5 * (1.0 + (2.0 * x).cos()));
        assert!((&p - &expect).max_abs() < 1e-14);
        let z = dealiased_product(&f, &RealField::zeros(g)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn product_matches_direct_convolution_on_small_grid() {
        let g = grid(16);
        let k = (g.nx / 2 - 1) as f64;
        let f = RealField::from_fn(g, |x, y| (k * x).cos() + (2.0 * y - x).sin());
        let h = RealField::from_fn(g, |x, y| (k * x + y).sin());
        let p = transform(&dealiased_product(&f, &h).unwrap());
        let (fs, hs) = (transform(&f), transform(&h));
        let n = g.nx as i64;
        let norm = g.len() as f64;
        for i in 0..g.nx {
            for j in 0..g.ny {
                let (k1, k2) = (g.k1(i), g.k2(j));
                let mut acc = Complex64::new(0.0, 0.0);
                for a1 in 0..n {
                    for a2 in 0..n {
                        let b1 = (k1 - a1).rem_euclid(n);
                        let b2 = (k2 - a2).rem_euclid(n);
                        acc += fs.coeffs[(a1 * n + a2) as usize] * hs.coeffs[(b1 * n + b2) as usize];
                    }
                }
                let expect = if g.kept(i, j) { acc / norm } else { Complex64::new(0.0, 0.0) };
                let got = p.coeffs[i * g.ny + j];
                assert!((got - expect).norm() < 1e-10, "mode ({k1},{k2})");
            }
        }
    }

    #[test]
    fn bad_grid_rejected() {
        assert!(GridSpec::new(15, 16, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 16, 1.0, 1.0).is_err());
        assert!(GridSpec::new(16, 16, 0.0, 1.0).is_err());
        let a = RealField::zeros(grid(16));
        let b = RealField::zeros(grid(32));
        assert!(dealiased_product(&a, &b).is_err());
    }

    #[test]
    fn resample_preserves_polynomial() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_band_limited(g, 5, 5, &mut rng);
        let up = resample(&s, grid(64));
        let a = inverse_transform(&s);
        let b = inverse_transform(&up);
        for i in 0..32 {
            for j in 0..32 {
                assert!((a.get(i, j) - b.get(2 * i, 2 * j)).abs() < 1e-12);
            }
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn a_squared_from_composed_symbols() {
        let g = GridSpec::square(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = inverse_transform(&random_band_limited(g, 8, 8, &mut rng));
        let eps = 0.2;
        let dxx = apply_symbol(&SymbolSpec::case1(SymbolKind::Dx, 2.0, eps), &f).unwrap();
        let lhs = &apply_symbol(&SymbolSpec::case1(SymbolKind::J, 1.0, eps), &dxx).unwrap()
            + &apply_symbol(&SymbolSpec::case1(SymbolKind::Dy, 2.0, eps), &f).unwrap();
        let a2 = apply_symbol(&SymbolSpec::case1(SymbolKind::A, 2.0, eps), &f).unwrap();
        assert!((&lhs + &a2).max_abs() < 1e-10 * a2.max_abs());
    }

    #[test]
    fn eigenvalues_approach_abs_xi_linearly() {
        let g = GridSpec::square(32).unwrap();
        let worst = |eps: f64, l: fn(f64, f64, f64) -> f64| {
            let mut m = 0.0f64;
            for i in 0..g.nx {
                for j in 0..g.ny {
                    let (a, b) = (g.xi1(i), g.xi2(j));
                    m = m.max((l(eps, a, b) - a.hypot(b)).abs());
                }
            }
            m
        };
        for l in [lambda1 as fn(f64, f64, f64) -> f64, lambda2] {
            let d: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| worst(e, l)).collect();
            assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
            let r = d[1] / d[2];
            assert!((9.0..=10.5).contains(&r), "{d:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn case1_a_dominates_abs_xi(eps in 0.0f64..1.0, x1 in -64.0f64..64.0, x2 in -64.0f64..64.0) {
            let a = SymbolSpec::case1(SymbolKind::A, 1.0, eps).base(x1, x2);
            let j = SymbolSpec::case1(SymbolKind::J, 1.0, eps).base(x1, x2);
            prop_assert!(a * a >= (x1 * x1 + x2 * x2) * (1.0 - 1e-15));
            prop_assert!((a * a - (j * x1 * x1 + x2 * x2)).abs() <= 1e-12 * (1.0 + a * a));
        }

        #[test]
        fn case2_k_between_one_and_three(eps in 0.0f64..1.0, x1 in -64.0f64..64.0, x2 in -64.0f64..64.0) {
            let k = SymbolSpec::case2(SymbolKind::K, 1.0, eps).base(x1, x2);
            prop_assert!((1.0..=3.0).contains(&k));
            let b = SymbolSpec::case2(SymbolKind::B, 1.0, eps).base(x1, x2);
            prop_assert!(b * b >= (x1 * x1 + x2 * x2) * (1.0 - 1e-15));
            prop_assert!(b * b <= (3.0 * x1 * x1 + x2 * x2) * (1.0 + 1e-15));
        }

        #[test]
        fn parseval_agreement(seed in 0u64..10_000, n in prop::sample::select(vec![16usize, 24, 32, 48])) {
            let g = GridSpec::square(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = inverse_transform(&random_band_limited(g, n / 3, n / 3, &mut rng));
            let phys = f.l2_norm();
            let spec = transform(&f).l2_norm();
            prop_assert!((phys - spec).abs() <= 1e-12 * phys);
        }
    }
}
