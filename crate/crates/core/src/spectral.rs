//! Fourier-space backbone on the 2π-periodic square.
//!
//! Grid samples are stored row-major with index `i * n + j` for the point
//! `(a_i, b_j) = (2πi/n, 2πj/n)`. Spectra use the same layout over the full
//! complex lattice: slot `p * n + q` holds the coefficient of the wavevector
//! `(k(p), k(q))` with `k(p) = p` for `p <= n/2` and `p - n` otherwise. The
//! forward transform carries the `1/n²` factor, so a coefficient is exactly
//! the Fourier-series coefficient and `coeff(0, 0)` is the spatial mean.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance for the Hermitian-symmetry check in [`Spectral::inverse`].
const HERMITIAN_TOL: f64 = 1e-9;
/// Asymmetry below this is rounding noise regardless of the field's size.
const HERMITIAN_FLOOR: f64 = 1e-14;
/// Relative tolerance on the mean mode of a vorticity handed to the curl inversion.
const MEAN_TOL: f64 = 1e-10;

/// Real samples of a scalar or 2-vector field on the uniform `n × n` grid.
#[derive(Clone, PartialEq)]
pub struct GridField {
    n: usize,
    components: Vec<Vec<f64>>,
}

impl fmt::Debug for GridField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridField")
            .field("n", &self.n)
            .field("components", &self.components.len())
            .finish()
    }
}

impl GridField {
    pub fn new(n: usize, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() || components.len() > 2 {
            return Err(Error::Arity {
                expected: 1,
                got: components.len(),
            });
        }
        for c in &components {
            if c.len() != n * n {
                return Err(Error::ShapeMismatch {
                    left: n * n,
                    right: c.len(),
                });
            }
        }
        Ok(Self { n, components })
    }

    pub fn scalar(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(n, vec![values])
    }

    pub fn vector(n: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(n, vec![x, y])
    }

    pub fn zeros(n: usize, ncomp: usize) -> Self {
        Self {
            n,
            components: vec![vec![0.0; n * n]; ncomp.clamp(1, 2)],
        }
    }

    /// Samples `f(a, b)` at every grid point.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid_coord(n, i), grid_coord(n, j)));
            }
        }
        Self {
            n,
            components: vec![values],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.components[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Value of component `c` at grid point `(i, j)`.
    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.components[c][i * self.n + j]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Coordinate of grid index `i` on a period of `n` points.
pub fn grid_coord(n: usize, i: usize) -> f64 {
    2.0 * PI * i as f64 / n as f64
}

/// Fourier coefficients of a scalar or 2-vector field over the full lattice.
#[derive(Clone, PartialEq)]
pub struct SpectralField {
    n: usize,
    components: Vec<Vec<Complex64>>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("n", &self.n)
            .field("components", &self.components.len())
            .field("norm", &self.norm())
            .finish()
    }
}

impl SpectralField {
    pub fn new(n: usize, components: Vec<Vec<Complex64>>) -> Result<Self> {
        if components.is_empty() || components.len() > 2 {
            return Err(Error::Arity {
                expected: 1,
                got: components.len(),
            });
        }
        for c in &components {
            if c.len() != n * n {
                return Err(Error::ShapeMismatch {
                    left: n * n,
                    right: c.len(),
                });
            }
        }
        Ok(Self { n, components })
    }

    pub fn zeros(n: usize, ncomp: usize) -> Self {
        Self {
            n,
            components: vec![vec![Complex64::new(0.0, 0.0); n * n]; ncomp.clamp(1, 2)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.components[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.components
    }

    /// Storage slot of the signed wavevector `(k1, k2)`, if it fits the lattice.
    pub fn slot(&self, k1: i64, k2: i64) -> Option<usize> {
        let n = self.n as i64;
        let half = n / 2;
        if k1 < -half || k1 > half || k2 < -half || k2 > half {
            return None;
        }
        let p = k1.rem_euclid(n) as usize;
        let q = k2.rem_euclid(n) as usize;
        Some(p * self.n + q)
    }

    /// Coefficient of component 0 at wavevector `(k1, k2)`; zero outside the lattice.
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        self.coeff_of(0, k1, k2)
    }

    pub fn coeff_of(&self, c: usize, k1: i64, k2: i64) -> Complex64 {
        self.slot(k1, k2)
            .map(|s| self.components[c][s])
            .unwrap_or_default()
    }

    pub fn set_coeff(&mut self, k1: i64, k2: i64, value: Complex64) {
        self.set_coeff_of(0, k1, k2, value)
    }

    pub fn set_coeff_of(&mut self, c: usize, k1: i64, k2: i64, value: Complex64) {
        if let Some(s) = self.slot(k1, k2) {
            self.components[c][s] = value;
        }
    }

    /// Parseval L² norm: the root mean square of the represented field.
    pub fn norm(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Mean (k = 0) coefficient of component `c`.
    pub fn mean(&self, c: usize) -> Complex64 {
        self.components[c][0]
    }

    /// Largest `|coeff(k) - conj(coeff(-k))|` over all components.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for comp in &self.components {
            for p in 0..n {
                let pm = (n - p) % n;
                for q in 0..n {
                    let qm = (n - q) % n;
                    let d = comp[p * n + q] - comp[pm * n + qm].conj();
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .fold(0.0f64, |m, c| m.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `self + alpha * other`, componentwise.
    pub fn axpy(&self, alpha: f64, other: &SpectralField) -> SpectralField {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * alpha).collect())
            .collect();
        SpectralField {
            n: self.n,
            components,
        }
    }

    pub fn scale(&self, alpha: f64) -> SpectralField {
        let components = self
            .components
            .iter()
            .map(|a| a.iter().map(|x| x * alpha).collect())
            .collect();
        SpectralField {
            n: self.n,
            components,
        }
    }
}

/// Transform plans and wavenumber tables for one grid size.
///
/// Holds no mutable state; cloning shares the plans.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    kmax: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// Signed integer wavenumber per 1D index.
    kint: Vec<i64>,
    /// Wavenumber used for differentiation (Nyquist mapped to zero).
    kdiff: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.n)
            .field("kmax", &self.kmax)
            .finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "grid size {n} unsupported: need an even size >= 8"
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let kint: Vec<i64> = (0..n)
            .map(|p| {
                if p <= n / 2 {
                    p as i64
                } else {
                    p as i64 - n as i64
                }
            })
            .collect();
        let kdiff = kint
            .iter()
            .map(|&k| {
                if k.unsigned_abs() as usize == n / 2 {
                    0.0
                } else {
                    k as f64
                }
            })
            .collect();
        Ok(Self {
            n,
            kmax: n / 3,
            fft,
            ifft,
            kint,
            kdiff,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dealiasing cutoff `floor(n/3)`.
    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Signed wavenumber of 1D index `p`.
    pub fn wavenumber(&self, p: usize) -> i64 {
        self.kint[p]
    }

    pub(crate) fn kdiff(&self, p: usize) -> f64 {
        self.kdiff[p]
    }

    fn check_grid(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::ShapeMismatch {
                left: self.n,
                right: n,
            });
        }
        Ok(())
    }

    fn transpose(&self, buf: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                buf.swap(i * n + j, j * n + i);
            }
        }
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.ifft } else { &self.fft };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        self.transpose(buf);
        plan.process_with_scratch(buf, &mut scratch);
        self.transpose(buf);
    }

    /// Forward transform of one real component.
    pub(crate) fn forward_real(&self, a: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft2(&mut buf, false);
        let norm = 1.0 / (self.n * self.n) as f64;
        for c in &mut buf {
            *c *= norm;
        }
        buf
    }

    /// Forward transform of two real components with one complex transform.
    pub(crate) fn forward_real_pair(
        &self,
        a: &[f64],
        b: &[f64],
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let mut z: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fft2(&mut z, false);
        let norm = 0.5 / (n * n) as f64;
        let mut fa = vec![Complex64::default(); n * n];
        let mut fb = vec![Complex64::default(); n * n];
        for p in 0..n {
            let pm = (n - p) % n;
            for q in 0..n {
                let qm = (n - q) % n;
                let zk = z[p * n + q];
                let zm = z[pm * n + qm].conj();
                fa[p * n + q] = (zk + zm) * norm;
                // (zk - zm) / (2i)
                let d = zk - zm;
                fb[p * n + q] = Complex64::new(d.im, -d.re) * norm;
            }
        }
        (fa, fb)
    }

    /// Inverse transform of one Hermitian component (imaginary part dropped).
    pub(crate) fn inverse_real(&self, a: &[Complex64]) -> Vec<f64> {
        let mut buf = a.to_vec();
        self.fft2(&mut buf, true);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Inverse transform of two Hermitian components with one complex transform.
    pub(crate) fn inverse_real_pair(
        &self,
        a: &[Complex64],
        b: &[Complex64],
    ) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
        self.fft2(&mut buf, true);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Exact discrete Fourier transform; `coeff(0)` is the spatial mean.
    pub fn forward(&self, g: &GridField) -> Result<SpectralField> {
        self.check_grid(g.n())?;
        if !g.is_finite() {
            return Err(Error::numerical(
                "forward transform",
                "non-finite grid value",
            ));
        }
        let components = match g.ncomp() {
            1 => vec![self.forward_real(g.component(0))],
            _ => {
                let (a, b) = self.forward_real_pair(g.component(0), g.component(1));
                vec![a, b]
            }
        };
        Ok(SpectralField {
            n: self.n,
            components,
        })
    }

    /// Inverse transform of a Hermitian spectrum back to real samples.
    pub fn inverse(&self, s: &SpectralField) -> Result<GridField> {
        self.check_grid(s.n())?;
        let asym = s.hermitian_asymmetry();
        if asym > HERMITIAN_TOL * s.max_abs() + HERMITIAN_FLOOR {
            return Err(Error::SymmetryViolation { asymmetry: asym });
        }
        let components = match s.ncomp() {
            1 => vec![self.inverse_real(s.component(0))],
            _ => {
                let (a, b) = self.inverse_real_pair(s.component(0), s.component(1));
                vec![a, b]
            }
        };
        let g = GridField {
            n: self.n,
            components,
        };
        if !g.is_finite() {
            return Err(Error::numerical(
                "inverse transform",
                "non-finite grid value",
            ));
        }
        Ok(g)
    }

    /// Whether wavevector slot `(p, q)` survives the square 2/3-rule mask.
    #[inline]
    pub fn is_resolved(&self, p: usize, q: usize) -> bool {
        self.kint[p].unsigned_abs() as usize <= self.kmax
            && self.kint[q].unsigned_abs() as usize <= self.kmax
    }

    pub(crate) fn dealias_slice(&self, buf: &mut [Complex64]) {
        let n = self.n;
        for p in 0..n {
            let row_out = self.kint[p].unsigned_abs() as usize > self.kmax;
            for q in 0..n {
                if row_out || self.kint[q].unsigned_abs() as usize > self.kmax {
                    buf[p * n + q] = Complex64::default();
                }
            }
        }
    }

    /// Zeroes every coefficient with `|k1| > kmax` or `|k2| > kmax`.
    pub fn dealias(&self, s: &SpectralField) -> SpectralField {
        let mut out = s.clone();
        self.dealias_in_place(&mut out);
        out
    }

    pub fn dealias_in_place(&self, s: &mut SpectralField) {
        for c in &mut s.components {
            self.dealias_slice(c);
        }
    }

    /// Applies a real or complex Fourier multiplier `m(k1, k2)` to a slice.
    fn apply<F>(&self, a: &[Complex64], mult: F) -> Vec<Complex64>
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for p in 0..n {
            let k1 = self.kdiff[p];
            for q in 0..n {
                out.push(a[p * n + q] * mult(k1, self.kdiff[q]));
            }
        }
        out
    }

    pub(crate) fn d1(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.apply(a, |k1, _| Complex64::new(0.0, k1))
    }

    pub(crate) fn d2(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.apply(a, |_, k2| Complex64::new(0.0, k2))
    }

    pub(crate) fn inv_lap(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.apply(a, |k1, k2| {
            let k2sum = k1 * k1 + k2 * k2;
            if k2sum == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(-1.0 / k2sum, 0.0)
            }
        })
    }

    pub(crate) fn cz(&self, a: &[Complex64], i: Axis, j: Axis) -> Vec<Complex64> {
        self.apply(a, |k1, k2| {
            let k2sum = k1 * k1 + k2 * k2;
            if k2sum == 0.0 {
                return Complex64::default();
            }
            let ki = if i == Axis::A { k1 } else { k2 };
            let kj = if j == Axis::A { k1 } else { k2 };
            Complex64::new(ki * kj / k2sum, 0.0)
        })
    }

    fn require_scalar(&self, s: &SpectralField) -> Result<()> {
        self.check_grid(s.n())?;
        if s.ncomp() != 1 {
            return Err(Error::Arity {
                expected: 1,
                got: s.ncomp(),
            });
        }
        Ok(())
    }

    fn require_vector(&self, s: &SpectralField) -> Result<()> {
        self.check_grid(s.n())?;
        if s.ncomp() != 2 {
            return Err(Error::Arity {
                expected: 2,
                got: s.ncomp(),
            });
        }
        Ok(())
    }

    /// Spectral gradient `(i k1 c, i k2 c)` of a scalar.
    pub fn gradient(&self, s: &SpectralField) -> Result<SpectralField> {
        self.require_scalar(s)?;
        let c = s.component(0);
        Ok(SpectralField {
            n: self.n,
            components: vec![self.d1(c), self.d2(c)],
        })
    }

    pub fn divergence(&self, s: &SpectralField) -> Result<SpectralField> {
        self.require_vector(s)?;
        let a = self.d1(s.component(0));
        let b = self.d2(s.component(1));
        Ok(SpectralField {
            n: self.n,
            components: vec![a.iter().zip(&b).map(|(x, y)| x + y).collect()],
        })
    }

    /// Scalar curl `d1 v2 - d2 v1` of a 2-vector.
    pub fn curl(&self, s: &SpectralField) -> Result<SpectralField> {
        self.require_vector(s)?;
        let a = self.d1(s.component(1));
        let b = self.d2(s.component(0));
        Ok(SpectralField {
            n: self.n,
            components: vec![a.iter().zip(&b).map(|(x, y)| x - y).collect()],
        })
    }

    /// Componentwise Laplacian.
    pub fn laplacian(&self, s: &SpectralField) -> Result<SpectralField> {
        self.check_grid(s.n())?;
        let components = s
            .components()
            .iter()
            .map(|c| self.apply(c, |k1, k2| Complex64::new(-(k1 * k1 + k2 * k2), 0.0)))
            .collect();
        Ok(SpectralField {
            n: self.n,
            components,
        })
    }

    /// Componentwise inverse Laplacian; the mean mode is discarded.
    pub fn inverse_laplacian(&self, s: &SpectralField) -> Result<SpectralField> {
        self.check_grid(s.n())?;
        let components = s.components().iter().map(|c| self.inv_lap(c)).collect();
        Ok(SpectralField {
            n: self.n,
            components,
        })
    }

    /// Calderón–Zygmund operator with multiplier `k_i k_j / |k|²`.
    pub fn calderon_zygmund(&self, s: &SpectralField, i: Axis, j: Axis) -> Result<SpectralField> {
        self.require_scalar(s)?;
        Ok(SpectralField {
            n: self.n,
            components: vec![self.cz(s.component(0), i, j)],
        })
    }

    /// Velocity `(-d2, d1) ∇⁻² ω` of a zero-mean vorticity.
    pub fn velocity_from_vorticity(&self, omega: &SpectralField) -> Result<SpectralField> {
        self.require_scalar(omega)?;
        let mean = omega.mean(0).norm();
        if mean > MEAN_TOL * omega.max_abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "vorticity mean {mean:.3e} must vanish on the torus"
            )));
        }
        Ok(SpectralField {
            n: self.n,
            components: self.velocity_slices(omega.component(0)),
        })
    }

    pub(crate) fn velocity_slices(&self, w: &[Complex64]) -> Vec<Vec<Complex64>> {
        let psi = self.inv_lap(w);
        let v1 = self.d2(&psi).into_iter().map(|c| -c).collect();
        let v2 = self.d1(&psi);
        vec![v1, v2]
    }
}

/// Coordinate axis of the periodic square: `A` for the first, `B` for the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    A,
    B,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::A => 0,
            Axis::B => 1,
        }
    }
}

/// Grid-space L² (root-mean-square) norm over all components.
pub fn grid_norm(g: &GridField) -> f64 {
    let count = (g.n() * g.n()) as f64;
    (g.components().iter().flatten().map(|v| v * v).sum::<f64>() / count).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_random(n: usize, seed: u64) -> GridField {
        // band-limited pseudo-random field from a handful of modes
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let modes: Vec<(f64, f64, f64, f64)> = (0..12)
            .map(|_| (next() * 10.0, next() * 10.0, next(), next() * 6.0))
            .collect();
        GridField::from_fn(n, |a, b| {
            modes
                .iter()
                .map(|&(k1, k2, amp, ph)| amp * (k1.round() * a + k2.round() * b + ph).cos())
                .sum()
        })
    }

    #[test]
    fn constant_field_has_only_mean() {
        let sp = Spectral::new(16).unwrap();
        let s = sp.forward(&GridField::from_fn(16, |_, _| 1.0)).unwrap();
        assert!((s.coeff(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let rest: f64 = s.component(0)[1..]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(rest < 1e-15);
    }

    #[test]
    fn cosine_splits_into_two_halves() {
        let sp = Spectral::new(32).unwrap();
        let s = sp.forward(&GridField::from_fn(32, |a, _| a.cos())).unwrap();
        assert!((s.coeff(1, 0).re - 0.5).abs() < 1e-15);
        assert!((s.coeff(-1, 0).re - 0.5).abs() < 1e-15);
        let mut t = s.clone();
        t.set_coeff(1, 0, Complex64::default());
        t.set_coeff(-1, 0, Complex64::default());
        assert!(t.max_abs() < 1e-15);
    }

    #[test]
    fn inverse_of_zero_and_cosine() {
        let sp = Spectral::new(16).unwrap();
        let z = sp.inverse(&SpectralField::zeros(16, 1)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let mut s = SpectralField::zeros(16, 1);
        s.set_coeff(1, 0, Complex64::new(0.5, 0.0));
        s.set_coeff(-1, 0, Complex64::new(0.5, 0.0));
        let g = sp.inverse(&s).unwrap();
        let want = GridField::from_fn(16, |a, _| a.cos());
        let err = g
            .component(0)
            .iter()
            .zip(want.component(0))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-15);
    }

    #[test]
    fn round_trip_at_64() {
        let sp = Spectral::new(64).unwrap();
        let g = smooth_random(64, 7);
        let back = sp.inverse(&sp.forward(&g).unwrap()).unwrap();
        let err = g
            .component(0)
            .iter()
            .zip(back.component(0))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "round trip error {err}");
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let sp = Spectral::new(16).unwrap();
        let mut s = SpectralField::zeros(16, 1);
        s.set_coeff(1, 0, Complex64::new(0.5, 0.0));
        assert!(matches!(
            sp.inverse(&s),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn unsupported_size_is_config_error() {
        assert!(matches!(Spectral::new(7), Err(Error::Config(_))));
        assert!(matches!(Spectral::new(0), Err(Error::Config(_))));
    }

    #[test]
    fn dealias_cutoff() {
        let sp = Spectral::new(1024).unwrap();
        assert_eq!(sp.kmax(), 341);
        let mut s = SpectralField::zeros(1024, 1);
        s.set_coeff(342, 0, Complex64::new(1.0, 0.0));
        s.set_coeff(341, 0, Complex64::new(1.0, 0.0));
        let d = sp.dealias(&s);
        assert_eq!(d.coeff(342, 0), Complex64::default());
        assert_eq!(d.coeff(341, 0), Complex64::new(1.0, 0.0));

        let sp = Spectral::new(64).unwrap();
        let mut s = SpectralField::zeros(64, 1);
        s.set_coeff(1, 1, Complex64::new(0.3, -0.2));
        assert_eq!(sp.dealias(&s), s);
    }

    #[test]
    fn gradient_of_cosine_and_constant() {
        let sp = Spectral::new(32).unwrap();
        let s = sp.forward(&GridField::from_fn(32, |a, _| a.cos())).unwrap();
        let g = sp.inverse(&sp.gradient(&s).unwrap()).unwrap();
        let want = GridField::from_fn(32, |a, _| -a.sin());
        for (x, y) in g.component(0).iter().zip(want.component(0)) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(g.component(1).iter().all(|v| v.abs() < 1e-14));

        let c = sp.forward(&GridField::from_fn(32, |_, _| 3.0)).unwrap();
        assert_eq!(sp.gradient(&c).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn gradient_rejects_vector() {
        let sp = Spectral::new(16).unwrap();
        let v = SpectralField::zeros(16, 2);
        assert!(matches!(sp.gradient(&v), Err(Error::Arity { .. })));
    }

    #[test]
    fn inverse_laplacian_eigenfunction() {
        let sp = Spectral::new(32).unwrap();
        let s = sp
            .forward(&GridField::from_fn(32, |a, b| a.sin() * b.cos()))
            .unwrap();
        let g = sp.inverse(&sp.inverse_laplacian(&s).unwrap()).unwrap();
        for (i, v) in g.component(0).iter().enumerate() {
            let (a, b) = (grid_coord(32, i / 32), grid_coord(32, i % 32));
            assert!((v + 0.5 * a.sin() * b.cos()).abs() < 1e-15);
        }
        let z = sp.inverse_laplacian(&SpectralField::zeros(32, 1)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn calderon_zygmund_on_cosine() {
        let sp = Spectral::new(32).unwrap();
        let s = sp.forward(&GridField::from_fn(32, |a, _| a.cos())).unwrap();
        let c11 = sp.calderon_zygmund(&s, Axis::A, Axis::A).unwrap();
        assert!((c11.coeff(1, 0).re - 0.5).abs() < 1e-15);
        let c12 = sp.calderon_zygmund(&s, Axis::A, Axis::B).unwrap();
        assert!(c12.max_abs() < 1e-16);
    }

    #[test]
    fn velocity_of_ab_vorticity_has_matching_curl() {
        let n = 32;
        let sp = Spectral::new(n).unwrap();
        let w = sp
            .forward(&GridField::from_fn(n, |a, b| a.sin() * b.cos()))
            .unwrap();
        let v = sp.velocity_from_vorticity(&w).unwrap();
        let vg = sp.inverse(&v).unwrap();
        // curl(v) = ω fixes the sign: v = -(1/2)(sin a sin b, cos a cos b)
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (grid_coord(n, i), grid_coord(n, j));
                assert!((vg.at(0, i, j) + 0.5 * a.sin() * b.sin()).abs() < 1e-15);
                assert!((vg.at(1, i, j) + 0.5 * a.cos() * b.cos()).abs() < 1e-15);
            }
        }
        let curl = sp.curl(&v).unwrap();
        assert!(curl.axpy(-1.0, &w).max_abs() < 1e-15);
    }

    #[test]
    fn velocity_rejects_nonzero_mean() {
        let sp = Spectral::new(16).unwrap();
        let w = sp
            .forward(&GridField::from_fn(16, |a, _| 1.0 + a.cos()))
            .unwrap();
        assert!(matches!(
            sp.velocity_from_vorticity(&w),
            Err(Error::InvalidInput(_))
        ));
        let z = sp
            .velocity_from_vorticity(&SpectralField::zeros(16, 1))
            .unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }
}
