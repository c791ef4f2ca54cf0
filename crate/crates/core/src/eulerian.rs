//! Eulerian reference integrators for `∂ω/∂t + (v·∇)ω = 0`.
//!
//! All products are formed on the grid from dealiased factors and the
//! result is dealiased again, so every returned spectrum lies inside the
//! 2/3-rule square and has zero mean.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Spectral, SpectralField};

/// Vorticity spectrum at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerianState {
    pub omega: SpectralField,
    pub t: f64,
}

impl EulerianState {
    pub fn new(omega: SpectralField, t: f64) -> Self {
        Self { omega, t }
    }
}

fn check_scalar(sp: &Spectral, omega: &SpectralField) -> Result<()> {
    if omega.ncomp() != 1 {
        return Err(Error::Arity {
            expected: 1,
            got: omega.ncomp(),
        });
    }
    if omega.n() != sp.n() {
        return Err(Error::ShapeMismatch {
            left: sp.n(),
            right: omega.n(),
        });
    }
    Ok(())
}

/// Grid samples `(v₁, v₂, ∂₁ω, ∂₂ω)` of a zero-mean vorticity spectrum.
fn advection_grids(sp: &Spectral, w: &[Complex64]) -> [Vec<f64>; 4] {
    let v = sp.velocity_slices(w);
    let (v1, v2) = sp.inverse_real_pair(&v[0], &v[1]);
    let (w1, w2) = sp.inverse_real_pair(&sp.d1(w), &sp.d2(w));
    [v1, v2, w1, w2]
}

fn finish_product(sp: &Spectral, grid: &[f64]) -> Vec<Complex64> {
    let mut out = sp.forward_real(grid);
    sp.dealias_slice(&mut out);
    out[0] = Complex64::default();
    out
}

/// `-(v·∇)ω` with `v` recovered from `ω`.
pub fn rhs(sp: &Spectral, omega: &SpectralField) -> Result<SpectralField> {
    check_scalar(sp, omega)?;
    // validates the mean
    sp.velocity_from_vorticity(omega)?;
    let [v1, v2, w1, w2] = advection_grids(sp, omega.component(0));
    let prod: Vec<f64> = (0..v1.len())
        .map(|x| -(v1[x] * w1[x] + v2[x] * w2[x]))
        .collect();
    let out = SpectralField::new(sp.n(), vec![finish_product(sp, &prod)])?;
    if !out.is_finite() {
        return Err(Error::numerical("vorticity tendency", "overflow"));
    }
    Ok(out)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!(
            "time step must be non-negative, got {dt}"
        )));
    }
    Ok(())
}

fn finite_or_overflow(stage: &str, omega: SpectralField, t: f64) -> Result<EulerianState> {
    if !omega.is_finite() {
        return Err(Error::numerical(stage, format!("overflow at t={t}")));
    }
    Ok(EulerianState { omega, t })
}

/// Explicit midpoint step.
pub fn rk2_step(sp: &Spectral, state: &EulerianState, dt: f64) -> Result<EulerianState> {
    check_dt(dt)?;
    let k1 = rhs(sp, &state.omega)?;
    let mid = state.omega.axpy(0.5 * dt, &k1);
    let k2 = rhs(sp, &mid)?;
    finite_or_overflow("RK2 step", state.omega.axpy(dt, &k2), state.t + dt)
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step(sp: &Spectral, state: &EulerianState, dt: f64) -> Result<EulerianState> {
    check_dt(dt)?;
    let w = &state.omega;
    let k1 = rhs(sp, w)?;
    let k2 = rhs(sp, &w.axpy(0.5 * dt, &k1))?;
    let k3 = rhs(sp, &w.axpy(0.5 * dt, &k2))?;
    let k4 = rhs(sp, &w.axpy(dt, &k3))?;
    let next = w
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4);
    finite_or_overflow("RK4 step", next, state.t + dt)
}

/// Time-Taylor coefficients `ω₀ … ω_S` of the Eulerian vorticity.
#[derive(Clone, Debug)]
pub struct EtStack {
    coeffs: Vec<SpectralField>,
    norms: Vec<f64>,
}

impl EtStack {
    /// Highest stored order `S`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `ω_s` for `0 <= s <= order()`.
    pub fn coeff(&self, s: usize) -> &SpectralField {
        &self.coeffs[s]
    }

    /// `‖ω_s‖` for `s = 0..=order()`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Truncated series at `dt`.
    pub fn sum(&self, dt: f64) -> SpectralField {
        let mut acc = self.coeffs[self.order()].clone();
        for s in (0..self.order()).rev() {
            acc = self.coeffs[s].axpy(1.0, &acc.scale(dt));
        }
        acc
    }
}

/// Builds `ω₁ … ω_S` from `(s+1) ω_{s+1} = -Σ_{m=0}^{s} (v_m·∇) ω_{s-m}`.
pub fn et_coefficients(sp: &Spectral, omega0: &SpectralField, order: usize) -> Result<EtStack> {
    check_scalar(sp, omega0)?;
    sp.velocity_from_vorticity(omega0)?;
    let nn = sp.n() * sp.n();
    let mut coeffs = vec![omega0.clone()];
    let mut norms = vec![omega0.norm()];
    let mut grids: Vec<[Vec<f64>; 4]> = vec![advection_grids(sp, omega0.component(0))];
    for s in 0..order {
        let mut acc = vec![0.0; nn];
        for m in 0..=s {
            let [v1, v2, _, _] = &grids[m];
            let [_, _, w1, w2] = &grids[s - m];
            for x in 0..nn {
                acc[x] += v1[x] * w1[x] + v2[x] * w2[x];
            }
        }
        let scale = -1.0 / (s + 1) as f64;
        acc.iter_mut().for_each(|v| *v *= scale);
        let next = SpectralField::new(sp.n(), vec![finish_product(sp, &acc)])?;
        let norm = next.norm();
        if !norm.is_finite() {
            return Err(Error::numerical(
                format!("Eulerian Taylor coefficient of order {}", s + 1),
                "non-finite norm",
            ));
        }
        if s + 1 < order {
            grids.push(advection_grids(sp, next.component(0)));
        }
        coeffs.push(next);
        norms.push(norm);
    }
    Ok(EtStack { coeffs, norms })
}

/// One Eulerian time-Taylor step of order `order`.
pub fn et_step(
    sp: &Spectral,
    state: &EulerianState,
    dt: f64,
    order: usize,
) -> Result<EulerianState> {
    check_dt(dt)?;
    let stack = et_coefficients(sp, &state.omega, order)?;
    finite_or_overflow("ET step", stack.sum(dt), state.t + dt)
}

/// Courant number `floor(N/3) · max|v| · dt`.
pub fn courant_number(sp: &Spectral, omega: &SpectralField, dt: f64) -> Result<f64> {
    check_scalar(sp, omega)?;
    let v = sp.velocity_from_vorticity(omega)?;
    let (v1, v2) = sp.inverse_real_pair(v.component(0), v.component(1));
    let umax = v1
        .iter()
        .zip(&v2)
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0f64, f64::max);
    Ok(sp.kmax() as f64 * umax * dt)
}
