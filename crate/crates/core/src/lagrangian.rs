//! Time-Taylor coefficients of the Lagrangian displacement.
//!
//! In two dimensions the Cauchy invariants give, for every order `s >= 2`,
//! the curl and divergence of the coefficient `ξ⁽ˢ⁾` as quadratic sums over
//! the gradients of lower-order coefficients:
//!
//! ```text
//! curl ξ⁽ˢ⁾ = -Σ_k Σ_{m=1}^{s-1} ((2m - s)/s) ∂₁ξ_k⁽ᵐ⁾ ∂₂ξ_k⁽ˢ⁻ᵐ⁾
//! div  ξ⁽ˢ⁾ = -Σ_{m=1}^{s-1} (∂₁ξ₁⁽ᵐ⁾ ∂₂ξ₂⁽ˢ⁻ᵐ⁾ - ∂₂ξ₁⁽ᵐ⁾ ∂₁ξ₂⁽ˢ⁻ᵐ⁾)
//! ```
//!
//! (the curl sum is the antisymmetrised form of `Σ (m/s) ∇ξ_k⁽ᵐ⁾ × ∇ξ_k⁽ˢ⁻ᵐ⁾`).
//! The pair is inverted with a stream function and a potential, both with
//! zero mean. `ξ⁽¹⁾` is the initial velocity.

use num_complex::Complex64;

use crate::diagnostics::FitReport;
use crate::error::{Error, Result};
use crate::spectral::{grid_coord, GridField, Spectral, SpectralField};

/// Default accuracy parameter for the truncation criterion.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Grid samples of `∇ξ` for one order: `grad[k][j] = ∂_j ξ_k`.
pub type GradTensor = [[Vec<f64>; 2]; 2];

/// Ordered displacement coefficients `ξ⁽¹⁾ … ξ⁽ˢ⁾` with cached gradients and norms.
#[derive(Clone)]
pub struct TaylorStack {
    n: usize,
    max_order: usize,
    omega_grid: Vec<f64>,
    coeffs: Vec<SpectralField>,
    grads: Vec<GradTensor>,
    norms: Vec<f64>,
}

impl std::fmt::Debug for TaylorStack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaylorStack")
            .field("n", &self.n)
            .field("order", &self.order())
            .field("norms", &self.norms)
            .finish()
    }
}

impl TaylorStack {
    /// Empty stack for the step starting from vorticity `omega_init`.
    pub fn new(sp: &Spectral, omega_init: &SpectralField, max_order: usize) -> Result<Self> {
        if omega_init.ncomp() != 1 {
            return Err(Error::Arity {
                expected: 1,
                got: omega_init.ncomp(),
            });
        }
        if max_order == 0 {
            return Err(Error::Config("maximum Taylor order must be >= 1".into()));
        }
        let omega_grid = sp.inverse(omega_init)?.into_components().remove(0);
        Ok(Self {
            n: sp.n(),
            max_order,
            omega_grid,
            coeffs: Vec::with_capacity(max_order),
            grads: Vec::with_capacity(max_order),
            norms: Vec::with_capacity(max_order),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored coefficients `S`.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `ξ⁽ˢ⁾` for `1 <= s <= order()`.
    pub fn coeff(&self, s: usize) -> &SpectralField {
        &self.coeffs[s - 1]
    }

    /// Cached grid gradient `∇ξ⁽ˢ⁾`.
    pub fn gradient_grid(&self, s: usize) -> &GradTensor {
        &self.grads[s - 1]
    }

    /// L² norms `‖ξ⁽¹⁾‖ … ‖ξ⁽ˢ⁾‖`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Lagrangian vorticity of the step (constant along trajectories in 2D).
    pub fn omega_grid(&self) -> &[f64] {
        &self.omega_grid
    }

    /// Keeps only the first `order` coefficients.
    pub fn truncate(&mut self, order: usize) {
        self.coeffs.truncate(order);
        self.grads.truncate(order);
        self.norms.truncate(order);
    }

    /// Appends `ξ⁽ˢ⁾` and caches its gradient and norm.
    pub fn push(&mut self, sp: &Spectral, xi: SpectralField) -> Result<()> {
        let s = self.order() + 1;
        if s > self.max_order {
            return Err(Error::Capacity {
                order: s,
                max: self.max_order,
            });
        }
        if xi.ncomp() != 2 {
            return Err(Error::Arity {
                expected: 2,
                got: xi.ncomp(),
            });
        }
        let norm = xi.norm();
        if !norm.is_finite() {
            return Err(Error::numerical(
                format!("Taylor coefficient of order {s}"),
                "non-finite norm",
            ));
        }
        let x1 = xi.component(0);
        let x2 = xi.component(1);
        let (d1x1, d2x1) = sp.inverse_real_pair(&sp.d1(x1), &sp.d2(x1));
        let (d1x2, d2x2) = sp.inverse_real_pair(&sp.d1(x2), &sp.d2(x2));
        self.grads.push([[d1x1, d2x1], [d1x2, d2x2]]);
        self.coeffs.push(xi);
        self.norms.push(norm);
        Ok(())
    }
}

/// Computes `ξ⁽ˢ⁾` from the coefficients `1..s-1` already held by `stack`.
///
/// For `s = 1` the curl/div pair reduces to `curl ξ = ω`, `div ξ = 0`, i.e.
/// the initial velocity.
pub fn next_coefficient(
    sp: &Spectral,
    stack: &TaylorStack,
    omega_init: &SpectralField,
    s: usize,
) -> Result<SpectralField> {
    if s == 0 {
        return Err(Error::InvalidInput("Taylor orders start at 1".into()));
    }
    if s > stack.max_order {
        return Err(Error::Capacity {
            order: s,
            max: stack.max_order,
        });
    }
    if stack.order() != s - 1 {
        return Err(Error::State(format!(
            "order {s} needs coefficients 1..{} with gradients, stack holds {}",
            s - 1,
            stack.order()
        )));
    }
    if s == 1 {
        return sp.velocity_from_vorticity(omega_init);
    }

    let nn = stack.n * stack.n;
    let mut curl_src = vec![0.0; nn];
    let mut div_src = vec![0.0; nn];
    let sf = s as f64;
    for m in 1..s {
        let g = &stack.grads[m - 1];
        let h = &stack.grads[s - m - 1];
        let w = (2.0 * m as f64 - sf) / sf;
        let (g11, g12, g21, _) = (&g[0][0], &g[0][1], &g[1][0], &g[1][1]);
        let (_, h12, h21, h22) = (&h[0][0], &h[0][1], &h[1][0], &h[1][1]);
        for x in 0..nn {
            curl_src[x] -= w * (g11[x] * h12[x] + g21[x] * h22[x]);
            div_src[x] -= g11[x] * h22[x] - g12[x] * h21[x];
        }
    }
    let (mut c_hat, mut d_hat) = sp.forward_real_pair(&curl_src, &div_src);
    sp.dealias_slice(&mut c_hat);
    sp.dealias_slice(&mut d_hat);
    Ok(hodge_solve(sp, &c_hat, &d_hat))
}

/// Zero-mean vector field with prescribed curl and divergence spectra.
fn hodge_solve(sp: &Spectral, curl: &[Complex64], div: &[Complex64]) -> SpectralField {
    let n = sp.n();
    let mut x1 = vec![Complex64::default(); n * n];
    let mut x2 = vec![Complex64::default(); n * n];
    for p in 0..n {
        let k1 = sp.kdiff(p);
        for q in 0..n {
            let k2 = sp.kdiff(q);
            let ksq = k1 * k1 + k2 * k2;
            if ksq == 0.0 {
                continue;
            }
            let idx = p * n + q;
            // ψ = -curl/|k|², φ = -div/|k|²; ξ = (-∂₂ψ + ∂₁φ, ∂₁ψ + ∂₂φ)
            let psi = -curl[idx] / ksq;
            let phi = -div[idx] / ksq;
            let i = Complex64::new(0.0, 1.0);
            x1[idx] = i * (-k2 * psi + k1 * phi);
            x2[idx] = i * (k1 * psi + k2 * phi);
        }
    }
    SpectralField::new(n, vec![x1, x2]).expect("lattice-sized components")
}

/// Builds a stack of `order` coefficients starting from `v_init = ξ⁽¹⁾`.
pub fn build_stack(
    sp: &Spectral,
    v_init: &SpectralField,
    omega_init: &SpectralField,
    order: usize,
) -> Result<TaylorStack> {
    let mut stack = TaylorStack::new(sp, omega_init, order)?;
    stack.push(sp, v_init.clone())?;
    extend_stack(sp, &mut stack, omega_init, order)?;
    Ok(stack)
}

/// Convenience: velocity is derived from the vorticity.
pub fn build_stack_from_vorticity(
    sp: &Spectral,
    omega_init: &SpectralField,
    order: usize,
) -> Result<TaylorStack> {
    let v = sp.velocity_from_vorticity(omega_init)?;
    build_stack(sp, &v, omega_init, order)
}

/// Grows `stack` up to `order` coefficients.
pub fn extend_stack(
    sp: &Spectral,
    stack: &mut TaylorStack,
    omega_init: &SpectralField,
    order: usize,
) -> Result<()> {
    if order > stack.max_order {
        return Err(Error::Capacity {
            order,
            max: stack.max_order,
        });
    }
    while stack.order() < order {
        let s = stack.order() + 1;
        let xi = next_coefficient(sp, stack, omega_init, s)?;
        if !xi.is_finite() {
            return Err(Error::numerical(
                format!("Taylor coefficient of order {s}"),
                "NaN or infinity in recurrence",
            ));
        }
        stack.push(sp, xi)?;
    }
    Ok(())
}

/// Order and time step for one Lagrangian step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPlan {
    pub order: usize,
    pub dt: f64,
    pub epsilon: f64,
    pub r_estimate: Option<f64>,
}

impl StepPlan {
    /// Last kept term `‖ξ⁽ˢ⁾‖ dtˢ` for the given norms.
    pub fn truncation_term(&self, norms: &[f64]) -> f64 {
        norms[self.order - 1] * self.dt.powi(self.order as i32)
    }
}

/// Largest step with `norms[S] dtˢ < epsilon`, capped at `dt_cap`.
pub fn choose_step(norms: &[f64], epsilon: f64, dt_cap: f64) -> Result<StepPlan> {
    if norms.is_empty() {
        return Err(Error::InvalidInput(
            "no Taylor norms to choose a step from".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let order = norms.len();
    let last = norms[order - 1];
    let dt = if last == 0.0 {
        if !(dt_cap > 0.0) || !dt_cap.is_finite() {
            return Err(Error::Config(
                "rest state needs a positive finite step cap".into(),
            ));
        }
        dt_cap
    } else {
        let mut dt = (epsilon / last).powf(1.0 / order as f64);
        // strict inequality against rounding in the root
        while last * dt.powi(order as i32) >= epsilon {
            dt *= 1.0 - 4.0 * f64::EPSILON;
        }
        dt.min(dt_cap)
    };
    if !(dt > 0.0) {
        return Err(Error::Config(format!("non-positive step {dt}")));
    }
    Ok(StepPlan {
        order,
        dt,
        epsilon,
        r_estimate: None,
    })
}

/// How the truncation order is picked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderPolicy {
    /// Fixed order (the CL8/CL16/CL24 presets).
    Fixed(usize),
    /// Middle of the optimal-order bracket `-(1/d) ln(ε/A) <= S <= -ln(ε/A)`.
    Auto { dimension: f64 },
}

impl OrderPolicy {
    /// Parses `CL8`, `CL16`, `CL24`, any `CL<n>`, or `auto`.
    pub fn preset(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        if lower == "auto" {
            return Ok(OrderPolicy::Auto { dimension: 2.0 });
        }
        lower
            .strip_prefix("cl")
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&s| s >= 1)
            .map(OrderPolicy::Fixed)
            .ok_or_else(|| Error::Config(format!("unknown order preset '{name}'")))
    }
}

/// Chooses `(S, dt)` for each CL step.
#[derive(Clone, Copy, Debug)]
pub struct StepController {
    pub policy: OrderPolicy,
    pub epsilon: f64,
    /// Upper bound on any step.
    pub dt_cap: f64,
    /// Caps `dt` at `R e^{-d}` once a radius fit exists.
    pub radius_cap: bool,
    pub dimension: f64,
}

impl StepController {
    pub fn new(policy: OrderPolicy, epsilon: f64, dt_cap: f64) -> Self {
        Self {
            policy,
            epsilon,
            dt_cap,
            radius_cap: true,
            dimension: 2.0,
        }
    }

    /// Order bracket `[-(1/d) ln(ε/A), -ln(ε/A)]` for amplitude `a`.
    pub fn order_bracket(&self, amplitude: f64, dimension: f64) -> (f64, f64) {
        let l = -(self.epsilon / amplitude).ln();
        (l / dimension, l)
    }

    pub fn order(&self, fit: Option<&FitReport>) -> usize {
        match self.policy {
            OrderPolicy::Fixed(s) => s,
            OrderPolicy::Auto { dimension } => {
                let amplitude = fit.map(|f| f.amplitude()).unwrap_or(1.0);
                let (lo, hi) = self.order_bracket(amplitude, dimension);
                let mid = (0.5 * (lo + hi)).round();
                mid.clamp(lo.ceil(), hi.floor().max(lo.ceil())).max(1.0) as usize
            }
        }
    }

    /// Step plan from the norms of a built stack; `limit` bounds the step
    /// (e.g. the time left to the next output).
    pub fn plan(&self, norms: &[f64], fit: Option<&FitReport>, limit: f64) -> Result<StepPlan> {
        let mut cap = self.dt_cap.min(limit);
        let r = fit.map(|f| f.radius);
        if self.radius_cap {
            if let Some(r) = r {
                cap = cap.min(r * (-self.dimension).exp());
            }
        }
        let mut plan = choose_step(norms, self.epsilon, cap)?;
        plan.r_estimate = r;
        Ok(plan)
    }
}

/// Free-function form of [`StepController`]: returns `(S, dt)`.
pub fn step_order_controller(
    controller: &StepController,
    fit: Option<&FitReport>,
    norms: &[f64],
) -> Result<(usize, f64)> {
    let s = controller.order(fit);
    let used = &norms[..s.min(norms.len())];
    let plan = controller.plan(used, fit, f64::INFINITY)?;
    Ok((plan.order, plan.dt))
}

/// End-of-step particle positions and the vorticity they carry.
#[derive(Clone, Debug)]
pub struct DistortedState {
    /// Unwrapped positions `x(a, Δt) = a + ξ_S(a, Δt)`.
    pub positions: GridField,
    /// Vorticity carried by the particles (the step's initial samples).
    pub lagrangian_vorticity: GridField,
    /// `ẋ(a, Δt)` from term-wise differentiation of the truncated series.
    pub velocity_at_arrival: Option<GridField>,
    /// `det(I + ∇ξ_S)` at every grid point, when gradients are known.
    pub jacobian: Option<Vec<f64>>,
    pub dt: f64,
}

impl DistortedState {
    /// State from explicit positions, without velocity or Jacobian.
    pub fn from_map(positions: GridField, vorticity: GridField) -> Result<Self> {
        if positions.ncomp() != 2 || vorticity.ncomp() != 1 {
            return Err(Error::Arity {
                expected: 2,
                got: positions.ncomp(),
            });
        }
        if positions.n() != vorticity.n() {
            return Err(Error::ShapeMismatch {
                left: positions.n(),
                right: vorticity.n(),
            });
        }
        Ok(Self {
            positions,
            lagrangian_vorticity: vorticity,
            velocity_at_arrival: None,
            jacobian: None,
            dt: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.n()
    }

    pub fn min_jacobian(&self) -> Option<f64> {
        self.jacobian
            .as_ref()
            .map(|j| j.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// `max |det(I + ∇ξ_S) - 1|` over the grid.
    pub fn incompressibility_residual(&self) -> Option<f64> {
        self.jacobian
            .as_ref()
            .map(|j| j.iter().fold(0.0f64, |m, d| m.max((d - 1.0).abs())))
    }

    /// Largest displacement component magnitude.
    pub fn max_displacement(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst
                    .max((self.positions.at(0, i, j) - grid_coord(n, i)).abs())
                    .max((self.positions.at(1, i, j) - grid_coord(n, j)).abs());
            }
        }
        worst
    }
}

/// Sums the truncated series at `dt` (Horner, highest order first).
pub fn evaluate_displacement(
    sp: &Spectral,
    stack: &TaylorStack,
    dt: f64,
) -> Result<DistortedState> {
    let order = stack.order();
    if order == 0 {
        return Err(Error::State("cannot evaluate an empty stack".into()));
    }
    let n = stack.n;
    let nn = n * n;
    let mut disp = [vec![0.0; nn], vec![0.0; nn]];
    let mut vel = [vec![0.0; nn], vec![0.0; nn]];
    let mut grad = [
        [vec![0.0; nn], vec![0.0; nn]],
        [vec![0.0; nn], vec![0.0; nn]],
    ];

    for s in (1..=order).rev() {
        let xi = stack.coeff(s);
        let (x1, x2) = sp.inverse_real_pair(xi.component(0), xi.component(1));
        let sf = s as f64;
        let gs = stack.gradient_grid(s);
        for idx in 0..nn {
            disp[0][idx] = x1[idx] + dt * disp[0][idx];
            disp[1][idx] = x2[idx] + dt * disp[1][idx];
            vel[0][idx] = sf * x1[idx] + dt * vel[0][idx];
            vel[1][idx] = sf * x2[idx] + dt * vel[1][idx];
        }
        for k in 0..2 {
            for j in 0..2 {
                let g = &gs[k][j];
                let acc = &mut grad[k][j];
                for idx in 0..nn {
                    acc[idx] = g[idx] + dt * acc[idx];
                }
            }
        }
    }

    let mut max_disp = 0.0f64;
    let mut xs = vec![0.0; nn];
    let mut ys = vec![0.0; nn];
    let mut jac = vec![0.0; nn];
    for i in 0..n {
        let a = grid_coord(n, i);
        for j in 0..n {
            let b = grid_coord(n, j);
            let idx = i * n + j;
            let d1 = dt * disp[0][idx];
            let d2 = dt * disp[1][idx];
            max_disp = max_disp.max(d1.abs()).max(d2.abs());
            xs[idx] = a + d1;
            ys[idx] = b + d2;
            let g11 = dt * grad[0][0][idx];
            let g12 = dt * grad[0][1][idx];
            let g21 = dt * grad[1][0][idx];
            let g22 = dt * grad[1][1][idx];
            jac[idx] = (1.0 + g11) * (1.0 + g22) - g12 * g21;
        }
    }
    if !max_disp.is_finite() {
        return Err(Error::numerical(
            "displacement evaluation",
            "non-finite displacement",
        ));
    }
    if max_disp >= std::f64::consts::PI {
        return Err(Error::StepTooLarge {
            max_displacement: max_disp,
        });
    }
    let [v1, v2] = vel;
    Ok(DistortedState {
        positions: GridField::vector(n, xs, ys)?,
        lagrangian_vorticity: GridField::scalar(n, stack.omega_grid.clone())?,
        velocity_at_arrival: Some(GridField::vector(n, v1, v2)?),
        jacobian: Some(jac),
        dt,
    })
}
