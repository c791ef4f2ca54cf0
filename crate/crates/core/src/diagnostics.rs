//! Spectra, conservation measures, discrepancy norms and convergence-radius fits.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::eulerian::et_coefficients;
use crate::lagrangian::{build_stack_from_vorticity, TaylorStack};
use crate::spectral::{GridField, Spectral, SpectralField};

/// Departure (in decades) above the extrapolated fit that marks rounding noise.
pub const DEFAULT_TRANSITION_DECADES: f64 = 3.0;
/// Minimum points in any least-squares window.
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares fit `ln f_s ≈ c + a ln s + b s` over an order window.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Coefficient `a` of `ln s`.
    pub alpha: f64,
    /// Coefficient `b` of `s`.
    pub beta: f64,
    /// Constant `c`, the logarithm of the prefactor.
    pub log_gamma: f64,
    /// `R = e^{-b}`.
    pub radius: f64,
    /// Inclusive `[s_min, s_max]`.
    pub window: (usize, usize),
    /// `(s, d_s)` with `d_s = c + a ln s + b s - ln f_s`.
    pub discrepancies: Vec<(usize, f64)>,
    /// `max |d_s / s|` over the window.
    pub max_scaled_discrepancy: f64,
}

impl FitReport {
    /// Prefactor `e^c`.
    pub fn amplitude(&self) -> f64 {
        self.log_gamma.exp()
    }

    /// Fitted `ln f_s`.
    pub fn model(&self, s: f64) -> f64 {
        self.log_gamma + self.alpha * s.ln() + self.beta * s
    }

    /// Pure geometric model with the given radius, for callers that only need `R`.
    pub fn synthetic_radius(radius: f64) -> Self {
        Self {
            alpha: 0.0,
            beta: -radius.ln(),
            log_gamma: 0.0,
            radius,
            window: (1, 1),
            discrepancies: Vec::new(),
            max_scaled_discrepancy: 0.0,
        }
    }

    /// `max |d_s/s|` restricted to `s >= from`.
    pub fn scaled_discrepancy_beyond(&self, from: usize) -> f64 {
        self.discrepancies
            .iter()
            .filter(|(s, _)| *s >= from)
            .fold(0.0f64, |m, (s, d)| m.max((d / *s as f64).abs()))
    }
}

/// Solves `y ≈ c + a ln x + b x` in the least-squares sense; returns `(c, a, b)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let m = xs.len();
    let design = DMatrix::from_fn(m, 3, |r, c| match c {
        0 => 1.0,
        1 => xs[r].ln(),
        _ => xs[r],
    });
    let rhs = DVector::from_column_slice(ys);
    let svd = design.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::numerical("least-squares fit", e.to_string()))?;
    Ok((sol[0], sol[1], sol[2]))
}

/// Fits `ln f_s` on `{1, ln s, s}` for `s` in the inclusive window;
/// `values[s - 1] = f_s`.
pub fn fit_log_linear(values: &[f64], window: (usize, usize)) -> Result<FitReport> {
    let (lo, hi) = window;
    if lo == 0 || hi < lo || hi > values.len() || hi - lo + 1 < MIN_FIT_POINTS {
        let got = if hi >= lo && lo >= 1 {
            hi.min(values.len()).saturating_sub(lo) + 1
        } else {
            0
        };
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got,
        });
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for s in lo..=hi {
        let f = values[s - 1];
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Domain(format!("value f_{s} = {f} is not positive")));
        }
        xs.push(s as f64);
        ys.push(f.ln());
    }
    let (c, a, b) = least_squares(&xs, &ys)?;
    let discrepancies: Vec<(usize, f64)> = (lo..=hi)
        .zip(&ys)
        .map(|(s, y)| (s, c + a * (s as f64).ln() + b * s as f64 - y))
        .collect();
    let max_scaled = discrepancies
        .iter()
        .fold(0.0f64, |m, (s, d)| m.max((d / *s as f64).abs()));
    Ok(FitReport {
        alpha: a,
        beta: b,
        log_gamma: c,
        radius: (-b).exp(),
        window,
        discrepancies,
        max_scaled_discrepancy: max_scaled,
    })
}

/// Classical finite-order radius estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusEstimates {
    /// `1 / max_{s in tail} f_s^{1/s}` over the upper half of the orders.
    pub hadamard: f64,
    /// `f_{S-1} / f_S` from the last two orders.
    pub ratio: f64,
    /// Domb–Sykes points `(1/s, f_s / f_{s-1})`.
    pub domb_sykes: Vec<(f64, f64)>,
}

/// Root-test and ratio-test radii of `Σ f_s tˢ`; `values[s - 1] = f_s`.
pub fn radius_estimators(values: &[f64]) -> Result<RadiusEstimates> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if values.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::Domain(
            "radius estimators need positive values".into(),
        ));
    }
    let tail = (n / 2).max(1);
    let root_max = (tail..=n)
        .map(|s| values[s - 1].powf(1.0 / s as f64))
        .fold(0.0f64, f64::max);
    let domb_sykes = (2..=n)
        .map(|s| (1.0 / s as f64, values[s - 1] / values[s - 2]))
        .collect();
    Ok(RadiusEstimates {
        hadamard: 1.0 / root_max,
        ratio: values[n - 2] / values[n - 1],
        domb_sykes,
    })
}

/// Shell-summed enstrophy spectrum with optional exponential-tail fit.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// `shells[K] = ½ Σ_{K <= |k| < K+1} |ω̂_k|²`.
    pub shells: Vec<f64>,
    /// Analyticity-strip width from `E(K) ≈ C K^n e^{-2δK}`.
    pub delta: Option<f64>,
    pub exponent: Option<f64>,
    pub log_prefactor: Option<f64>,
}

impl SpectrumReport {
    /// Relative truncation-error estimate `e^{-δ kmax}`.
    pub fn truncation_estimate(&self, kmax: usize) -> Option<f64> {
        self.delta.map(|d| (-d * kmax as f64).exp())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,E\n");
        for (k, e) in self.shells.iter().enumerate() {
            let _ = writeln!(out, "{k},{e:e}");
        }
        out
    }
}

/// Shell index `floor(|k|)` of an integer wavevector, computed exactly.
pub fn shell_index(k1: i64, k2: i64) -> usize {
    let q = (k1 * k1 + k2 * k2) as u64;
    let mut r = (q as f64).sqrt() as u64;
    while r * r > q {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= q {
        r += 1;
    }
    r as usize
}

/// Enstrophy spectrum by integer shells.
pub fn vorticity_spectrum(sp: &Spectral, omega: &SpectralField) -> Result<SpectrumReport> {
    if omega.ncomp() != 1 {
        return Err(Error::Arity {
            expected: 1,
            got: omega.ncomp(),
        });
    }
    let n = sp.n();
    if omega.n() != n {
        return Err(Error::ShapeMismatch {
            left: n,
            right: omega.n(),
        });
    }
    let half = (n / 2) as i64;
    let mut shells = vec![0.0; shell_index(half, half) + 1];
    let w = omega.component(0);
    for p in 0..n {
        for q in 0..n {
            let k = shell_index(sp.wavenumber(p), sp.wavenumber(q));
            shells[k] += 0.5 * w[p * n + q].norm_sqr();
        }
    }
    Ok(SpectrumReport {
        shells,
        delta: None,
        exponent: None,
        log_prefactor: None,
    })
}

/// Fills `delta` and `exponent` from a fit over shells `K_min..=K_max`.
pub fn fit_analyticity_delta(
    spec: &SpectrumReport,
    window: (usize, usize),
) -> Result<SpectrumReport> {
    if window.0 == 0 {
        return Err(Error::Domain("shell window must start at K >= 1".into()));
    }
    // shells[K] sits at values[K - 1]
    let values = &spec.shells[1..];
    let fit = fit_log_linear(values, window)?;
    Ok(SpectrumReport {
        shells: spec.shells.clone(),
        delta: Some(-0.5 * fit.beta),
        exponent: Some(fit.alpha),
        log_prefactor: Some(fit.log_gamma),
    })
}

/// Default shell window for the δ fit: from `K = 2` up to the last shell
/// fully inside the dealias square whose value is above the noise floor.
pub fn default_delta_window(sp: &Spectral, spec: &SpectrumReport) -> (usize, usize) {
    let top = sp.kmax().min(spec.shells.len() - 1);
    let peak = spec.shells.iter().cloned().fold(0.0f64, f64::max);
    let mut hi = 2;
    for k in 2..=top {
        if spec.shells[k] > peak * 1e-26 {
            hi = k;
        } else {
            break;
        }
    }
    (2, hi)
}

/// `½ Σ |v̂_k|²`.
pub fn energy(sp: &Spectral, omega: &SpectralField) -> Result<f64> {
    let v = sp.velocity_from_vorticity(omega)?;
    Ok(0.5 * v.norm().powi(2))
}

/// `½ Σ |ω̂_k|²`.
pub fn enstrophy(omega: &SpectralField) -> f64 {
    0.5 * omega.norm().powi(2)
}

/// `max |a - b|` over the grid and all components.
pub fn max_discrepancy(a: &GridField, b: &GridField) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    if a.ncomp() != b.ncomp() {
        return Err(Error::Arity {
            expected: a.ncomp(),
            got: b.ncomp(),
        });
    }
    Ok(a.components()
        .iter()
        .zip(b.components())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0f64, f64::max))
}

/// Clean fit window and rounding-noise transition of a coefficient sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionReport {
    /// First order lying `decades` above the extrapolated clean fit.
    pub transition: Option<usize>,
    /// Fit over the final clean window, when one exists.
    pub fit: Option<FitReport>,
}

/// Locates the order where a norm sequence leaves its asymptotic trend.
///
/// Starting from a short window at `s_min`, the sequence is fitted, the first
/// order exceeding the extrapolation by `decades` is taken as the candidate
/// transition, and the window is widened to `transition - 5`; this repeats
/// until the candidate stops moving.
pub fn detect_transition(values: &[f64], s_min: usize, decades: f64) -> TransitionReport {
    let n = values.len();
    let lo = s_min.max(1);
    let threshold = decades * std::f64::consts::LN_10;
    // the clean window ends before the first non-positive value
    let usable = values
        .iter()
        .position(|&f| !(f > 0.0) || !f.is_finite())
        .unwrap_or(n);
    if usable < lo + MIN_FIT_POINTS - 1 {
        let transition = (usable < n && usable >= lo).then_some(usable + 1);
        return TransitionReport {
            transition,
            fit: None,
        };
    }
    let mut hi = (lo + MIN_FIT_POINTS + 2).min(usable);
    let mut last: Option<Option<usize>> = None;
    let mut fit = None;
    for _ in 0..(4 * n + 4) {
        let Ok(f) = fit_log_linear(values, (lo, hi)) else {
            break;
        };
        let candidate = ((hi + 1)..=n).find(|&s| {
            let v = values[s - 1];
            !(v > 0.0) || !v.is_finite() || v.ln() - f.model(s as f64) > threshold
        });
        fit = Some(f);
        let next_hi = match candidate {
            Some(t) => t.saturating_sub(5).max(hi).min(usable),
            None => usable,
        };
        if last == Some(candidate) && next_hi == hi {
            break;
        }
        last = Some(candidate);
        if next_hi == hi {
            // candidate fixed; one more pass confirms it
            continue;
        }
        hi = next_hi;
    }
    TransitionReport {
        transition: last.flatten(),
        fit,
    }
}

/// Largest `|d_s / s|` accepted inside a clean fit window.
pub const CLEAN_FIT_TOLERANCE: f64 = 0.01;

/// Fit window used by the run loop.
///
/// The transition is located over the whole sequence. `s_min` is 20 when at
/// least `MIN_FIT_POINTS` clean orders lie beyond it, else 10, else 1, and
/// `s_max = transition - 5` is then lowered until the scaled discrepancies
/// stay within `CLEAN_FIT_TOLERANCE`, which trims the orders where noise has
/// started to grow but is still below the transition threshold.
pub fn clean_window_fit(values: &[f64]) -> Result<(FitReport, Option<usize>)> {
    let transition = detect_transition(values, 1, DEFAULT_TRANSITION_DECADES).transition;
    let top = match transition {
        Some(t) => t.saturating_sub(5),
        None => values.len(),
    };
    for s_min in [20, 10, 1] {
        let shortest = s_min + MIN_FIT_POINTS - 1;
        if top < shortest {
            continue;
        }
        let mut s_max = top;
        loop {
            let fit = fit_log_linear(values, (s_min, s_max))?;
            if fit.max_scaled_discrepancy <= CLEAN_FIT_TOLERANCE || s_max == shortest {
                return Ok((fit, transition));
            }
            s_max -= 1;
        }
    }
    Err(Error::InsufficientData {
        needed: MIN_FIT_POINTS,
        got: values.len(),
    })
}

/// Minimum over sampled grid points of the pointwise root-test radius
/// `1 / max_{s in tail} |ξ⁽ˢ⁾(a)|^{1/s}`.
pub fn pointwise_hadamard_min(
    sp: &Spectral,
    stack: &TaylorStack,
    samples: &[(usize, usize)],
) -> Result<f64> {
    let order = stack.order();
    if order < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: order,
        });
    }
    let n = sp.n();
    let tail = (order / 2).max(1);
    let mut root_max = vec![0.0f64; samples.len()];
    for s in tail..=order {
        let xi = stack.coeff(s);
        let (x1, x2) = sp.inverse_real_pair(xi.component(0), xi.component(1));
        for (slot, &(i, j)) in samples.iter().enumerate() {
            let idx = (i % n) * n + (j % n);
            let mag = x1[idx].hypot(x2[idx]);
            root_max[slot] = root_max[slot].max(mag.powf(1.0 / s as f64));
        }
    }
    Ok(root_max
        .into_iter()
        .map(|m| if m > 0.0 { 1.0 / m } else { f64::INFINITY })
        .fold(f64::INFINITY, f64::min))
}

/// Lagrangian and Eulerian Taylor-coefficient norms at one state.
#[derive(Clone, Debug)]
pub struct NormProbe {
    /// `‖ξ⁽ˢ⁾‖` for `s = 1..=S_max`.
    pub lagrangian: Vec<f64>,
    /// `‖ω_s‖` for `s = 1..=S_max`.
    pub eulerian: Vec<f64>,
    pub lagrangian_transition: Option<usize>,
    pub eulerian_transition: Option<usize>,
}

impl NormProbe {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,lagrangian,eulerian\n");
        for s in 0..self.lagrangian.len().max(self.eulerian.len()) {
            let l = self.lagrangian.get(s).copied().unwrap_or(f64::NAN);
            let e = self.eulerian.get(s).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{l:e},{e:e}", s + 1);
        }
        let fmt = |t: Option<usize>| t.map(|t| t.to_string()).unwrap_or_else(|| "none".into());
        let _ = writeln!(
            out,
            "# transition lagrangian={} eulerian={}",
            fmt(self.lagrangian_transition),
            fmt(self.eulerian_transition)
        );
        out
    }
}

/// Builds both coefficient sequences to `s_max` and detects their transitions.
pub fn coefficient_norm_probe(
    sp: &Spectral,
    omega: &SpectralField,
    s_max: usize,
) -> Result<NormProbe> {
    if s_max == 0 {
        return Err(Error::Config("probe depth must be >= 1".into()));
    }
    let stack = build_stack_from_vorticity(sp, omega, s_max)?;
    let lagrangian = stack.norms().to_vec();
    let et = et_coefficients(sp, omega, s_max)?;
    let eulerian = et.norms()[1..].to_vec();
    let detect = |v: &[f64]| {
        if v.len() < MIN_FIT_POINTS + 2 {
            None
        } else {
            detect_transition(v, 1, DEFAULT_TRANSITION_DECADES).transition
        }
    };
    Ok(NormProbe {
        lagrangian_transition: detect(&lagrangian),
        eulerian_transition: detect(&eulerian),
        lagrangian,
        eulerian,
    })
}
