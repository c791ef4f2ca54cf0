//! Cascade interpolation of particle-carried values back to the uniform grid.
//!
//! Stage 1 walks each image of a vertical grid line `a = a_i` and, by
//! interpolating `x` as a function of `y`, finds where it crosses every
//! horizontal line `y = b_t`. Stage 2 interpolates the carried values to the
//! same crossings. Stage 3 interpolates along each horizontal line from the
//! crossings to the uniform abscissae `a_i`. Every 1D interpolation is an
//! 8-point Lagrange polynomial on the four nodes either side of the target.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lagrangian::DistortedState;
use crate::spectral::{grid_coord, GridField, SpectralField};

/// Nodes per 1D stencil.
pub const STENCIL: usize = 8;
const HALF: i64 = (STENCIL / 2) as i64;

/// Lines on which the required ordering failed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub ok: bool,
    /// Vertical lines `i` whose image is not strictly increasing in `y`.
    pub vertical: Vec<usize>,
    /// Horizontal lines `t` whose crossings are not strictly increasing in `x`.
    pub horizontal: Vec<usize>,
}

/// Crossings of the vertical-line images with the horizontal grid lines.
#[derive(Clone, Debug)]
pub struct HybridGrid {
    n: usize,
    /// `x_at_hybrid[t * n + i]`: x where image of line `i` meets `y = b_t`.
    pub x_at_hybrid: Vec<f64>,
    /// Carried value at the same crossing.
    pub value_at_hybrid: Vec<f64>,
}

impl HybridGrid {
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Periodic node sequence with `coord(k + n) = coord(k) + 2π`.
struct Line<'a> {
    coords: &'a [f64],
    stride: usize,
    offset: usize,
    n: usize,
}

impl Line<'_> {
    #[inline]
    fn coord(&self, k: i64) -> f64 {
        let n = self.n as i64;
        let j = k.rem_euclid(n) as usize;
        let wraps = k.div_euclid(n) as f64;
        self.coords[self.offset + j * self.stride] + TAU * wraps
    }

    #[inline]
    fn index(&self, k: i64) -> usize {
        self.offset + (k.rem_euclid(self.n as i64) as usize) * self.stride
    }

    /// Largest `k` with `coord(k) <= target`, starting the walk at `guess`.
    fn bracket(&self, target: f64, guess: i64) -> i64 {
        let mut k = guess;
        let limit = 4 * self.n as i64;
        let mut steps = 0;
        while self.coord(k) > target && steps < limit {
            k -= 1;
            steps += 1;
        }
        while self.coord(k + 1) <= target && steps < limit {
            k += 1;
            steps += 1;
        }
        k
    }

    /// Lagrange weights and storage indices for the stencil around `target`.
    fn stencil(&self, target: f64, guess: i64) -> ([f64; STENCIL], [usize; STENCIL], i64) {
        let k = self.bracket(target, guess);
        let mut c = [0.0; STENCIL];
        let mut idx = [0usize; STENCIL];
        for m in 0..STENCIL {
            let kk = k - HALF + 1 + m as i64;
            c[m] = self.coord(kk);
            idx[m] = self.index(kk);
        }
        (lagrange_weights(&c, target), idx, k)
    }

    fn strictly_increasing(&self) -> bool {
        (0..self.n as i64).all(|k| self.coord(k + 1) > self.coord(k))
    }
}

/// Weights `L_m(target)` of the Lagrange basis on nodes `c`.
///
/// When `target` equals a node exactly the result is the unit vector.
pub fn lagrange_weights(c: &[f64; STENCIL], target: f64) -> [f64; STENCIL] {
    let mut w = [0.0; STENCIL];
    for m in 0..STENCIL {
        let mut num = 1.0;
        let mut den = 1.0;
        for l in 0..STENCIL {
            if l != m {
                num *= target - c[l];
                den *= c[m] - c[l];
            }
        }
        w[m] = num / den;
    }
    w
}

fn check_state(positions: &GridField, values: &GridField) -> Result<usize> {
    if positions.ncomp() != 2 {
        return Err(Error::Arity {
            expected: 2,
            got: positions.ncomp(),
        });
    }
    if values.n() != positions.n() {
        return Err(Error::ShapeMismatch {
            left: positions.n(),
            right: values.n(),
        });
    }
    let n = positions.n();
    if n < STENCIL {
        return Err(Error::Internal(format!(
            "{n} nodes per line cannot hold an {STENCIL}-point stencil"
        )));
    }
    if !positions.is_finite() || !values.is_finite() {
        return Err(Error::numerical("reversion", "non-finite particle data"));
    }
    Ok(n)
}

fn vertical_violations(positions: &GridField) -> Vec<usize> {
    let n = positions.n();
    let y = positions.component(1);
    (0..n)
        .filter(|&i| {
            !Line {
                coords: y,
                stride: 1,
                offset: i * n,
                n,
            }
            .strictly_increasing()
        })
        .collect()
}

/// Whether `y(a_i, b)` increases strictly (unwrapped) along every vertical line.
pub fn check_monotonicity(state: &DistortedState) -> MonotonicityReport {
    let vertical = vertical_violations(&state.positions);
    MonotonicityReport {
        ok: vertical.is_empty(),
        vertical,
        horizontal: Vec::new(),
    }
}

/// Stages 1 and 2 for every carried component value field.
pub fn hybrid_grid(positions: &GridField, values: &GridField) -> Result<HybridGrid> {
    let n = check_state(positions, values)?;
    let vertical = vertical_violations(positions);
    if !vertical.is_empty() {
        return Err(Error::Reversion(MonotonicityReport {
            ok: false,
            vertical,
            horizontal: Vec::new(),
        }));
    }
    let x = positions.component(0);
    let y = positions.component(1);
    let w = values.component(0);
    let mut x_at = vec![0.0; n * n];
    let mut w_at = vec![0.0; n * n];
    for i in 0..n {
        let line = Line {
            coords: y,
            stride: 1,
            offset: i * n,
            n,
        };
        let mut guess = 0i64;
        for t in 0..n {
            let (wt, idx, k) = line.stencil(grid_coord(n, t), guess);
            guess = k;
            let mut xs = 0.0;
            let mut ws = 0.0;
            for m in 0..STENCIL {
                xs += wt[m] * x[idx[m]];
                ws += wt[m] * w[idx[m]];
            }
            x_at[t * n + i] = xs;
            w_at[t * n + i] = ws;
        }
    }
    Ok(HybridGrid {
        n,
        x_at_hybrid: x_at,
        value_at_hybrid: w_at,
    })
}

/// Stage 3: interpolates along horizontal lines to the uniform grid.
pub fn revert_hybrid(hybrid: &HybridGrid) -> Result<GridField> {
    let n = hybrid.n;
    let horizontal: Vec<usize> = (0..n)
        .filter(|&t| {
            !Line {
                coords: &hybrid.x_at_hybrid,
                stride: 1,
                offset: t * n,
                n,
            }
            .strictly_increasing()
        })
        .collect();
    if !horizontal.is_empty() {
        return Err(Error::Reversion(MonotonicityReport {
            ok: false,
            vertical: Vec::new(),
            horizontal,
        }));
    }
    let mut out = vec![0.0; n * n];
    for t in 0..n {
        let line = Line {
            coords: &hybrid.x_at_hybrid,
            stride: 1,
            offset: t * n,
            n,
        };
        let mut guess = 0i64;
        for i in 0..n {
            let (wt, idx, k) = line.stencil(grid_coord(n, i), guess);
            guess = k;
            let mut acc = 0.0;
            for m in 0..STENCIL {
                acc += wt[m] * hybrid.value_at_hybrid[idx[m]];
            }
            // output is row-major in (a_i, b_t)
            out[i * n + t] = acc;
        }
    }
    GridField::scalar(n, out)
}

/// Interpolates values carried by particles at `positions` to the uniform grid.
pub fn revert_field(positions: &GridField, values: &GridField) -> Result<GridField> {
    if values.ncomp() != 1 {
        return Err(Error::Arity {
            expected: 1,
            got: values.ncomp(),
        });
    }
    revert_hybrid(&hybrid_grid(positions, values)?)
}

/// Eulerian vorticity on the uniform grid from a distorted state.
pub fn cascade_revert(state: &DistortedState) -> Result<GridField> {
    revert_field(&state.positions, &state.lagrangian_vorticity)
}

/// Max mismatch between the directly summed Fourier series of `reverted` at
/// sampled particle positions and the values those particles carry.
pub fn slow_fourier_check(
    reverted: &SpectralField,
    state: &DistortedState,
    samples: &[(usize, usize)],
) -> Result<f64> {
    let n = state.n();
    if reverted.n() != n {
        return Err(Error::ShapeMismatch {
            left: n,
            right: reverted.n(),
        });
    }
    let coeffs = reverted.component(0);
    let ks: Vec<f64> = (0..n)
        .map(|p| {
            if p <= n / 2 {
                p as f64
            } else {
                p as f64 - n as f64
            }
        })
        .collect();
    let mut worst = 0.0f64;
    for &(i, j) in samples {
        let (i, j) = (i % n, j % n);
        let x = state.positions.at(0, i, j);
        let y = state.positions.at(1, i, j);
        let ey: Vec<Complex64> = ks.iter().map(|&k| Complex64::cis(k * y)).collect();
        let mut sum = Complex64::default();
        for p in 0..n {
            let row = &coeffs[p * n..(p + 1) * n];
            if row.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            let inner: Complex64 = row.iter().zip(&ey).map(|(c, e)| c * e).sum();
            sum += inner * Complex64::cis(ks[p] * x);
        }
        worst = worst.max((sum.re - state.lagrangian_vorticity.at(0, i, j)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Spectral;

    fn map_state(
        n: usize,
        dx: impl Fn(f64, f64) -> f64,
        dy: impl Fn(f64, f64) -> f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> DistortedState {
        let mut xs = vec![0.0; n * n];
        let mut ys = vec![0.0; n * n];
        let mut ws = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (grid_coord(n, i), grid_coord(n, j));
                let (x, y) = (a + dx(a, b), b + dy(a, b));
                xs[i * n + j] = x;
                ys[i * n + j] = y;
                ws[i * n + j] = f(x, y);
            }
        }
        DistortedState::from_map(
            GridField::vector(n, xs, ys).unwrap(),
            GridField::scalar(n, ws).unwrap(),
        )
        .unwrap()
    }

    fn field_error(n: usize, g: &GridField, f: impl Fn(f64, f64) -> f64) -> f64 {
        let want = GridField::from_fn(n, f);
        g.component(0)
            .iter()
            .zip(want.component(0))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn weights_reproduce_polynomials() {
        let c = [0.1, 0.25, 0.3, 0.55, 0.6, 0.8, 1.0, 1.3];
        let w = lagrange_weights(&c, 0.47);
        for p in 0..8 {
            let exact = 0.47f64.powi(p);
            let approx: f64 = w.iter().zip(&c).map(|(wi, ci)| wi * ci.powi(p)).sum();
            assert!((exact - approx).abs() < 1e-13, "degree {p}");
        }
        let unit = lagrange_weights(&c, 0.55);
        assert_eq!(unit, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_map_is_exact() {
        let n = 32;
        let st = map_state(
            n,
            |_, _| 0.0,
            |_, _| 0.0,
            |x, y| (x + 2.0 * y).sin() + x.cos(),
        );
        assert!(check_monotonicity(&st).ok);
        let out = cascade_revert(&st).unwrap();
        assert!(field_error(n, &out, |x, y| (x + 2.0 * y).sin() + x.cos()) < 1e-14);
    }

    #[test]
    fn grid_translation_is_a_shift() {
        let n = 32;
        let h = TAU / n as f64;
        let st = map_state(
            n,
            |_, _| 3.0 * h,
            |_, _| -2.0 * h,
            |x, y| (x - y).cos() + (2.0 * y).sin(),
        );
        let out = cascade_revert(&st).unwrap();
        // carried values are f at the departure points, so the result is f itself
        assert!(field_error(n, &out, |x, y| (x - y).cos() + (2.0 * y).sin()) < 1e-14);
    }

    #[test]
    fn smooth_deformation_matches_composition() {
        let n = 128;
        let st = map_state(
            n,
            |_, b| 0.05 * b.sin(),
            |a, _| 0.05 * a.sin(),
            |x, y| x.sin() * y.cos(),
        );
        let out = cascade_revert(&st).unwrap();
        let err = field_error(n, &out, |x, y| x.sin() * y.cos());
        assert!(err < 1e-10, "reversion error {err}");
    }

    #[test]
    fn commutes_with_constants() {
        let n = 32;
        let dx = |_: f64, b: f64| 0.1 * b.sin();
        let dy = |a: f64, _: f64| 0.08 * (a + 0.3).cos();
        let st = map_state(n, dx, dy, |x, y| (x + y).sin());
        let shifted = map_state(n, dx, dy, |x, y| (x + y).sin() + 2.5);
        let a = cascade_revert(&st).unwrap();
        let b = cascade_revert(&shifted).unwrap();
        for (u, v) in a.component(0).iter().zip(b.component(0)) {
            assert!((u + 2.5 - v).abs() < 1e-13);
        }
    }

    #[test]
    fn stage_one_recovers_abscissae() {
        // only y is displaced, so every crossing lies at x = a_i
        let n = 64;
        let st = map_state(n, |_, _| 0.0, |a, b| 0.2 * (a + b).sin(), |_, _| 0.0);
        let hy = hybrid_grid(&st.positions, &st.lagrangian_vorticity).unwrap();
        for t in 0..n {
            for i in 0..n {
                assert!((hy.x_at_hybrid[t * n + i] - grid_coord(n, i)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn folded_map_is_rejected() {
        let n = 32;
        let st = map_state(n, |_, _| 0.0, |_, b| 2.0 * b.sin(), |_, _| 1.0);
        let rep = check_monotonicity(&st);
        assert!(!rep.ok);
        assert_eq!(rep.vertical.len(), n);
        match cascade_revert(&st) {
            Err(Error::Reversion(r)) => assert_eq!(r.vertical.len(), n),
            other => panic!("expected reversion error, got {other:?}"),
        }
    }

    #[test]
    fn single_mode_below_critical_time_is_monotone() {
        // ω = cos a gives v = (0, sin a); the sheared lines stay monotone
        let n = 32;
        let dt = 0.9 * (8.0 - 5.0 * 2f64.sqrt()) / 3.0;
        let st = map_state(n, |_, _| 0.0, |a, _| a.sin() * dt, |_, _| 0.0);
        assert!(check_monotonicity(&st).ok);
    }

    #[test]
    fn slow_fourier_identity_and_empty() {
        let n = 16;
        let sp = Spectral::new(n).unwrap();
        let f = |x: f64, y: f64| x.cos() + (x - 2.0 * y).sin();
        let st = map_state(n, |_, _| 0.0, |_, _| 0.0, f);
        let spec = sp.forward(&cascade_revert(&st).unwrap()).unwrap();
        let samples: Vec<(usize, usize)> = (0..n).map(|k| (k, (3 * k) % n)).collect();
        assert!(slow_fourier_check(&spec, &st, &samples).unwrap() < 1e-13);
        assert_eq!(slow_fourier_check(&spec, &st, &[]).unwrap(), 0.0);
    }

    #[test]
    fn slow_fourier_on_deformed_map() {
        let n = 64;
        let sp = Spectral::new(n).unwrap();
        let f = |x: f64, y: f64| x.sin() * y.cos();
        let st = map_state(n, |_, b| 0.05 * b.sin(), |a, _| 0.05 * a.sin(), f);
        let spec = sp.forward(&cascade_revert(&st).unwrap()).unwrap();
        let samples: Vec<(usize, usize)> =
            (0..20).map(|k| ((7 * k) % n, (5 * k + 1) % n)).collect();
        assert!(slow_fourier_check(&spec, &st, &samples).unwrap() < 1e-9);
    }
}
