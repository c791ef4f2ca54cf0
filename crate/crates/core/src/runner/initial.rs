//! Initial vorticity fields.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::diagnostics::shell_index;
use crate::error::{Error, Result};
use crate::spectral::{Spectral, SpectralField};

/// `cos a + cos b + 0.6 cos 2a + 0.2 cos 3a`.
pub fn make_four_mode(n: usize) -> Result<SpectralField> {
    if n < 8 {
        return Err(Error::Config("four-mode flow needs n >= 8".into()));
    }
    let mut w = SpectralField::zeros(n, 1);
    for (k1, k2, c) in [(1, 0, 0.5), (0, 1, 0.5), (2, 0, 0.3), (3, 0, 0.1)] {
        w.set_coeff(k1, k2, Complex64::new(c, 0.0));
        w.set_coeff(-k1, -k2, Complex64::new(c, 0.0));
    }
    Ok(w)
}

/// `sin a cos b`, a steady solution.
pub fn make_ab_flow(n: usize) -> Result<SpectralField> {
    if n < 8 {
        return Err(Error::Config("AB flow needs n >= 8".into()));
    }
    let mut w = SpectralField::zeros(n, 1);
    // sin a cos b = (sin(a+b) + sin(a-b)) / 2 and sin θ = (e^{iθ} - e^{-iθ}) / 2i
    let q = Complex64::new(0.0, -0.25);
    for (k1, k2) in [(1, 1), (1, -1)] {
        w.set_coeff(k1, k2, q);
        w.set_coeff(-k1, -k2, q.conj());
    }
    Ok(w)
}

/// Number of integer wavevectors with `K <= |k| < K + 1`.
pub fn shell_count(k: usize) -> usize {
    let r = k as i64 + 1;
    let mut count = 0;
    for k1 in -r..=r {
        for k2 in -r..=r {
            if (k1, k2) != (0, 0) && shell_index(k1, k2) == k {
                count += 1;
            }
        }
    }
    count
}

/// Per-mode modulus `2 K^{7/2} e^{-K²/4} / N(K)` of shell `K`.
pub fn random_flow_modulus(k: usize) -> f64 {
    let kf = k as f64;
    2.0 * kf.powf(3.5) * (-kf * kf / 4.0).exp() / shell_count(k) as f64
}

/// Random-phase flow with a prescribed shell modulus.
///
/// Every resolved wavevector `k ≠ 0` with shell `K = floor(|k|) >= 1` gets
/// the shell modulus; one phase per `±k` pair is drawn from ChaCha20 seeded
/// with `seed`, as `(next_u64 >> 11) · 2⁻⁵³ · 2π`, visiting the half plane
/// `k₁ > 0 or (k₁ = 0, k₂ > 0)` in row order.
pub fn make_random_flow(n: usize, seed: u64) -> Result<SpectralField> {
    if n < 32 {
        return Err(Error::Config("random flow needs n >= 32".into()));
    }
    let sp = Spectral::new(n)?;
    let kmax = sp.kmax() as i64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut moduli = vec![0.0; shell_index(kmax, kmax) + 1];
    for (k, m) in moduli.iter_mut().enumerate().skip(1) {
        *m = random_flow_modulus(k);
    }
    let mut w = SpectralField::zeros(n, 1);
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let phase = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * TAU;
            let c = Complex64::from_polar(moduli[shell_index(k1, k2)], phase);
            w.set_coeff(k1, k2, c);
            w.set_coeff(-k1, -k2, c.conj());
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridField;

    #[test]
    fn four_mode_coefficients() {
        let w = make_four_mode(32).unwrap();
        assert_eq!(w.coeff(1, 0), Complex64::new(0.5, 0.0));
        assert_eq!(w.coeff(-1, 0), Complex64::new(0.5, 0.0));
        assert_eq!(w.coeff(2, 0), Complex64::new(0.3, 0.0));
        assert_eq!(w.coeff(3, 0), Complex64::new(0.1, 0.0));
        assert_eq!(w.mean(0), Complex64::default());
        // sup over a fine grid, attained at the origin
        let sp = Spectral::new(512).unwrap();
        let g = sp.inverse(&make_four_mode(512).unwrap()).unwrap();
        assert!((g.max_abs() - 2.8).abs() < 1e-12);
    }

    #[test]
    fn ab_matches_samples() {
        let sp = Spectral::new(16).unwrap();
        let g = sp.inverse(&make_ab_flow(16).unwrap()).unwrap();
        let want = GridField::from_fn(16, |a, b| a.sin() * b.cos());
        for (x, y) in g.component(0).iter().zip(want.component(0)) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn shell_counts_by_enumeration() {
        // K=1: |k| in [1,2): (±1,0),(0,±1),(±1,±1) → 8
        assert_eq!(shell_count(1), 8);
        // K=2: |k|² in [4,9): (±2,0),(0,±2),(±2,±1),(±1,±2),(±2,±2) → 4 + 8 + 4
        assert_eq!(shell_count(2), 16);
        let want = 2.0 * 2f64.powf(3.5) * (-1.0f64).exp() / 16.0;
        assert!((random_flow_modulus(2) - want).abs() < 1e-15);
    }

    #[test]
    fn random_flow_is_real_and_deterministic() {
        let n = 64;
        let a = make_random_flow(n, 42).unwrap();
        let b = make_random_flow(n, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_random_flow(n, 43).unwrap());
        assert_eq!(a.hermitian_asymmetry(), 0.0);
        assert!((a.coeff(2, 1).norm() - random_flow_modulus(2)).abs() < 1e-15);
        assert_eq!(a.mean(0), Complex64::default());
        let sp = Spectral::new(n).unwrap();
        assert!(sp.inverse(&a).is_ok());
        assert!(matches!(make_random_flow(16, 1), Err(Error::Config(_))));
    }
}
