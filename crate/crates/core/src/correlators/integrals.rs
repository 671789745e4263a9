//! Bandwidth-limited Fourier integrals over the symmetric window
//! `[-T/2, T/2]`.
//!
//! The untimed double integral factorizes into a product of `sinc`s. The
//! time-ordered one does not: it is split along the diagonal into the
//! triangles `t > t'` and `t < t'`, each of which has an exact antiderivative.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::NormalModes;

/// Below this argument the Taylor branches take over.
pub const SERIES_THRESHOLD: f64 = 1e-4;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `sin(x)/x`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `∫₀¹ s^k e^{ixs} ds`.
pub fn moment(k: u32, x: f64) -> Complex64 {
    if x.abs() <= 2.0 {
        // power series; terms are bounded by 2^j/j! so no cancellation
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..60u32 {
            let contrib = term / f64::from(k + j + 1);
            sum += contrib;
            if contrib.norm() < 1e-18 {
                break;
            }
            term *= I * x / f64::from(j + 1);
        }
        sum
    } else {
        // upward recursion, stable for |x| > k
        let e = Complex64::from_polar(1.0, x);
        let ix = I * x;
        let mut m = (e - 1.0) / ix;
        for j in 1..=k {
            m = (e - f64::from(j) * m) / ix;
        }
        m
    }
}

/// `∫₀¹ ds ∫₀ˢ ds' e^{i(x s + y s')}`.
pub fn unit_triangle(x: f64, y: f64) -> Complex64 {
    if y.abs() < SERIES_THRESHOLD {
        let iy = I * y;
        moment(1, x) + iy * moment(2, x) / 2.0 + iy * iy * moment(3, x) / 6.0
            + iy * iy * iy * moment(4, x) / 24.0
    } else {
        (moment(0, x + y) - moment(0, x)) / (I * y)
    }
}

/// `(1/T²) ∫∫_{t > t'} e^{i(a t + b t')} dt dt'` over `[-T/2, T/2]²`.
pub fn upper_triangle(a: f64, b: f64, window: f64) -> Complex64 {
    Complex64::from_polar(1.0, -(a + b) * window / 2.0) * unit_triangle(a * window, b * window)
}

/// `(1/T²) ∫∫_{t < t'} e^{i(a t + b t')} dt dt'` over `[-T/2, T/2]²`.
pub fn lower_triangle(a: f64, b: f64, window: f64) -> Complex64 {
    upper_triangle(b, a, window)
}

/// `S_rs(ω, ω') = sinc[(ω − ν_r)T/2] sinc[(ω' − ν_s)T/2]`.
pub fn s_matrix(omega: f64, omega_p: f64, window: f64, modes: &NormalModes) -> DMatrix<f64> {
    let nu = &modes.frequencies;
    let left = nu.map(|v| sinc((omega - v) * window / 2.0));
    let right = nu.map(|v| sinc((omega_p - v) * window / 2.0));
    &left * right.transpose()
}

/// The two triangle halves of the time-ordered transform:
/// `upper[(r, s)] = (1/T²)∫∫_{t>t'} e^{i(ωt + ω't')} e^{-i(ν_r t − ν_s t')}` and
/// `lower[(r, s)] = (1/T²)∫∫_{t<t'} e^{i(ωt + ω't')} e^{+i(ν_r t − ν_s t')}`.
pub fn ring_s_halves(
    omega: f64,
    omega_p: f64,
    window: f64,
    modes: &NormalModes,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let nu = &modes.frequencies;
    let n = modes.n();
    let upper = DMatrix::from_fn(n, n, |r, s| upper_triangle(omega - nu[r], omega_p + nu[s], window));
    let lower = DMatrix::from_fn(n, n, |r, s| lower_triangle(omega + nu[r], omega_p - nu[s], window));
    (upper, lower)
}

/// `S̊_rs(ω, ω')`: the time-ordered counterpart of [`s_matrix`].
pub fn ring_s_matrix(omega: f64, omega_p: f64, window: f64, modes: &NormalModes) -> DMatrix<Complex64> {
    let (upper, lower) = ring_s_halves(omega, omega_p, window, modes);
    upper + lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{normal_modes, ChainSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Composite Gauss-Legendre (8 nodes per panel) on [lo, hi].
    fn gl_nodes(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
        const X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
        const W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
        let h = (hi - lo) / panels as f64;
        let mut out = Vec::new();
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for k in 0..4 {
                out.push((mid - X[k] * h / 2.0, W[k] * h / 2.0));
                out.push((mid + X[k] * h / 2.0, W[k] * h / 2.0));
            }
        }
        out
    }

    fn brute_upper(a: f64, b: f64, window: f64) -> Complex64 {
        let h = window / 2.0;
        let mut sum = Complex64::new(0.0, 0.0);
        for (t, wt) in gl_nodes(-h, h, 64) {
            for (tp, wtp) in gl_nodes(-h, t, 64) {
                sum += wt * wtp * Complex64::from_polar(1.0, a * t + b * tp);
            }
        }
        sum / (window * window)
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-15);
        let x = 1e-9;
        assert!((sinc(x) - (1.0 - x * x / 6.0)).abs() < 1e-16);
        assert_eq!(sinc(-2.5), sinc(2.5));
        // branch continuity
        let t = SERIES_THRESHOLD * 0.999_999;
        assert!((sinc(t) - t.sin() / t).abs() < 1e-15);
    }

    #[test]
    fn moments_match_quadrature() {
        for &x in &[0.0, 1e-6, 0.3, 1.99, 2.01, 7.5, -40.0] {
            for k in 0..5 {
                let brute: Complex64 = gl_nodes(0.0, 1.0, 32)
                    .into_iter()
                    .map(|(s, w)| w * s.powi(k as i32) * Complex64::from_polar(1.0, x * s))
                    .sum();
                assert!((moment(k, x) - brute).norm() < 1e-13, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn triangle_branches_agree() {
        for &x in &[0.0, 0.5, 3.0, -25.0] {
            let y = SERIES_THRESHOLD;
            let series = unit_triangle(x, y * 0.999_999);
            let exact = unit_triangle(x, y * 1.000_001);
            assert!((series - exact).norm() < 1e-10);
        }
        assert_abs_diff_eq!(unit_triangle(0.0, 0.0).re, 0.5, epsilon = 1e-16);
    }

    #[test]
    fn triangles_match_quadrature() {
        let cases = [(0.0, 0.0), (1.0, -1.0), (0.3, 2.7), (-3.1, 0.0), (0.0, 5.0), (2.0, 1e-7), (1e-7, 1e-7)];
        for &(a, b) in &cases {
            for &window in &[0.1, 3.0, 20.0] {
                let brute = brute_upper(a, b, window);
                assert!((upper_triangle(a, b, window) - brute).norm() < 1e-12, "a={a} b={b} T={window}");
            }
        }
    }

    #[test]
    fn halves_sum_to_product_of_sincs() {
        for &(a, b) in &[(0.2, 0.7), (-1.3, 4.0), (0.0, 0.0), (5.0, -5.0)] {
            let window = 11.0;
            let total = upper_triangle(a, b, window) + lower_triangle(a, b, window);
            let product = sinc(a * window / 2.0) * sinc(b * window / 2.0);
            assert!((total - product).norm() < 1e-14);
        }
    }

    #[test]
    fn s_matrix_entries() {
        let modes = normal_modes(&ChainSpec::dimensionless(2).unwrap()).unwrap();
        let s = s_matrix(1.0, 3.0_f64.sqrt(), 50.0, &modes);
        assert_abs_diff_eq!(s[(0, 1)], 1.0, epsilon = 1e-15);

        let s = s_matrix(1.0, 1.0, 100.0, &modes);
        let expect = sinc((1.0 - 3.0_f64.sqrt()) * 50.0);
        assert_abs_diff_eq!(s[(0, 1)], expect, epsilon = 1e-15);
        // rank one
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
        assert!(det.abs() < 1e-15);
    }

    #[test]
    fn s_matrix_off_resonance_decays() {
        let modes = normal_modes(&ChainSpec::dimensionless(3).unwrap()).unwrap();
        for window in [100.0, 1000.0, 10000.0] {
            let s = s_matrix(0.5, 0.5, window, &modes);
            let bound = (2.0 / (0.5 * window)).powi(2);
            assert!(s.iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn ring_s_short_window_limit() {
        let modes = normal_modes(&ChainSpec::dimensionless(3).unwrap()).unwrap();
        let ring = ring_s_matrix(1.3, -0.4, 1e-7, &modes);
        for z in ring.iter() {
            assert!((z - 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn ring_s_thermal_diagonal_vanishes() {
        let modes = normal_modes(&ChainSpec::dimensionless(2).unwrap()).unwrap();
        for p in 0..2 {
            let nu = modes.frequencies[p];
            let mut last = f64::INFINITY;
            for window in [50.0, 200.0, 800.0, 3200.0] {
                let mag = ring_s_matrix(nu, nu, window, &modes)[(p, p)].norm()
                    .max(ring_s_matrix(-nu, -nu, window, &modes)[(p, p)].norm());
                assert!(mag < 3.0 / (nu * window), "T={window}: {mag}");
                assert!(mag < last);
                last = mag;
            }
        }
    }

    fn trapezoid_ring(delta: f64, window: f64, n: usize) -> Complex64 {
        let h = window / n as f64;
        let w = |i: usize| if i == 0 || i == n { 0.5 * h } else { h };
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let t = -window / 2.0 + i as f64 * h;
            for j in 0..=n {
                let tp = -window / 2.0 + j as f64 * h;
                // e^{-iν|t - t'|} with ν = 1
                let kernel = Complex64::from_polar(1.0, -(t - tp).abs());
                sum += w(i) * w(j) * Complex64::from_polar(1.0, delta * (t + tp)) * kernel;
            }
        }
        sum / (window * window)
    }

    #[test]
    fn ring_s_single_mode_matches_trapezoid() {
        let modes = normal_modes(&ChainSpec::dimensionless(1).unwrap()).unwrap();
        let (window, delta) = (50.0, 1.0);
        let exact = ring_s_matrix(delta, delta, window, &modes)[(0, 0)];
        let coarse = trapezoid_ring(delta, window, 200);
        let fine = trapezoid_ring(delta, window, 400);
        // second-order rule: error drops 4x per halving
        let ratio = (coarse - exact).norm() / (fine - exact).norm();
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        let extrapolated = (fine * 4.0 - coarse) / 3.0;
        assert!((extrapolated - exact).norm() < 1e-4 * exact.norm(), "{exact} vs {extrapolated}");
    }
}
