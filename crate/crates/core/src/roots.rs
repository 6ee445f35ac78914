//! Polynomial roots through the eigenvalues of the companion matrix.

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRoot {
    pub re: f64,
    pub im: f64,
}

/// All complex roots of `Σ c_k x^k` (coefficients in ascending order).
///
/// Trailing zero high-order coefficients are stripped first; a constant
/// polynomial has no roots.
pub fn companion_roots<T: Scalar>(coeffs: &[T]) -> Vec<ComplexRoot> {
    let c: Vec<f64> = coeffs.iter().map(|v| v.as_f64()).collect();
    let Some(deg) = c.iter().rposition(|v| !v.is_zero()) else {
        return Vec::new();
    };
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    if deg == 1 {
        return vec![ComplexRoot {
            re: -c[0] / lead,
            im: 0.0,
        }];
    }
    // Frobenius companion: sub-diagonal ones, last column −c_k / c_deg.
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for k in 1..deg {
        m[(k, k - 1)] = 1.0;
    }
    for k in 0..deg {
        m[(k, deg - 1)] = -c[k] / lead;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| ComplexRoot { re: z.re, im: z.im })
        .collect()
}

/// Evaluates `Σ c_k x^k` and its derivative by Horner's rule.
pub fn horner<T: Scalar>(coeffs: &[T], x: T) -> (T, T) {
    let mut p = T::zero();
    let mut dp = T::zero();
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// A few Newton steps on a simple root; keeps the starting value if an
/// iterate fails to improve the residual.
pub fn polish<T: Scalar>(coeffs: &[T], mut x: T) -> T {
    let mut best = horner(coeffs, x).0.abs();
    for _ in 0..4 {
        let (p, dp) = horner(coeffs, x);
        if dp.is_zero() || p.is_zero() {
            break;
        }
        let next = x - p / dp;
        let r = horner(coeffs, next).0.abs();
        if !(r < best) {
            break;
        }
        best = r;
        x = next;
    }
    x
}
