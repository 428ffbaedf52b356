//! Real and complex arithmetic behind a single trait so every transform can be
//! evaluated at real `lambda > 0` and on the Bromwich contour alike.

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    fn from_f64(x: f64) -> Self;
    fn exp(self) -> Self;
    /// `exp(self) - 1` without cancellation near zero.
    fn exp_m1(self) -> Self;
    /// Principal branch.
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn re(self) -> f64;
    /// Modulus.
    fn norm(self) -> f64;
    fn is_finite(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn re(self) -> f64 {
        self
    }
    fn norm(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn exp_m1(self) -> Self {
        // e^{x+iy} - 1 = expm1(x) cos y - 2 sin^2(y/2) + i e^x sin y
        let (x, y) = (self.re, self.im);
        let half = (y / 2.0).sin();
        Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_exp_m1_matches_real_on_axis() {
        for &x in &[1e-9, 3e-6, 1e-3, 0.7, -2.0] {
            let z = Complex64::new(x, 0.0).exp_m1();
            assert!((z.re - x.exp_m1()).abs() <= 1e-15 * x.exp_m1().abs().max(1e-300) * 10.0);
            assert_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn complex_exp_m1_small_arguments() {
        for z in [
            Complex64::new(3e-6, 9.5e-6),
            Complex64::new(-1e-3, 2e-3),
            Complex64::new(0.0, 1e-9),
        ] {
            let taylor = (1..12)
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, k| (acc + 1.0) * z / k as f64);
            assert!((z.exp_m1() - taylor).norm() <= 4e-16 * taylor.norm());
        }
    }
}
