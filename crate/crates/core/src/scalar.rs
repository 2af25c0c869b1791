//! Scalar abstraction shared by plain `f64` evaluation and truncated Taylor
//! series in the unfolding parameter ε.
//!
//! [`Jet`] carries the first `N` Taylor coefficients of a quantity in ε. Pushing
//! jets through the coordinate pipeline yields the exact ε-expansion
//! coefficients of the normal form without any finite-difference error.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + From<f64>
{
    fn sqrt(self) -> Self;
    /// Constant term (the value at ε = 0 for a jet).
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn value(&self) -> f64 {
        *self
    }
}

/// Truncated power series `c[0] + c[1]·ε + … + c[N-1]·ε^(N-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize>(pub [f64; N]);

impl<const N: usize> Jet<N> {
    pub fn constant(c: f64) -> Self {
        let mut out = [0.0; N];
        out[0] = c;
        Jet(out)
    }

    /// The independent variable ε itself.
    pub fn variable() -> Self {
        let mut out = [0.0; N];
        if N > 1 {
            out[1] = 1.0;
        }
        Jet(out)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Divides by ε^k, discarding the first `k` coefficients. The caller is
    /// responsible for checking that the discarded terms are negligible.
    pub fn shift_down(&self, k: usize) -> Self {
        let mut out = [0.0; N];
        out[..N - k].copy_from_slice(&self.0[k..]);
        Jet(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.0;
        out.iter_mut().for_each(|c| *c *= s);
        Jet(out)
    }

    /// Evaluates the truncated series at a concrete ε.
    pub fn eval(&self, eps: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * eps + c)
    }
}

impl<const N: usize> From<f64> for Jet<N> {
    fn from(c: f64) -> Self {
        Jet::constant(c)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Jet(out)
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        Jet(out)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                out[i + j] += self.0[i] * rhs.0[j];
            }
        }
        Jet(out)
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let b0 = rhs.0[0];
        let mut out = [0.0; N];
        for n in 0..N {
            let mut acc = self.0[n];
            for j in 1..=n {
                acc -= rhs.0[j] * out[n - j];
            }
            out[n] = acc / b0;
        }
        Jet(out)
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn sqrt(self) -> Self {
        let s0 = self.0[0].sqrt();
        let mut out = [0.0; N];
        out[0] = s0;
        for n in 1..N {
            let mut acc = self.0[n];
            for j in 1..n {
                acc -= out[j] * out[n - j];
            }
            out[n] = acc / (2.0 * s0);
        }
        Jet(out)
    }

    fn value(&self) -> f64 {
        self.0[0]
    }
}
