//! The tritrophic food-chain vector field: logistic prey `x`, Holling type II
//! predator `y` and Holling type II top-predator `z`.
//!
//! ```text
//! ẋ = x (ρ − x/k − a1 y/(b1 + x))
//! ẏ = y (a1 x/(b1 + x) − a2 z/(b2 + y) − d1)
//! ż = z (a2 y/(b2 + y) − d2)
//! ```

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Evaluation is refused when `|b1 + x|` or `|b2 + y|` drops below this.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub d1: f64,
    pub d2: f64,
    pub k: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("k", self.k),
            ("rho", self.rho),
        ]
    }

    pub(crate) fn coeffs(&self) -> Coeffs<f64> {
        Coeffs {
            a1: self.a1,
            a2: self.a2,
            b1: self.b1,
            b2: self.b2,
            d1: self.d1,
            d2: self.d2,
            k: self.k,
            rho: self.rho,
        }
    }
}

/// Population densities. Negative values are allowed for analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl StateVec {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        StateVec { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_inf(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<Vector3<f64>> for StateVec {
    fn from(v: Vector3<f64>) -> Self {
        StateVec::new(v[0], v[1], v[2])
    }
}

impl From<[f64; 3]> for StateVec {
    fn from(v: [f64; 3]) -> Self {
        StateVec::new(v[0], v[1], v[2])
    }
}

/// Model coefficients over an arbitrary scalar, so the same field can be
/// evaluated in `f64` or as a Taylor series in ε.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coeffs<T> {
    pub a1: T,
    pub a2: T,
    pub b1: T,
    pub b2: T,
    pub d1: T,
    pub d2: T,
    pub k: T,
    pub rho: T,
}

/// Raw vector field with no domain checks. `ż` is evaluated as the product
/// `z · (…)` so the plane `z = 0` stays exactly invariant.
pub(crate) fn raw_field<T: Scalar>(c: &Coeffs<T>, x: T, y: T, z: T) -> [T; 3] {
    let holling_prey = c.a1 * x / (c.b1 + x);
    let holling_pred = c.a2 / (c.b2 + y);
    [
        x * (c.rho - x / c.k - c.a1 * y / (c.b1 + x)),
        y * (holling_prey - holling_pred * z - c.d1),
        z * (holling_pred * y - c.d2),
    ]
}

fn check_domain(p: &ModelParams, s: &StateVec) -> Result<()> {
    let den1 = p.b1 + s.x;
    if !(den1.abs() >= DENOMINATOR_GUARD) {
        return Err(Error::SingularDenominator { which: "b1 + x", value: den1 });
    }
    let den2 = p.b2 + s.y;
    if !(den2.abs() >= DENOMINATOR_GUARD) {
        return Err(Error::SingularDenominator { which: "b2 + y", value: den2 });
    }
    Ok(())
}

pub fn vector_field(p: &ModelParams, s: &StateVec) -> Result<StateVec> {
    check_domain(p, s)?;
    Ok(raw_field(&p.coeffs(), s.x, s.y, s.z).into())
}

pub fn jacobian(p: &ModelParams, s: &StateVec) -> Result<Matrix3<f64>> {
    check_domain(p, s)?;
    Ok(raw_jacobian(p, s))
}

pub(crate) fn raw_jacobian(p: &ModelParams, s: &StateVec) -> Matrix3<f64> {
    let StateVec { x, y, z } = *s;
    let bx = p.b1 + x;
    let by = p.b2 + y;
    Matrix3::new(
        p.rho - 2.0 * x / p.k - p.a1 * p.b1 * y / (bx * bx),
        -p.a1 * x / bx,
        0.0,
        p.a1 * p.b1 * y / (bx * bx),
        p.a1 * x / bx - p.a2 * p.b2 * z / (by * by) - p.d1,
        -p.a2 * y / by,
        0.0,
        p.a2 * p.b2 * z / (by * by),
        p.a2 * y / by - p.d2,
    )
}

/// Per-capita growth rate of the top predator, `a2 y/(b2 + y) − d2`. Its
/// integral over a cycle in `z = 0` gives the transverse Floquet exponent.
pub fn top_predator_rate(p: &ModelParams, y: f64) -> f64 {
    p.a2 * y / (p.b2 + y) - p.d2
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_params() -> ModelParams {
        ModelParams { a1: 5.0, a2: 0.1, b1: 3.0, b2: 2.0, d1: 0.4, d2: 0.09, k: 0.13, rho: 27.74 }
    }

    fn fd_jacobian(p: &ModelParams, s: &StateVec, h: f64) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for j in 0..3 {
            let mut plus = s.to_array();
            let mut minus = s.to_array();
            plus[j] += h;
            minus[j] -= h;
            let fp = vector_field(p, &plus.into()).unwrap().to_vector();
            let fm = vector_field(p, &minus.into()).unwrap().to_vector();
            out.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        out
    }

    #[test]
    fn origin_is_fixed() {
        let f = vector_field(&sample_params(), &StateVec::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(f, StateVec::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn top_predator_free_plane_is_invariant() {
        let p = sample_params();
        for &(x, y) in &[(0.3, 17.0), (-1.0, 4.0), (12.0, 0.01)] {
            assert_eq!(vector_field(&p, &StateVec::new(x, y, 0.0)).unwrap().z, 0.0);
        }
    }

    #[test]
    fn jacobian_entry_zz_in_plane() {
        let p = sample_params();
        let s = StateVec::new(0.7, 3.0, 0.0);
        let j = jacobian(&p, &s).unwrap();
        assert_eq!(j[(2, 2)], p.a2 * s.y / (p.b2 + s.y) - p.d2);
    }

    #[test]
    fn jacobian_at_origin_is_diagonal() {
        let p = sample_params();
        let j = jacobian(&p, &StateVec::new(0.0, 0.0, 0.0)).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(p.rho, -p.d1, -p.d2));
        assert_eq!(j, expected);
        let fd = fd_jacobian(&p, &StateVec::new(0.0, 0.0, 0.0), 1e-5);
        assert!((j - fd).amax() < 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = sample_params();
        for _ in 0..100 {
            let s = StateVec::new(rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0));
            let err = (jacobian(&p, &s).unwrap() - fd_jacobian(&p, &s, 1e-5)).amax();
            assert!(err <= 1e-6, "fd mismatch {err:e} at {s:?}");
        }
    }

    #[test]
    fn singular_holling_denominator_is_rejected() {
        let p = sample_params();
        let err = vector_field(&p, &StateVec::new(-3.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::SingularDenominator { which: "b1 + x", .. }));
        let err = jacobian(&p, &StateVec::new(1.0, -2.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::SingularDenominator { which: "b2 + y", .. }));
    }

    #[test]
    fn validation_names_the_offending_field() {
        let mut p = sample_params();
        p.k = -1.0;
        assert_eq!(p.validate(), Err(Error::InvalidParameter { name: "k", value: -1.0 }));
        p.k = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn params_json_is_flat() {
        let json = serde_json::to_value(sample_params()).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 8);
        for k in ["a1", "a2", "b1", "b2", "d1", "d2", "k", "rho"] {
            assert!(json.get(k).is_some());
        }
        let back: ModelParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, sample_params());
    }
}
