//! Spectrum at `p3` and the parameter constraints that make `p3` a degenerate
//! Hopf point whose first-order averaged function vanishes.
//!
//! The unfolding uses `Re λ± = ε² l` and `μ = ε² m`; solving these for `d2`
//! and `ρ`, together with the `k` relation, gives the constrained model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibria::p3_state;
use crate::model::{Coeffs, ModelParams, StateVec};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Base parameters plus the unfolding `(l, m, ε)`. `d2`, `ρ` and `k` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfSetup {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub d1: f64,
    pub l: f64,
    pub m: f64,
    #[serde(default)]
    pub epsilon: f64,
}

impl HopfSetup {
    /// The worked example: `a1 = 5, a2 = 0.1, b1 = 3, b2 = 2, d1 = 0.4, l = 400, m = 1`.
    pub const EXAMPLE: HopfSetup =
        HopfSetup { a1: 5.0, a2: 0.1, b1: 3.0, b2: 2.0, d1: 0.4, l: 400.0, m: 1.0, epsilon: 0.0 };

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        HopfSetup { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a1", self.a1), ("a2", self.a2), ("b1", self.b1), ("b2", self.b2), ("d1", self.d1)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !self.l.is_finite() || !self.m.is_finite() {
            return Err(Error::Domain("l and m must be finite".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Domain(format!("epsilon must be finite and >= 0 (got {})", self.epsilon)));
        }
        if self.a1 <= self.d1 {
            return Err(Error::Constraint(format!("a1 > d1 required (a1 = {}, d1 = {})", self.a1, self.d1)));
        }
        let margin = self.l3_margin();
        if margin <= 0.0 {
            return Err(Error::Constraint(format!("a1·b1 − 2·b2·d1 > 0 required (got {margin})")));
        }
        Ok(())
    }

    /// `a1·b1 − 2·b2·d1`, which must be positive.
    pub fn l3_margin(&self) -> f64 {
        self.a1 * self.b1 - 2.0 * self.b2 * self.d1
    }

    /// The `k` that makes the first-order averaged function vanish identically.
    pub fn k(&self) -> f64 {
        let HopfSetup { a1, b1, b2, d1, .. } = *self;
        2.0 * a1 * b1 * b1 * d1 / ((a1 - d1).powi(2) * (a1 * b1 - 2.0 * b2 * d1))
    }

    /// `P = a1² b2 k + a1 b1² − 2 a1 b2 d1 k + b2 d1² k`, a recurring denominator.
    pub fn p_aux(&self) -> f64 {
        let HopfSetup { a1, b1, b2, d1, .. } = *self;
        let k = self.k();
        b2 * k * a1 * a1 + b1 * b1 * a1 - 2.0 * b2 * d1 * k * a1 + b2 * d1 * d1 * k
    }

    /// The ε²-coefficient `E` in the numerator of `d2`.
    pub fn e_aux(&self) -> f64 {
        let HopfSetup { a1, a2, b1, b2, d1, l, m, .. } = *self;
        let k = self.k();
        -b2 * k * m * d1.powi(3)
            + a1 * (-m * b1 * b1 - 2.0 * a2 * k * l * b1 + 2.0 * b2 * d1 * k * m) * d1
            + a1 * a1 * k * (2.0 * a2 * b1 * l - b2 * d1 * m)
    }

    /// Linear frequency at ε = 0, `√(b1 d1 / k)`.
    pub fn omega0(&self) -> f64 {
        (self.b1 * self.d1 / self.k()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub d2: f64,
    pub rho: f64,
    pub k: f64,
    #[serde(rename = "E")]
    pub e_aux: f64,
    pub l3_margin: f64,
}

pub fn derived_constants(setup: &HopfSetup) -> Result<DerivedConstants> {
    setup.validate()?;
    let c = constrained_coeffs(setup, setup.epsilon);
    Ok(DerivedConstants { d2: c.d2, rho: c.rho, k: c.k, e_aux: setup.e_aux(), l3_margin: setup.l3_margin() })
}

/// Constrained model coefficients as functions of ε. Generic so the same
/// formulas produce either a value or a Taylor series in ε.
pub(crate) fn constrained_coeffs<T: Scalar>(setup: &HopfSetup, eps: T) -> Coeffs<T> {
    let HopfSetup { a1, a2, b1, b2, d1, l, m, .. } = *setup;
    let k = setup.k();
    let e2 = eps * eps;
    let e4 = e2 * e2;
    let c = T::from;
    let d2 = (c(a1 * a2 * b1 * b1 * d1) + c(setup.e_aux()) * e2 + c(2.0 * a1 * b1 * (d1 - a1) * k * l * m) * e4)
        / (c(d1 * setup.p_aux()) + c(2.0 * a1 * b1 * (a1 - d1) * k * l) * e2);
    let rho = (c(2.0 * a1 * (a1 - d1) * k * l) * e2 + c(b1 * d1 * (a1 + d1))) / c((a1 - d1) * d1 * k);
    Coeffs { a1: c(a1), a2: c(a2), b1: c(b1), b2: c(b2), d1: c(d1), d2, k: c(k), rho }
}

/// `d2` at ε = 0 in the form listed with the full condition set.
pub fn d2_condition_form(setup: &HopfSetup) -> f64 {
    let HopfSetup { a1, a2, b1, b2, d1, .. } = *setup;
    let k = setup.k();
    a1 * a2 * b1 * b1 * d1 / (a1 * a1 * b2 * d1 * k + b2 * d1.powi(3) * k + a1 * d1 * (b1 * b1 - 2.0 * b2 * d1 * k))
}

/// `d2` at ε = 0 in the reduced form (common factor `d1` cancelled).
pub fn d2_reduced_form(setup: &HopfSetup) -> f64 {
    let HopfSetup { a1, a2, b1, b2, d1, .. } = *setup;
    let k = setup.k();
    a1 * a2 * b1 * b1 / (a1 * a1 * b2 * k + b2 * d1 * d1 * k + a1 * (b1 * b1 - 2.0 * b2 * d1 * k))
}

/// Closed-form eigenvalues at `p3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAtP3 {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub mu: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
}

pub fn spectrum_p3(p: &ModelParams) -> Result<SpectrumAtP3> {
    let ModelParams { a1, a2, b1, b2, d1, d2, k, rho } = *p;
    if (a1 - d1).abs() <= 1e-10 * a1.max(d1) {
        return Err(Error::Domain("p3 does not exist (a1 = d1)".into()));
    }
    let kr = k * rho;
    let delta = d1
        * (-4.0 * a1 * (a1 - d1).powi(2) * k * (-b1 * d1 + (a1 - d1) * kr)
            + d1 * (a1 * (b1 - kr) + d1 * (b1 + kr)).powi(2));
    let den = 2.0 * a1 * (a1 - d1) * k;
    let re = (-a1 * b1 * d1 - b1 * d1 * d1 + a1 * d1 * kr - d1 * d1 * kr) / den;
    let root = Complex64::new(delta, 0.0).sqrt() / den;
    let mu_den = b1 * b1 * d1 - b2 * (a1 - d1).powi(2) * k + b1 * (d1 - a1) * kr;
    let mu_scale = (b1 * b1 * d1).abs().max((b2 * (a1 - d1).powi(2) * k).abs()).max((b1 * (d1 - a1) * kr).abs());
    if mu_den.abs() <= 1e-12 * mu_scale {
        return Err(Error::Domain("denominator of μ vanishes".into()));
    }
    let mu = -d2 + a2 * b1 * (b1 * d1 + (d1 - a1) * kr) / mu_den;
    Ok(SpectrumAtP3 {
        lambda_plus: Complex64::new(re, 0.0) + root,
        lambda_minus: Complex64::new(re, 0.0) - root,
        mu,
        delta,
    })
}

/// Eigenvalues `(λ+, λ−, μ)` that the constrained system must have at `p3`.
pub fn expected_constrained_spectrum(setup: &HopfSetup) -> (Complex64, Complex64, f64) {
    let HopfSetup { a1, d1, b1, l, m, epsilon, .. } = *setup;
    let k = setup.k();
    let e2 = epsilon * epsilon;
    let rad = k * (e2 * k * l * (l * e2 - 2.0 * a1 + 2.0 * d1) - b1 * d1);
    let root = Complex64::new(rad, 0.0).sqrt() / k;
    let re = Complex64::new(e2 * l, 0.0);
    (re + root, re - root, e2 * m)
}

/// Full constrained parameter set for the given unfolding, checked against
/// the eigenvalues the constraints are supposed to produce.
pub fn solve_constraints(setup: &HopfSetup) -> Result<ModelParams> {
    setup.validate()?;
    let c = constrained_coeffs(setup, setup.epsilon);
    let params = ModelParams { a1: c.a1, a2: c.a2, b1: c.b1, b2: c.b2, d1: c.d1, d2: c.d2, k: c.k, rho: c.rho };
    for (name, value) in [("d2", c.d2), ("rho", c.rho), ("k", c.k)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Constraint(format!("derived {name} = {value} is not positive")));
        }
    }

    let spectrum = spectrum_p3(&params)?;
    let (lp, lm, mu) = expected_constrained_spectrum(setup);
    let scale = lp.norm().max(f64::MIN_POSITIVE);
    let mismatch =
        (spectrum.lambda_plus - lp).norm().max((spectrum.lambda_minus - lm).norm()).max((spectrum.mu - mu).abs());
    if mismatch > 1e-9 * scale {
        return Err(Error::Constraint(format!(
            "constrained spectrum at p3 deviates from the unfolding by {mismatch:e}"
        )));
    }
    Ok(params)
}

/// `p3` of the constrained system.
pub fn constrained_p3(setup: &HopfSetup) -> Result<StateVec> {
    let p = solve_constraints(setup)?;
    p3_state(&p).ok_or_else(|| Error::Domain("p3 does not exist".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::jacobian;

    #[test]
    fn example_constraints_at_two_decimals() {
        let p = solve_constraints(&HopfSetup::EXAMPLE).unwrap();
        let round2 = |v: f64| (v * 100.0).round() / 100.0;
        assert_eq!(round2(p.d2), 0.09);
        assert_eq!(round2(p.rho), 27.74);
        assert_eq!(round2(p.k), 0.13);
        assert_eq!(HopfSetup::EXAMPLE.l3_margin(), 13.4);
    }

    #[test]
    fn both_d2_forms_agree_with_the_epsilon_zero_solution() {
        let s = HopfSetup::EXAMPLE;
        let p = solve_constraints(&s).unwrap();
        assert!((d2_condition_form(&s) - p.d2).abs() < 1e-15);
        assert!((d2_reduced_form(&s) - p.d2).abs() < 1e-15);
    }

    #[test]
    fn real_part_vanishes_at_zero_epsilon() {
        let p = solve_constraints(&HopfSetup::EXAMPLE).unwrap();
        let sp = spectrum_p3(&p).unwrap();
        assert!(sp.lambda_plus.re.abs() <= 1e-10);
        assert!(sp.mu.abs() <= 1e-10);
        assert!(sp.delta < 0.0);
        assert_eq!(sp.lambda_plus, sp.lambda_minus.conj());
    }

    #[test]
    fn unfolding_shifts_the_spectrum() {
        let s = HopfSetup::EXAMPLE.with_epsilon(0.01);
        let p = solve_constraints(&s).unwrap();
        let sp = spectrum_p3(&p).unwrap();
        assert!((sp.lambda_plus.re - 0.04).abs() <= 1e-9 * 0.04);
        assert!((sp.mu - 1e-4).abs() <= 1e-9 * 1e-4);
    }

    #[test]
    fn closed_form_matches_generic_eigensolver() {
        let s = HopfSetup::EXAMPLE.with_epsilon(0.02);
        let p = solve_constraints(&s).unwrap();
        let p3 = p3_state(&p).unwrap();
        let ev = jacobian(&p, &p3).unwrap().complex_eigenvalues();
        let sp = spectrum_p3(&p).unwrap();
        for target in [sp.lambda_plus, sp.lambda_minus, Complex64::new(sp.mu, 0.0)] {
            let best = ev.iter().map(|e| (e - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "{target} not found in {ev:?}");
        }
    }

    #[test]
    fn l3_violation_is_a_constraint_error() {
        let s = HopfSetup { b1: 0.1, ..HopfSetup::EXAMPLE };
        assert!(matches!(solve_constraints(&s), Err(Error::Constraint(_))));
        let s = HopfSetup { d1: 6.0, ..HopfSetup::EXAMPLE };
        assert!(matches!(solve_constraints(&s), Err(Error::Constraint(_))));
    }

    #[test]
    fn k_relation() {
        let s = HopfSetup::EXAMPLE;
        let expected = 2.0 * 5.0 * 9.0 * 0.4 / (4.6f64.powi(2) * 13.4);
        assert!((s.k() - expected).abs() < 1e-15);
    }
}
