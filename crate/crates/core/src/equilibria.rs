//! Closed-form singular points `p1 … p6` with existence conditions.
//!
//! Every existing point carries the ∞-norm of the vector field at its
//! coordinates, which is the ground truth for the transcribed formulas.

use serde::{Deserialize, Serialize};

use crate::model::{vector_field, ModelParams, StateVec};

/// Relative threshold under which a denominator is treated as zero.
pub const DENOMINATOR_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumLabel {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
}

impl std::fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EquilibriumLabel::P1 => "p1",
            EquilibriumLabel::P2 => "p2",
            EquilibriumLabel::P3 => "p3",
            EquilibriumLabel::P4 => "p4",
            EquilibriumLabel::P5 => "p5",
            EquilibriumLabel::P6 => "p6",
        };
        f.write_str(s)
    }
}

/// Intermediates shared by `p5` and `p6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumAux {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl EquilibriumAux {
    pub fn new(p: &ModelParams) -> Self {
        let ModelParams { a1, a2, b1, b2, d1, d2, k, rho } = *p;
        let kr = k * rho;
        EquilibriumAux {
            a: -a2 * b1 + b1 * d2 + a2 * kr - d2 * kr,
            b: 4.0
                * (a2 - d2)
                * (a2 * (b1 + kr).powi(2) - d2 * (b1 * b1 + 4.0 * a1 * b2 * k + 2.0 * b1 * kr + kr * kr)),
            c: a1 * b1 + b1 * d1 - a1 * kr + d1 * kr,
            d: a2 * b1 - b1 * d2 + a2 * kr - d2 * kr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub label: EquilibriumLabel,
    pub state: Option<StateVec>,
    pub exists: bool,
    pub reason: Option<String>,
    pub residual: Option<f64>,
}

impl Equilibrium {
    fn found(label: EquilibriumLabel, p: &ModelParams, state: StateVec) -> Self {
        if !state.is_finite() {
            return Equilibrium::missing(label, "non-finite coordinates");
        }
        match vector_field(p, &state) {
            Ok(f) => {
                Equilibrium { label, state: Some(state), exists: true, reason: None, residual: Some(f.norm_inf()) }
            }
            Err(e) => Equilibrium::missing(label, &e.to_string()),
        }
    }

    fn missing(label: EquilibriumLabel, reason: &str) -> Self {
        Equilibrium { label, state: None, exists: false, reason: Some(reason.to_string()), residual: None }
    }
}

fn nonzero(den: f64, scale: f64) -> bool {
    den.abs() > DENOMINATOR_REL_TOL * scale.abs().max(f64::MIN_POSITIVE)
}

pub fn p3_state(p: &ModelParams) -> Option<StateVec> {
    let ModelParams { a1, b1, d1, k, rho, .. } = *p;
    if !nonzero(a1 - d1, a1.max(d1)) {
        return None;
    }
    let x = b1 * d1 / (a1 - d1);
    let y = -b1 * (b1 * d1 + (d1 - a1) * k * rho) / ((a1 - d1).powi(2) * k);
    Some(StateVec::new(x, y, 0.0))
}

/// All six singular points in label order. Non-existence is reported through
/// the `exists` flag together with a reason.
pub fn all_equilibria(p: &ModelParams) -> Vec<Equilibrium> {
    use EquilibriumLabel::*;
    let ModelParams { a1, a2, b2, d1, d2, k, rho, .. } = *p;
    let mut out = Vec::with_capacity(6);

    out.push(Equilibrium::found(P1, p, StateVec::new(0.0, 0.0, 0.0)));
    out.push(Equilibrium::found(P2, p, StateVec::new(k * rho, 0.0, 0.0)));

    out.push(match p3_state(p) {
        Some(s) => Equilibrium::found(P3, p, s),
        None => Equilibrium::missing(P3, "a1 = d1"),
    });

    let a2_ne_d2 = nonzero(a2 - d2, a2.max(d2));
    if a2_ne_d2 {
        let y = b2 * d2 / (a2 - d2);
        out.push(Equilibrium::found(P4, p, StateVec::new(0.0, y, -b2 * d1 / (a2 - d2))));
    } else {
        out.push(Equilibrium::missing(P4, "a2 = d2"));
    }

    let aux = EquilibriumAux::new(p);
    let interior = |label: EquilibriumLabel, sign: f64| -> Equilibrium {
        if !a2_ne_d2 {
            return Equilibrium::missing(label, "a2 = d2");
        }
        if aux.b < 0.0 {
            return Equilibrium::missing(label, "B < 0");
        }
        // B as defined carries a factor 4 relative to the square of the root
        // term in the coordinates, hence √B/2.
        let root = aux.b.sqrt() / 2.0;
        // p5: (√B + D), p6: (√B − D)
        let den = root + sign * aux.d;
        if !nonzero(den, root.abs().max(aux.d.abs())) {
            let which = if sign > 0.0 { "√B + D = 0" } else { "√B − D = 0" };
            return Equilibrium::missing(label, which);
        }
        let x = (aux.a + sign * root) / (2.0 * (a2 - d2));
        let y = b2 * d2 / (a2 - d2);
        let z = b2 * ((a1 - d1) * root - sign * aux.c * (a2 - d2)) / ((a2 - d2) * den);
        Equilibrium::found(label, p, StateVec::new(x, y, z))
    };
    out.push(interior(P5, 1.0));
    out.push(interior(P6, -1.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example() -> ModelParams {
        let (a1, b1, b2, d1) = (5.0, 3.0, 2.0, 0.4);
        let k = 2.0 * a1 * b1 * b1 * d1 / ((a1 - d1) * (a1 - d1) * (a1 * b1 - 2.0 * b2 * d1));
        ModelParams {
            a1,
            a2: 0.1,
            b1,
            b2,
            d1,
            d2: 0.1 * a1 * b1 * b1 * d1
                / (a1 * a1 * b2 * d1 * k + b2 * d1.powi(3) * k + a1 * d1 * (b1 * b1 - 2.0 * b2 * d1 * k)),
            k,
            rho: b1 * (a1 + d1) / ((a1 - d1) * k),
        }
    }

    #[test]
    fn origin_always_exists_with_zero_residual() {
        let eq = all_equilibria(&example());
        assert_eq!(eq[0].state, Some(StateVec::new(0.0, 0.0, 0.0)));
        assert_eq!(eq[0].residual, Some(0.0));
    }

    #[test]
    fn prey_only_point_matches_constrained_carrying_capacity() {
        let p = example();
        let p2 = all_equilibria(&p)[1].clone();
        let x = p2.state.unwrap().x;
        let expected = p.b1 * (p.a1 + p.d1) / (p.a1 - p.d1);
        assert!((x - expected).abs() <= 1e-12 * expected);
        assert!(p2.residual.unwrap() <= 1e-10);
    }

    #[test]
    fn p3_prey_coordinate() {
        let p = example();
        let p3 = all_equilibria(&p)[2].clone();
        assert!(p3.exists);
        assert!((p3.state.unwrap().x - 1.2 / 4.6).abs() < 1e-15);
        assert!(p3.residual.unwrap() <= 1e-10);
    }

    #[test]
    fn p3_missing_when_a1_equals_d1() {
        let mut p = example();
        p.d1 = p.a1;
        let p3 = &all_equilibria(&p)[2];
        assert!(!p3.exists);
        assert_eq!(p3.reason.as_deref(), Some("a1 = d1"));
    }

    #[test]
    fn interior_points_need_nonnegative_b() {
        let mut p = example();
        // a2 > d2 with a tiny a2 - d2 margin drives B negative.
        p.a2 = 0.1;
        p.d2 = 0.0999;
        let aux = EquilibriumAux::new(&p);
        let eq = all_equilibria(&p);
        if aux.b < 0.0 {
            assert!(!eq[4].exists && !eq[5].exists);
            assert_eq!(eq[4].reason.as_deref(), Some("B < 0"));
        }
    }

    #[test]
    fn random_draws_have_small_residuals_and_structural_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut interior_seen = 0;
        for _ in 0..1000 {
            let p = ModelParams {
                a1: rng.gen_range(0.1..5.0),
                a2: rng.gen_range(0.1..5.0),
                b1: rng.gen_range(0.1..5.0),
                b2: rng.gen_range(0.1..5.0),
                d1: rng.gen_range(0.1..5.0),
                d2: rng.gen_range(0.1..5.0),
                k: rng.gen_range(0.1..5.0),
                rho: rng.gen_range(0.1..5.0),
            };
            for e in all_equilibria(&p) {
                if !e.exists {
                    continue;
                }
                let s = e.state.unwrap();
                let tol = 1e-9 * (1.0 + s.norm_inf());
                assert!(e.residual.unwrap() <= tol, "{:?} residual {:e} for {p:?}", e.label, e.residual.unwrap());
                match e.label {
                    EquilibriumLabel::P3 => assert_eq!(s.z, 0.0),
                    EquilibriumLabel::P4 => assert_eq!(s.x, 0.0),
                    EquilibriumLabel::P5 | EquilibriumLabel::P6 => interior_seen += 1,
                    _ => {}
                }
            }
        }
        assert!(interior_seen > 100);
    }
}
