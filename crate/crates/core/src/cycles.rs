//! Closed-form limit-cycle predictions from the zeros of the second-order
//! averaged field, with stability class and half-space.
//!
//! The averaged field is a flow in the angle θ. Along the food chain θ
//! decreases with time, so real-time stability is read from the eigenvalues
//! multiplied by `sign(dθ/dt)`. Both the raw and the oriented eigenvalues are
//! reported.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{newton_zero, AveragedField, ClosedFormField, NewtonConfig};
use crate::hopf::HopfSetup;
use crate::model::StateVec;
use crate::transform::{transcribed, CylState, NormalFormFrame};
use crate::{Error, Result};

/// Real parts closer to zero than this leave the class undetermined.
pub const INDETERMINATE_MARGIN: f64 = 1e-8;
/// `|det J| < DEGENERATE_DET_TOL · ‖J‖²_F` voids the degree argument.
pub const DEGENERATE_DET_TOL: f64 = 1e-10;
/// Largest relative Newton shift accepted for a closed-form zero.
pub const REFINEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `(r1, 0)`
    Planar,
    /// `(r2, +w2)`
    UpperW,
    /// `(r2, −w2)`
    LowerW,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HalfSpace {
    #[serde(rename = "z>0")]
    Positive,
    #[serde(rename = "z=0")]
    Plane,
    #[serde(rename = "z<0")]
    Negative,
}

impl std::fmt::Display for HalfSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HalfSpace::Positive => "z>0",
            HalfSpace::Plane => "z=0",
            HalfSpace::Negative => "z<0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Repeller,
    Attractor,
    SaddleLike,
    Indeterminate,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Repeller => "Repeller",
            Stability::Attractor => "Attractor",
            Stability::SaddleLike => "Saddle-like",
            Stability::Indeterminate => "Indeterminate",
        })
    }
}

/// Radicands of the closed-form zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radicands {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "W2")]
    pub w2: f64,
}

impl Radicands {
    pub fn new(s: &HopfSetup) -> Self {
        let HopfSetup { a1, a2, b1, b2, d1, l, m, .. } = *s;
        let q = 5.0 * b1 * a1.powi(3) - 5.0 * b1 * d1 * a1 * a1 - 24.0 * a2 * b2 * d1 * d1;
        Radicands {
            r1: a1 * l / ((a1 - d1) * d1),
            r2: a1 * b1 * (a1 * a1 * b1 * (a1 - d1) * m - 4.0 * a2 * b2 * d1 * d1 * (l + m)) / (a2 * b2 * d1 * q),
            w2: (24.0 * a2 * b2 * d1 * d1 * l - a1 * a1 * b1 * (a1 - d1) * m)
                / (a2 * b2 * (a1 - d1).powi(2) * d1 * (2.0 * b2 * d1 - a1 * b1) * -q),
        }
    }

    /// `r1 = 2 b1 √R1`.
    pub fn r1_value(&self, s: &HopfSetup) -> Option<f64> {
        (self.r1 > 0.0).then(|| 2.0 * s.b1 * self.r1.sqrt())
    }

    /// `(r2, w2) = (a1 b1/d1 · √R2, a1² b1²/√2 · √W2)`.
    pub fn r2_w2_values(&self, s: &HopfSetup) -> Option<(f64, f64)> {
        (self.r2 > 0.0 && self.w2 > 0.0)
            .then(|| (s.a1 * s.b1 / s.d1 * self.r2.sqrt(), (s.a1 * s.b1).powi(2) / SQRT_2 * self.w2.sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclePrediction {
    pub branch: Branch,
    pub exists: bool,
    /// Name of the non-positive radicand when the branch does not exist.
    pub missing_radicand: Option<String>,
    pub radicands: Radicands,
    pub closed_form: Option<[f64; 2]>,
    pub zero: Option<[f64; 2]>,
    pub refinement_shift: Option<f64>,
    pub refinement_consistent: Option<bool>,
    pub residual: Option<f64>,
    pub jacobian: Option<[[f64; 2]; 2]>,
    /// Eigenvalues of the Jacobian in θ-time.
    pub eigenvalues: Option<[Complex64; 2]>,
    /// Eigenvalues multiplied by the sign of `dθ/dt`.
    pub oriented_eigenvalues: Option<[Complex64; 2]>,
    pub stability: Option<Stability>,
    pub half_space: Option<HalfSpace>,
    /// State at `θ = 0` for the setup's ε; absent when ε = 0.
    pub initial_condition: Option<StateVec>,
    pub note: Option<String>,
}

impl CyclePrediction {
    fn absent(branch: Branch, radicands: Radicands, missing: &str) -> Self {
        CyclePrediction {
            branch,
            exists: false,
            missing_radicand: Some(missing.to_string()),
            radicands,
            closed_form: None,
            zero: None,
            refinement_shift: None,
            refinement_consistent: None,
            residual: None,
            jacobian: None,
            eigenvalues: None,
            oriented_eigenvalues: None,
            stability: None,
            half_space: None,
            initial_condition: None,
            note: None,
        }
    }

    pub fn point(&self) -> Option<Vector2<f64>> {
        self.zero.or(self.closed_form).map(Vector2::from)
    }
}

/// `sign(dθ/dt)` at leading order.
pub fn time_orientation(setup: &HopfSetup) -> f64 {
    transcribed::t0(setup).signum()
}

/// Eigenvalues of a 2×2 matrix from trace and determinant, avoiding
/// cancellation in the smaller root.
pub fn eigenvalues_2x2(j: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = j.trace();
    let det = j.determinant();
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let big = half + half.signum() * disc.sqrt();
        if big == 0.0 {
            return [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        }
        let (a, b) = (big, det / big);
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half, im), Complex64::new(half, -im)]
    }
}

pub fn classify(eigs: &[Complex64; 2]) -> Stability {
    if eigs.iter().any(|e| e.re.abs() < INDETERMINATE_MARGIN) {
        Stability::Indeterminate
    } else if eigs.iter().all(|e| e.re > 0.0) {
        Stability::Repeller
    } else if eigs.iter().all(|e| e.re < 0.0) {
        Stability::Attractor
    } else {
        Stability::SaddleLike
    }
}

fn check_degree(j: &Matrix2<f64>) -> Result<()> {
    let det = j.determinant();
    if det.abs() < DEGENERATE_DET_TOL * j.norm_squared() || det == 0.0 {
        return Err(Error::DegenerateJacobian { det });
    }
    Ok(())
}

/// Real-time stability class at the prediction's zero.
pub fn stability_of(setup: &HopfSetup, pred: &CyclePrediction) -> Result<Stability> {
    let z = pred.point().ok_or_else(|| Error::Domain("prediction does not exist".into()))?;
    let j = ClosedFormField::new(setup)?.jacobian(z)?;
    check_degree(&j)?;
    let orient = time_orientation(setup);
    Ok(classify(&eigenvalues_2x2(&(j * orient))))
}

/// `w = 0` lies in `z = 0`; otherwise the sign of `z = ε G w` decides.
pub fn half_space_of(setup: &HopfSetup, pred: &CyclePrediction) -> Result<HalfSpace> {
    let z = pred.point().ok_or_else(|| Error::Domain("prediction does not exist".into()))?;
    if z[1] == 0.0 {
        return Ok(HalfSpace::Plane);
    }
    let g = NormalFormFrame::new(setup, setup.epsilon)?.aux.g;
    Ok(if g * z[1] > 0.0 { HalfSpace::Positive } else { HalfSpace::Negative })
}

/// State of the predicted cycle at `θ = 0` for a given ε > 0.
pub fn initial_condition(setup: &HopfSetup, zero: [f64; 2], epsilon: f64) -> Result<StateVec> {
    let frame = NormalFormFrame::new(setup, epsilon)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain("ε must be positive to place a cycle".into()));
    }
    Ok(frame.inverse_map(&CylState::new(zero[0], 0.0, zero[1])))
}

fn fill(setup: &HopfSetup, field: &ClosedFormField, mut pred: CyclePrediction, seed: [f64; 2]) -> CyclePrediction {
    pred.closed_form = Some(seed);
    let newton = NewtonConfig::default();
    match newton_zero(field, Vector2::from(seed), &newton) {
        Ok(z) => {
            let shift = (Vector2::from(z.point) - Vector2::from(seed)).norm() / Vector2::from(seed).norm();
            pred.zero = Some(z.point);
            pred.refinement_shift = Some(shift);
            pred.refinement_consistent = Some(shift < REFINEMENT_TOL);
            pred.residual = Some(z.residual);
        }
        Err(e) => pred.note = Some(format!("refinement failed: {e}")),
    }
    let point = pred.point().unwrap_or(Vector2::from(seed));
    if let Ok(j) = field.jacobian(point) {
        let eigs = eigenvalues_2x2(&j);
        let orient = time_orientation(setup);
        pred.jacobian = Some([[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]]);
        pred.eigenvalues = Some(eigs);
        pred.oriented_eigenvalues = Some([eigs[0] * orient, eigs[1] * orient]);
    }
    match stability_of(setup, &pred) {
        Ok(s) => pred.stability = Some(s),
        Err(e) => pred.note = Some(e.to_string()),
    }
    pred.half_space = half_space_of(setup, &pred).ok();
    if setup.epsilon > 0.0 {
        let p = pred.point().unwrap_or(Vector2::from(seed));
        pred.initial_condition = initial_condition(setup, [p[0], p[1]], setup.epsilon).ok();
    }
    pred
}

/// The three candidate branches in the order `(r1, 0)`, `(r2, +w2)`,
/// `(r2, −w2)`. Branches with a non-positive radicand are returned with
/// `exists = false` and the radicand named.
pub fn predict_cycles(setup: &HopfSetup) -> Result<Vec<CyclePrediction>> {
    setup.validate()?;
    let field = ClosedFormField::new(setup)?;
    let rad = Radicands::new(setup);
    let mut out = Vec::with_capacity(3);

    out.push(match rad.r1_value(setup) {
        Some(r1) => {
            let pred = CyclePrediction {
                exists: true,
                missing_radicand: None,
                ..CyclePrediction::absent(Branch::Planar, rad, "")
            };
            fill(setup, &field, pred, [r1, 0.0])
        }
        None => CyclePrediction::absent(Branch::Planar, rad, "R1"),
    });

    for (branch, sign) in [(Branch::UpperW, 1.0), (Branch::LowerW, -1.0)] {
        out.push(match rad.r2_w2_values(setup) {
            Some((r2, w2)) => {
                let pred = CyclePrediction {
                    exists: true,
                    missing_radicand: None,
                    ..CyclePrediction::absent(branch, rad, "")
                };
                fill(setup, &field, pred, [r2, sign * w2])
            }
            None => {
                let missing = if rad.r2 <= 0.0 { "R2" } else { "W2" };
                CyclePrediction::absent(branch, rad, missing)
            }
        });
    }
    Ok(out)
}
