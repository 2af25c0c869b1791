//! Coordinate pipeline taking the food chain near `p3` into the normal form of
//! averaging:
//!
//! 1. translate `p3` to the origin,
//! 2. apply the linear change `(X, Y, Z)ᵀ = M (U, V, W)ᵀ` that puts the linear
//!    part in real Jordan form,
//! 3. cylindrical coordinates `U = R cos θ`, `V = R sin θ`,
//! 4. rescale `(R, W) = (ε r, ε w)`,
//! 5. use θ as the independent variable.
//!
//! The result is `r' = ε F11 + ε² F21 + O(ε³)`, `w' = ε F12 + ε² F22 + O(ε³)`.
//! [`theta_dynamics`] evaluates `(dr/dθ, dw/dθ)` exactly at a finite ε, and
//! [`SeriesExpansion`] pushes truncated Taylor series in ε through the same
//! maps to read off `F11, F21, F12, F22` exactly.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::hopf::{constrained_coeffs, solve_constraints, HopfSetup};
use crate::model::{raw_field, vector_field, Coeffs, ModelParams, StateVec};
use crate::scalar::{Jet, Scalar};
use crate::{Error, Result};

/// `|dθ/dt|` below this invalidates the time-to-angle change.
pub const MIN_THETA_RATE: f64 = 1e-10;

/// Intermediates of the change-of-variables matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformAux {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "I")]
    pub i: f64,
}

/// Rescaled cylindrical coordinates `(r, θ, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylState {
    pub r: f64,
    pub theta: f64,
    pub w: f64,
}

impl CylState {
    pub const fn new(r: f64, theta: f64, w: f64) -> Self {
        CylState { r, theta, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRates {
    pub dr_dtheta: f64,
    pub dw_dtheta: f64,
    pub theta_dot: f64,
}

/// `F11, F21, F12, F22` evaluated at one `(θ, r, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub f11: f64,
    pub f21: f64,
    pub f12: f64,
    pub f22: f64,
}

struct Frame<T> {
    coeffs: Coeffs<T>,
    p3: [T; 3],
    m: [[T; 3]; 3],
    m_inv: [[T; 3]; 3],
    aux: [T; 4],
}

fn aux_generic<T: Scalar>(setup: &HopfSetup, eps: T) -> [T; 4] {
    let HopfSetup { a1, a2, b1, b2, d1, l, m, .. } = *setup;
    let k = setup.k();
    let c = T::from;
    let e2 = eps * eps;
    let f = (c(k) * (c(b1 * d1) - e2 * c(k * l) * (c(l) * e2 - c(2.0 * a1) + c(2.0 * d1)))).sqrt();
    let h = c(b2 * k * d1.powi(3))
        + c(a1 * d1) * (c(b1 * b1) - e2 * c(2.0 * k * l * b1) - c(2.0 * b2 * d1 * k))
        + c(a1 * a1 * k) * (e2 * c(2.0 * b1 * l) + c(b2 * d1));
    let i = c(k) * (c(m * (m - 2.0 * l)) * e2 + c(2.0 * a1 * l - 2.0 * d1 * l)) * e2 + c(b1 * d1);
    let g = h * i / (c(a1 * a2 * b1 * d1 * k) * (c(2.0 * (a1 - d1) * k * l) * e2 + c(b1 * d1)));
    [f, g, h, i]
}

fn det3<T: Scalar>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3<T: Scalar>(m: &[[T; 3]; 3], det: T) -> [[T; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [cof(1, 2, 1, 2) / det, -cof(0, 2, 1, 2) / det, cof(0, 1, 1, 2) / det],
        [-cof(1, 2, 0, 2) / det, cof(0, 2, 0, 2) / det, -cof(0, 1, 0, 2) / det],
        [cof(1, 2, 0, 1) / det, -cof(0, 2, 0, 1) / det, cof(0, 1, 0, 1) / det],
    ]
}

fn matvec<T: Scalar>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    let row = |r: usize| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
    [row(0), row(1), row(2)]
}

fn build_frame<T: Scalar>(setup: &HopfSetup, eps: T) -> Result<Frame<T>> {
    setup.validate()?;
    let HopfSetup { a1, b1, d1, l, m, .. } = *setup;
    let k = setup.k();
    let c = T::from;
    let coeffs = constrained_coeffs(setup, eps);
    let p3 = [
        c(b1 * d1 / (a1 - d1)),
        -c(b1) * (c(b1 * d1) + c((d1 - a1) * k) * coeffs.rho) / c((a1 - d1).powi(2) * k),
        c(0.0),
    ];
    let aux = aux_generic(setup, eps);
    let [f, g, ..] = aux;
    if !(f.value() > 0.0) {
        return Err(Error::Domain(format!("radicand of F is not positive (F = {})", f.value())));
    }
    let e2 = eps * eps;
    let mat = [
        [-c(d1 * k) / f, c(0.0), c(1.0)],
        [-e2 * c(k * l) / f, c(1.0), e2 * c((2.0 * l - m) / d1)],
        [c(0.0), c(0.0), g],
    ];
    let det = det3(&mat);
    let col_scale: f64 = (0..3).map(|j| (0..3).map(|i| mat[i][j].value().powi(2)).sum::<f64>().sqrt()).product();
    if !(det.value().abs() >= 1e-12 * col_scale) {
        return Err(Error::SingularTransform { det: det.value() });
    }
    let m_inv = inverse3(&mat, det);
    Ok(Frame { coeffs, p3, m: mat, m_inv, aux })
}

/// Velocity in `(U, V, W)` coordinates at a point given in `(U, V, W)`.
fn uvw_velocity<T: Scalar>(frame: &Frame<T>, uvw: [T; 3]) -> [T; 3] {
    let d = matvec(&frame.m, uvw);
    let x = frame.p3[0] + d[0];
    let y = frame.p3[1] + d[1];
    let z = frame.p3[2] + d[2];
    let f = raw_field(&frame.coeffs, x, y, z);
    matvec(&frame.m_inv, f)
}

/// The pipeline at a fixed, finite ε.
#[derive(Debug, Clone)]
pub struct NormalFormFrame {
    pub setup: HopfSetup,
    pub epsilon: f64,
    pub params: ModelParams,
    pub p3: Vector3<f64>,
    pub matrix: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub aux: TransformAux,
}

impl NormalFormFrame {
    pub fn new(setup: &HopfSetup, epsilon: f64) -> Result<Self> {
        let setup = setup.with_epsilon(epsilon);
        let params = solve_constraints(&setup)?;
        let frame = build_frame(&setup, epsilon)?;
        let to_mat = |a: &[[f64; 3]; 3]| Matrix3::from_fn(|i, j| a[i][j]);
        Ok(NormalFormFrame {
            setup,
            epsilon,
            params,
            p3: Vector3::from(frame.p3),
            matrix: to_mat(&frame.m),
            inverse: to_mat(&frame.m_inv),
            aux: TransformAux { f: frame.aux[0], g: frame.aux[1], h: frame.aux[2], i: frame.aux[3] },
        })
    }

    pub fn to_uvw(&self, s: &StateVec) -> Vector3<f64> {
        self.inverse * (s.to_vector() - self.p3)
    }

    pub fn from_uvw(&self, uvw: &Vector3<f64>) -> StateVec {
        (self.p3 + self.matrix * uvw).into()
    }

    fn require_positive_epsilon(&self) -> Result<()> {
        if self.epsilon > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain("the rescaling (R, W) = (ε r, ε w) needs ε > 0".into()))
        }
    }

    pub fn forward(&self, s: &StateVec) -> Result<CylState> {
        self.require_positive_epsilon()?;
        let uvw = self.to_uvw(s);
        let big_r = uvw[0].hypot(uvw[1]);
        let theta = if big_r == 0.0 { 0.0 } else { uvw[1].atan2(uvw[0]).rem_euclid(std::f64::consts::TAU) };
        Ok(CylState { r: big_r / self.epsilon, theta, w: uvw[2] / self.epsilon })
    }

    pub fn inverse_map(&self, c: &CylState) -> StateVec {
        let e = self.epsilon;
        let uvw = Vector3::new(e * c.r * c.theta.cos(), e * c.r * c.theta.sin(), e * c.w);
        self.from_uvw(&uvw)
    }

    /// Exact `(dr/dθ, dw/dθ)` at this frame's ε.
    pub fn theta_dynamics(&self, c: &CylState) -> Result<ThetaRates> {
        self.require_positive_epsilon()?;
        if !(c.r > 0.0) {
            return Err(Error::Reparametrization(0.0));
        }
        let e = self.epsilon;
        let (sin, cos) = c.theta.sin_cos();
        let uvw = Vector3::new(e * c.r * cos, e * c.r * sin, e * c.w);
        let s = self.from_uvw(&uvw);
        let f = vector_field(&self.params, &s)?.to_vector();
        let v = self.inverse * f;
        let r_dot_big = cos * v[0] + sin * v[1];
        let r_theta_dot = cos * v[1] - sin * v[0];
        let theta_dot = r_theta_dot / (e * c.r);
        if !(theta_dot.abs() >= MIN_THETA_RATE) {
            return Err(Error::Reparametrization(theta_dot.abs()));
        }
        Ok(ThetaRates { dr_dtheta: c.r * r_dot_big / r_theta_dot, dw_dtheta: c.r * v[2] / r_theta_dot, theta_dot })
    }

    /// `M⁻¹ J(p3) M`, the linear part in `(U, V, W)`.
    pub fn linear_part(&self) -> Result<Matrix3<f64>> {
        let j = crate::model::jacobian(&self.params, &self.p3.into())?;
        Ok(self.inverse * j * self.matrix)
    }
}

pub fn forward_map(setup: &HopfSetup, s: &StateVec) -> Result<CylState> {
    NormalFormFrame::new(setup, setup.epsilon)?.forward(s)
}

pub fn inverse_map(setup: &HopfSetup, c: &CylState) -> Result<StateVec> {
    Ok(NormalFormFrame::new(setup, setup.epsilon)?.inverse_map(c))
}

pub fn theta_dynamics(setup: &HopfSetup, c: &CylState, epsilon: f64) -> Result<ThetaRates> {
    NormalFormFrame::new(setup, epsilon)?.theta_dynamics(c)
}

/// Taylor order carried through the pipeline: `Ṙ` is needed up to ε³.
const ORDER: usize = 4;
type SeriesJet = Jet<ORDER>;

/// Relative size of the discarded low-order terms above which extraction is
/// rejected.
pub const SERIES_CONSISTENCY_TOL: f64 = 1e-6;

/// The pipeline evaluated on Taylor series in ε. Build once per setup; each
/// [`SeriesExpansion::coefficients`] call is then cheap.
pub struct SeriesExpansion {
    setup: HopfSetup,
    frame: Frame<SeriesJet>,
}

impl SeriesExpansion {
    pub fn new(setup: &HopfSetup) -> Result<Self> {
        let frame = build_frame(setup, SeriesJet::variable())?;
        Ok(SeriesExpansion { setup: *setup, frame })
    }

    pub fn setup(&self) -> &HopfSetup {
        &self.setup
    }

    pub fn coefficients(&self, theta: f64, r: f64, w: f64) -> Result<SeriesCoefficients> {
        if !(r > 0.0) {
            return Err(Error::Reparametrization(0.0));
        }
        let eps = SeriesJet::variable();
        let (sin, cos) = theta.sin_cos();
        let uvw = [eps.scale(r * cos), eps.scale(r * sin), eps.scale(w)];
        let v = uvw_velocity(&self.frame, uvw);
        let c = SeriesJet::from;
        let r_dot_big = c(cos) * v[0] + c(sin) * v[1];
        let r_theta_dot = c(cos) * v[1] - c(sin) * v[0];
        let w_dot = v[2];

        let scale = r_theta_dot.coeff(1).abs() + r_dot_big.coeff(2).abs() + w_dot.coeff(2).abs();
        let discarded = r_dot_big.coeff(0).abs()
            + r_dot_big.coeff(1).abs()
            + w_dot.coeff(0).abs()
            + w_dot.coeff(1).abs()
            + r_theta_dot.coeff(0).abs();
        if !(discarded <= SERIES_CONSISTENCY_TOL * scale) {
            return Err(Error::IllConditioned(format!(
                "low-order terms {discarded:e} not negligible against {scale:e}"
            )));
        }
        let theta_rate = r_theta_dot.shift_down(1);
        if !(theta_rate.coeff(0).abs() >= MIN_THETA_RATE * r) {
            return Err(Error::Reparametrization(theta_rate.coeff(0).abs() / r));
        }
        let dr = r_dot_big.shift_down(2).scale(r) / theta_rate;
        let dw = w_dot.shift_down(2).scale(r) / theta_rate;
        Ok(SeriesCoefficients { f11: dr.coeff(0), f21: dr.coeff(1), f12: dw.coeff(0), f22: dw.coeff(1) })
    }

    /// Writes `theta,r,w,F11,F21,F12,F22` rows for every grid combination.
    pub fn write_csv<W: Write>(&self, out: &mut W, thetas: &[f64], rs: &[f64], ws: &[f64]) -> std::io::Result<()> {
        writeln!(out, "theta,r,w,F11,F21,F12,F22")?;
        for &r in rs {
            for &w in ws {
                for &theta in thetas {
                    match self.coefficients(theta, r, w) {
                        Ok(c) => writeln!(out, "{theta},{r},{w},{},{},{},{}", c.f11, c.f21, c.f12, c.f22)?,
                        Err(e) => writeln!(out, "{theta},{r},{w},,,, # {e}")?,
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn extract_series(setup: &HopfSetup, theta: f64, r: f64, w: f64) -> Result<SeriesCoefficients> {
    SeriesExpansion::new(setup)?.coefficients(theta, r, w)
}

/// Closed-form pieces of the first-order normal form, kept as an independent
/// cross-check of the numerical pipeline.
pub mod transcribed {
    use crate::hopf::HopfSetup;

    /// Leading angular velocity `−√(b1 d1 k)/k`.
    pub fn t0(s: &HopfSetup) -> f64 {
        let k = s.k();
        -(s.b1 * s.d1 * k).sqrt() / k
    }

    /// Numerator of `F11 = R1/T0`.
    pub fn r1(s: &HopfSetup, theta: f64, r: f64, w: f64) -> f64 {
        let HopfSetup { a1, a2, b1, b2, d1, .. } = *s;
        let k = s.k();
        let p = s.p_aux();
        let sq = (b1 * d1 * k).sqrt();
        let (sn, c) = theta.sin_cos();
        let poly = b2 * b2 * k * k * a1.powi(5) + a2 * b1 * b2 * k * k * a1.powi(4)
            - 3.0 * b2 * b2 * d1 * k * k * a1.powi(4)
            + 2.0 * b1 * b1 * b2 * k * a1.powi(4)
            + b1.powi(4) * a1.powi(3)
            + 2.0 * b2 * b2 * d1 * d1 * k * k * a1.powi(3)
            - 3.0 * a2 * b1 * b2 * d1 * k * k * a1.powi(3)
            - 2.0 * b1 * b1 * b2 * d1 * k * a1.powi(3)
            + 2.0 * b2 * b2 * d1.powi(3) * k * k * a1 * a1
            + 3.0 * a2 * b1 * b2 * d1 * d1 * k * k * a1 * a1
            + b1.powi(4) * d1 * a1 * a1
            - 2.0 * b1 * b1 * b2 * d1 * d1 * k * a1 * a1
            - 3.0 * b2 * b2 * d1.powi(4) * k * k * a1
            - a2 * b1 * b2 * d1.powi(3) * k * k * a1
            + 2.0 * b1 * b1 * b2 * d1.powi(3) * k * a1
            + b2 * b2 * d1.powi(5) * k * k;
        d1 * d1 * r * r / (a1 * sq) * c.powi(3)
            - (a1 - d1) * r * r / b1 * c * c * sn
            - 2.0 * d1 * w * r / (a1 * k) * c * c
            + sq * w * w / (a1 * k * k) * c
            + (a1 - d1) / (a1 * sq * p * p) * poly * r * w * c * sn
            + (a1 - d1) * d1 * (d1 - a1) * k * r * r / (a1 * b1 * sq) * c * sn * sn
            + b1 * (a1 - d1).powi(2) * r * w / p * sn * sn
            - (a1 - d1) * w * w / (a1 * k) * sn
    }

    /// `W1` in its transcribed closed form. It carries `ρ` where
    /// the pipeline has `r`; see [`f12`].
    pub fn w1_transcribed(s: &HopfSetup, theta: f64, w: f64) -> f64 {
        let HopfSetup { a1, a2, b1, b2, d1, .. } = *s;
        let p = s.p_aux();
        a2 * b1 * b2 * (a1 - d1).powi(3) * (a1 + d1) * s.k() * w / (p * p) * theta.sin()
    }

    pub fn f11(s: &HopfSetup, theta: f64, r: f64, w: f64) -> f64 {
        r1(s, theta, r, w) / t0(s)
    }

    /// `F12 = a2 b2 (a1 − d1)⁴ k² r w sin θ / (P² T0)`.
    pub fn f12(s: &HopfSetup, theta: f64, r: f64, w: f64) -> f64 {
        let HopfSetup { a1, a2, b2, d1, .. } = *s;
        let k = s.k();
        let p = s.p_aux();
        a2 * b2 * (a1 - d1).powi(4) * k * k * r * w * theta.sin() / (p * p * t0(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn setup() -> HopfSetup {
        HopfSetup::EXAMPLE.with_epsilon(0.01)
    }

    #[test]
    fn p3_maps_to_origin() {
        let frame = NormalFormFrame::new(&setup(), 0.01).unwrap();
        let c = frame.forward(&frame.p3.into()).unwrap();
        assert_eq!(c, CylState::new(0.0, 0.0, 0.0));
        assert_eq!(frame.inverse_map(&CylState::new(0.0, 0.0, 0.0)), StateVec::from(frame.p3));
    }

    #[test]
    fn w_zero_lands_in_top_predator_free_plane() {
        let frame = NormalFormFrame::new(&setup(), 0.01).unwrap();
        for theta in [0.0, 1.0, 2.5, 4.0] {
            assert_eq!(frame.inverse_map(&CylState::new(150.0, theta, 0.0)).z, 0.0);
        }
        let s = StateVec::new(0.3, 17.0, 0.0);
        assert_eq!(frame.forward(&s).unwrap().w, 0.0);
    }

    #[test]
    fn linear_part_is_real_jordan_form() {
        for eps in [0.0, 0.01, 0.05] {
            let frame = NormalFormFrame::new(&setup(), eps).unwrap();
            let a = frame.linear_part().unwrap();
            let s = frame.setup;
            let omega = crate::hopf::spectrum_p3(&frame.params).unwrap().lambda_plus.im.abs();
            let expected =
                Matrix3::new(eps * eps * s.l, omega, 0.0, -omega, eps * eps * s.l, 0.0, 0.0, 0.0, eps * eps * s.m);
            assert!((a - expected).amax() < 1e-9, "eps {eps}: {a}");
        }
    }

    #[test]
    fn zero_epsilon_is_rejected_by_rescaling() {
        let frame = NormalFormFrame::new(&setup(), 0.0).unwrap();
        assert!(frame.forward(&StateVec::new(0.3, 17.0, 0.1)).is_err());
    }

    #[test]
    fn series_coefficients_are_periodic() {
        let ex = SeriesExpansion::new(&setup()).unwrap();
        for &(theta, r, w) in &[(0.3, 1.0, 0.5), (2.0, 150.0, -20.0)] {
            let a = ex.coefficients(theta, r, w).unwrap();
            let b = ex.coefficients(theta + TAU, r, w).unwrap();
            for (x, y) in [(a.f11, b.f11), (a.f21, b.f21), (a.f12, b.f12), (a.f22, b.f22)] {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn f12_vanishes_on_invariant_plane() {
        let ex = SeriesExpansion::new(&setup()).unwrap();
        for theta in [0.1, 1.3, 3.0, 5.5] {
            assert_eq!(ex.coefficients(theta, 2.0, 0.0).unwrap().f12, 0.0);
        }
    }

    #[test]
    fn transcribed_f11_agrees_with_pipeline() {
        let s = setup();
        let ex = SeriesExpansion::new(&s).unwrap();
        for r in [0.5, 1.0, 2.0, 50.0, 200.0] {
            for w in [-3.0, -1.0, 0.0, 1.0, 40.0] {
                for j in 0..8 {
                    let theta = j as f64 * TAU / 8.0 + 0.1;
                    let got = ex.coefficients(theta, r, w).unwrap().f11;
                    let want = transcribed::f11(&s, theta, r, w);
                    assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-3 * (r * r + w * w)), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn f12_structure() {
        let s = setup();
        let ex = SeriesExpansion::new(&s).unwrap();
        let rho0 = crate::hopf::solve_constraints(&s.with_epsilon(0.0)).unwrap().rho;
        let mut ratio = None;
        for &(theta, r, w) in &[(0.4, 1.0, 0.5), (1.9, 3.0, -2.0), (4.4, 120.0, 7.0)] {
            let f12 = ex.coefficients(theta, r, w).unwrap().f12;
            assert!((f12 - transcribed::f12(&s, theta, r, w)).abs() <= 1e-9 * f12.abs());
            let q = f12 / (r * w * f64::sin(theta));
            let q0 = *ratio.get_or_insert(q);
            assert!((q - q0).abs() <= 1e-9 * q0.abs());
            // The transcribed W1 differs from the pipeline by exactly ρ/r.
            let transcribed_w1 = transcribed::w1_transcribed(&s, theta, w) / transcribed::t0(&s);
            assert!((transcribed_w1 - f12 * rho0 / r).abs() <= 1e-9 * transcribed_w1.abs());
        }
    }

    #[test]
    fn series_reproduces_finite_epsilon_dynamics() {
        let s = setup();
        let ex = SeriesExpansion::new(&s).unwrap();
        let c = CylState::new(1.5, 0.7, 0.8);
        let co = ex.coefficients(c.theta, c.r, c.w).unwrap();
        let residual = |eps: f64| {
            let rates = theta_dynamics(&s, &c, eps).unwrap();
            (rates.dr_dtheta - eps * co.f11 - eps * eps * co.f21)
                .abs()
                .max((rates.dw_dtheta - eps * co.f12 - eps * eps * co.f22).abs())
        };
        let ratio = residual(1e-3) / residual(5e-4);
        assert!((ratio - 8.0).abs() < 0.5, "ratio {ratio}");
    }
}
