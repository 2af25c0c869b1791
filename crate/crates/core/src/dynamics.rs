//! Direct integration of the food chain: Dormand–Prince 5(4) with dense
//! output, Poincaré returns, Newton shooting onto cycles and Floquet
//! multipliers from the variational equations.

use std::io::Write;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cycles::{eigenvalues_2x2, initial_condition, CyclePrediction, Stability};
use crate::hopf::{solve_constraints, HopfSetup};
use crate::model::{raw_field, raw_jacobian, top_predator_rate, ModelParams, StateVec, DENOMINATOR_GUARD};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter { name: "max_step", value: self.max_step });
        }
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 4],
}

impl<const N: usize> Step<N> {
    /// Fourth-order dense output at `t ∈ [t0, t1]`.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s1 = 1.0 - s;
        std::array::from_fn(|i| {
            let [r2, r3, r4, r5] = [self.rcont[0][i], self.rcont[1][i], self.rcont[2][i], self.rcont[3][i]];
            self.y0[i] + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)))
        })
    }
}

pub enum Control {
    Continue,
    Stop,
}

/// Integrates `y' = f(t, y)` from `t0` towards `t_end`, calling `on_step` after
/// every accepted step. Returns the final time and state. Evaluation errors
/// from `f` reject the step and shrink it.
pub fn dopri5<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut on_step: S,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    S: FnMut(&Step<N>) -> Result<Control>,
{
    cfg.validate()?;
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::Integration("non-finite initial state".into()));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    if span == 0.0 {
        return Ok((t0, y0));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    let scale = |y: &[f64; N], i: usize| cfg.atol + cfg.rtol * y[i].abs();
    // Initial step from the first derivative, as in Hairer–Nørsett–Wanner.
    let d0 = (0..N).map(|i| (y[i] / scale(&y, i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
    let d1 = (0..N).map(|i| (k1[i] / scale(&y, i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(cfg.max_step).min(span);
    let h_min = 16.0 * f64::EPSILON * t0.abs().max(span);
    let mut steps = 0usize;
    let mut last_fac: f64 = 1e-4;

    while (t_end - t) * dir > 0.0 {
        if steps >= cfg.max_steps {
            return Err(Error::Integration(format!("step budget {} exhausted at t = {t}", cfg.max_steps)));
        }
        if h < h_min {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }
        let mut last = false;
        if (t + dir * h - t_end) * dir >= 0.0 {
            h = (t_end - t).abs();
            last = true;
        }
        let hs = dir * h;
        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        let mut failed = false;
        for s in 1..7 {
            let mut ys = y;
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ys[i] += hs * acc;
            }
            match f(t + C[s] * hs, &ys) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => k[s] = v,
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        steps += 1;
        if failed {
            h *= 0.25;
            continue;
        }
        let mut y_new = y;
        for i in 0..N {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[6][j] * kj[i];
            }
            y_new[i] += hs * acc;
        }
        let mut err = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            err += (hs * e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        // PI step-size control.
        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let mut fac = fac11 / last_fac.powf(0.04);
        fac = (fac / 0.9).clamp(0.1, 5.0);
        let h_new = (h / fac).min(cfg.max_step);
        if err <= 1.0 {
            last_fac = err.max(1e-4);
            let mut rcont = [[0.0; N]; 4];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k[0][i] - ydiff;
                rcont[0][i] = ydiff;
                rcont[1][i] = bspl;
                rcont[2][i] = ydiff - hs * k[6][i] - bspl;
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += D[j] * kj[i];
                }
                rcont[3][i] = hs * acc;
            }
            let t_new = if last { t_end } else { t + hs };
            let step = Step { t0: t, t1: t_new, y0: y, y1: y_new, rcont };
            t = t_new;
            y = y_new;
            k1 = k[6];
            if let Control::Stop = on_step(&step)? {
                return Ok((t, y));
            }
            h = h_new;
        } else {
            h /= (fac11 / 0.9).clamp(1.0, 10.0);
        }
    }
    Ok((t, y))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<StateVec>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,x,y,z")?;
        for (t, s) in self.t.iter().zip(&self.states) {
            writeln!(out, "{t},{},{},{}", s.x, s.y, s.z)?;
        }
        Ok(())
    }
}

fn field_checked(p: &ModelParams, y: &[f64; 3]) -> Result<[f64; 3]> {
    if (p.b1 + y[0]).abs() < DENOMINATOR_GUARD || (p.b2 + y[1]).abs() < DENOMINATOR_GUARD {
        return Err(Error::SingularDenominator { which: "Holling", value: 0.0 });
    }
    Ok(raw_field(&p.coeffs(), y[0], y[1], y[2]))
}

/// Integrates the food chain, recording every accepted step.
pub fn integrate(p: &ModelParams, s0: &StateVec, tspan: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    p.validate()?;
    if !s0.is_finite() {
        return Err(Error::Integration("non-finite initial state".into()));
    }
    let mut traj = Trajectory { t: vec![tspan.0], states: vec![*s0] };
    dopri5(
        |_, y| field_checked(p, y),
        tspan.0,
        s0.to_array(),
        tspan.1,
        cfg,
        |step| {
            traj.t.push(step.t1);
            traj.states.push(step.y1.into());
            Ok(Control::Continue)
        },
    )?;
    Ok(traj)
}

/// State, fundamental matrix (row-major), `∫ tr J` and `∫ (a2 y/(b2+y) − d2)`.
const AUG: usize = 14;

fn augmented_field(p: &ModelParams, y: &[f64; AUG]) -> Result<[f64; AUG]> {
    let s = [y[0], y[1], y[2]];
    let f = field_checked(p, &s)?;
    let j = raw_jacobian(p, &s.into());
    let phi = Matrix3::from_row_slice(&y[3..12]);
    let dphi = j * phi;
    let mut out = [0.0; AUG];
    out[..3].copy_from_slice(&f);
    for r in 0..3 {
        for c in 0..3 {
            out[3 + 3 * r + c] = dphi[(r, c)];
        }
    }
    out[12] = j.trace();
    out[13] = top_predator_rate(p, y[1]);
    Ok(out)
}

fn augmented_start(s: &Vector3<f64>) -> [f64; AUG] {
    let mut y = [0.0; AUG];
    y[..3].copy_from_slice(s.as_slice());
    y[3] = 1.0;
    y[7] = 1.0;
    y[11] = 1.0;
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub point: StateVec,
    pub normal: [f64; 3],
}

impl Section {
    fn g(&self, s: &[f64]) -> f64 {
        (0..3).map(|i| self.normal[i] * (s[i] - self.point.to_array()[i])).sum()
    }
}

/// Outcome of one flow to the first return.
#[derive(Debug, Clone)]
struct Return {
    time: f64,
    state: Vector3<f64>,
    phi: Matrix3<f64>,
    trace_integral: f64,
    transverse_integral: f64,
    z_range: (f64, f64),
}

struct ReturnSettings {
    min_time: f64,
    max_time: f64,
    center: Vector3<f64>,
    box_size: f64,
}

fn first_return(
    p: &ModelParams,
    section: &Section,
    start: &Vector3<f64>,
    rs: &ReturnSettings,
    cfg: &IntegratorConfig,
) -> Result<Return> {
    let mut found: Option<(f64, [f64; AUG])> = None;
    let mut z_range = (start[2], start[2]);
    let mut escaped = None;
    let _ = dopri5(
        |_, y| augmented_field(p, y),
        0.0,
        augmented_start(start),
        rs.max_time,
        cfg,
        |step| {
            for q in 1..=4 {
                let t = step.t0 + (step.t1 - step.t0) * q as f64 / 4.0;
                let z = step.interpolate(t)[2];
                z_range = (z_range.0.min(z), z_range.1.max(z));
            }
            let dist = (0..3).map(|i| (step.y1[i] - rs.center[i]).abs()).fold(0.0, f64::max);
            if dist > rs.box_size {
                escaped = Some(step.t1);
                return Ok(Control::Stop);
            }
            if step.t1 < rs.min_time {
                return Ok(Control::Continue);
            }
            let g0 = section.g(&step.y0[..3]);
            let g1 = section.g(&step.y1[..3]);
            if g0 < 0.0 && g1 >= 0.0 {
                let (mut lo, mut hi) = (step.t0, step.t1);
                let (mut g_lo, mut g_hi) = (g0, g1);
                for _ in 0..200 {
                    // Illinois-style regula falsi with bisection fallback.
                    let mut t = lo - g_lo * (hi - lo) / (g_hi - g_lo);
                    if !(t > lo && t < hi) {
                        t = 0.5 * (lo + hi);
                    }
                    let gt = section.g(&step.interpolate(t)[..3]);
                    if gt < 0.0 {
                        lo = t;
                        g_lo = gt;
                        g_hi *= 0.5;
                    } else {
                        hi = t;
                        g_hi = gt;
                        g_lo *= 0.5;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                        break;
                    }
                }
                let t = 0.5 * (lo + hi);
                found = Some((t, step.interpolate(t)));
                return Ok(Control::Stop);
            }
            Ok(Control::Continue)
        },
    )?;
    if let Some(t) = escaped {
        return Err(Error::NoReturn { t });
    }
    let (time, y) = found.ok_or(Error::NoReturn { t: rs.max_time })?;
    Ok(Return {
        time,
        state: Vector3::new(y[0], y[1], y[2]),
        phi: Matrix3::from_row_slice(&y[3..12]),
        trace_integral: y[12],
        transverse_integral: y[13],
        z_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub matrix: [[f64; 3]; 3],
    pub multipliers: Vec<Complex64>,
    /// Distance of the multiplier nearest to 1 from 1.
    pub trivial_distance: f64,
    pub determinant: f64,
    pub liouville: f64,
    pub liouville_rel_error: f64,
    /// `exp ∮ (a2 y/(b2 + y) − d2) dt`.
    pub transverse_multiplier: f64,
}

/// Tolerance on the trivial multiplier.
pub const TRIVIAL_MULTIPLIER_TOL: f64 = 1e-4;

fn monodromy_from(phi: &Matrix3<f64>, trace_integral: f64, transverse_integral: f64) -> Result<MonodromyReport> {
    let multipliers: Vec<Complex64> = phi.complex_eigenvalues().iter().copied().collect();
    let trivial_distance = multipliers.iter().map(|m| (m - 1.0).norm()).fold(f64::INFINITY, f64::min);
    let determinant = phi.determinant();
    let liouville = trace_integral.exp();
    let report = MonodromyReport {
        matrix: [
            [phi[(0, 0)], phi[(0, 1)], phi[(0, 2)]],
            [phi[(1, 0)], phi[(1, 1)], phi[(1, 2)]],
            [phi[(2, 0)], phi[(2, 1)], phi[(2, 2)]],
        ],
        multipliers,
        trivial_distance,
        determinant,
        liouville,
        liouville_rel_error: (determinant - liouville).abs() / liouville.abs(),
        transverse_multiplier: transverse_integral.exp(),
    };
    if !(trivial_distance <= TRIVIAL_MULTIPLIER_TOL) {
        return Err(Error::TrivialMultiplier { distance: trivial_distance });
    }
    Ok(report)
}

/// Fundamental matrix over one period from `cycle_point` and its multipliers.
pub fn monodromy(
    p: &ModelParams,
    cycle_point: &StateVec,
    period: f64,
    cfg: &IntegratorConfig,
) -> Result<MonodromyReport> {
    p.validate()?;
    let (_, y) = dopri5(
        |_, y| augmented_field(p, y),
        0.0,
        augmented_start(&cycle_point.to_vector()),
        period,
        cfg,
        |_| Ok(Control::Continue),
    )?;
    monodromy_from(&Matrix3::from_row_slice(&y[3..12]), y[12], y[13])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub max_iterations: usize,
    /// Convergence needs the return-map defect below
    /// `defect_tol · max(1, ‖p3‖∞)`...
    pub defect_tol: f64,
    /// ... and the next Newton correction below `step_tol · max(1, ‖p3‖∞)`.
    pub step_tol: f64,
    /// Bounding box half-width in units of `‖p3‖∞`.
    pub box_factor: f64,
    /// Return-time window in units of the linear period.
    pub min_return: f64,
    pub max_return: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            max_iterations: 50,
            defect_tol: 1e-10,
            step_tol: 1e-7,
            box_factor: 10.0,
            min_return: 0.5,
            max_return: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareRecord {
    pub epsilon: f64,
    pub section: Section,
    pub predicted_point: StateVec,
    pub cycle_point: StateVec,
    /// `‖cycle_point − predicted_point‖₂`.
    pub prediction_distance: f64,
    pub period: f64,
    pub linear_period: f64,
    pub iterations: usize,
    pub return_times: Vec<f64>,
    pub return_points: Vec<StateVec>,
    /// Jacobian of the return map in section coordinates.
    pub return_jacobian: Vec<Vec<f64>>,
    /// Nontrivial Floquet multipliers (eigenvalues of the return-map Jacobian,
    /// with the transverse multiplier appended for cycles pinned to `z = 0`).
    pub nontrivial_multipliers: Vec<Complex64>,
    pub monodromy: MonodromyReport,
    pub z_min: f64,
    pub z_max: f64,
    pub stability: Stability,
}

/// Locates the cycle near a prediction at the given ε by Newton iteration on
/// the return map of the section through the predicted point with normal
/// along the flow. Cycles predicted in `z = 0` are searched within that plane.
pub fn poincare_verify(
    setup: &HopfSetup,
    pred: &CyclePrediction,
    epsilon: f64,
    cfg: &IntegratorConfig,
    shoot: &ShootingConfig,
) -> Result<PoincareRecord> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("ε must be positive (got {epsilon})")));
    }
    let zero = pred.point().ok_or_else(|| Error::Domain("prediction does not exist".into()))?;
    let setup = setup.with_epsilon(epsilon);
    let p = solve_constraints(&setup)?;
    let ic = initial_condition(&setup, [zero[0], zero[1]], epsilon)?;
    let s0 = ic.to_vector();
    let f0 = Vector3::from(field_checked(&p, &ic.to_array())?);
    let normal = f0.normalize();
    let section = Section { point: ic, normal: [normal[0], normal[1], normal[2]] };
    let pinned = ic.z == 0.0;

    // Orthonormal basis of the section; the first vector lies in z = 0.
    let e1 = {
        let v = normal.cross(&Vector3::z());
        if v.norm() > 1e-12 {
            v.normalize()
        } else {
            normal.cross(&Vector3::x()).normalize()
        }
    };
    let e2 = normal.cross(&e1).normalize();
    let basis: Vec<Vector3<f64>> = if pinned { vec![e1] } else { vec![e1, e2] };
    let k = basis.len();
    let b = DMatrix::from_fn(3, k, |i, j| basis[j][i]);

    let p3 = crate::hopf::constrained_p3(&setup)?.to_vector();
    let scale = p3.amax().max(1.0);
    let linear_period = std::f64::consts::TAU / setup.omega0();
    let rs = ReturnSettings {
        min_time: shoot.min_return * linear_period,
        max_time: shoot.max_return * linear_period,
        center: p3,
        box_size: shoot.box_factor * p3.amax(),
    };

    let mut xi = nalgebra::DVector::<f64>::zeros(k);
    let mut return_times = Vec::new();
    let mut return_points = Vec::new();
    for it in 0..shoot.max_iterations {
        let mut start = s0 + &b * &xi;
        if pinned {
            start[2] = 0.0;
        }
        let ret = first_return(&p, &section, &start, &rs, cfg)?;
        return_times.push(ret.time);
        return_points.push(StateVec::from(ret.state));
        let image = b.transpose() * (ret.state - s0);
        let defect = &image - &xi;
        let f_t = Vector3::from(field_checked(&p, &[ret.state[0], ret.state[1], ret.state[2]])?);
        let proj = Matrix3::identity() - f_t * normal.transpose() / normal.dot(&f_t);
        let phi_dyn = DMatrix::from_fn(3, 3, |i, j| (proj * ret.phi)[(i, j)]);
        let dp = b.transpose() * phi_dyn * &b;

        let lhs = dp.clone() - DMatrix::identity(k, k);
        let step =
            lhs.lu().solve(&(-&defect)).ok_or_else(|| Error::NonConvergence("singular return-map Jacobian".into()))?;
        if defect.amax() <= shoot.defect_tol * scale && step.amax() <= shoot.step_tol * scale {
            let cycle_point = StateVec::from(start);
            let mono = monodromy_from(&ret.phi, ret.trace_integral, ret.transverse_integral)?;
            let mut nontrivial: Vec<Complex64> = if k == 2 {
                let m2 = nalgebra::Matrix2::new(dp[(0, 0)], dp[(0, 1)], dp[(1, 0)], dp[(1, 1)]);
                eigenvalues_2x2(&m2).to_vec()
            } else {
                vec![Complex64::new(dp[(0, 0)], 0.0)]
            };
            if pinned {
                nontrivial.push(Complex64::new(mono.transverse_multiplier, 0.0));
            }
            let stability = floquet_class(&nontrivial);
            return Ok(PoincareRecord {
                epsilon,
                section,
                predicted_point: ic,
                cycle_point,
                prediction_distance: (start - s0).norm(),
                period: ret.time,
                linear_period,
                iterations: it + 1,
                return_times,
                return_points,
                return_jacobian: (0..k).map(|i| (0..k).map(|j| dp[(i, j)]).collect()).collect(),
                nontrivial_multipliers: nontrivial,
                monodromy: mono,
                z_min: ret.z_range.0,
                z_max: ret.z_range.1,
                stability,
            });
        }
        xi += step;
    }
    Err(Error::NonConvergence(format!("return map did not converge in {} iterations", shoot.max_iterations)))
}

/// Attractor when every nontrivial multiplier lies inside the unit circle.
pub fn floquet_class(multipliers: &[Complex64]) -> Stability {
    let inside = multipliers.iter().filter(|m| m.norm() < 1.0).count();
    let outside = multipliers.iter().filter(|m| m.norm() > 1.0).count();
    match (inside, outside) {
        (i, 0) if i == multipliers.len() => Stability::Attractor,
        (0, o) if o == multipliers.len() => Stability::Repeller,
        (i, o) if i + o == multipliers.len() => Stability::SaddleLike,
        _ => Stability::Indeterminate,
    }
}

/// One row of an ε scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub epsilon: f64,
    pub record: Option<PoincareRecord>,
    pub error: Option<String>,
    /// Order of the prediction distance against the previous converged ε.
    pub order: Option<f64>,
    /// `2^order`, the factor expected when ε halves.
    pub halving_ratio: Option<f64>,
}

pub const DEFAULT_EPSILON_SCAN: [f64; 3] = [0.05, 0.02, 0.01];

pub fn epsilon_scan(
    setup: &HopfSetup,
    pred: &CyclePrediction,
    epsilons: &[f64],
    cfg: &IntegratorConfig,
    shoot: &ShootingConfig,
) -> Vec<ScanEntry> {
    let records: Vec<Result<PoincareRecord>> =
        epsilons.iter().map(|&e| poincare_verify(setup, pred, e, cfg, shoot)).collect();
    order_table(epsilons, records)
}

/// Attaches order estimates to per-ε results.
pub fn order_table(epsilons: &[f64], records: Vec<Result<PoincareRecord>>) -> Vec<ScanEntry> {
    let mut out: Vec<ScanEntry> = Vec::with_capacity(records.len());
    let mut prev: Option<(f64, f64)> = None;
    for (&epsilon, r) in epsilons.iter().zip(records) {
        match r {
            Ok(rec) => {
                let d = rec.prediction_distance;
                let order = prev.map(|(e0, d0)| (d0 / d).ln() / (e0 / epsilon).ln());
                prev = Some((epsilon, d));
                out.push(ScanEntry {
                    epsilon,
                    record: Some(rec),
                    error: None,
                    order,
                    halving_ratio: order.map(|o| 2f64.powf(o)),
                });
            }
            Err(e) => out.push(ScanEntry {
                epsilon,
                record: None,
                error: Some(e.to_string()),
                order: None,
                halving_ratio: None,
            }),
        }
    }
    out
}
