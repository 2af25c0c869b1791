//! First- and second-order averaged functions of a periodic system
//! `z' = ε F1(t, z) + ε² F2(t, z)`, and Newton search for their zeros.
//!
//! `F10(z) = (1/T) ∫ F1(s, z) ds` and
//! `F20(z) = (1/T) ∫ [D_z F1(s, z) y1(s, z) + F2(s, z)] ds` with
//! `y1(s, z) = ∫₀ˢ F1(u, z) du`.

use std::f64::consts::{SQRT_2, TAU};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::hopf::HopfSetup;
use crate::transform::SeriesExpansion;
use crate::{Error, Result};

pub trait PeriodicSystem {
    fn dim(&self) -> usize;

    fn period(&self) -> f64 {
        TAU
    }

    fn f1(&self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>>;

    fn f2(&self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>>;

    /// Both orders at once, for systems where they come out of one evaluation.
    fn f1_f2(&self, t: f64, z: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((self.f1(t, z)?, self.f2(t, z)?))
    }

    /// `D_z F1` by central differences with step `1e-6·max(1, |z_j|)`.
    fn dz_f1(&self, t: f64, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        central_jacobian(|p| self.f1(t, p), z, 1e-6)
    }
}

pub(crate) fn central_jacobian<F>(f: F, z: &DVector<f64>, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = z.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let h = rel_step * z[j].abs().max(1.0);
        let mut plus = z.clone();
        let mut minus = z.clone();
        plus[j] += h;
        minus[j] -= h;
        cols.push((f(&plus)? - f(&minus)?) / (2.0 * h));
    }
    Ok(DMatrix::from_columns(&cols))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub initial_panels: usize,
    pub max_doublings: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { initial_panels: 256, max_doublings: 4, rel_tol: 1e-10 }
    }
}

/// Composite Simpson weights for `n` panels (n even), divided by the period.
fn simpson_mean(values: &[DVector<f64>], n: usize) -> DVector<f64> {
    let mut acc = &values[0] + &values[n];
    for (j, v) in values.iter().enumerate().take(n).skip(1) {
        acc += v * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc / (3.0 * n as f64)
}

fn refine<F>(cfg: &QuadratureConfig, mut level: F) -> Result<DVector<f64>>
where
    F: FnMut(usize) -> Result<(DVector<f64>, f64)>,
{
    let mut n = cfg.initial_panels.max(2);
    n += n % 2;
    let (mut prev, _) = level(n)?;
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_doublings {
        n *= 2;
        let (next, scale) = level(n)?;
        change = (&next - &prev).amax();
        if change <= cfg.rel_tol * scale.max(next.amax()) {
            return Ok(next);
        }
        prev = next;
    }
    if cfg.max_doublings == 0 {
        return Ok(prev);
    }
    Err(Error::Quadrature { doublings: cfg.max_doublings, change, tolerance: cfg.rel_tol })
}

fn grid(period: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |j| period * j as f64 / n as f64)
}

pub fn average_first<S: PeriodicSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    cfg: &QuadratureConfig,
) -> Result<DVector<f64>> {
    refine(cfg, |n| {
        let values = grid(sys.period(), n).map(|t| sys.f1(t, z)).collect::<Result<Vec<_>>>()?;
        let scale = values.iter().map(|v| v.amax()).fold(0.0, f64::max);
        Ok((simpson_mean(&values, n), scale))
    })
}

/// Samples of `∫₀ᵗ f` at `t_j = jT/n`, `j = 0..=n`, from the trigonometric
/// interpolant of the periodic samples `f(t_0) … f(t_{n-1})`.
fn spectral_antiderivative(samples: &[f64], period: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let mean = buf[0].re / n as f64;
    let omega = TAU / period;
    let mut offset = Complex64::new(0.0, 0.0);
    for (j, c) in buf.iter_mut().enumerate() {
        let nu = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        *c = if j == 0 || (n.is_multiple_of(2) && j == n / 2) {
            Complex64::new(0.0, 0.0)
        } else {
            *c / (n as f64 * Complex64::new(0.0, nu * omega))
        };
        offset += *c;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> =
        buf.iter().enumerate().map(|(j, c)| (c - offset).re + mean * period * j as f64 / n as f64).collect();
    out.push(mean * period);
    out
}

pub fn average_second<S: PeriodicSystem + ?Sized>(
    sys: &S,
    z: &DVector<f64>,
    cfg: &QuadratureConfig,
) -> Result<DVector<f64>> {
    let dim = sys.dim();
    let period = sys.period();
    let mut planner = FftPlanner::new();
    refine(cfg, |n| {
        let mut f1s = Vec::with_capacity(n + 1);
        let mut f2s = Vec::with_capacity(n + 1);
        let mut jacs = Vec::with_capacity(n + 1);
        for t in grid(period, n) {
            let (a, b) = sys.f1_f2(t, z)?;
            f1s.push(a);
            f2s.push(b);
            jacs.push(sys.dz_f1(t, z)?);
        }
        let y1: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let comp: Vec<f64> = f1s[..n].iter().map(|v| v[i]).collect();
                spectral_antiderivative(&comp, period, &mut planner)
            })
            .collect();
        let integrand: Vec<DVector<f64>> = (0..=n)
            .map(|j| {
                let y = DVector::from_fn(dim, |i, _| y1[i][j]);
                &jacs[j] * y + &f2s[j]
            })
            .collect();
        let scale = integrand.iter().map(|v| v.amax()).fold(0.0, f64::max);
        Ok((simpson_mean(&integrand, n), scale))
    })
}

/// The food chain in normal form, `(r, w)' = ε F1(θ, r, w) + ε² F2(θ, r, w)`.
pub struct NormalFormSystem {
    series: SeriesExpansion,
}

impl NormalFormSystem {
    pub fn new(setup: &HopfSetup) -> Result<Self> {
        Ok(NormalFormSystem { series: SeriesExpansion::new(setup)? })
    }

    pub fn setup(&self) -> &HopfSetup {
        self.series.setup()
    }
}

impl PeriodicSystem for NormalFormSystem {
    fn dim(&self) -> usize {
        2
    }

    fn f1(&self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.f1_f2(t, z)?.0)
    }

    fn f2(&self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.f1_f2(t, z)?.1)
    }

    fn f1_f2(&self, t: f64, z: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let c = self.series.coefficients(t, z[0], z[1])?;
        Ok((DVector::from_vec(vec![c.f11, c.f12]), DVector::from_vec(vec![c.f21, c.f22])))
    }

    // F1 is a quadratic form in (r, w), so central differences are exact up
    // to rounding and a wide step keeps rounding small.
    fn dz_f1(&self, t: f64, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        central_jacobian(|p| self.f1(t, p), z, 1e-3)
    }
}

/// A planar averaged function whose zeros predict limit cycles.
pub trait AveragedField {
    fn eval(&self, z: Vector2<f64>) -> Result<Vector2<f64>>;

    fn jacobian(&self, z: Vector2<f64>) -> Result<Matrix2<f64>> {
        let d = central_jacobian(
            |p| Ok(DVector::from_column_slice(self.eval(Vector2::new(p[0], p[1]))?.as_slice())),
            &DVector::from_column_slice(z.as_slice()),
            1e-6,
        )?;
        Ok(Matrix2::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]))
    }
}

/// `F20` computed by quadrature from the coordinate pipeline.
pub struct NumericalField {
    pub system: NormalFormSystem,
    pub quadrature: QuadratureConfig,
}

impl NumericalField {
    pub fn new(setup: &HopfSetup) -> Result<Self> {
        Ok(NumericalField { system: NormalFormSystem::new(setup)?, quadrature: QuadratureConfig::default() })
    }

    pub fn first_order(&self, z: Vector2<f64>) -> Result<Vector2<f64>> {
        let v = average_first(&self.system, &DVector::from_column_slice(z.as_slice()), &self.quadrature)?;
        Ok(Vector2::new(v[0], v[1]))
    }
}

impl AveragedField for NumericalField {
    fn eval(&self, z: Vector2<f64>) -> Result<Vector2<f64>> {
        let v = average_second(&self.system, &DVector::from_column_slice(z.as_slice()), &self.quadrature)?;
        Ok(Vector2::new(v[0], v[1]))
    }
}

/// Closed-form `F20 = (F201, F202)`:
/// `F201 = c1 r (α w² − β γ − β δ r²)`, `F202 = c2 w (μ − ν r² − κ w²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormField {
    c1: f64,
    alpha: f64,
    beta_gamma: f64,
    beta_delta: f64,
    c2: f64,
    mu: f64,
    nu: f64,
    kappa: f64,
}

impl ClosedFormField {
    pub fn new(setup: &HopfSetup) -> Result<Self> {
        setup.validate()?;
        let HopfSetup { a1, a2, b1, b2, d1, l, m, .. } = *setup;
        let q = setup.l3_margin();
        let nn = (a1 * b1 / ((a1 - d1).powi(2) * q)).sqrt();
        let beta = a1.powi(3) * b1 * b1 * d1;
        Ok(ClosedFormField {
            c1: nn / (2.0 * SQRT_2 * a1.powi(4) * b1.powi(4) * d1),
            alpha: 2.0 * (a1 - d1).powi(2) * q * (b1 * a1.powi(3) - b1 * d1 * a1 * a1 - 4.0 * a2 * b2 * d1 * d1),
            beta_gamma: beta * 4.0 * a1 * l * b1 * b1,
            beta_delta: beta * d1 * (d1 - a1),
            c2: -SQRT_2 / (a1.powi(5) * b1.powi(5)) * (a1 - d1).powi(2) * q * nn.powi(3),
            mu: a1.powi(4) * m * b1.powi(4),
            nu: 6.0 * a1 * a2 * b2 * d1.powi(3) * b1,
            kappa: 2.0 * a2 * b2 * (a1 - d1).powi(2) * d1 * q,
        })
    }
}

impl AveragedField for ClosedFormField {
    fn eval(&self, z: Vector2<f64>) -> Result<Vector2<f64>> {
        let (r, w) = (z[0], z[1]);
        Ok(Vector2::new(
            self.c1 * r * (self.alpha * w * w - self.beta_gamma - self.beta_delta * r * r),
            self.c2 * w * (self.mu - self.nu * r * r - self.kappa * w * w),
        ))
    }

    fn jacobian(&self, z: Vector2<f64>) -> Result<Matrix2<f64>> {
        let (r, w) = (z[0], z[1]);
        Ok(Matrix2::new(
            self.c1 * (self.alpha * w * w - self.beta_gamma - 3.0 * self.beta_delta * r * r),
            self.c1 * 2.0 * self.alpha * r * w,
            -self.c2 * 2.0 * self.nu * r * w,
            self.c2 * (self.mu - self.nu * r * r - 3.0 * self.kappa * w * w),
        ))
    }
}

pub fn closed_f20(setup: &HopfSetup, r: f64, w: f64) -> Result<Vector2<f64>> {
    ClosedFormField::new(setup)?.eval(Vector2::new(r, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub max_halvings: u32,
    pub step_tol: f64,
    pub dedup_tol: f64,
    /// A zero is simple when `|det J| > simple_tol · ‖J‖²_F`.
    pub simple_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { max_iterations: 100, max_halvings: 20, step_tol: 1e-12, dedup_tol: 1e-6, simple_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedZero {
    pub point: [f64; 2],
    pub residual: f64,
    pub jacobian: [[f64; 2]; 2],
    pub determinant: f64,
    pub simple: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: [f64; 2],
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub zeros: Vec<AveragedZero>,
    pub failures: Vec<SeedFailure>,
}

/// Damped Newton from one seed.
pub fn newton_zero<F: AveragedField + ?Sized>(
    field: &F,
    seed: Vector2<f64>,
    cfg: &NewtonConfig,
) -> Result<AveragedZero> {
    let mut z = seed;
    let mut fz = field.eval(z)?;
    for it in 0..cfg.max_iterations {
        let j = field.jacobian(z)?;
        let det = j.determinant();
        let inv = match j.try_inverse() {
            Some(inv) if det != 0.0 => inv,
            _ => return Err(Error::DegenerateJacobian { det }),
        };
        let step = -(inv * fz);
        // Residuals are compared in Newton-corrected form `J⁻¹F`, which is
        // insensitive to the very different scales of the two components.
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = z + step * lambda;
            if let Ok(ft) = field.eval(trial) {
                if (inv * ft).norm() < step.norm() || ft.norm() == 0.0 {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let small_step = step.amax() <= cfg.step_tol * z.amax().max(1.0);
        match accepted {
            Some((zn, fnew)) => {
                z = zn;
                fz = fnew;
            }
            None if small_step => {}
            None => return Err(Error::NonConvergence(format!("line search stalled at {:?}", z.as_slice()))),
        }
        if small_step || fz.norm() == 0.0 {
            let j = field.jacobian(z)?;
            let det = j.determinant();
            let scale = j.norm_squared();
            return Ok(AveragedZero {
                point: [z[0], z[1]],
                residual: fz.amax(),
                jacobian: [[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]],
                determinant: det,
                simple: det.abs() > cfg.simple_tol * scale,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NonConvergence(format!("no convergence in {} iterations", cfg.max_iterations)))
}

/// Newton from every seed, keeping distinct converged zeros.
pub fn find_zeros<F: AveragedField + ?Sized>(field: &F, seeds: &[Vector2<f64>], cfg: &NewtonConfig) -> ZeroReport {
    let mut report = ZeroReport::default();
    for seed in seeds {
        match newton_zero(field, *seed, cfg) {
            Ok(zero) => {
                let p = Vector2::from(zero.point);
                let dup = report
                    .zeros
                    .iter()
                    .any(|q| (Vector2::from(q.point) - p).amax() <= cfg.dedup_tol * p.amax().max(1.0));
                if !dup {
                    report.zeros.push(zero);
                }
            }
            Err(e) => report.failures.push(SeedFailure { seed: [seed[0], seed[1]], reason: e.to_string() }),
        }
    }
    report
}

/// Centres of grid cells on whose corners both components change sign.
pub fn sign_change_seeds<F: AveragedField + ?Sized>(
    field: &F,
    r_range: (f64, f64),
    w_range: (f64, f64),
    cells: (usize, usize),
) -> Result<Vec<Vector2<f64>>> {
    let (nr, nw) = (cells.0.max(1), cells.1.max(1));
    let r_at = |i: usize| r_range.0 + (r_range.1 - r_range.0) * i as f64 / nr as f64;
    let w_at = |j: usize| w_range.0 + (w_range.1 - w_range.0) * j as f64 / nw as f64;
    let mut values = vec![vec![Vector2::zeros(); nw + 1]; nr + 1];
    for (i, row) in values.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = field.eval(Vector2::new(r_at(i), w_at(j)))?;
        }
    }
    let mut seeds = Vec::new();
    for i in 0..nr {
        for j in 0..nw {
            let corners = [values[i][j], values[i + 1][j], values[i][j + 1], values[i + 1][j + 1]];
            let changes = |k: usize| {
                let lo = corners.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            };
            if changes(0) && changes(1) {
                seeds.push(Vector2::new(0.5 * (r_at(i) + r_at(i + 1)), 0.5 * (w_at(j) + w_at(j + 1))));
            }
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Toy;

    impl PeriodicSystem for Toy {
        fn dim(&self) -> usize {
            1
        }
        fn f1(&self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, z[0] * t.sin().powi(2)))
        }
        fn f2(&self, t: f64, _z: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, t.cos()))
        }
    }

    #[test]
    fn toy_averages() {
        let cfg = QuadratureConfig::default();
        let z = DVector::from_element(1, 3.0);
        assert!((average_first(&Toy, &z, &cfg).unwrap()[0] - 1.5).abs() < 1e-12);
        // y1 = z (t/2 − sin 2t / 4); D_z F1 = sin² t.
        // (1/2π) ∫ sin² t · z (t/2 − sin 2t/4) dt = z (π/4 − 0) / 2 ... computed below.
        let expected = {
            let n = 200_000;
            let h = TAU / n as f64;
            (0..n)
                .map(|j| {
                    let t = (j as f64 + 0.5) * h;
                    t.sin().powi(2) * 3.0 * (t / 2.0 - (2.0 * t).sin() / 4.0)
                })
                .sum::<f64>()
                * h
                / TAU
        };
        let got = average_second(&Toy, &z, &cfg).unwrap()[0];
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn spectral_antiderivative_of_cosine() {
        let n = 64;
        let samples: Vec<f64> = (0..n).map(|j| 1.0 + (TAU * j as f64 / n as f64).cos()).collect();
        let y = spectral_antiderivative(&samples, TAU, &mut FftPlanner::new());
        for (j, v) in y.iter().enumerate() {
            let t = TAU * j as f64 / n as f64;
            assert!((v - (t + t.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_jacobian_matches_differences() {
        let f = ClosedFormField::new(&HopfSetup::EXAMPLE).unwrap();
        for &(r, w) in &[(1.0, 0.5), (200.0, -3.0), (30.0, 10.0)] {
            let z = Vector2::new(r, w);
            let analytic = f.jacobian(z).unwrap();
            let h = 1e-5;
            let fd_r = (f.eval(z + Vector2::new(h * r, 0.0)).unwrap() - f.eval(z - Vector2::new(h * r, 0.0)).unwrap())
                / (2.0 * h * r);
            let hw = h * w.abs().max(1.0);
            let fd_w =
                (f.eval(z + Vector2::new(0.0, hw)).unwrap() - f.eval(z - Vector2::new(0.0, hw)).unwrap()) / (2.0 * hw);
            let fd = Matrix2::from_columns(&[fd_r, fd_w]);
            assert!((analytic - fd).amax() <= 1e-6 * analytic.amax());
        }
    }

    #[test]
    fn closed_form_parity() {
        let f = ClosedFormField::new(&HopfSetup::EXAMPLE).unwrap();
        let a = f.eval(Vector2::new(3.0, 2.0)).unwrap();
        let b = f.eval(Vector2::new(3.0, -2.0)).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], -b[1]);
    }

    #[test]
    fn newton_finds_planar_zero() {
        let s = HopfSetup { l: 500.0, ..HopfSetup::EXAMPLE };
        let f = ClosedFormField::new(&s).unwrap();
        let z = newton_zero(&f, Vector2::new(150.0, 0.0), &NewtonConfig::default()).unwrap();
        assert!((z.point[0] - 221.16).abs() < 5e-3);
        assert_eq!(z.point[1], 0.0);
        assert!(z.simple);
    }
}
