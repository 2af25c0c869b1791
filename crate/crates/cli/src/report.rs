//! Report types emitted by the commands. Each serializes to the JSON printed
//! under `--json` and reads back from it unchanged.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tritrophic_hopf::averaging::AveragedZero;
use tritrophic_hopf::cycles::{Branch, CyclePrediction, HalfSpace, Stability};
use tritrophic_hopf::dynamics::ScanEntry;
use tritrophic_hopf::equilibria::Equilibrium;
use tritrophic_hopf::hopf::{DerivedConstants, SpectrumAtP3};
use tritrophic_hopf::{HopfSetup, ModelParams, StateVec};

pub trait Render {
    fn render(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriaReport {
    pub setup: Option<HopfSetup>,
    pub params: ModelParams,
    pub equilibria: Vec<Equilibrium>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSpectrum {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub setup: Option<HopfSetup>,
    pub params: ModelParams,
    pub p3: Option<StateVec>,
    pub spectrum: SpectrumAtP3,
    pub expected: Option<ExpectedSpectrum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintsReport {
    pub setup: HopfSetup,
    pub derived: DerivedConstants,
    pub d2_condition_form: f64,
    pub d2_reduced_form: f64,
    pub params: ModelParams,
    pub p3: StateVec,
    pub spectrum: SpectrumAtP3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub r_range: (f64, f64),
    pub w_range: (f64, f64),
    pub cells: (usize, usize),
    pub seeds: usize,
    pub zeros: Vec<AveragedZero>,
    /// Zeros with `r > 0` that match no closed-form prediction.
    pub extra_zeros: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub setup: HopfSetup,
    /// Sign of `dθ/dt`; real-time eigenvalues are the θ-time ones times this.
    pub time_orientation: f64,
    pub predictions: Vec<CyclePrediction>,
    pub grid_scan: Option<GridScan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleScan {
    pub branch: Branch,
    pub predicted_stability: Option<Stability>,
    pub half_space: Option<HalfSpace>,
    pub entries: Vec<ScanEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub setup: HopfSetup,
    pub epsilons: Vec<f64>,
    pub cycles: Vec<CycleScan>,
    pub trajectories: Vec<String>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.cycles.iter().flat_map(|c| &c.entries).filter(|e| e.record.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub computed: Option<f64>,
    pub reference: f64,
    pub tolerance: f64,
    pub agree: bool,
}

impl Comparison {
    pub fn new(quantity: impl Into<String>, computed: Option<f64>, reference: f64, tolerance: f64) -> Self {
        let agree = computed.is_some_and(|c| (c - reference).abs() <= tolerance);
        Comparison { quantity: quantity.into(), computed, reference, tolerance, agree }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRun {
    pub setup: HopfSetup,
    pub predictions: Vec<CyclePrediction>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub setup: HopfSetup,
    pub derived: DerivedConstants,
    pub margin: f64,
    pub constants: Vec<Comparison>,
    pub example: ExampleRun,
    /// Same base parameters with `l = 500`.
    pub variant: ExampleRun,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpReport {
    pub setup: HopfSetup,
    pub field: String,
    pub path: String,
    pub rows: usize,
    pub failed: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.6}"))
}

fn eigs(e: &Option<[Complex64; 2]>) -> String {
    match e {
        Some([a, b]) if a.im == 0.0 && b.im == 0.0 => format!("({:.4}, {:.4})", a.re, b.re),
        Some([a, b]) => format!("({:.4}{:+.4}i, {:.4}{:+.4}i)", a.re, a.im, b.re, b.im),
        None => "-".into(),
    }
}

fn state(s: &StateVec) -> String {
    format!("({:.6}, {:.6}, {:.6})", s.x, s.y, s.z)
}

fn params_line(out: &mut String, p: &ModelParams) {
    let _ = writeln!(
        out,
        "parameters: a1={} a2={} b1={} b2={} d1={} d2={:.6} k={:.6} rho={:.6}",
        p.a1, p.a2, p.b1, p.b2, p.d1, p.d2, p.k, p.rho
    );
}

impl Render for EquilibriaReport {
    fn render(&self) -> String {
        let mut out = String::new();
        params_line(&mut out, &self.params);
        let _ = writeln!(out, "{:<5} {:<7} {:<42} residual / reason", "point", "exists", "state");
        for e in &self.equilibria {
            let label = format!("{:?}", e.label).to_lowercase();
            match (&e.state, e.residual) {
                (Some(s), Some(r)) => {
                    let _ = writeln!(out, "{label:<5} {:<7} {:<42} {r:.3e}", "yes", state(s));
                }
                _ => {
                    let _ = writeln!(out, "{label:<5} {:<7} {:<42} {}", "no", "-", e.reason.as_deref().unwrap_or(""));
                }
            }
        }
        out
    }
}

impl Render for SpectrumReport {
    fn render(&self) -> String {
        let mut out = String::new();
        params_line(&mut out, &self.params);
        if let Some(p3) = &self.p3 {
            let _ = writeln!(out, "p3 = {}", state(p3));
        }
        let s = &self.spectrum;
        let _ = writeln!(out, "lambda+ = {:.10} {:+.10}i", s.lambda_plus.re, s.lambda_plus.im);
        let _ = writeln!(out, "lambda- = {:.10} {:+.10}i", s.lambda_minus.re, s.lambda_minus.im);
        let _ = writeln!(out, "mu      = {:.10}", s.mu);
        let _ = writeln!(out, "Delta   = {:.6e}", s.delta);
        if let Some(e) = &self.expected {
            let _ = writeln!(
                out,
                "unfolding predicts Re(lambda) = {:.10}, |Im(lambda)| = {:.10}, mu = {:.10}",
                e.lambda_plus.re,
                e.lambda_plus.im.abs(),
                e.mu
            );
        }
        out
    }
}

impl Render for ConstraintsReport {
    fn render(&self) -> String {
        let mut out = String::new();
        let d = &self.derived;
        let _ = writeln!(out, "d2  = {:.10}", d.d2);
        let _ = writeln!(out, "rho = {:.10}", d.rho);
        let _ = writeln!(out, "k   = {:.10}", d.k);
        let _ = writeln!(out, "E   = {:.10}", d.e_aux);
        let _ = writeln!(out, "a1*b1 - 2*b2*d1 = {:.10}", d.l3_margin);
        let _ = writeln!(
            out,
            "d2 from the two algebraic forms: {:.15} / {:.15}",
            self.d2_condition_form, self.d2_reduced_form
        );
        let _ = writeln!(out, "p3 = {}", state(&self.p3));
        let s = &self.spectrum;
        let _ = writeln!(
            out,
            "spectrum at p3: {:.6e} ± {:.6}i, mu = {:.6e}",
            s.lambda_plus.re,
            s.lambda_plus.im.abs(),
            s.mu
        );
        out
    }
}

fn predictions_table(out: &mut String, preds: &[CyclePrediction]) {
    let _ = writeln!(
        out,
        "{:<8} {:<7} {:<26} {:<26} {:<24} {:<24} {:<13} half-space",
        "branch",
        "exists",
        "closed form (r, w)",
        "refined zero (r, w)",
        "theta-time eigenvalues",
        "real-time eigenvalues",
        "stability"
    );
    for p in preds {
        let branch = format!("{:?}", p.branch);
        if !p.exists {
            let _ = writeln!(
                out,
                "{branch:<8} {:<7} radicand {} <= 0 (R1 = {:.4e}, R2 = {:.4e}, W2 = {:.4e})",
                "no",
                p.missing_radicand.as_deref().unwrap_or("?"),
                p.radicands.r1,
                p.radicands.r2,
                p.radicands.w2
            );
            continue;
        }
        let pair = |v: Option<[f64; 2]>| v.map_or("-".into(), |z| format!("({:.4}, {:.4})", z[0], z[1]));
        let _ = writeln!(
            out,
            "{branch:<8} {:<7} {:<26} {:<26} {:<24} {:<24} {:<13} {}",
            "yes",
            pair(p.closed_form),
            pair(p.zero),
            eigs(&p.eigenvalues),
            eigs(&p.oriented_eigenvalues),
            p.stability.map_or("-".into(), |s| s.to_string()),
            p.half_space.map_or("-".into(), |h| h.to_string()),
        );
        if let Some(note) = &p.note {
            let _ = writeln!(out, "         note: {note}");
        }
    }
}

impl Render for PredictReport {
    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "time orientation sign(dθ/dt) = {}", self.time_orientation);
        predictions_table(&mut out, &self.predictions);
        if let Some(g) = &self.grid_scan {
            let _ = writeln!(
                out,
                "grid scan over r in [{}, {}], w in [{}, {}] ({} x {} cells): {} seeds, {} zeros with r > 0, {} beyond the predictions",
                g.r_range.0,
                g.r_range.1,
                g.w_range.0,
                g.w_range.1,
                g.cells.0,
                g.cells.1,
                g.seeds,
                g.zeros.iter().filter(|z| z.point[0] > 0.0).count(),
                g.extra_zeros
            );
        }
        out
    }
}

impl Render for VerifyReport {
    fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.cycles {
            let _ = writeln!(
                out,
                "{:?} cycle (predicted {}, {})",
                c.branch,
                c.predicted_stability.map_or("-".into(), |s| s.to_string()),
                c.half_space.map_or("-".into(), |h| h.to_string())
            );
            let _ = writeln!(
                out,
                "  {:<10} {:<12} {:<10} {:<8} {:<8} {:<26} {:<13} z range",
                "epsilon", "distance", "period", "order", "ratio", "multipliers", "Floquet"
            );
            for e in &c.entries {
                match &e.record {
                    Some(r) => {
                        let mults =
                            r.nontrivial_multipliers
                                .iter()
                                .map(|m| {
                                    if m.im == 0.0 {
                                        format!("{:.6}", m.re)
                                    } else {
                                        format!("{:.4}{:+.4}i", m.re, m.im)
                                    }
                                })
                                .collect::<Vec<_>>()
                                .join(", ");
                        let _ = writeln!(
                            out,
                            "  {:<10} {:<12.4e} {:<10.6} {:<8} {:<8} {:<26} {:<13} [{:.3e}, {:.3e}]",
                            e.epsilon,
                            r.prediction_distance,
                            r.period,
                            e.order.map_or("-".into(), |o| format!("{o:.3}")),
                            e.halving_ratio.map_or("-".into(), |o| format!("{o:.3}")),
                            mults,
                            r.stability.to_string(),
                            r.z_min,
                            r.z_max
                        );
                    }
                    None => {
                        let _ = writeln!(out, "  {:<10} failed: {}", e.epsilon, e.error.as_deref().unwrap_or("?"));
                    }
                }
            }
        }
        for t in &self.trajectories {
            let _ = writeln!(out, "wrote {t}");
        }
        out
    }
}

fn comparisons(out: &mut String, rows: &[Comparison]) {
    let _ = writeln!(out, "  {:<34} {:<14} {:<10} agree", "quantity", "computed", "reference");
    for c in rows {
        let _ = writeln!(
            out,
            "  {:<34} {:<14} {:<10} {}",
            c.quantity,
            opt(c.computed),
            c.reference,
            if c.agree { "yes" } else { "NO" }
        );
    }
}

impl Render for ReproduceReport {
    fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.setup;
        let _ =
            writeln!(out, "inputs: a1={} a2={} b1={} b2={} d1={} l={} m={}", s.a1, s.a2, s.b1, s.b2, s.d1, s.l, s.m);
        let _ = writeln!(out, "derived constants");
        comparisons(&mut out, &self.constants);
        for run in [&self.example, &self.variant] {
            let _ = writeln!(out, "\naveraged zeros at l = {}", run.setup.l);
            predictions_table(&mut out, &run.predictions);
            comparisons(&mut out, &run.comparisons);
        }
        if !self.notes.is_empty() {
            let _ = writeln!(out);
            for n in &self.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        out
    }
}

impl Render for DumpReport {
    fn render(&self) -> String {
        format!(
            "wrote {} rows of the {} averaged field to {} ({} failed)\n",
            self.rows, self.field, self.path, self.failed
        )
    }
}
