use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use rayon::prelude::*;
use tritrophic_hopf::averaging::{
    find_zeros, sign_change_seeds, AveragedField, ClosedFormField, NewtonConfig, NumericalField,
};
use tritrophic_hopf::cycles::{predict_cycles, time_orientation, Branch, CyclePrediction};
use tritrophic_hopf::dynamics::{
    integrate, order_table, poincare_verify, IntegratorConfig, ShootingConfig, DEFAULT_EPSILON_SCAN,
};
use tritrophic_hopf::equilibria::{all_equilibria, p3_state};
use tritrophic_hopf::hopf::{
    constrained_p3, d2_condition_form, d2_reduced_form, derived_constants, expected_constrained_spectrum,
    solve_constraints, spectrum_p3,
};
use tritrophic_hopf::{HopfSetup, ModelParams};

use crate::config::{RunConfig, Source};
use crate::error::{CliError, CliResult};
use crate::report::*;

const DEFAULT_R_RANGE: (f64, f64) = (0.1, 400.0);
const DEFAULT_W_RANGE: (f64, f64) = (-100.0, 100.0);
const DEFAULT_SCAN_CELLS: (usize, usize) = (400, 200);
const DEFAULT_DUMP_GRID: (usize, usize) = (200, 100);

/// Reference values for the worked example, at their stated precision.
mod reference {
    pub const D2: f64 = 0.09;
    pub const RHO: f64 = 27.74;
    pub const K: f64 = 0.13;
    pub const MARGIN: f64 = 13.4;
    pub const R1: f64 = 221.16;
    pub const R2: f64 = 207.24;
    pub const W2: f64 = 39.0;
    pub const PLANAR_EIGS: [f64; 2] = [-154.96, -0.32];
    pub const OFF_PLANE_EIGS: [f64; 2] = [-135.14, -0.29];
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub threads: Option<usize>,
}

impl Options {
    /// Maps `f` over `items`, on a pool of `threads` workers when requested.
    /// Output order matches input order either way.
    fn fan_out<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> CliResult<Vec<R>> {
        match self.threads {
            None => Ok(items.iter().map(f).collect()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))?;
                Ok(pool.install(|| items.par_iter().map(f).collect()))
            }
        }
    }
}

fn model_of(cfg: &RunConfig) -> CliResult<(Option<HopfSetup>, ModelParams)> {
    match cfg.source {
        Source::Model(p) => {
            p.validate()?;
            Ok((None, p))
        }
        Source::Setup(s) => Ok((Some(s), solve_constraints(&s)?)),
    }
}

fn integrator(cfg: &RunConfig) -> CliResult<IntegratorConfig> {
    let mut ic = IntegratorConfig::default();
    if let Some(r) = cfg.rtol {
        ic.rtol = r;
    }
    if let Some(a) = cfg.atol {
        ic.atol = a;
    }
    if let Some(m) = cfg.max_steps {
        ic.max_steps = m;
    }
    ic.validate()?;
    Ok(ic)
}

pub fn equilibria(cfg: &RunConfig) -> CliResult<EquilibriaReport> {
    let (setup, params) = model_of(cfg)?;
    Ok(EquilibriaReport { setup, params, equilibria: all_equilibria(&params) })
}

pub fn spectrum(cfg: &RunConfig) -> CliResult<SpectrumReport> {
    let (setup, params) = model_of(cfg)?;
    let spectrum = spectrum_p3(&params)?;
    let expected = setup.map(|s| {
        let (lambda_plus, lambda_minus, mu) = expected_constrained_spectrum(&s);
        ExpectedSpectrum { lambda_plus, lambda_minus, mu }
    });
    Ok(SpectrumReport { setup, params, p3: p3_state(&params), spectrum, expected })
}

pub fn constraints(cfg: &RunConfig) -> CliResult<ConstraintsReport> {
    let setup = cfg.setup("constraints")?;
    let params = solve_constraints(&setup)?;
    Ok(ConstraintsReport {
        setup,
        derived: derived_constants(&setup)?,
        d2_condition_form: d2_condition_form(&setup),
        d2_reduced_form: d2_reduced_form(&setup),
        params,
        p3: constrained_p3(&setup)?,
        spectrum: spectrum_p3(&params)?,
    })
}

pub fn predict(cfg: &RunConfig, grid_scan: bool) -> CliResult<PredictReport> {
    let setup = cfg.setup("predict")?;
    let predictions = predict_cycles(&setup)?;
    let grid_scan = if grid_scan { Some(scan_for_zeros(cfg, &setup, &predictions)?) } else { None };
    Ok(PredictReport { setup, time_orientation: time_orientation(&setup), predictions, grid_scan })
}

fn scan_for_zeros(cfg: &RunConfig, setup: &HopfSetup, predictions: &[CyclePrediction]) -> CliResult<GridScan> {
    let r_range = cfg.r_range.unwrap_or(DEFAULT_R_RANGE);
    let w_range = cfg.w_range.unwrap_or(DEFAULT_W_RANGE);
    let cells = cfg.grid.unwrap_or(DEFAULT_SCAN_CELLS);
    let field = ClosedFormField::new(setup)?;
    let seeds = sign_change_seeds(&field, r_range, w_range, cells)?;
    let report = find_zeros(&field, &seeds, &NewtonConfig::default());
    let known: Vec<Vector2<f64>> = predictions.iter().filter_map(|p| p.closed_form.map(Vector2::from)).collect();
    let extra_zeros = report
        .zeros
        .iter()
        .filter(|z| z.point[0] > 0.0)
        .filter(|z| {
            let p = Vector2::from(z.point);
            !known.iter().any(|k| (k - p).amax() <= 1e-6 * k[0].abs().max(1.0))
        })
        .count();
    Ok(GridScan { r_range, w_range, cells, seeds: seeds.len(), zeros: report.zeros, extra_zeros })
}

pub fn check_epsilons(list: &[f64]) -> CliResult<()> {
    if list.is_empty() {
        return Err(CliError::Config("empty ε list".into()));
    }
    for &e in list {
        if !(e.is_finite() && e > 0.0) {
            return Err(CliError::Config(format!(
                "ε = {e} rejected: the rescaling around the bifurcation point is undefined unless ε > 0"
            )));
        }
    }
    Ok(())
}

pub fn verify(
    cfg: &RunConfig,
    epsilons: Option<Vec<f64>>,
    csv_dir: Option<&Path>,
    opts: Options,
) -> CliResult<VerifyReport> {
    let setup = cfg.setup("verify")?;
    let epsilons = epsilons.or_else(|| cfg.epsilons.clone()).unwrap_or_else(|| DEFAULT_EPSILON_SCAN.to_vec());
    check_epsilons(&epsilons)?;
    let ic = integrator(cfg)?;
    let shoot = ShootingConfig::default();
    let predictions: Vec<CyclePrediction> = predict_cycles(&setup)?.into_iter().filter(|p| p.exists).collect();

    let jobs: Vec<(usize, f64)> = (0..predictions.len()).flat_map(|i| epsilons.iter().map(move |&e| (i, e))).collect();
    let mut results =
        opts.fan_out(&jobs, |&(i, e)| poincare_verify(&setup, &predictions[i], e, &ic, &shoot))?.into_iter();

    let mut cycles = Vec::with_capacity(predictions.len());
    for pred in &predictions {
        let records: Vec<_> = results.by_ref().take(epsilons.len()).collect();
        cycles.push(CycleScan {
            branch: pred.branch,
            predicted_stability: pred.stability,
            half_space: pred.half_space,
            entries: order_table(&epsilons, records),
        });
    }

    let mut trajectories = Vec::new();
    if let Some(dir) = csv_dir {
        fs::create_dir_all(dir)?;
        let params: Vec<ModelParams> =
            epsilons.iter().map(|&e| solve_constraints(&setup.with_epsilon(e))).collect::<Result<_, _>>()?;
        for c in &cycles {
            for (entry, p) in c.entries.iter().zip(&params) {
                let Some(rec) = &entry.record else { continue };
                let traj = integrate(p, &rec.cycle_point, (0.0, rec.period), &ic)?;
                let path = dir.join(format!("cycle_{}_eps_{}.csv", branch_name(c.branch), entry.epsilon));
                let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
                traj.write_csv(&mut f)?;
                f.flush()?;
                trajectories.push(path.display().to_string());
            }
        }
        let summary = dir.join("verify.json");
        let report = VerifyReport {
            setup,
            epsilons: epsilons.clone(),
            cycles: cycles.clone(),
            trajectories: trajectories.clone(),
        };
        fs::write(&summary, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    Ok(VerifyReport { setup, epsilons, cycles, trajectories })
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Planar => "planar",
        Branch::UpperW => "upper",
        Branch::LowerW => "lower",
    }
}

fn example_run(setup: HopfSetup) -> CliResult<ExampleRun> {
    let predictions = predict_cycles(&setup)?;
    let find = |b: Branch| predictions.iter().find(|p| p.branch == b && p.exists);
    let planar = find(Branch::Planar);
    let upper = find(Branch::UpperW);
    let zero = |p: Option<&CyclePrediction>, i: usize| p.and_then(|p| p.zero.or(p.closed_form)).map(|z| z[i]);
    let eig = |p: Option<&CyclePrediction>, i: usize| -> Option<f64> {
        let e = p?.eigenvalues?;
        let mut re = [e[0].re, e[1].re];
        re.sort_by(|a, b| a.abs().total_cmp(&b.abs()).reverse());
        Some(re[i])
    };
    let comparisons = vec![
        Comparison::new("planar zero r1", zero(planar, 0), reference::R1, 0.005),
        Comparison::new("off-plane zero r2", zero(upper, 0), reference::R2, 0.01),
        Comparison::new("off-plane zero |w2|", zero(upper, 1).map(f64::abs), reference::W2, 0.5),
        Comparison::new("planar eigenvalue (fast)", eig(planar, 0), reference::PLANAR_EIGS[0], 0.005),
        Comparison::new("planar eigenvalue (slow)", eig(planar, 1), reference::PLANAR_EIGS[1], 0.005),
        Comparison::new("off-plane eigenvalue (fast)", eig(upper, 0), reference::OFF_PLANE_EIGS[0], 0.005),
        Comparison::new("off-plane eigenvalue (slow)", eig(upper, 1), reference::OFF_PLANE_EIGS[1], 0.005),
    ];
    Ok(ExampleRun { setup, predictions, comparisons })
}

pub fn reproduce_example() -> CliResult<ReproduceReport> {
    let setup = HopfSetup::EXAMPLE;
    let derived = derived_constants(&setup)?;
    let margin = setup.l3_margin();
    let constants = vec![
        Comparison::new("d2", Some(derived.d2), reference::D2, 0.005),
        Comparison::new("rho", Some(derived.rho), reference::RHO, 0.005),
        Comparison::new("k", Some(derived.k), reference::K, 0.005),
        Comparison::new("a1*b1 - 2*b2*d1", Some(margin), reference::MARGIN, 0.005),
    ];
    let example = example_run(setup)?;
    let variant = example_run(HopfSetup { l: 500.0, ..setup })?;

    let mut notes = Vec::new();
    for p in example.predictions.iter().filter(|p| !p.exists) {
        notes.push(format!(
            "at l = {} the {:?} zero does not exist: radicand {} = {:.4e}",
            setup.l,
            p.branch,
            p.missing_radicand.as_deref().unwrap_or("?"),
            match p.missing_radicand.as_deref() {
                Some("R1") => p.radicands.r1,
                Some("R2") => p.radicands.r2,
                _ => p.radicands.w2,
            }
        ));
    }
    let agreeing: Vec<&str> = variant.comparisons.iter().filter(|c| c.agree).map(|c| c.quantity.as_str()).collect();
    if !agreeing.is_empty() {
        notes.push(format!("with l = 500 the following reference values are reproduced: {}", agreeing.join(", ")));
    }
    let orient = time_orientation(&setup);
    notes.push(format!(
        "dθ/dt has sign {orient}; stability is classified from the real-time eigenvalues (θ-time eigenvalues times {orient})"
    ));
    Ok(ReproduceReport { setup, derived, margin, constants, example, variant, notes })
}

pub fn dump_field(cfg: &RunConfig, numerical: bool, csv_dir: Option<&Path>, opts: Options) -> CliResult<DumpReport> {
    let setup = cfg.setup("dump-field")?;
    let (r0, r1) = cfg.r_range.unwrap_or(DEFAULT_R_RANGE);
    let (w0, w1) = cfg.w_range.unwrap_or(DEFAULT_W_RANGE);
    let (nr, nw) = cfg.grid.unwrap_or(DEFAULT_DUMP_GRID);
    let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            vec![lo]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let rs = axis(r0, r1, nr);
    let ws = axis(w0, w1, nw);

    let field: Box<dyn AveragedField + Sync> =
        if numerical { Box::new(NumericalField::new(&setup)?) } else { Box::new(ClosedFormField::new(&setup)?) };
    let rows: Vec<Vec<Option<Vector2<f64>>>> =
        opts.fan_out(&rs, |&r| ws.iter().map(|&w| field.eval(Vector2::new(r, w)).ok()).collect())?;

    let mut body = String::from("r,w,F201,F202\n");
    let mut failed = 0;
    for (r, row) in rs.iter().zip(&rows) {
        for (w, v) in ws.iter().zip(row) {
            match v {
                Some(v) => body.push_str(&format!("{r},{w},{},{}\n", v[0], v[1])),
                None => {
                    failed += 1;
                    body.push_str(&format!("{r},{w},NaN,NaN\n"));
                }
            }
        }
    }
    let kind = if numerical { "numerical" } else { "closed-form" };
    let path: PathBuf = match csv_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("averaged_field.csv");
            fs::write(&path, &body)?;
            path
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            PathBuf::from("-")
        }
    };
    Ok(DumpReport { setup, field: kind.into(), path: path.display().to_string(), rows: rs.len() * ws.len(), failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::de::DeserializeOwned;
    use serde::Serialize;

    fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(v: &T) {
        let text = serde_json::to_string(v).unwrap();
        assert_eq!(&serde_json::from_str::<T>(&text).unwrap(), v);
    }

    fn example() -> RunConfig {
        RunConfig::parse(r#"{"a1":5,"a2":0.1,"b1":3,"b2":2,"d1":0.4,"l":500,"m":1}"#).unwrap()
    }

    #[test]
    fn reports_round_trip() {
        let cfg = example();
        round_trip(&equilibria(&cfg).unwrap());
        round_trip(&spectrum(&cfg).unwrap());
        round_trip(&constraints(&cfg).unwrap());
        round_trip(&predict(&cfg, false).unwrap());
        round_trip(&reproduce_example().unwrap());
        round_trip(&verify(&cfg, Some(vec![5e-4]), None, Options::default()).unwrap());
    }

    #[test]
    fn commands_are_deterministic() {
        let cfg = example();
        assert_eq!(predict(&cfg, true).unwrap(), predict(&cfg, true).unwrap());
    }

    #[test]
    fn epsilon_list_checks() {
        assert!(check_epsilons(&[0.01, 0.005]).is_ok());
        assert!(check_epsilons(&[]).is_err());
        assert!(check_epsilons(&[-0.01]).is_err());
        assert!(check_epsilons(&[f64::NAN]).is_err());
    }
}
