//! Flat JSON run configuration.
//!
//! A config names either the raw model parameters
//! (`a1 a2 b1 b2 d1 d2 k rho`) or a Hopf setup (`a1 a2 b1 b2 d1 l m`, optional
//! `epsilon`), never both. Remaining keys are command options.

use std::path::Path;

use serde_json::{Map, Value};
use tritrophic_hopf::{HopfSetup, ModelParams};

use crate::error::{CliError, CliResult};

const SHARED: [&str; 5] = ["a1", "a2", "b1", "b2", "d1"];
const MODEL_ONLY: [&str; 3] = ["d2", "k", "rho"];
const SETUP_ONLY: [&str; 2] = ["l", "m"];
const OPTIONS: [&str; 11] =
    ["epsilon", "epsilons", "rtol", "atol", "max_steps", "r_min", "r_max", "w_min", "w_max", "nr", "nw"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Model(ModelParams),
    Setup(HopfSetup),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub epsilons: Option<Vec<f64>>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_steps: Option<usize>,
    pub r_range: Option<(f64, f64)>,
    pub w_range: Option<(f64, f64)>,
    pub grid: Option<(usize, usize)>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(map) = value else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        for key in map.keys() {
            let known = SHARED.contains(&key.as_str())
                || MODEL_ONLY.contains(&key.as_str())
                || SETUP_ONLY.contains(&key.as_str())
                || OPTIONS.contains(&key.as_str());
            if !known {
                return Err(CliError::Config(format!("unknown field `{key}`")));
            }
        }

        let has_model = MODEL_ONLY.iter().any(|k| map.contains_key(*k));
        let has_setup = SETUP_ONLY.iter().any(|k| map.contains_key(*k));
        let source = match (has_model, has_setup) {
            (true, true) => {
                return Err(CliError::Config(
                    "config mixes model parameters (d2, k, rho) with a Hopf setup (l, m); give exactly one".into(),
                ))
            }
            (true, false) => {
                if map.contains_key("epsilon") {
                    return Err(CliError::Config(
                        "field `epsilon` belongs to a Hopf setup, not to model parameters".into(),
                    ));
                }
                Source::Model(ModelParams {
                    a1: number(&map, "a1")?,
                    a2: number(&map, "a2")?,
                    b1: number(&map, "b1")?,
                    b2: number(&map, "b2")?,
                    d1: number(&map, "d1")?,
                    d2: number(&map, "d2")?,
                    k: number(&map, "k")?,
                    rho: number(&map, "rho")?,
                })
            }
            (false, _) => Source::Setup(HopfSetup {
                a1: number(&map, "a1")?,
                a2: number(&map, "a2")?,
                b1: number(&map, "b1")?,
                b2: number(&map, "b2")?,
                d1: number(&map, "d1")?,
                l: number(&map, "l")?,
                m: number(&map, "m")?,
                epsilon: optional_number(&map, "epsilon")?.unwrap_or(0.0),
            }),
        };

        let epsilons = match map.get("epsilons") {
            None => None,
            Some(Value::Array(items)) => Some(
                items
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| CliError::Config("field `epsilons` must hold numbers".into())))
                    .collect::<CliResult<Vec<f64>>>()?,
            ),
            Some(_) => return Err(CliError::Config("field `epsilons` must be an array".into())),
        };
        let pair = |lo: &str, hi: &str| -> CliResult<Option<(f64, f64)>> {
            match (optional_number(&map, lo)?, optional_number(&map, hi)?) {
                (None, None) => Ok(None),
                (Some(a), Some(b)) if a < b => Ok(Some((a, b))),
                (Some(_), Some(_)) => Err(CliError::Config(format!("`{lo}` must be below `{hi}`"))),
                (None, Some(_)) => Err(missing(lo)),
                (Some(_), None) => Err(missing(hi)),
            }
        };
        let grid = match (optional_count(&map, "nr")?, optional_count(&map, "nw")?) {
            (None, None) => None,
            (nr, nw) => Some((nr.unwrap_or(200), nw.unwrap_or(100))),
        };

        Ok(RunConfig {
            source,
            epsilons,
            rtol: optional_number(&map, "rtol")?,
            atol: optional_number(&map, "atol")?,
            max_steps: optional_count(&map, "max_steps")?,
            r_range: pair("r_min", "r_max")?,
            w_range: pair("w_min", "w_max")?,
            grid,
        })
    }

    pub fn setup(&self, command: &str) -> CliResult<HopfSetup> {
        match self.source {
            Source::Setup(s) => Ok(s),
            Source::Model(_) => Err(CliError::Config(format!(
                "`{command}` needs a Hopf setup (a1, a2, b1, b2, d1, l, m); the config gives model parameters"
            ))),
        }
    }
}

fn missing(name: &str) -> CliError {
    CliError::Config(format!("missing field `{name}`"))
}

fn number(map: &Map<String, Value>, name: &str) -> CliResult<f64> {
    optional_number(map, name)?.ok_or_else(|| missing(name))
}

fn optional_number(map: &Map<String, Value>, name: &str) -> CliResult<Option<f64>> {
    match map.get(name) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("field `{name}` must be a finite number"))),
    }
}

fn optional_count(map: &Map<String, Value>, name: &str) -> CliResult<Option<usize>> {
    match map.get(name) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .filter(|&n| n > 0)
            .map(|n| Some(n as usize))
            .ok_or_else(|| CliError::Config(format!("field `{name}` must be a positive integer"))),
    }
}
