//! Flat key-value run configuration files.
//!
//! Files are TOML. Dotted keys such as `initial.kind` may be written bare,
//! quoted, or as an `[initial]` table; all spellings flatten to the same key.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use toml::Value;

use crate::error::{Error, Result};
use crate::model::{BoundaryDatum, DiffusionLaw, Geometry, InitialData, RunConfig};

pub const RUN_KEYS: &[&str] = &[
    "n",
    "R",
    "alpha",
    "kappa",
    "M",
    "initial.kind",
    "initial.mass",
    "initial.width",
    "initial.center",
    "initial.r_lo",
    "initial.r_hi",
    "cells",
    "t_end",
    "cfl_safety",
    "u_max_threshold",
    "dt_min",
    "output_stride",
    "lp",
];

pub type FlatMap = BTreeMap<String, Value>;

/// Parses TOML text into a map from dotted key to value.
pub fn flatten(text: &str) -> Result<FlatMap> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    Ok(flatten_table(table))
}

pub fn flatten_table(table: toml::Table) -> FlatMap {
    let mut out = FlatMap::new();
    flatten_into(&mut out, "", table);
    out
}

fn flatten_into(out: &mut FlatMap, prefix: &str, table: toml::Table) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten_into(out, &key, t),
            other => {
                out.insert(key, other);
            }
        }
    }
}

struct Keys<'a> {
    map: &'a FlatMap,
}

impl Keys<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key)
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(Error::config(format!(
                "`{key}` must be a number, got {other}"
            ))),
        }
    }

    fn req_float(&self, key: &str) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| Error::MissingKey(key.into()))
    }

    fn int(&self, key: &str) -> Result<Option<i64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(other) => Err(Error::config(format!(
                "`{key}` must be an integer, got {other}"
            ))),
        }
    }

    fn req_int(&self, key: &str) -> Result<i64> {
        self.int(key)?.ok_or_else(|| Error::MissingKey(key.into()))
    }

    fn req_str(&self, key: &str) -> Result<&str> {
        match self.get(key) {
            None => Err(Error::MissingKey(key.into())),
            Some(Value::String(s)) => Ok(s),
            Some(other) => Err(Error::config(format!(
                "`{key}` must be a string, got {other}"
            ))),
        }
    }
}

/// Builds a run configuration from a flattened key map.
pub fn run_config_from_map(map: &FlatMap) -> Result<RunConfig> {
    if let Some(k) = map.keys().find(|k| !RUN_KEYS.contains(&k.as_str())) {
        return Err(Error::UnknownKey(k.clone()));
    }
    let keys = Keys { map };

    let n = keys.req_int("n")?;
    let dim = u32::try_from(n)
        .ok()
        .filter(|&d| d >= 1)
        .ok_or_else(|| Error::config(format!("`n` must be a positive integer, got {n}")))?;
    let geometry = Geometry::new(dim, keys.req_float("R")?)?;
    let diffusion = DiffusionLaw::new(keys.req_float("alpha")?, keys.req_float("kappa")?)?;
    let boundary = BoundaryDatum::new(keys.req_float("M")?)?;
    let initial = initial_from_keys(&keys, &geometry)?;

    let mut config = RunConfig::new(geometry, diffusion, boundary, initial);
    let cells = keys.req_int("cells")?;
    config.cells = usize::try_from(cells)
        .map_err(|_| Error::config(format!("`cells` must be >= 16, got {cells}")))?;
    config.t_end = keys.req_float("t_end")?;
    if let Some(c) = keys.float("cfl_safety")? {
        config.cfl_safety = c;
    }
    config.u_max_threshold = keys.float("u_max_threshold")?;
    config.dt_min = keys.float("dt_min")?;
    if let Some(s) = keys.int("output_stride")? {
        config.output_stride = usize::try_from(s)
            .map_err(|_| Error::config(format!("`output_stride` must be >= 1, got {s}")))?;
    }
    if let Some(v) = keys.get("lp") {
        let Value::Array(items) = v else {
            return Err(Error::config(format!("`lp` must be a list, got {v}")));
        };
        config.lp_exponents = items
            .iter()
            .map(|item| match item {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(Error::config(format!(
                    "`lp` entries must be numbers, got {other}"
                ))),
            })
            .collect::<Result<_>>()?;
    }
    config.validate()?;
    Ok(config)
}

fn initial_from_keys(keys: &Keys, geometry: &Geometry) -> Result<InitialData> {
    let kind = keys.req_str("initial.kind")?;
    let (data, allowed): (InitialData, &[&str]) = match kind {
        "constant" => {
            let mass = keys.req_float("initial.mass")?;
            (
                InitialData::Constant {
                    value: mass / geometry.volume(),
                },
                &["initial.mass"],
            )
        }
        "gaussian" => (
            InitialData::GaussianBump {
                mass: keys.req_float("initial.mass")?,
                width: keys.req_float("initial.width")?,
                center: keys.float("initial.center")?.unwrap_or(0.0),
            },
            &["initial.mass", "initial.width", "initial.center"],
        ),
        "annulus" => (
            InitialData::Annulus {
                mass: keys.req_float("initial.mass")?,
                r_lo: keys.req_float("initial.r_lo")?,
                r_hi: keys.req_float("initial.r_hi")?,
            },
            &["initial.mass", "initial.r_lo", "initial.r_hi"],
        ),
        other => {
            return Err(Error::config(format!(
                "`initial.kind` must be one of constant, gaussian, annulus; got `{other}`"
            )))
        }
    };
    if let Some(k) = keys
        .map
        .keys()
        .filter(|k| k.starts_with("initial.") && *k != "initial.kind")
        .find(|k| !allowed.contains(&k.as_str()))
    {
        return Err(Error::config(format!(
            "`{k}` does not apply to initial.kind = \"{kind}\""
        )));
    }
    data.validate(geometry)?;
    Ok(data)
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    run_config_from_map(&flatten(text)?)
}

/// The flat key map that [`run_config_from_map`] turns back into `config`.
pub fn to_map(config: &RunConfig) -> FlatMap {
    flatten(&to_text(config)).expect("rendered configuration is valid TOML")
}

/// Renders a configuration in the same flat format it is read from.
pub fn to_text(config: &RunConfig) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    // `{:?}` keeps a decimal point or exponent, so floats stay floats
    let f = |x: f64| format!("{x:?}");
    line("n", config.geometry.dim.to_string());
    line("R", f(config.geometry.radius));
    line("alpha", f(config.diffusion.alpha));
    line("kappa", f(config.diffusion.kappa));
    line("M", f(config.boundary.value()));
    match config.initial {
        InitialData::Constant { .. } => {
            line("initial.kind", "\"constant\"".into());
            line("initial.mass", f(config.initial.mass(&config.geometry)));
        }
        InitialData::GaussianBump {
            mass,
            width,
            center,
        } => {
            line("initial.kind", "\"gaussian\"".into());
            line("initial.mass", f(mass));
            line("initial.width", f(width));
            line("initial.center", f(center));
        }
        InitialData::Annulus { mass, r_lo, r_hi } => {
            line("initial.kind", "\"annulus\"".into());
            line("initial.mass", f(mass));
            line("initial.r_lo", f(r_lo));
            line("initial.r_hi", f(r_hi));
        }
    }
    line("cells", config.cells.to_string());
    line("t_end", f(config.t_end));
    line("cfl_safety", f(config.cfl_safety));
    if let Some(th) = config.u_max_threshold {
        line("u_max_threshold", f(th));
    }
    if let Some(dt) = config.dt_min {
        line("dt_min", f(dt));
    }
    line("output_stride", config.output_stride.to_string());
    let lp: Vec<String> = config.lp_exponents.iter().map(|&p| f(p)).collect();
    line("lp", format!("[{}]", lp.join(", ")));
    s
}
