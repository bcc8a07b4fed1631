//! `key=value` edits of a configuration document before validation.
//!
//! Channel fields may be named bare (`receptor_count`) or qualified
//! (`channel.receptor_count`). `release_count` sets the count of every
//! release; solver and particle settings are addressed as `solver.*` and
//! `pbs.*`.

use serde_json::{Map, Value};

use crate::error::{HarnessError, Result};

const CHANNEL_FIELDS: &[&str] = &[
    "diffusion_coeff",
    "channel_width_x",
    "channel_width_y",
    "channel_width_z",
    "intrinsic_binding_rate",
    "effective_binding_rate",
    "homogenization_factor",
    "unbinding_rate",
    "degradation_rate",
    "receptor_count",
    "receptor_radius",
    "receptor_coverage",
];

const SOLVER_FIELDS: &[&str] = &["eigenmodes", "sample_interval", "horizon"];
const PBS_FIELDS: &[&str] = &["time_step", "runs", "seed", "sample_times"];
const INTEGER_FIELDS: &[&str] = &["receptor_count", "release_count", "eigenmodes", "runs", "seed"];

/// Fields from which the receptor coverage is derived.
const COVERAGE_INPUTS: &[&str] = &[
    "receptor_count",
    "receptor_radius",
    "channel_width_y",
    "channel_width_z",
];

/// Resolved location of an override key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Channel(&'static str),
    ReleaseCount,
    Releases,
    Solver(&'static str),
    Pbs(&'static str),
}

impl Field {
    pub fn parse(key: &str) -> Result<Self> {
        let find = |list: &[&'static str], name: &str| list.iter().copied().find(|f| *f == name);
        let (section, name) = key.split_once('.').unwrap_or(("", key));
        let field = match section {
            "" => match name {
                "release_count" => Some(Self::ReleaseCount),
                "releases" => Some(Self::Releases),
                _ => find(CHANNEL_FIELDS, name).map(Self::Channel),
            },
            "channel" => find(CHANNEL_FIELDS, name).map(Self::Channel),
            "solver" => find(SOLVER_FIELDS, name).map(Self::Solver),
            "pbs" => find(PBS_FIELDS, name).map(Self::Pbs),
            _ => None,
        };
        field.ok_or_else(|| HarnessError::usage(format!("unknown configuration field `{key}`")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Channel(n) | Self::Solver(n) | Self::Pbs(n) => n,
            Self::ReleaseCount => "release_count",
            Self::Releases => "releases",
        }
    }

    fn is_integer(self) -> bool {
        INTEGER_FIELDS.contains(&self.name())
    }
}

fn object<'a>(v: &'a mut Value, what: &str) -> Result<&'a mut Map<String, Value>> {
    v.as_object_mut()
        .ok_or_else(|| HarnessError::invalid(format!("`{what}` must be an object")))
}

/// Set `key` to `value` in a configuration document.
pub fn set(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let field = Field::parse(key)?;
    let value = if field.is_integer() {
        integral(key, value)?
    } else {
        value
    };
    let root = object(doc, "configuration")?;
    match field {
        Field::Channel(name) => {
            let channel = object(
                root.entry("channel").or_insert_with(|| Value::Object(Map::new())),
                "channel",
            )?;
            if COVERAGE_INPUTS.contains(&name) {
                channel.remove("receptor_coverage");
            }
            channel.insert(name.into(), value);
        }
        Field::ReleaseCount => {
            let releases = root
                .get_mut("releases")
                .and_then(Value::as_array_mut)
                .ok_or_else(|| HarnessError::invalid("`releases` must be an array"))?;
            for r in releases {
                object(r, "release")?.insert("count".into(), value.clone());
            }
        }
        Field::Releases => {
            root.insert("releases".into(), value);
        }
        Field::Solver(name) | Field::Pbs(name) => {
            let section = if matches!(field, Field::Solver(_)) { "solver" } else { "pbs" };
            let s = object(
                root.entry(section).or_insert_with(|| Value::Object(Map::new())),
                section,
            )?;
            s.insert(name.into(), value);
        }
    }
    Ok(())
}

/// Set a numeric field; integer fields must receive integral values.
pub fn set_number(doc: &mut Value, key: &str, value: f64) -> Result<()> {
    let v = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| HarnessError::invalid(format!("`{key}` must be finite, got {value}")))?;
    set(doc, key, v)
}

fn integral(key: &str, value: Value) -> Result<Value> {
    match &value {
        Value::Number(n) if n.is_i64() || n.is_u64() => Ok(value),
        Value::Number(n) => {
            let f = n.as_f64().unwrap_or(f64::NAN);
            if f.fract() == 0.0 && f.abs() < 9e15 {
                Ok(Value::from(f as i64))
            } else {
                Err(HarnessError::invalid(format!("`{key}` must be an integer, got {f}")))
            }
        }
        _ => Err(HarnessError::invalid(format!("`{key}` must be an integer"))),
    }
}

/// Split `key=value`; the value is read as JSON, falling back to a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| HarnessError::usage(format!("expected key=value, got `{s}`")))?;
    let key = key.trim();
    Field::parse(key)?;
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    Ok((key.to_string(), value))
}

/// Apply `--set` assignments in order.
pub fn apply_all(doc: &mut Value, assignments: &[String]) -> Result<()> {
    for a in assignments {
        let (k, v) = parse_assignment(a)?;
        set(doc, &k, v)?;
    }
    Ok(())
}
