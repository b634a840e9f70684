//! Layered configuration: defaults, then a JSON file, then `--set key=value`
//! pairs, then explicit flags. The merged document is deserialized into a
//! strict struct so unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::UsageError;

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b=3` becomes `{"a": {"b": 3}}`. Values that parse as JSON are taken
/// as such, anything else is a string.
fn parse_set(pair: &str) -> Result<Value> {
    let Some((key, raw)) = pair.split_once('=') else {
        return Err(UsageError(format!("--set expects KEY=VALUE, got {pair:?}")).into());
    };
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(UsageError(format!("bad --set key {key:?}")).into());
    }
    let mut value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    for part in key.rsplit('.') {
        let mut m = Map::new();
        m.insert(part.to_string(), value);
        value = Value::Object(m);
    }
    Ok(value)
}

/// Returns the typed config together with the merged document it came from.
pub fn resolve<T: DeserializeOwned + Serialize>(
    defaults: Value,
    file: Option<&Path>,
    sets: &[String],
    flags: Value,
) -> Result<(T, Value)> {
    let mut doc = defaults;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if !v.is_object() {
            bail!("{}: config must be a JSON object", path.display());
        }
        merge(&mut doc, v);
    }
    for s in sets {
        merge(&mut doc, parse_set(s)?);
    }
    merge(&mut doc, flags);
    let typed: T = serde_json::from_value(doc.clone()).context("invalid configuration")?;
    // Echo the normalized form, defaults included.
    let echoed = serde_json::to_value(&typed)?;
    Ok((typed, echoed))
}

/// Flags map helper: keeps only the values that were given.
pub fn flags(pairs: Vec<(&str, Option<Value>)>) -> Value {
    Value::Object(pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))).collect())
}
