use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::commands::CliError;

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(fdrlab::Error::from)?;
    text.push('\n');
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Flattens a JSON value into dotted `key,value` pairs; nulls stay `null`.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .for_each(|(i, v)| walk(&key(&i.to_string()), v, out)),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

pub fn write_flat_csv<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<(), CliError> {
    let json = serde_json::to_value(value).map_err(fdrlab::Error::from)?;
    let pairs = flatten(&json);
    let refs: Vec<(&str, String)> = pairs.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    fdrlab::io::write_key_values(create(dir, name)?, &refs)?;
    Ok(())
}
