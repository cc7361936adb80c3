use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use ticlab::rational;

use crate::{Common, Format, OUTPUT_DIR_ENV};

fn is_rational(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    match body.split_once('/') {
        Some((p, q)) => {
            !p.is_empty()
                && !q.is_empty()
                && p.bytes().all(|b| b.is_ascii_digit())
                && q.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

fn decimal(s: &str, precision: usize) -> Option<String> {
    if !is_rational(s) {
        return None;
    }
    rational::parse(s).ok().map(|r| rational::to_decimal(&r, precision))
}

/// Adds a `<key>_decimal` sibling next to every exact `"p/q"` field (or
/// array of them), rounded half to even at `precision` digits.
pub fn with_decimals(value: Value, precision: usize) -> Value {
    match value {
        Value::Object(map) => {
            let mut out = Map::with_capacity(map.len());
            for (key, v) in map {
                let extra = match &v {
                    Value::String(s) => decimal(s, precision).map(Value::String),
                    Value::Array(items) if !items.is_empty() => items
                        .iter()
                        .map(|i| i.as_str().and_then(|s| decimal(s, precision)).map(Value::String))
                        .collect::<Option<Vec<_>>>()
                        .map(Value::Array),
                    _ => None,
                };
                out.insert(key.clone(), with_decimals(v, precision));
                if let Some(extra) = extra {
                    out.insert(format!("{key}_decimal"), extra);
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(|v| with_decimals(v, precision)).collect()),
        other => other,
    }
}

fn destination(common: &Common, command: &str) -> Option<PathBuf> {
    if let Some(path) = &common.output {
        return Some(path.clone());
    }
    let dir = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty())?;
    let ext = match common.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    Some(PathBuf::from(dir).join(format!("{command}.{ext}")))
}

/// Writes the rendered report to its destination and returns where it went.
pub fn emit(common: &Common, command: &str, body: &str) -> Result<String> {
    match destination(common, command) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            Ok(path.display().to_string())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).context("writing report to stdout")?;
            Ok("stdout".into())
        }
    }
}
