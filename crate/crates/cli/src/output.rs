//! Line-record output files: a header line carrying the seed, then one JSON
//! object per line. Floats are rounded to 12 significant digits.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const SIG_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| json!(round_sig(x))).unwrap_or(Value::Number(n)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn header(command: &str, seed: Option<u64>, extra: Value) -> Value {
    // seed is null for commands that draw no randomness
    let mut h = json!({ "command": command, "version": env!("CARGO_PKG_VERSION"), "seed": seed });
    if let Value::Object(m) = extra {
        for (k, v) in m {
            h[k] = v;
        }
    }
    json!({ "header": h })
}

pub fn record<T: Serialize>(key: &str, value: &T) -> Result<Value> {
    Ok(json!({ key: serde_json::to_value(value)? }))
}

/// Writes (or appends to) a line-record file.
pub fn write_records(path: &Path, lines: &[Value], append: bool) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    for l in lines {
        writeln!(f, "{}", serde_json::to_string(&round_value(l.clone()))?)?;
    }
    Ok(())
}

pub fn resolve(out_dir: &Path, explicit: Option<PathBuf>, default_name: String) -> PathBuf {
    explicit.unwrap_or_else(|| out_dir.join(default_name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(2.0f64.sqrt() * 1e-7), 1.41421356237e-7);
        assert_eq!(round_sig(0.0), 0.0);
        let v = round_value(json!({"a": [0.1234567890123456, 7], "b": "x"}));
        assert_eq!(v, json!({"a": [0.123456789012, 7], "b": "x"}));
    }

    #[test]
    fn header_carries_seed() {
        let h = header("simulate", Some(9), json!({"n": 3}));
        assert_eq!(h["header"]["seed"], 9);
        assert_eq!(h["header"]["n"], 3);
    }
}
