//! Canonical JSON and CSV emission.
//!
//! Reports must be byte-identical across runs for a fixed config and seed,
//! so floats are printed with a fixed 17-significant-digit scientific format
//! and object keys come out sorted (`serde_json`'s map is ordered).

use std::fmt::Write as _;

use serde_json::Value;

/// Fixed-format float: 17 significant digits, scientific notation. Valid
/// JSON number syntax.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0" leaking sign noise into reports
        return "0.0".to_string();
    }
    format!("{v:.16e}")
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{}", format_f64(n.as_f64().expect("number is f64")));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", serde_json::to_string(s).expect("string encodes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:", serde_json::to_string(k).expect("key encodes"));
                write_value(v, out);
            }
            out.push('}');
        }
    }
}

/// Serializes to canonical JSON text (sorted keys, fixed float format,
/// trailing newline).
pub fn canonical_json<T: serde::Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    out
}

/// One CSV line from float cells, using the same fixed float format.
pub fn csv_line(cells: &[f64]) -> String {
    let mut parts = Vec::with_capacity(cells.len());
    for c in cells {
        parts.push(format_f64(*c));
    }
    parts.join(",")
}
