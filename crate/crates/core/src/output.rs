//! Deterministic number formatting shared by the CSV and JSON writers.

use serde_json::Value;

/// 17 significant digits; round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number with [`fmt_f64`] text; non-finite values become `null`.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        serde_json::from_str(&fmt_f64(x)).unwrap_or(Value::Null)
    } else {
        Value::Null
    }
}

pub fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_f64)
}

/// Rewrites every non-integer JSON number with [`fmt_f64`].
pub fn normalize_floats(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            let text = n.to_string();
            if text.contains(['.', 'e', 'E']) {
                n.as_f64().map_or(Value::Number(n), json_f64)
            } else {
                Value::Number(n)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalize_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize_floats(v))).collect()),
        other => other,
    }
}
