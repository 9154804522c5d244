//! Byte-stable JSON: sorted object keys and floats at 12 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .map(round_sig)
            .and_then(Number::from_f64)
            .map_or(Value::Number(n), Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        // serde_json's default map is ordered by key
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value)
        .map(canonical)
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_string<T: Serialize>(value: &T) -> Result<String> {
    let v = to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Single-line canonical JSON.
pub fn to_line<T: Serialize>(value: &T) -> Result<String> {
    let v = to_value(value)?;
    serde_json::to_string(&v).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0530649090475), 1.05306490905);
        assert_eq!(round_sig(-2.5e-20), -2.5e-20);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(-0.0).is_sign_positive());
    }

    #[test]
    fn keys_sorted_and_stable() {
        let m: HashMap<&str, f64> = [("z", 0.1 + 0.2), ("a", 1.0), ("m", 2.0 / 3.0)].into_iter().collect();
        let s = to_line(&m).unwrap();
        assert_eq!(s, r#"{"a":1.0,"m":0.666666666667,"z":0.3}"#);
        assert_eq!(to_line(&m).unwrap(), s);
    }
}
