use markovest::numfmt::round_sig;
use serde::Serialize;
use serde_json::Value;

/// Significant digits of every number written as JSON.
pub const JSON_DIGITS: usize = 12;
/// Significant digits of every number written as CSV.
pub const CSV_DIGITS: usize = 6;

/// Rounds every float in `v`. Non-finite numbers have already become
/// `null` on the way into a [`Value`].
pub fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"), JSON_DIGITS);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect())
        }
        other => other,
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialise")
}

/// Pretty JSON with a trailing newline.
pub fn json(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&rounded(v)).expect("value serialises");
    s.push('\n');
    s
}
