//! Canonical number formatting for emitted files.
//!
//! Reals are rounded to a fixed number of significant decimal digits and then
//! written in their shortest round-trip form, so equal inputs always yield
//! identical bytes regardless of platform.

use serde_json::Value;

/// Significant digits used in graph files.
pub const GRAPH_DIGITS: usize = 12;
/// Significant digits used in reports and service responses.
pub const REPORT_DIGITS: usize = 9;

/// Rounds `x` to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        // normalises -0.0
        return if x == 0.0 { 0.0 } else { x };
    }
    let digits = digits.max(1);
    format!("{:.*e}", digits - 1, x)
        .parse()
        .expect("scientific notation produced by format! always parses")
}

/// Rounds every floating-point number in a JSON tree in place. Integers are
/// left untouched.
pub fn round_json(value: &mut Value, digits: usize) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            if let Some(rounded) = serde_json::Number::from_f64(round_sig(x, digits)) {
                *n = rounded;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| round_json(v, digits)),
        Value::Object(map) => map.values_mut().for_each(|v| round_json(v, digits)),
        _ => {}
    }
}

/// Serializes `value` as compact JSON with sorted keys and reals at `digits`
/// significant digits.
pub fn to_canonical_line<T: serde::Serialize>(value: &T, digits: usize) -> String {
    let mut tree = serde_json::to_value(value).expect("domain types serialize to JSON");
    round_json(&mut tree, digits);
    serde_json::to_string(&tree).expect("JSON values serialize")
}

/// Pretty-printed variant of [`to_canonical_line`], terminated by a newline.
pub fn to_canonical_pretty<T: serde::Serialize>(value: &T, digits: usize) -> String {
    let mut tree = serde_json::to_value(value).expect("domain types serialize to JSON");
    round_json(&mut tree, digits);
    let mut out = serde_json::to_string_pretty(&tree).expect("JSON values serialize");
    out.push('\n');
    out
}
