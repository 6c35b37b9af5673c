//! Canonical JSON: sorted keys, two-space indentation, floats with 17 significant digits.

use serde::Serialize;
use serde_json::Value;

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize to JSON")
}

pub fn canonical(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}

fn float(x: f64) -> String {
    if x == 0.0 {
        // Drop the sign of negative zero.
        format!("{:.16e}", 0.0)
    } else {
        format!("{x:.16e}")
    }
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => out.push_str(&i.to_string()),
            (None, Some(u)) => out.push_str(&u.to_string()),
            _ => out.push_str(&float(n.as_f64().expect("JSON numbers are finite"))),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write(x, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write(&map[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_and_keys_are_canonical() {
        let v = json!({"b": 1.0, "a": [1, -0.0, 0.1]});
        assert_eq!(
            canonical(&v),
            "{\n  \"a\": [\n    1,\n    0.0000000000000000e0,\n    1.0000000000000001e-1\n  ],\n  \"b\": 1.0000000000000000e0\n}\n"
        );
    }
}
