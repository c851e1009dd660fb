//! Number formatting for reproducible text output: every float is written with
//! 17 significant digits so that files round-trip exactly.

use serde_json::{Number, Value};

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number with 17 significant digits; non-finite values become `null`.
pub fn json_f64(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    serde_json::from_str::<Number>(&fmt_f64(v))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn json_vec(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| json_f64(*x)).collect())
}

/// One CSV line from already formatted cells; cells containing separators
/// are quoted.
pub fn csv_line(cells: &[String]) -> String {
    let quoted: Vec<String> = cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect();
    quoted.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            std::f64::consts::PI,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(digits.len(), 17);
        }
    }

    #[test]
    fn json_keeps_all_digits() {
        let s = serde_json::to_string(&json_f64(0.1)).unwrap();
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(json_f64(f64::NAN), Value::Null);
    }

    #[test]
    fn csv_quotes_separators() {
        assert_eq!(csv_line(&["a".into(), "b,c".into()]), "a,\"b,c\"");
    }
}
