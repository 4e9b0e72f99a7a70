//! Extended reals in text and JSON: `+∞` is written `inf`.

use serde::Serializer;

/// `inf`, `-inf` and `nan` for the non-finite values, Rust's shortest
/// round-trip form (`2.0`, `0.1`) otherwise.
pub fn format(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

/// Serializes finite values as JSON numbers and the others as strings.
pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format(*v))
    }
}
