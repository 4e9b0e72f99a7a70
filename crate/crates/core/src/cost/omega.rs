//! Repulsion profiles `ω`: continuous, strictly increasing, `ω(0) = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OmegaError {
    #[error("power exponent must be positive and finite, got {0}")]
    BadExponent(f64),
    #[error("table needs at least two points and matching lengths")]
    TableShape,
    #[error("table must start at (0, 0)")]
    TableOrigin,
    #[error("table is not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("unrecognized profile `{0}`; expected identity, power:<s> or a JSON object")]
    Unrecognized(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawOmega {
    Identity,
    Power { s: f64 },
    Table { r: Vec<f64>, w: Vec<f64> },
}

/// `ω(r) = r`, `ω(r) = r^s`, or a piecewise-linear table through `(0, 0)`
/// extended linearly past its last point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOmega", into = "RawOmega")]
pub enum Omega {
    Identity,
    Power { s: f64 },
    Table { r: Vec<f64>, w: Vec<f64> },
}

impl TryFrom<RawOmega> for Omega {
    type Error = OmegaError;

    fn try_from(raw: RawOmega) -> Result<Self, Self::Error> {
        match raw {
            RawOmega::Identity => Ok(Omega::Identity),
            RawOmega::Power { s } => Omega::power(s),
            RawOmega::Table { r, w } => Omega::table(r, w),
        }
    }
}

impl From<Omega> for RawOmega {
    fn from(o: Omega) -> Self {
        match o {
            Omega::Identity => RawOmega::Identity,
            Omega::Power { s } => RawOmega::Power { s },
            Omega::Table { r, w } => RawOmega::Table { r, w },
        }
    }
}

impl Omega {
    pub fn power(s: f64) -> Result<Self, OmegaError> {
        if s > 0.0 && s.is_finite() {
            Ok(Omega::Power { s })
        } else {
            Err(OmegaError::BadExponent(s))
        }
    }

    pub fn table(r: Vec<f64>, w: Vec<f64>) -> Result<Self, OmegaError> {
        if r.len() < 2 || r.len() != w.len() {
            return Err(OmegaError::TableShape);
        }
        if r[0] != 0.0 || w[0] != 0.0 {
            return Err(OmegaError::TableOrigin);
        }
        for i in 1..r.len() {
            if !(r[i] > r[i - 1] && w[i] > w[i - 1] && r[i].is_finite() && w[i].is_finite()) {
                return Err(OmegaError::NotIncreasing(i));
            }
        }
        Ok(Omega::Table { r, w })
    }

    /// `ω(r)` for `r ≥ 0`.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Omega::Identity => r,
            Omega::Power { s } => r.powf(*s),
            Omega::Table { r: rs, w } => {
                let i = segment(rs, r);
                w[i] + (r - rs[i]) * slope(rs, w, i)
            }
        }
    }

    /// `ω′(r)`; right derivative at table breakpoints.
    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Omega::Identity => 1.0,
            Omega::Power { s } => s * r.powf(s - 1.0),
            Omega::Table { r: rs, w } => slope(rs, w, segment(rs, r)),
        }
    }

    /// `ω⁻¹(y)` for `y ≥ 0`; bisection to `1e−12` for tables.
    pub fn inverse(&self, y: f64) -> f64 {
        match self {
            Omega::Identity => y,
            Omega::Power { s } => y.powf(1.0 / s),
            Omega::Table { .. } => {
                let mut hi = 1.0;
                while self.eval(hi) < y {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                while hi - lo > 1e-12 * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if self.eval(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Index of the segment `[r_i, r_{i+1})` containing `x`, the last one past
/// the table's end.
fn segment(rs: &[f64], x: f64) -> usize {
    rs[1..rs.len() - 1].partition_point(|&ri| ri <= x)
}

fn slope(rs: &[f64], w: &[f64], i: usize) -> f64 {
    (w[i + 1] - w[i]) / (rs[i + 1] - rs[i])
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega::Identity => write!(f, "identity"),
            Omega::Power { s } => write!(f, "power:{s}"),
            Omega::Table { r, .. } => write!(f, "table({} points)", r.len()),
        }
    }
}

/// Accepts `identity`, `power:<s>` or the JSON form.
impl FromStr for Omega {
    type Err = OmegaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "identity" || t == "coulomb" {
            return Ok(Omega::Identity);
        }
        if let Some(exp) = t.strip_prefix("power:") {
            let v: f64 = exp.parse().map_err(|_| OmegaError::Unrecognized(s.into()))?;
            return Omega::power(v);
        }
        if t.starts_with('{') {
            return serde_json::from_str(t).map_err(|e| OmegaError::Unrecognized(e.to_string()));
        }
        Err(OmegaError::Unrecognized(s.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_extends() {
        let w = Omega::table(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.eval(0.5), 1.0);
        assert_eq!(w.eval(1.5), 2.5);
        assert_eq!(w.eval(4.0), 5.0);
        assert_eq!(w.derivative(1.0), 1.0);
        assert!((w.inverse(2.5) - 1.5).abs() < 1e-11);
    }

    #[test]
    fn table_must_increase() {
        assert_eq!(
            Omega::table(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]),
            Err(OmegaError::NotIncreasing(2))
        );
        assert_eq!(Omega::table(vec![0.1, 1.0], vec![0.0, 1.0]), Err(OmegaError::TableOrigin));
    }

    #[test]
    fn json_forms() {
        let w: Omega = serde_json::from_str(r#"{"kind":"power","s":2.0}"#).unwrap();
        assert_eq!(w, Omega::Power { s: 2.0 });
        assert!(serde_json::from_str::<Omega>(r#"{"kind":"power","s":-1.0}"#).is_err());
        assert_eq!(serde_json::to_string(&Omega::Identity).unwrap(), r#"{"kind":"identity"}"#);
        assert_eq!("power:1.5".parse::<Omega>().unwrap(), Omega::Power { s: 1.5 });
        assert_eq!(r#"{"kind":"identity"}"#.parse::<Omega>().unwrap(), Omega::Identity);
    }

    #[test]
    fn power_inverse() {
        let w = Omega::power(3.0).unwrap();
        assert!((w.inverse(w.eval(0.7)) - 0.7).abs() < 1e-15);
    }
}
