//! JSON form of a [`Marginal`].
//!
//! ```text
//! {"d": 2,
//!  "atoms": [{"x": [0.0, 0.0], "b": 0.3}, ...],
//!  "diffuse": {"type": "samples", "total_mass": 0.4, "points": [[...], ...], "weights": [...]}}
//! ```
//!
//! The diffuse part may instead be `{"type": "uniform_box", "lo": [...],
//! "hi": [...], "total_mass": m, "samples": M, "seed": s}`, which is expanded
//! at load time into `M` equal-weight samples drawn with a seeded ChaCha8
//! generator. Saving always writes the expanded `samples` form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

use super::{Atom, AtomList, Cloud, Marginal, MeasureError, Point, Sample};

/// Serializable mirror of a marginal in its canonical, expanded form.
#[derive(Debug, Serialize)]
pub struct MarginalDoc {
    pub d: usize,
    pub atoms: Vec<Atom>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffuse: Option<SamplesDoc>,
}

#[derive(Debug, Serialize)]
pub struct SamplesDoc {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub total_mass: f64,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl From<&Marginal> for MarginalDoc {
    fn from(m: &Marginal) -> Self {
        let diffuse = (!m.diffuse.is_empty()).then(|| SamplesDoc {
            kind: "samples",
            total_mass: m.diffuse.total_mass(),
            points: m.diffuse.iter().map(|s| s.x.clone()).collect(),
            weights: m.diffuse.iter().map(|s| s.w).collect(),
        });
        MarginalDoc {
            d: m.d,
            atoms: m.atoms.entries().to_vec(),
            diffuse,
        }
    }
}

pub fn save_marginal(m: &Marginal) -> String {
    serde_json::to_string_pretty(&MarginalDoc::from(m)).expect("marginal serializes")
}

pub fn load_marginal(text: &str) -> Result<Marginal, MeasureError> {
    let value: Value = serde_json::from_str(text).map_err(|e| MeasureError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    marginal_from_value(&value)
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> MeasureError {
    MeasureError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>, MeasureError> {
    v.as_object().ok_or_else(|| schema(field, "expected an object"))
}

fn number(v: &Value, field: &str) -> Result<f64, MeasureError> {
    let x = v.as_f64().ok_or_else(|| schema(field, format!("expected a number, found {v}")))?;
    if !x.is_finite() {
        return Err(schema(field, "must be finite"));
    }
    Ok(x)
}

fn positive(v: &Value, field: &str) -> Result<f64, MeasureError> {
    let x = number(v, field)?;
    if x <= 0.0 {
        return Err(schema(field, format!("must be positive, found {x}")));
    }
    Ok(x)
}

fn vector(v: &Value, field: &str, d: usize) -> Result<Vec<f64>, MeasureError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema(field, "expected an array of numbers"))?;
    if arr.len() != d {
        return Err(schema(field, format!("expected {d} coordinates, found {}", arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, c)| number(c, &format!("{field}[{i}]")))
        .collect()
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, field: &str) -> Result<&'a Value, MeasureError> {
    obj.get(key)
        .ok_or_else(|| schema(format!("{field}.{key}"), "missing field"))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], field: &str) -> Result<(), MeasureError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(format!("{field}.{k}"), "unknown field")),
        None => Ok(()),
    }
}

fn marginal_from_value(value: &Value) -> Result<Marginal, MeasureError> {
    let root = object(value, "$")?;
    check_keys(root, &["d", "atoms", "diffuse"], "$")?;
    let d = required(root, "d", "$")?
        .as_u64()
        .filter(|&d| d >= 1)
        .ok_or_else(|| schema("d", "expected a positive integer"))? as usize;

    let mut atoms = Vec::new();
    if let Some(list) = root.get("atoms") {
        let list = list
            .as_array()
            .ok_or_else(|| schema("atoms", "expected an array"))?;
        for (i, item) in list.iter().enumerate() {
            let field = format!("atoms[{i}]");
            let obj = object(item, &field)?;
            check_keys(obj, &["x", "b"], &field)?;
            let x = vector(required(obj, "x", &field)?, &format!("{field}.x"), d)?;
            let b = positive(required(obj, "b", &field)?, &format!("{field}.b"))?;
            atoms.push(Atom::new(x, b));
        }
    }
    let atoms = AtomList::canonical(atoms).map_err(|e| schema("atoms", e.to_string()))?;

    let diffuse = match root.get("diffuse") {
        None | Some(Value::Null) => Cloud::empty(),
        Some(v) => diffuse_from_value(v, d)?,
    };
    Marginal::new(d, atoms, diffuse)
}

fn diffuse_from_value(v: &Value, d: usize) -> Result<Cloud, MeasureError> {
    let obj = object(v, "diffuse")?;
    let kind = required(obj, "type", "diffuse")?
        .as_str()
        .ok_or_else(|| schema("diffuse.type", "expected a string"))?;
    match kind {
        "samples" => {
            check_keys(obj, &["type", "total_mass", "points", "weights"], "diffuse")?;
            let points = required(obj, "points", "diffuse")?
                .as_array()
                .ok_or_else(|| schema("diffuse.points", "expected an array"))?;
            let weights = required(obj, "weights", "diffuse")?
                .as_array()
                .ok_or_else(|| schema("diffuse.weights", "expected an array"))?;
            if points.len() != weights.len() {
                return Err(schema(
                    "diffuse.weights",
                    format!("{} points but {} weights", points.len(), weights.len()),
                ));
            }
            let mut samples = Vec::with_capacity(points.len());
            for (i, (p, w)) in points.iter().zip(weights).enumerate() {
                let x = vector(p, &format!("diffuse.points[{i}]"), d)?;
                let w = positive(w, &format!("diffuse.weights[{i}]"))?;
                samples.push(Sample { x: Point::new(x), w });
            }
            let cloud = Cloud::from_samples_unchecked(samples);
            if let Some(total) = obj.get("total_mass") {
                let total = number(total, "diffuse.total_mass")?;
                if (total - cloud.total_mass()).abs() > 1e-12 * total.abs().max(1.0) {
                    return Err(schema(
                        "diffuse.total_mass",
                        format!("{total} does not match the weight sum {}", cloud.total_mass()),
                    ));
                }
            }
            Ok(cloud)
        }
        "uniform_box" => {
            check_keys(
                obj,
                &["type", "lo", "hi", "total_mass", "samples", "seed"],
                "diffuse",
            )?;
            let lo = vector(required(obj, "lo", "diffuse")?, "diffuse.lo", d)?;
            let hi = vector(required(obj, "hi", "diffuse")?, "diffuse.hi", d)?;
            if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
                return Err(schema("diffuse.hi", "every coordinate must exceed `lo`"));
            }
            let total = positive(required(obj, "total_mass", "diffuse")?, "diffuse.total_mass")?;
            let samples = required(obj, "samples", "diffuse")?
                .as_u64()
                .filter(|&m| m >= 1)
                .ok_or_else(|| schema("diffuse.samples", "expected a positive integer"))?;
            let seed = required(obj, "seed", "diffuse")?
                .as_u64()
                .ok_or_else(|| schema("diffuse.seed", "expected a non-negative integer"))?;
            Ok(uniform_box(&lo, &hi, total, samples as usize, seed))
        }
        other => Err(schema("diffuse.type", format!("unknown diffuse type `{other}`"))),
    }
}

/// `samples` equal-weight points uniform in the box `[lo, hi)`.
pub fn uniform_box(lo: &[f64], hi: &[f64], total_mass: f64, samples: usize, seed: u64) -> Cloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = total_mass / samples as f64;
    let pts = (0..samples)
        .map(|_| {
            let x: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect();
            Sample { x: Point::new(x), w }
        })
        .collect();
    Cloud::from_samples_unchecked(pts)
}
