//! Marginals on ℝᵈ: a finite list of atoms plus a sampled diffuse part.
//!
//! A [`Marginal`] is `ρ = σ + Σ b_j δ_{x_j}` where the atoms are kept in
//! canonical order (weight descending, ties broken lexicographically on the
//! coordinates) and the diffuse part `σ` is approximated by a weighted
//! [`Cloud`] of samples. By convention a cloud has concentration zero; the
//! per-sample weight cap checked by [`validate_marginal`] keeps that honest.

pub mod json;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use json::{load_marginal, save_marginal, uniform_box, MarginalDoc};

/// Tolerance on the total mass of a marginal.
pub const MASS_TOL: f64 = 1e-12;

/// Default number of samples below which a single sample of a cloud is
/// considered too heavy (`max_sample_weight = total_mass / 64`).
pub const DEFAULT_SAMPLE_CAP_DIVISOR: f64 = 64.0;

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation in `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("weight {weight} at index {index} is not a positive finite number")]
    BadWeight { index: usize, weight: f64 },
    #[error("atoms {first} and {second} share the same location")]
    DuplicateAtom { first: usize, second: usize },
    #[error("atom weights are not sorted non-increasingly at index {index}")]
    Unsorted { index: usize },
}

/// A point of ℝᵈ. Cheap to clone: coordinates are shared.
#[derive(Clone, PartialEq)]
pub struct Point(Arc<[f64]>);

impl Point {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Point(Arc::from(coords.into()))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, y: &[f64]) -> f64 {
        self.0.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// Total lexicographic order on coordinates.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }

    /// Bit-exact identity of a location, usable as a map key.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|c| c.to_bits()).collect()
    }

    /// Whether two points are the same location bit for bit.
    pub fn same_location(&self, other: &Point) -> bool {
        self.lex_cmp(other) == Ordering::Equal
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point::new(v)
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Vec::<f64>::deserialize(deserializer).map(Point::new)
    }
}

/// A weighted location `b δ_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Point,
    pub b: f64,
}

impl Atom {
    pub fn new(x: impl Into<Point>, b: f64) -> Self {
        Atom { x: x.into(), b }
    }
}

/// Canonical order of atoms: heavier first, then lexicographic location.
fn canonical_atom_cmp(a: &Atom, b: &Atom) -> Ordering {
    b.b.total_cmp(&a.b).then_with(|| a.x.lex_cmp(&b.x))
}

/// Finitely many atoms with positive, non-increasing weights at pairwise
/// distinct locations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct AtomList {
    entries: Vec<Atom>,
}

impl AtomList {
    /// Checks the invariants on an already ordered list.
    pub fn new(entries: Vec<Atom>) -> Result<Self, MeasureError> {
        for (index, a) in entries.iter().enumerate() {
            if !(a.b > 0.0 && a.b.is_finite()) {
                return Err(MeasureError::BadWeight { index, weight: a.b });
            }
        }
        for (index, w) in entries.windows(2).enumerate() {
            if w[1].b > w[0].b {
                return Err(MeasureError::Unsorted { index: index + 1 });
            }
        }
        if let Some((first, second)) = find_duplicate(&entries) {
            return Err(MeasureError::DuplicateAtom { first, second });
        }
        Ok(AtomList { entries })
    }

    /// Sorts into canonical order, then checks the invariants.
    pub fn canonical(mut entries: Vec<Atom>) -> Result<Self, MeasureError> {
        entries.sort_by(canonical_atom_cmp);
        AtomList::new(entries)
    }

    /// Wraps entries without checking anything. Intended for data that is
    /// about to be passed through [`validate_marginal`].
    pub fn from_entries_unchecked(entries: Vec<Atom>) -> Self {
        AtomList { entries }
    }

    pub fn empty() -> Self {
        AtomList::default()
    }

    pub fn single(x: impl Into<Point>, b: f64) -> Self {
        AtomList {
            entries: vec![Atom::new(x, b)],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Atom> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[Atom] {
        &self.entries
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|a| a.b).collect()
    }

    pub fn locations(&self) -> Vec<Point> {
        self.entries.iter().map(|a| a.x.clone()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|a| a.b).sum()
    }

    pub fn into_entries(self) -> Vec<Atom> {
        self.entries
    }
}

impl TryFrom<Vec<Atom>> for AtomList {
    type Error = MeasureError;

    fn try_from(entries: Vec<Atom>) -> Result<Self, Self::Error> {
        AtomList::canonical(entries)
    }
}

impl From<AtomList> for Vec<Atom> {
    fn from(list: AtomList) -> Self {
        list.entries
    }
}

fn find_duplicate(entries: &[Atom]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&i, &j| entries[i].x.lex_cmp(&entries[j].x));
    order.windows(2).find_map(|w| {
        entries[w[0]]
            .x
            .same_location(&entries[w[1]].x)
            .then(|| (w[0].min(w[1]), w[0].max(w[1])))
    })
}

/// One weighted sample of a diffuse measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Point,
    pub w: f64,
}

/// A weighted sample cloud standing in for a non-atomic measure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cloud {
    samples: Vec<Sample>,
    total_mass: f64,
}

impl Cloud {
    pub fn new(samples: Vec<Sample>) -> Result<Self, MeasureError> {
        for (index, s) in samples.iter().enumerate() {
            if !(s.w > 0.0 && s.w.is_finite()) {
                return Err(MeasureError::BadWeight { index, weight: s.w });
            }
        }
        Ok(Cloud::from_samples_unchecked(samples))
    }

    pub(crate) fn from_samples_unchecked(samples: Vec<Sample>) -> Self {
        let total_mass = samples.iter().map(|s| s.w).sum();
        Cloud {
            samples,
            total_mass,
        }
    }

    pub fn from_points(points: Vec<Point>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if points.len() != weights.len() {
            return Err(MeasureError::Schema {
                field: "weights".into(),
                message: format!(
                    "{} points but {} weights",
                    points.len(),
                    weights.len()
                ),
            });
        }
        Cloud::new(
            points
                .into_iter()
                .zip(weights)
                .map(|(x, w)| Sample { x, w })
                .collect(),
        )
    }

    pub fn empty() -> Self {
        Cloud::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn max_sample_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.w).fold(0.0, f64::max)
    }

    /// Union of two clouds as measures (sample lists concatenated).
    pub fn union(&self, other: &Cloud) -> Cloud {
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Cloud::from_samples_unchecked(samples)
    }

    /// Same measure with co-located samples merged and locations sorted
    /// lexicographically.
    pub fn canonicalized(&self) -> Cloud {
        Cloud::from_samples_unchecked(merge_locations(self.samples.iter().map(|s| (&s.x, s.w))))
    }
}

/// Merges co-located weighted points (bit-exact locations) and returns them
/// sorted lexicographically. Summation per location follows input order.
pub fn merge_locations<'a>(points: impl Iterator<Item = (&'a Point, f64)>) -> Vec<Sample> {
    let mut items: Vec<(usize, &Point, f64)> = points.enumerate().map(|(i, (x, w))| (i, x, w)).collect();
    items.sort_by(|a, b| a.1.lex_cmp(b.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<Sample> = Vec::new();
    for (_, x, w) in items {
        match out.last_mut() {
            Some(last) if last.x.same_location(x) => last.w += w,
            _ => out.push(Sample { x: x.clone(), w }),
        }
    }
    out
}

/// `ρ = σ + Σ b_j δ_{x_j}` on ℝᵈ.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    pub d: usize,
    pub atoms: AtomList,
    pub diffuse: Cloud,
}

impl Marginal {
    pub fn new(d: usize, atoms: AtomList, diffuse: Cloud) -> Result<Self, MeasureError> {
        let check = |p: &Point| {
            if p.dim() != d {
                Err(MeasureError::Dimension {
                    expected: d,
                    found: p.dim(),
                })
            } else {
                Ok(())
            }
        };
        atoms.iter().try_for_each(|a| check(&a.x))?;
        diffuse.iter().try_for_each(|s| check(&s.x))?;
        Ok(Marginal { d, atoms, diffuse })
    }

    pub fn atomic(d: usize, atoms: AtomList) -> Result<Self, MeasureError> {
        Marginal::new(d, atoms, Cloud::empty())
    }

    pub fn diffuse_only(d: usize, cloud: Cloud) -> Result<Self, MeasureError> {
        Marginal::new(d, AtomList::empty(), cloud)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.total_mass() + self.diffuse.total_mass()
    }

    /// Number of atoms `k`.
    pub fn k(&self) -> usize {
        self.atoms.len()
    }
}

/// Largest single-point mass. The diffuse part contributes zero by
/// convention.
pub fn concentration(m: &Marginal) -> f64 {
    m.atoms.iter().map(|a| a.b).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MassMismatch { total: f64 },
    NonPositiveWeight { index: usize, weight: f64 },
    UnsortedWeights { index: usize },
    DuplicateAtoms { first: usize, second: usize },
    ConcentrationTooHigh { concentration: f64, n: usize },
    OversizedSample { index: usize, weight: f64, cap: f64 },
    NonFinite { field: String },
    WrongDimension { field: String, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MassMismatch { total } => write!(f, "total mass {total} differs from 1"),
            Violation::NonPositiveWeight { index, weight } => {
                write!(f, "atom {index} has non-positive weight {weight}")
            }
            Violation::UnsortedWeights { index } => {
                write!(f, "atom weights increase at index {index}")
            }
            Violation::DuplicateAtoms { first, second } => {
                write!(f, "atoms {first} and {second} coincide")
            }
            Violation::ConcentrationTooHigh { concentration, n } => write!(
                f,
                "concentration {concentration} is not below 1/N = {} (N = {n})",
                1.0 / *n as f64
            ),
            Violation::OversizedSample { index, weight, cap } => {
                write!(f, "cloud sample {index} has weight {weight} above cap {cap}")
            }
            Violation::NonFinite { field } => write!(f, "non-finite value in {field}"),
            Violation::WrongDimension { field, found } => {
                write!(f, "{field} has dimension {found}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn concentration_violated(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::ConcentrationTooHigh { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationConfig {
    pub mass_tol: f64,
    /// Cap on a single cloud sample; `None` means `total_mass / 64`.
    pub max_sample_weight: Option<f64>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            mass_tol: MASS_TOL,
            max_sample_weight: None,
        }
    }
}

/// Checks that `m` is a probability marginal from which an `n`-plan can be
/// built. An empty report means constructible.
pub fn validate_marginal(m: &Marginal, n: usize) -> ValidationReport {
    validate_marginal_with(m, n, &ValidationConfig::default())
}

pub fn validate_marginal_with(m: &Marginal, n: usize, cfg: &ValidationConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let atoms = m.atoms.entries();

    for (i, a) in atoms.iter().enumerate() {
        if a.x.dim() != m.d {
            report.violations.push(Violation::WrongDimension {
                field: format!("atoms[{i}].x"),
                found: a.x.dim(),
            });
        }
        if !a.x.is_finite() {
            report.violations.push(Violation::NonFinite {
                field: format!("atoms[{i}].x"),
            });
        }
        if !(a.b > 0.0 && a.b.is_finite()) {
            report.violations.push(Violation::NonPositiveWeight {
                index: i,
                weight: a.b,
            });
        }
    }
    if let Some(i) = atoms.windows(2).position(|w| w[1].b > w[0].b) {
        report
            .violations
            .push(Violation::UnsortedWeights { index: i + 1 });
    }
    if let Some((first, second)) = find_duplicate(atoms) {
        report
            .violations
            .push(Violation::DuplicateAtoms { first, second });
    }

    let total = m.total_mass();
    if !total.is_finite() || (total - 1.0).abs() > cfg.mass_tol {
        report.violations.push(Violation::MassMismatch { total });
    }

    let mu = concentration(m);
    if n == 0 || mu >= 1.0 / n as f64 {
        report.violations.push(Violation::ConcentrationTooHigh {
            concentration: mu,
            n,
        });
    }

    let cap = cfg
        .max_sample_weight
        .unwrap_or(m.diffuse.total_mass() / DEFAULT_SAMPLE_CAP_DIVISOR);
    for (i, s) in m.diffuse.iter().enumerate() {
        if s.x.dim() != m.d {
            report.violations.push(Violation::WrongDimension {
                field: format!("diffuse.points[{i}]"),
                found: s.x.dim(),
            });
        }
        if !s.x.is_finite() || !s.w.is_finite() {
            report.violations.push(Violation::NonFinite {
                field: format!("diffuse.points[{i}]"),
            });
        }
        if s.w > cap * (1.0 + 1e-12) {
            report.violations.push(Violation::OversizedSample {
                index: i,
                weight: s.w,
                cap,
            });
        }
    }

    if !m.diffuse.is_empty() && !atoms.is_empty() {
        let hits = m
            .diffuse
            .iter()
            .filter(|s| atoms.iter().any(|a| a.x.same_location(&s.x)))
            .count();
        if hits > 0 {
            report
                .warnings
                .push(format!("{hits} cloud samples coincide with atom locations"));
        }
    }
    report
}

/// Length `ℓ` of the maximal fast decreasing initial tuple of `b`: the
/// largest `ℓ` with `(N − j)·b_j > Σ_{i>j} b_i` for every `j ≤ ℓ`, where the
/// sum runs over the whole remaining list.
pub fn fast_decreasing_prefix(b: &[f64], n: usize) -> usize {
    let k = b.len();
    let mut tail = vec![0.0; k + 1];
    for j in (0..k).rev() {
        tail[j] = tail[j + 1] + b[j];
    }
    let mut ell = 0;
    for j in 1..=k {
        let lhs = n.saturating_sub(j) as f64 * b[j - 1];
        if lhs > tail[j] {
            ell = j;
        } else {
            break;
        }
    }
    ell
}
