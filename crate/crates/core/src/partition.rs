//! Mass-exact slicing of sample clouds along a direction.
//!
//! Clouds are sorted by their projection onto a direction `y`; cells are
//! then cut off by cumulative mass. A cut that falls inside a sample splits
//! it into two co-located fragments, so every requested mass is met exactly.
//! Gapped splits interleave the requested cells with slabs of spare mass so
//! that distinct cells end up at positive distance from each other.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::measure::{Cloud, Point, Sample};

/// Absolute slack used when comparing masses.
pub const MASS_TOL: f64 = 1e-12;

/// Fragments lighter than this (relative to the cloud mass) are not created.
const FRAGMENT_TOL: f64 = 1e-15;

/// Maximal number of radius halvings in [`subordinate_partition`].
pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("cloud is effectively atomic: {tie_mass} mass shares one projection value on every candidate direction")]
    DegenerateCloud { tie_mass: f64 },
    #[error("targets sum to {sum} but the cloud has mass {mass}")]
    TargetMismatch { sum: f64, mass: f64 },
    #[error("targets sum to {sum}, which leaves no spare mass in a cloud of mass {mass}")]
    TargetsExceedMass { sum: f64, mass: f64 },
    #[error("negative target mass {0}")]
    NegativeTarget(f64),
    #[error("two cells share a location; the gap between them has zero width")]
    GapCollapse,
    #[error("cloud mass {available} does not exceed the required {required}")]
    InsufficientMass { available: f64, required: f64 },
    #[error("no exclusion radius found after {MAX_HALVINGS} halvings")]
    ExclusionExhausted,
    #[error("{atoms} atoms exceed the number of marginals {n}")]
    TooManyAtoms { atoms: usize, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitConfig {
    /// Seed for the pseudo-random direction candidates.
    pub seed: u64,
    /// A projection value carrying more than this many heaviest-sample
    /// weights marks the cloud as degenerate.
    pub duplicate_factor: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: 0x5eed,
            duplicate_factor: 4.0,
        }
    }
}

/// A unit vector of ℝᵈ.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; `None` for the zero vector.
    pub fn new(v: Vec<f64>) -> Option<Self> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        (norm > 0.0 && norm.is_finite()).then(|| Direction(v.into_iter().map(|c| c / norm).collect()))
    }

    pub fn axis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Direction(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn project(&self, p: &Point) -> f64 {
        p.dot(&self.0)
    }
}

/// The coordinate axes followed by `2d + 1` seeded Gaussian directions.
pub fn direction_candidates(d: usize, seed: u64) -> Vec<Direction> {
    let mut out: Vec<Direction> = (0..d).map(|i| Direction::axis(d, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < 3 * d + 1 {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Some(dir) = Direction::new(v) {
            out.push(dir);
        }
    }
    out
}

/// Largest mass carried by a single projection value.
fn heaviest_tie(c: &Cloud, dir: &Direction) -> f64 {
    let mut proj: Vec<(f64, f64)> = c.iter().map(|s| (dir.project(&s.x), s.w)).collect();
    proj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < proj.len() {
        let mut mass = 0.0;
        let mut j = i;
        while j < proj.len() && proj[j].0 == proj[i].0 {
            mass += proj[j].1;
            j += 1;
        }
        best = best.max(mass);
        i = j;
    }
    best
}

/// Picks the candidate direction whose heaviest projection tie is lightest.
/// The first candidate wins ties, so axes are preferred.
pub fn choose_direction(c: &Cloud, cfg: &SplitConfig) -> Result<Direction, PartitionError> {
    let first = c.samples().first().ok_or(PartitionError::EmptyCloud)?;
    let d = first.x.dim();
    let mut best: Option<(f64, Direction)> = None;
    for dir in direction_candidates(d, cfg.seed) {
        let tie = heaviest_tie(c, &dir);
        if best.as_ref().is_none_or(|(b, _)| tie < *b) {
            best = Some((tie, dir));
        }
    }
    let (tie_mass, dir) = best.expect("at least one candidate");
    if tie_mass > cfg.duplicate_factor * c.max_sample_weight() * (1.0 + 1e-12) {
        return Err(PartitionError::DegenerateCloud { tie_mass });
    }
    Ok(dir)
}

/// Samples sorted by projection, then lexicographic location, then input
/// index.
pub fn sorted_along(c: &Cloud, dir: &Direction) -> Vec<Sample> {
    let mut keyed: Vec<(f64, usize, &Sample)> = c
        .iter()
        .enumerate()
        .map(|(i, s)| (dir.project(&s.x), i, s))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.2.x.lex_cmp(&b.2.x))
            .then(a.1.cmp(&b.1))
    });
    keyed.into_iter().map(|(_, _, s)| s.clone()).collect()
}

/// Cuts an already sorted sample list into consecutive runs of the given
/// masses. The last run takes everything that is left.
fn cut_sorted(sorted: Vec<Sample>, targets: &[f64], total: f64) -> Vec<Vec<Sample>> {
    let frag_tol = FRAGMENT_TOL * total.max(f64::MIN_POSITIVE);
    let mut queue = sorted.into_iter();
    let mut carry: Option<Sample> = None;
    let mut out = Vec::with_capacity(targets.len());
    for (j, &target) in targets.iter().enumerate() {
        let mut cell = Vec::new();
        if j + 1 == targets.len() {
            cell.extend(carry.take());
            cell.extend(queue.by_ref());
            out.push(cell);
            break;
        }
        let mut need = target;
        while need > frag_tol {
            let Some(cur) = carry.take().or_else(|| queue.next()) else {
                break;
            };
            if cur.w - need <= frag_tol {
                need -= cur.w;
                cell.push(cur);
            } else {
                cell.push(Sample {
                    x: cur.x.clone(),
                    w: need,
                });
                carry = Some(Sample {
                    x: cur.x,
                    w: cur.w - need,
                });
                need = 0.0;
            }
        }
        out.push(cell);
    }
    out
}

fn check_targets(targets: &[f64]) -> Result<(), PartitionError> {
    match targets.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        Some(&t) => Err(PartitionError::NegativeTarget(t)),
        None => Ok(()),
    }
}

/// Splits `c` into clouds of exactly the requested masses by cumulative
/// cuts along [`choose_direction`].
pub fn split_exact(c: &Cloud, targets: &[f64], cfg: &SplitConfig) -> Result<Vec<Cloud>, PartitionError> {
    let dir = choose_direction(c, cfg)?;
    split_exact_along(c, targets, &dir)
}

/// [`split_exact`] along a given direction. Output clouds keep the sorted
/// order of their samples.
pub fn split_exact_along(c: &Cloud, targets: &[f64], dir: &Direction) -> Result<Vec<Cloud>, PartitionError> {
    check_targets(targets)?;
    let sum: f64 = targets.iter().sum();
    let mass = c.total_mass();
    if (sum - mass).abs() > MASS_TOL * mass.max(1.0) {
        return Err(PartitionError::TargetMismatch { sum, mass });
    }
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    Ok(cut_sorted(sorted_along(c, dir), targets, mass)
        .into_iter()
        .map(Cloud::from_samples_unchecked)
        .collect())
}

/// Cells of exact mass that are pairwise at positive distance, plus the
/// spare material between them.
#[derive(Clone, Debug)]
pub struct GappedSplit {
    pub cells: Vec<Cloud>,
    pub remainder: Cloud,
    pub direction: Direction,
    /// Projection values at the upper end of each slab, in order.
    pub cuts: Vec<f64>,
    /// Minimal distance between supports of distinct non-empty cells
    /// (`+∞` when there are fewer than two).
    pub separation: f64,
}

/// Splits `c` into cells of the requested masses separated by gaps.
///
/// Walking along [`choose_direction`], each gap takes the spare mass left
/// divided by one more than the gaps left, and at least enough to move strictly past the
/// projection value where the previous cell ended. Fails with
/// [`PartitionError::GapCollapse`] when the spare mass runs out first.
pub fn split_gapped(c: &Cloud, targets: &[f64], cfg: &SplitConfig) -> Result<GappedSplit, PartitionError> {
    check_targets(targets)?;
    let sum: f64 = targets.iter().sum();
    let mass = c.total_mass();
    if sum >= mass - MASS_TOL {
        return Err(PartitionError::TargetsExceedMass { sum, mass });
    }
    let dir = choose_direction(c, cfg)?;
    let k = targets.len();
    let frag_tol = FRAGMENT_TOL * mass.max(f64::MIN_POSITIVE);
    let mut queue = sorted_along(c, &dir).into_iter().peekable();
    let mut carry: Option<Sample> = None;
    let mut cells = Vec::with_capacity(k);
    let mut rest = Vec::new();
    let mut cuts = Vec::with_capacity(2 * k);
    let mut spare = mass - sum;
    let mut last_end: Option<f64> = None;

    for (j, &target) in targets.iter().enumerate() {
        if let Some(end) = last_end {
            // gap: clear the boundary location, then take the planned share
            let share = spare / (k - j + 1) as f64;
            let mut taken = 0.0;
            loop {
                let next = carry.as_ref().or(queue.peek());
                let Some(next) = next else { break };
                let at_boundary = dir.project(&next.x) <= end;
                if !at_boundary && taken >= share - frag_tol {
                    break;
                }
                let cur = carry.take().or_else(|| queue.next()).expect("peeked");
                let want = share - taken;
                if at_boundary || cur.w - want <= frag_tol {
                    taken += cur.w;
                    rest.push(cur);
                } else {
                    rest.push(Sample { x: cur.x.clone(), w: want });
                    carry = Some(Sample { x: cur.x, w: cur.w - want });
                    taken = share;
                }
            }
            spare -= taken;
            cuts.push(rest.last().map_or(end, |s| dir.project(&s.x)));
            if spare < -frag_tol {
                return Err(PartitionError::GapCollapse);
            }
        }
        let mut cell = Vec::new();
        let mut need = target;
        while need > frag_tol {
            let Some(cur) = carry.take().or_else(|| queue.next()) else {
                return Err(PartitionError::GapCollapse);
            };
            if cur.w - need <= frag_tol {
                need -= cur.w;
                cell.push(cur);
            } else {
                cell.push(Sample { x: cur.x.clone(), w: need });
                carry = Some(Sample { x: cur.x, w: cur.w - need });
                need = 0.0;
            }
        }
        last_end = cell.last().map(|s| dir.project(&s.x)).or(last_end);
        cuts.push(last_end.unwrap_or(f64::NEG_INFINITY));
        cells.push(Cloud::from_samples_unchecked(cell));
    }
    rest.extend(carry);
    rest.extend(queue);

    let separation = min_pairwise_support_distance(&cells, &dir);
    if separation <= 0.0 {
        return Err(PartitionError::GapCollapse);
    }
    Ok(GappedSplit {
        cells,
        remainder: Cloud::from_samples_unchecked(rest),
        direction: dir,
        cuts,
        separation,
    })
}

/// Exact minimal distance between the supports of two clouds.
pub fn support_distance(a: &Cloud, b: &Cloud) -> f64 {
    let mut best = f64::INFINITY;
    for s in a.iter() {
        for t in b.iter() {
            best = best.min(s.x.distance(&t.x));
        }
    }
    best
}

/// Minimal distance between supports of distinct non-empty clouds, pruned
/// with the projection bound `|⟨u − v, y⟩| ≤ |u − v|`.
fn min_pairwise_support_distance(cells: &[Cloud], dir: &Direction) -> f64 {
    let ranges: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| {
            c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                let p = dir.project(&s.x);
                (lo.min(p), hi.max(p))
            })
        })
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i].is_empty() || cells[j].is_empty() {
                continue;
            }
            let gap = (ranges[j].0 - ranges[i].1).max(ranges[i].0 - ranges[j].1);
            if gap >= best {
                continue;
            }
            best = best.min(support_distance(&cells[i], &cells[j]));
        }
    }
    best
}

/// Pieces `σ^i_h` (zero-based `i < h < N`) of mass `m_i`, the rest `τ`, and
/// the separations that make the pieces usable in product blocks.
#[derive(Clone, Debug)]
pub struct SubordinatePartition {
    pub pieces: BTreeMap<(usize, usize), Cloud>,
    pub remainder: Cloud,
    pub direction: Option<Direction>,
    pub cuts: Vec<f64>,
    /// Radius of the balls around the atoms whose mass went to `τ`.
    pub exclusion_radius: f64,
    /// Minimal distance between distinct pieces.
    pub separation: f64,
    /// Minimal distance from `x_j` to a piece `σ^i_h` with `j ≤ i`.
    pub atom_clearance: f64,
}

/// Splits `c` into pieces `σ^i_h` of mass `masses[i]` for `i < h < n`, each
/// away from the first `i + 1` atoms and from its siblings, and a positive
/// remainder. Pieces with zero mass are omitted.
///
/// Samples within an exclusion radius of any atom are moved to the
/// remainder. The radius starts at half the minimal atom spacing and is
/// halved until at least half of the usable spare mass is kept outside the
/// balls, then further while the gapped split of the kept part collapses.
pub fn subordinate_partition(
    c: &Cloud,
    atoms: &[Point],
    masses: &[f64],
    n: usize,
    cfg: &SplitConfig,
) -> Result<SubordinatePartition, PartitionError> {
    let k = atoms.len();
    assert_eq!(k, masses.len(), "one mass per atom");
    if k > n {
        return Err(PartitionError::TooManyAtoms { atoms: k, n });
    }
    check_targets(masses)?;
    let required: f64 = masses
        .iter()
        .enumerate()
        .map(|(i, m)| (n - i - 1) as f64 * m)
        .sum();
    let mass = c.total_mass();
    if mass <= required {
        return Err(PartitionError::InsufficientMass {
            available: mass,
            required,
        });
    }
    if k == 0 || required == 0.0 {
        return Ok(SubordinatePartition {
            pieces: BTreeMap::new(),
            remainder: c.clone(),
            direction: None,
            cuts: Vec::new(),
            exclusion_radius: 0.0,
            separation: f64::INFINITY,
            atom_clearance: f64::INFINITY,
        });
    }

    let nearest: Vec<f64> = c
        .iter()
        .map(|s| atoms.iter().map(|a| a.distance(&s.x)).fold(f64::INFINITY, f64::min))
        .collect();
    let at_atoms: f64 = c.iter().zip(&nearest).filter(|(_, &r)| r == 0.0).map(|(s, _)| s.w).sum();
    let usable_slack = mass - at_atoms - required;
    if usable_slack <= 0.0 {
        return Err(PartitionError::InsufficientMass {
            available: mass - at_atoms,
            required,
        });
    }
    let mut radius0 = nearest.iter().copied().fold(0.0, f64::max);
    for i in 0..k {
        for j in i + 1..k {
            radius0 = radius0.min(0.5 * atoms[i].distance(&atoms[j]));
        }
    }

    let kept_mass = |r: f64| -> f64 {
        c.iter()
            .zip(&nearest)
            .filter(|(_, &dist)| dist > 0.0 && dist >= r)
            .map(|(s, _)| s.w)
            .sum()
    };
    let mut labels = Vec::new();
    let mut targets = Vec::new();
    for (i, &m) in masses.iter().enumerate() {
        if m > 0.0 {
            for h in i + 1..n {
                labels.push((i, h));
                targets.push(m);
            }
        }
    }

    // halve until half the usable spare mass is kept, and further while the
    // kept part is too coarse for gaps between all cells
    let mut found = None;
    let mut last_tried = None;
    for it in 0..=MAX_HALVINGS {
        let radius = radius0 * 0.5f64.powi(it as i32);
        let kept_mass = kept_mass(radius);
        if !(kept_mass > required && kept_mass - required >= 0.5 * usable_slack) || last_tried == Some(kept_mass) {
            continue;
        }
        last_tried = Some(kept_mass);
        let mut kept = Vec::new();
        let mut near = Vec::new();
        for (s, &dist) in c.iter().zip(&nearest) {
            if dist > 0.0 && dist >= radius {
                kept.push(s.clone());
            } else {
                near.push(s.clone());
            }
        }
        match split_gapped(&Cloud::from_samples_unchecked(kept), &targets, cfg) {
            Ok(split) => {
                found = Some((radius, near, split));
                break;
            }
            Err(PartitionError::GapCollapse) => continue,
            Err(e) => return Err(e),
        }
    }
    let (radius, mut near, split) = found.ok_or(PartitionError::ExclusionExhausted)?;
    let pieces: BTreeMap<(usize, usize), Cloud> = labels.into_iter().zip(split.cells).collect();

    let mut atom_clearance = f64::INFINITY;
    for (&(i, _), piece) in &pieces {
        for x in &atoms[..=i] {
            for s in piece.iter() {
                atom_clearance = atom_clearance.min(x.distance(&s.x));
            }
        }
    }
    near.extend(split.remainder.into_samples());
    Ok(SubordinatePartition {
        pieces,
        remainder: Cloud::from_samples_unchecked(near),
        direction: Some(split.direction),
        cuts: split.cuts,
        exclusion_radius: radius,
        separation: split.separation,
        atom_clearance,
    })
}
