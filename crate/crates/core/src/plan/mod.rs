//! Sparse measures on `(ℝᵈ)ᴺ` as sums of blocks.
//!
//! A [`ProductBlock`] is `scale · (f_1 ⊗ … ⊗ f_N)` and a [`MapBlock`] is a
//! finite sum of weighted point masses on `(ℝᵈ)ᴺ`. Either may carry the
//! `symmetrized` flag, in which case it stands for the average of its
//! coordinate permutations. Nothing is ever enumerated over permutations
//! except in [`dense_expand`]: marginals, separations and costs are all
//! computable from the unexpanded block.

mod json;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::measure::{merge_locations, Atom, AtomList, Cloud, Point, Sample};

pub use json::PlanDocError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("cannot insert a factor into a symmetrized block")]
    InsertIntoSymmetrized,
    #[error("a diffuse factor cannot be inserted into a map block")]
    DiffuseIntoMapBlock,
    #[error("marginal requested for a plan with unsymmetrized blocks")]
    UnsymmetrizedPlan,
    #[error("dense expansion has {size} tuples, more than the cap {cap}")]
    ExpansionTooLarge { size: f64, cap: usize },
    #[error("arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("slot {slot} out of range for arity {arity}")]
    SlotOutOfRange { slot: usize, arity: usize },
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
}

/// One tensor factor of a product block.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Atomic(AtomList),
    Diffuse(Cloud),
}

impl Factor {
    /// `δ_x` with unit mass.
    pub fn point(x: Point) -> Self {
        Factor::Atomic(AtomList::single(x, 1.0))
    }

    pub fn mass(&self) -> f64 {
        match self {
            Factor::Atomic(a) => a.total_mass(),
            Factor::Diffuse(c) => c.total_mass(),
        }
    }

    /// Number of support points.
    pub fn support_len(&self) -> usize {
        match self {
            Factor::Atomic(a) => a.len(),
            Factor::Diffuse(c) => c.len(),
        }
    }

    /// Weighted support points in storage order.
    pub fn support(&self) -> Box<dyn Iterator<Item = (&Point, f64)> + '_> {
        match self {
            Factor::Atomic(a) => Box::new(a.iter().map(|a| (&a.x, a.b))),
            Factor::Diffuse(c) => Box::new(c.iter().map(|s| (&s.x, s.w))),
        }
    }

    fn dim(&self) -> Option<usize> {
        self.support().next().map(|(x, _)| x.dim())
    }
}

/// `scale · (f_1 ⊗ … ⊗ f_N)`, or its symmetrization.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductBlock {
    pub factors: Vec<Factor>,
    pub scale: f64,
    pub symmetrized: bool,
}

impl ProductBlock {
    pub fn mass(&self) -> f64 {
        self.scale * self.factors.iter().map(Factor::mass).product::<f64>()
    }
}

/// `w · δ_{(x_1, …, x_N)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub x: Vec<Point>,
    pub w: f64,
}

/// A finite sum of weighted tuples, or its symmetrization.
#[derive(Clone, Debug, PartialEq)]
pub struct MapBlock {
    pub tuples: Vec<Tuple>,
    pub symmetrized: bool,
}

impl MapBlock {
    pub fn mass(&self) -> f64 {
        self.tuples.iter().map(|t| t.w).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Product(ProductBlock),
    Map(MapBlock),
}

impl Block {
    pub fn mass(&self) -> f64 {
        match self {
            Block::Product(b) => b.mass(),
            Block::Map(b) => b.mass(),
        }
    }

    pub fn is_symmetrized(&self) -> bool {
        match self {
            Block::Product(b) => b.symmetrized,
            Block::Map(b) => b.symmetrized,
        }
    }

    fn set_symmetrized(&mut self, flag: bool) {
        match self {
            Block::Product(b) => b.symmetrized = flag,
            Block::Map(b) => b.symmetrized = flag,
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Block::Product(b) => Some(b.factors.len()),
            Block::Map(b) => b.tuples.first().map(|t| t.x.len()),
        }
    }
}

/// A measure on `(ℝᵈ)ᴺ` represented as a sum of blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    n: usize,
    d: usize,
    blocks: Vec<Block>,
}

impl Plan {
    /// The zero measure.
    pub fn empty(n: usize, d: usize) -> Self {
        Plan {
            n,
            d,
            blocks: Vec::new(),
        }
    }

    /// Checks that every block has arity `n` and dimension `d`.
    pub fn from_blocks(n: usize, d: usize, blocks: Vec<Block>) -> Result<Self, PlanError> {
        for b in &blocks {
            if let Some(a) = b.arity() {
                if a != n {
                    return Err(PlanError::ArityMismatch { left: n, right: a });
                }
            }
            let dims: Vec<usize> = match b {
                Block::Product(p) => p.factors.iter().filter_map(Factor::dim).collect(),
                Block::Map(m) => m.tuples.iter().flat_map(|t| t.x.iter().map(Point::dim)).collect(),
            };
            if let Some(&bad) = dims.iter().find(|&&e| e != d) {
                return Err(PlanError::DimensionMismatch { left: d, right: bad });
            }
            if let Block::Product(p) = b {
                if !(p.scale > 0.0 && p.scale.is_finite()) {
                    return Err(PlanError::BadScale(p.scale));
                }
            }
        }
        Ok(Plan { n, d, blocks })
    }

    /// `scale · (f_1 ⊗ … ⊗ f_N)` as a one-block plan.
    pub fn product(d: usize, factors: Vec<Factor>, scale: f64) -> Result<Self, PlanError> {
        let n = factors.len();
        Plan::from_blocks(
            n,
            d,
            vec![Block::Product(ProductBlock {
                factors,
                scale,
                symmetrized: false,
            })],
        )
    }

    /// Arity `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn mass(&self) -> f64 {
        self.blocks.iter().map(Block::mass).sum()
    }

    pub fn is_symmetrized(&self) -> bool {
        self.blocks.iter().all(Block::is_symmetrized)
    }

    pub fn push(&mut self, block: Block) {
        self.blocks.push(block);
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "plan N={} d={} blocks={} mass={}",
            self.n,
            self.d,
            self.blocks.len(),
            self.mass()
        )
    }
}

/// `p ⊗_j f`: inserts `f` as a new coordinate at zero-based slot `j`
/// (`0 ≤ j ≤ N`), raising the arity by one.
pub fn tensor_insert(p: &Plan, j: usize, f: &Factor) -> Result<Plan, PlanError> {
    if j > p.n {
        return Err(PlanError::SlotOutOfRange { slot: j, arity: p.n + 1 });
    }
    if let Some(fd) = f.dim() {
        if fd != p.d {
            return Err(PlanError::DimensionMismatch { left: p.d, right: fd });
        }
    }
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        if b.is_symmetrized() && p.n > 1 {
            return Err(PlanError::InsertIntoSymmetrized);
        }
        blocks.push(match b {
            Block::Product(pb) => {
                let mut factors = pb.factors.clone();
                factors.insert(j, f.clone());
                Block::Product(ProductBlock {
                    factors,
                    scale: pb.scale,
                    symmetrized: false,
                })
            }
            Block::Map(mb) => {
                let Factor::Atomic(atoms) = f else {
                    return Err(PlanError::DiffuseIntoMapBlock);
                };
                let mut tuples = Vec::with_capacity(mb.tuples.len() * atoms.len());
                for t in &mb.tuples {
                    for a in atoms.iter() {
                        let mut x = t.x.clone();
                        x.insert(j, a.x.clone());
                        tuples.push(Tuple { x, w: t.w * a.b });
                    }
                }
                Block::Map(MapBlock {
                    tuples,
                    symmetrized: false,
                })
            }
        });
    }
    Ok(Plan {
        n: p.n + 1,
        d: p.d,
        blocks,
    })
}

/// `P_sym`: flags every block as symmetrized. Idempotent.
pub fn symmetrize(p: &Plan) -> Plan {
    let mut out = p.clone();
    out.blocks.iter_mut().for_each(|b| b.set_symmetrized(true));
    out
}

/// `Σ_{j=1}^{n} Q ⊗_j f` for a symmetric `Q` of arity `n − 1`, returned in
/// the equivalent form `n · (Q ⊗_n f)_sym`.
///
/// The identity needs `Q` symmetric, so every block of `p` must carry the
/// flag unless the arity is at most one.
pub fn insert_all_slots(p: &Plan, f: &Factor) -> Result<Plan, PlanError> {
    if p.n > 1 && !p.is_symmetrized() {
        return Err(PlanError::UnsymmetrizedPlan);
    }
    let mut flat = p.clone();
    flat.blocks.iter_mut().for_each(|b| b.set_symmetrized(false));
    let inserted = tensor_insert(&flat, p.n, f)?;
    Ok(symmetrize(&scale(&inserted, (p.n + 1) as f64)?))
}

/// Block list concatenation.
pub fn add(p: &Plan, q: &Plan) -> Result<Plan, PlanError> {
    let mut out = p.clone();
    add_into(&mut out, q.clone())?;
    Ok(out)
}

/// `p += q` without copying `p`.
pub fn add_into(p: &mut Plan, q: Plan) -> Result<(), PlanError> {
    if p.n != q.n {
        return Err(PlanError::ArityMismatch { left: p.n, right: q.n });
    }
    if p.d != q.d {
        return Err(PlanError::DimensionMismatch { left: p.d, right: q.d });
    }
    p.blocks.extend(q.blocks);
    Ok(())
}

/// `s · p` for `s > 0`.
pub fn scale(p: &Plan, s: f64) -> Result<Plan, PlanError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(PlanError::BadScale(s));
    }
    let mut out = p.clone();
    for b in &mut out.blocks {
        match b {
            Block::Product(pb) => pb.scale *= s,
            Block::Map(mb) => mb.tuples.iter_mut().for_each(|t| t.w *= s),
        }
    }
    Ok(out)
}

/// The one-dimensional marginal of a symmetric plan, split into the part
/// carried by atomic factors and the part carried by samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanMarginal {
    /// Lexicographically sorted, co-located entries merged.
    pub atoms: Vec<Atom>,
    pub cloud: Cloud,
}

impl PlanMarginal {
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.b).sum::<f64>() + self.cloud.total_mass()
    }

    /// Total mass the marginal puts at `x`, from either part.
    pub fn mass_at(&self, x: &Point) -> f64 {
        let a: f64 = self.atoms.iter().filter(|a| a.x.same_location(x)).map(|a| a.b).sum();
        let c: f64 = self.cloud.iter().filter(|s| s.x.same_location(x)).map(|s| s.w).sum();
        a + c
    }
}

/// `Π_{i≠j} m_i` for every `j`, without division.
fn products_except(m: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * m[i];
    }
    let mut out = vec![0.0; n];
    let mut suffix = 1.0;
    for j in (0..n).rev() {
        out[j] = prefix[j] * suffix;
        suffix *= m[j];
    }
    out
}

/// Marginal of a symmetric plan, `(1/N) Σ_j π^j_# P` evaluated per block:
/// a product block contributes `scale/N · Σ_j (Π_{i≠j} |f_i|) f_j`, a map
/// block `1/N · Σ_tuples Σ_slots w δ_{x_slot}`.
pub fn marginal(p: &Plan) -> Result<PlanMarginal, PlanError> {
    if p.n > 1 && !p.is_symmetrized() {
        return Err(PlanError::UnsymmetrizedPlan);
    }
    let inv_n = 1.0 / p.n as f64;
    let mut atoms: Vec<(&Point, f64)> = Vec::new();
    let mut samples: Vec<(&Point, f64)> = Vec::new();
    for b in &p.blocks {
        match b {
            Block::Product(pb) => {
                let masses: Vec<f64> = pb.factors.iter().map(Factor::mass).collect();
                let others = products_except(&masses);
                for (f, o) in pb.factors.iter().zip(others) {
                    let c = pb.scale * inv_n * o;
                    let sink = match f {
                        Factor::Atomic(_) => &mut atoms,
                        Factor::Diffuse(_) => &mut samples,
                    };
                    sink.extend(f.support().map(|(x, w)| (x, c * w)));
                }
            }
            Block::Map(mb) => {
                for t in &mb.tuples {
                    samples.extend(t.x.iter().map(|x| (x, inv_n * t.w)));
                }
            }
        }
    }
    let atoms = merge_locations(atoms.into_iter())
        .into_iter()
        .map(|s| Atom { x: s.x, b: s.w })
        .collect();
    Ok(PlanMarginal {
        atoms,
        cloud: Cloud::from_samples_unchecked(merge_locations(samples.into_iter())),
    })
}

fn support_distance(a: &Factor, b: &Factor) -> f64 {
    let mut best = f64::INFINITY;
    for (x, _) in a.support() {
        for (y, _) in b.support() {
            best = best.min(x.distance(y));
        }
    }
    best
}

/// Separation of a single block; `+∞` for arity below two.
pub fn block_separation(b: &Block) -> f64 {
    let mut best = f64::INFINITY;
    match b {
        Block::Product(pb) => {
            for i in 0..pb.factors.len() {
                for j in i + 1..pb.factors.len() {
                    best = best.min(support_distance(&pb.factors[i], &pb.factors[j]));
                }
            }
        }
        Block::Map(mb) => {
            for t in &mb.tuples {
                for i in 0..t.x.len() {
                    for j in i + 1..t.x.len() {
                        best = best.min(t.x[i].distance(&t.x[j]));
                    }
                }
            }
        }
    }
    best
}

/// Largest `α` with the plan supported outside `{min_{i<j} |x_i − x_j| < α}`,
/// i.e. the minimum over blocks and slot pairs of support distances.
pub fn min_separation(p: &Plan) -> f64 {
    p.blocks.iter().map(block_separation).fold(f64::INFINITY, f64::min)
}

/// Number of tuples [`dense_expand`] would produce, as a float so that huge
/// counts do not overflow.
pub fn dense_size(p: &Plan) -> f64 {
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    p.blocks
        .iter()
        .map(|b| {
            let (count, sym) = match b {
                Block::Product(pb) => (
                    pb.factors.iter().map(|f| f.support_len() as f64).product::<f64>(),
                    pb.symmetrized,
                ),
                Block::Map(mb) => (mb.tuples.len() as f64, mb.symmetrized),
            };
            if sym {
                count * fact(p.n)
            } else {
                count
            }
        })
        .sum()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Explicit weighted support of `p`, with symmetrized blocks enumerated over
/// all `N!` permutations.
pub fn dense_expand(p: &Plan, cap: usize) -> Result<Vec<Tuple>, PlanError> {
    let size = dense_size(p);
    if size > cap as f64 {
        return Err(PlanError::ExpansionTooLarge { size, cap });
    }
    let perms = permutations(p.n);
    let inv_fact = 1.0 / perms.len() as f64;
    let mut out = Vec::with_capacity(size as usize);
    for b in &p.blocks {
        let (plain, sym) = match b {
            Block::Product(pb) => (product_tuples(pb), pb.symmetrized),
            Block::Map(mb) => (mb.tuples.clone(), mb.symmetrized),
        };
        if sym {
            for t in &plain {
                for s in &perms {
                    out.push(Tuple {
                        x: s.iter().map(|&i| t.x[i].clone()).collect(),
                        w: t.w * inv_fact,
                    });
                }
            }
        } else {
            out.extend(plain);
        }
    }
    Ok(out)
}

fn product_tuples(pb: &ProductBlock) -> Vec<Tuple> {
    let mut acc = vec![Tuple {
        x: Vec::new(),
        w: pb.scale,
    }];
    for f in &pb.factors {
        let mut next = Vec::with_capacity(acc.len() * f.support_len());
        for t in &acc {
            for (x, w) in f.support() {
                let mut xs = t.x.clone();
                xs.push(x.clone());
                next.push(Tuple { x: xs, w: t.w * w });
            }
        }
        acc = next;
    }
    acc
}

/// Marginal of an explicit tuple list, `(1/N) Σ_j π^j`, merged by location.
pub fn dense_marginal(tuples: &[Tuple]) -> Vec<Sample> {
    let Some(n) = tuples.first().map(|t| t.x.len()) else {
        return Vec::new();
    };
    let inv_n = 1.0 / n as f64;
    merge_locations(tuples.iter().flat_map(|t| t.x.iter().map(move |x| (x, t.w * inv_n))))
}

/// Merges identical tuples and sorts them, so that equal measures give
/// equal lists (up to summation rounding).
pub fn canonical_tuples(tuples: &[Tuple]) -> Vec<Tuple> {
    let mut items: Vec<&Tuple> = tuples.iter().collect();
    let cmp = |a: &Tuple, b: &Tuple| {
        a.x.iter()
            .zip(&b.x)
            .map(|(u, v)| u.lex_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    items.sort_by(|a, b| cmp(a, b));
    let mut out: Vec<Tuple> = Vec::new();
    for t in items {
        match out.last_mut() {
            Some(last) if cmp(last, t).is_eq() => last.w += t.w,
            _ => out.push(t.clone()),
        }
    }
    out
}
