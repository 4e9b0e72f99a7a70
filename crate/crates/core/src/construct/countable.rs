//! Long atom lists: moving the light tail onto the heaviest atoms.
//!
//! Small balls `E_j = B(x_j, t_j)` around `x_3, …, x_{N+1}` together with
//! their complement `E_2` sort every atom into a group. Each group's tail
//! beyond a common threshold is paired with the centers of the other groups
//! in the block `N·(tail_j ⊗ δ_{x_2} ⊗ … (no x_j) … ⊗ δ_{x_{N+1}})_sym`,
//! whose slots are a ball radius apart. The tails are chosen light enough
//! that the centers keep positive weight and the remaining, shorter atom
//! list still satisfies the concentration bound.

use serde::Serialize;

use crate::measure::{Atom, AtomList, Point};
use crate::plan::{marginal, Block, Factor, Plan, ProductBlock};

use super::{ConstructError, Ledger};

/// Atoms closer than this fraction of the center spacing to a sphere
/// `∂E_j` make the radius shrink.
const BOUNDARY_CLEARANCE: f64 = 1e-9;

/// Bookkeeping of one reduction step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReduction {
    /// Ball radii `t_3, …, t_{N+1}`.
    pub radii: Vec<f64>,
    /// Group of each atom: `0` for `E_2`, `j − 2` for `E_j`.
    pub groups: Vec<usize>,
    /// Zero-based index of the first atom that belongs to a tail.
    pub threshold: usize,
    /// Tail masses `ε_2, …, ε_{N+1}`.
    pub tail_masses: Vec<f64>,
    /// `½·min{b_{N+1}, (|ρ| − N b_1)/N}`.
    pub budget: f64,
    /// Reduced weights `b̃`, indexed like the input.
    pub reduced: Vec<f64>,
}

/// Splits off tail blocks from `atoms` (sorted by non-increasing weight,
/// `k ≥ N + 2`) of a marginal with total mass `total_mass`. Returns the
/// blocks, the remaining atoms in canonical order and the bookkeeping.
pub fn reduce_countable(
    atoms: &[Atom],
    n: usize,
    total_mass: f64,
    ledger: &mut Ledger,
) -> Result<(Plan, Vec<Atom>, TailReduction), ConstructError> {
    let k = atoms.len();
    if k < n + 2 {
        return Err(ConstructError::ArityUnderflow { atoms: k, slots: n + 2 });
    }
    let d = atoms[0].x.dim();
    let b: Vec<f64> = atoms.iter().map(|a| a.b).collect();
    let centers: Vec<&Point> = atoms[..=n].iter().map(|a| &a.x).collect();

    let mut dmin = f64::INFINITY;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            dmin = dmin.min(centers[i].distance(centers[j]));
        }
    }
    // radii for centers x_3..x_{N+1}, i.e. zero-based 2..=n
    let mut radii = Vec::with_capacity(n - 1);
    for c in &centers[2..] {
        let mut t = 0.25 * dmin;
        for _ in 0..400 {
            let touching = atoms
                .iter()
                .any(|a| (a.x.distance(c) - t).abs() <= BOUNDARY_CLEARANCE * dmin);
            if !touching {
                break;
            }
            t *= 0.9;
        }
        radii.push(t);
    }
    let groups: Vec<usize> = atoms
        .iter()
        .map(|a| {
            centers[2..]
                .iter()
                .zip(&radii)
                .position(|(c, &t)| a.x.distance(c) < t)
                .map_or(0, |p| p + 1)
        })
        .collect();

    let budget = 0.5 * b[n].min((total_mass - n as f64 * b[0]) / n as f64);
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + b[i];
    }
    let threshold = (n + 1..=k).find(|&i| suffix[i] < budget).unwrap_or(k);

    let mut tails: Vec<Vec<Atom>> = vec![Vec::new(); n];
    for i in threshold..k {
        tails[groups[i]].push(atoms[i].clone());
    }
    let tail_masses: Vec<f64> = tails.iter().map(|t| t.iter().map(|a| a.b).sum()).collect();
    let eps_total: f64 = tail_masses.iter().sum();

    let mut plan = Plan::empty(n, d);
    for (g, tail) in tails.into_iter().enumerate() {
        if tail.is_empty() {
            continue;
        }
        // group g is centered at x_{g+2} (zero-based g + 1), which is left out
        let mut factors = vec![Factor::Atomic(AtomList::from_entries_unchecked(tail))];
        factors.extend(
            (1..=n)
                .filter(|&h| h != g + 1)
                .map(|h| Factor::point(atoms[h].x.clone())),
        );
        plan.push(Block::Product(ProductBlock {
            factors,
            scale: n as f64,
            symmetrized: true,
        }));
    }

    let reduced: Vec<f64> = (0..k)
        .map(|i| {
            if (1..=n).contains(&i) {
                b[i] - (eps_total - tail_masses[i - 1])
            } else if i >= threshold {
                0.0
            } else {
                b[i]
            }
        })
        .collect();
    if let Some(&neg) = reduced.iter().find(|&&r| r < 0.0) {
        return Err(ConstructError::NegativeWeight(neg));
    }

    let prefix = marginal(&plan)?;
    for (a, r) in atoms.iter().zip(&reduced) {
        ledger.check("prefix + residual = original", a.b, prefix.mass_at(&a.x) + r)?;
    }

    let mut residual: Vec<Atom> = atoms
        .iter()
        .zip(&reduced)
        .filter(|(_, &r)| r > 0.0)
        .map(|(a, &r)| Atom { x: a.x.clone(), b: r })
        .collect();
    residual.sort_by(|p, q| q.b.total_cmp(&p.b).then_with(|| p.x.lex_cmp(&q.x)));
    Ok((
        plan,
        residual,
        TailReduction {
            radii,
            groups,
            threshold,
            tail_masses,
            budget,
            reduced,
        },
    ))
}
