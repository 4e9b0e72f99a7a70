//! Marginals with at most `N` atoms.
//!
//! With `m_i = b_i − b_{i+1}` (and `b_{k+1} = 0`) the atoms are peeled off
//! in layers: `P_i = N/m_i^{N−i−1} · (δ_{x_1} ⊗ … ⊗ δ_{x_i} ⊗ σ^i_{i+1} ⊗ …
//! ⊗ σ^i_N)_sym` puts mass `m_i` on each of `x_1, …, x_i` and uses pieces
//! `σ^i_h` of the diffuse part, each of mass `m_i`, kept away from those
//! atoms and from each other. The rest `τ` of the diffuse part is coupled
//! by [`plan_diffuse`].

use crate::measure::{Atom, Cloud, Point};
use crate::partition::{subordinate_partition, SplitConfig};
use crate::plan::{add_into, Block, Factor, Plan, ProductBlock};

use super::diffuse::plan_diffuse;
use super::{ConstructError, Ledger};

/// Layers lighter than this fraction of the total atomic mass are skipped.
const LAYER_TOL: f64 = 1e-14;

/// Symmetric plan with marginal `c + Σ b_j δ_{x_j}` for `k ≤ N` atoms sorted
/// by non-increasing weight. Needs `|c| > N b_1 − Σ b_j`.
pub fn plan_few_atoms(
    c: &Cloud,
    atoms: &[Atom],
    n: usize,
    split: &SplitConfig,
    ledger: &mut Ledger,
) -> Result<Plan, ConstructError> {
    let k = atoms.len();
    if k == 0 {
        return plan_diffuse(c, n, split);
    }
    if k > n {
        return Err(ConstructError::TooManyAtoms { atoms: k, slots: n });
    }
    let b: Vec<f64> = atoms.iter().map(|a| a.b).collect();
    let total: f64 = b.iter().sum();
    let required = n as f64 * b[0] - total;
    if c.total_mass() <= required {
        return Err(ConstructError::InsufficientMass {
            available: c.total_mass(),
            required,
        });
    }
    let d = atoms[0].x.dim();
    let masses: Vec<f64> = (0..k)
        .map(|i| {
            let m = b[i] - b.get(i + 1).copied().unwrap_or(0.0);
            if m > LAYER_TOL * total {
                m
            } else {
                0.0
            }
        })
        .collect();
    let locations: Vec<Point> = atoms.iter().map(|a| a.x.clone()).collect();
    let part = subordinate_partition(c, &locations, &masses, n, split)?;

    let mut plan = Plan::empty(n, d);
    for (i, &m) in masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        // zero-based i: atoms x_0..=x_i, pieces σ^i_h for h = i+1..N−1
        let mut factors: Vec<Factor> = locations[..=i].iter().cloned().map(Factor::point).collect();
        for h in i + 1..n {
            let piece = part.pieces.get(&(i, h)).expect("one piece per layer and slot");
            factors.push(Factor::Diffuse(piece.clone()));
        }
        let exponent = n as i32 - i as i32 - 2;
        let block = ProductBlock {
            factors,
            scale: n as f64 / m.powi(exponent),
            symmetrized: true,
        };
        ledger.check("|P_i| = N m_i", n as f64 * m, block.mass())?;
        plan.push(Block::Product(block));
    }
    if !part.remainder.is_empty() {
        add_into(&mut plan, plan_diffuse(&part.remainder, n, split)?)?;
    }
    Ok(plan)
}
