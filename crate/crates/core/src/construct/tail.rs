//! Finitely many atoms whose heaviest ones are too heavy for the purely
//! atomic construction.
//!
//! The fast decreasing prefix `x_1, …, x_ℓ` is paired with a discrete plan
//! on the remaining atoms, each prefix atom receiving mass `q_ℓ`. What is
//! left of the prefix weights goes to [`plan_few_atoms`] together with the
//! diffuse part.

use crate::measure::{fast_decreasing_prefix, Atom, Cloud};
use crate::partition::SplitConfig;
use crate::plan::{add_into, insert_all_slots, scale, Factor, Plan};

use super::discrete::plan_discrete;
use super::few_atoms::plan_few_atoms;
use super::{ConstructError, Ledger};

/// Symmetric plan with marginal `c + Σ b_j δ_{x_j}` for `k > N` atoms
/// sorted by non-increasing weight.
pub fn plan_with_tail(
    c: &Cloud,
    atoms: &[Atom],
    n: usize,
    split: &SplitConfig,
    ledger: &mut Ledger,
) -> Result<Plan, ConstructError> {
    let k = atoms.len();
    if k <= n {
        return Err(ConstructError::ArityUnderflow { atoms: k, slots: n });
    }
    let d = atoms[0].x.dim();
    let b: Vec<f64> = atoms.iter().map(|a| a.b).collect();
    let ell = fast_decreasing_prefix(&b, n);
    let p_ell: f64 = b[ell..].iter().sum();
    let q = p_ell / (n - ell) as f64;

    let mut p = plan_discrete(d, &atoms[ell..], n - ell, ledger)?;
    ledger.check("|P_j| = (N − j + 1) q", (n - ell) as f64 * q, p.mass())?;
    for j in (1..=ell).rev() {
        // P_j = 1/(N − j) · Σ_{i=j}^{N} P_{j+1} ⊗_i δ_{x_j}
        let inserted = insert_all_slots(&p, &Factor::point(atoms[j - 1].x.clone()))?;
        p = scale(&inserted, 1.0 / (n - j) as f64)?;
        ledger.check("|P_j| = (N − j + 1) q", (n - j + 1) as f64 * q, p.mass())?;
    }

    let residual: Vec<Atom> = atoms[..ell]
        .iter()
        .map(|a| Atom {
            x: a.x.clone(),
            b: a.b - q,
        })
        .collect();
    if !residual.is_empty() || !c.is_empty() {
        add_into(&mut p, plan_few_atoms(c, &residual, n, split, ledger)?)?;
    }
    Ok(p)
}
