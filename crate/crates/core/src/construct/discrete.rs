//! Purely atomic marginals: the base case with `N + 1` atoms and the double
//! induction on the number of slots and atoms.

use crate::measure::{Atom, AtomList, Point};
use crate::plan::{insert_all_slots, scale, symmetrize, Block, Factor, Plan, ProductBlock};

use super::{ConstructError, Ledger};

/// Relative slack when checking the inequalities of a split.
const TOL: f64 = 1e-12;

/// Residual mass, relative to the outermost or the current list, dropped as
/// rounding error.
const DUST: f64 = 1e-13;

/// `(N − 1) b_1 ≤ Σ_{j≥2} b_j`, up to rounding.
pub fn discrete_condition(b: &[f64], n: usize) -> bool {
    let rest: f64 = b.iter().skip(1).sum();
    let lhs = (n as f64 - 1.0) * b[0];
    lhs <= rest + TOL * rest.max(lhs).max(1e-300)
}

/// Weights `t_2, …, t_k` splitting `b_2, …, b_k` into the part paired with
/// `x_1` and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct TSplit {
    /// `t_2, …, t_k`.
    pub t: Vec<f64>,
    /// Tail sums `p_j = Σ_{h≥j} b_h` for `j = 2, …, k`.
    pub pbar: Vec<f64>,
    /// One-based index `j̄`: the least `j ≥ 2` with `(N − j + 2) b_j ≤ p_j`.
    pub jbar: usize,
}

impl TSplit {
    /// `b_j − t_j` for `j = 2, …, k`.
    pub fn complement(&self, b: &[f64]) -> Vec<f64> {
        b[1..].iter().zip(&self.t).map(|(b, t)| b - t).collect()
    }
}

/// Computes `t_j`, `j = 2, …, k`, with `Σ t = (N − 1) b_1`, `0 ≤ t ≤ b`,
/// both `t` and `b − t` non-increasing, `(N − 2) t_2 ≤ Σ_{j≥3} t_j` and
/// `(N − 1)(b_2 − t_2) ≤ Σ_{j≥3} (b_j − t_j)`.
///
/// Needs `k ≥ N + 2` sorted positive weights with `(N − 1) b_1 ≤ Σ_{j≥2} b_j`.
pub fn t_split(b: &[f64], n: usize) -> Result<TSplit, ConstructError> {
    let k = b.len();
    if k < n + 2 {
        return Err(ConstructError::ArityUnderflow { atoms: k, slots: n });
    }
    if !discrete_condition(b, n) {
        return Err(ConstructError::ConditionViolated {
            lhs: (n as f64 - 1.0) * b[0],
            rhs: b[1..].iter().sum(),
        });
    }
    // pbar[j - 2] = p_j
    let mut pbar = vec![0.0; k - 1];
    let mut acc = 0.0;
    for j in (2..=k).rev() {
        acc += b[j - 1];
        pbar[j - 2] = acc;
    }
    let nf = n as f64;
    let jbar = (2..=k)
        .find(|&j| (nf - j as f64 + 2.0) * b[j - 1] <= pbar[j - 2])
        .expect("j = N + 2 satisfies the inequality");
    let excess = ((pbar[0] - (nf - 1.0) * b[0]) / nf).max(0.0);
    let ratio = excess * (nf - jbar as f64 + 2.0) / pbar[jbar - 2];
    let t = (2..=k)
        .map(|j| {
            let bj = b[j - 1];
            let tj = if j < jbar { bj - excess } else { bj - bj * ratio };
            tj.clamp(0.0, bj)
        })
        .collect();
    Ok(TSplit { t, pbar, jbar })
}

/// Solution `a` of `Σ_{i≠j} a_i = b_j` for `N + 1` weights:
/// `a_j = S/N − b_j` with `S = Σ b`.
pub fn base_weights(b: &[f64], n: usize) -> Result<Vec<f64>, ConstructError> {
    assert_eq!(b.len(), n + 1, "base case takes N + 1 weights");
    let s: f64 = b.iter().sum();
    let a: Vec<f64> = b.iter().map(|bj| s / n as f64 - bj).collect();
    let floor = -TOL * s.max(1e-300);
    if let Some(&bad) = a.iter().find(|&&ai| ai < floor) {
        return Err(ConstructError::NegativeWeight(bad));
    }
    Ok(a.into_iter().map(|ai| ai.max(0.0)).collect())
}

fn delta(x: &Point) -> Factor {
    Factor::point(x.clone())
}

/// Drops weights that are zero up to rounding, keeping locations aligned.
fn nonzero(atoms: &[Point], w: &[f64], total: f64) -> Vec<Atom> {
    let cut = 1e-15 * total.max(1e-300);
    atoms
        .iter()
        .zip(w)
        .filter(|(_, &w)| w > cut)
        .map(|(x, &w)| Atom { x: x.clone(), b: w })
        .collect()
}

/// Symmetric plan on `(ℝᵈ)ᴺ` whose marginal is `Σ b_j δ_{x_j}`.
///
/// Atoms must be sorted by non-increasing weight with
/// `(N − 1) b_1 ≤ Σ_{j≥2} b_j`. For `k = N` the weights must all be equal.
pub fn plan_discrete(d: usize, atoms: &[Atom], n: usize, ledger: &mut Ledger) -> Result<Plan, ConstructError> {
    let total: f64 = atoms.iter().map(|a| a.b).sum();
    discrete_rec(d, atoms, n, DUST * total, ledger)
}

/// `floor` is the mass below which a residual list counts as rounding
/// error, fixed relative to the outermost call.
fn discrete_rec(d: usize, atoms: &[Atom], n: usize, floor: f64, ledger: &mut Ledger) -> Result<Plan, ConstructError> {
    let k = atoms.len();
    let b: Vec<f64> = atoms.iter().map(|a| a.b).collect();
    let total: f64 = b.iter().sum();
    if k == 0 {
        return Ok(Plan::empty(n, d));
    }
    if n == 1 {
        let block = Block::Product(ProductBlock {
            factors: vec![Factor::Atomic(AtomList::from_entries_unchecked(atoms.to_vec()))],
            scale: 1.0,
            symmetrized: true,
        });
        return Ok(Plan::from_blocks(1, d, vec![block])?);
    }
    if k < n {
        return Err(ConstructError::ArityUnderflow { atoms: k, slots: n });
    }
    if k == n {
        // only equal weights fit: N·w·(δ_{x_1} ⊗ … ⊗ δ_{x_N})_sym
        let w = b[0];
        if b.iter().any(|&bj| (bj - w).abs() > TOL * w) {
            return Err(ConstructError::ArityUnderflow { atoms: k, slots: n });
        }
        let block = Block::Product(ProductBlock {
            factors: atoms.iter().map(|a| delta(&a.x)).collect(),
            scale: n as f64 * w,
            symmetrized: true,
        });
        return Ok(Plan::from_blocks(n, d, vec![block])?);
    }
    if !discrete_condition(&b, n) {
        return Err(ConstructError::ConditionViolated {
            lhs: (n as f64 - 1.0) * b[0],
            rhs: b[1..].iter().sum(),
        });
    }
    if k == n + 1 {
        let a = base_weights(&b, n)?;
        let mut blocks = Vec::with_capacity(k);
        for (i, &ai) in a.iter().enumerate() {
            if ai <= 1e-15 * total {
                continue;
            }
            blocks.push(Block::Product(ProductBlock {
                factors: atoms
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, at)| delta(&at.x))
                    .collect(),
                scale: n as f64 * ai,
                symmetrized: true,
            }));
        }
        let plan = Plan::from_blocks(n, d, blocks)?;
        ledger.check("base case mass", total, plan.mass())?;
        return Ok(plan);
    }

    let split = t_split(&b, n)?;
    let rest: Vec<Point> = atoms[1..].iter().map(|a| a.x.clone()).collect();

    // Q = 1/(N−1) · Σ_j Q₁ ⊗_j δ_{x_1}
    let t_atoms = nonzero(&rest, &split.t, total);
    let q1 = discrete_rec(d, &t_atoms, n - 1, floor, ledger)?;
    let q = scale(&insert_all_slots(&q1, &delta(&atoms[0].x))?, 1.0 / (n as f64 - 1.0))?;
    ledger.check("|Q| = N b_1", n as f64 * b[0], q.mass())?;

    let r_atoms = nonzero(&rest, &split.complement(&b), total);
    let r_expected: f64 = split.complement(&b).iter().sum();
    let r = if r_expected <= floor || (r_atoms.len() <= n && r_expected <= DUST * total) {
        Plan::empty(n, d)
    } else {
        discrete_rec(d, &r_atoms, n, floor, ledger)?
    };
    ledger.check("|R| = Σ(b − t)", r_expected, r.mass())?;

    let mut out = symmetrize(&q);
    crate::plan::add_into(&mut out, r)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{dense_expand, dense_marginal, marginal};

    fn line_atoms(b: &[f64]) -> Vec<Atom> {
        b.iter().enumerate().map(|(i, &w)| Atom::new(vec![i as f64], w)).collect()
    }

    /// The four properties of a split, checked directly.
    fn assert_split_properties(b: &[f64], n: usize, s: &TSplit) {
        let nf = n as f64;
        let tol = 1e-12;
        let sum: f64 = s.t.iter().sum();
        assert!((sum - (nf - 1.0) * b[0]).abs() < tol, "sum {sum}");
        for (j, &tj) in s.t.iter().enumerate() {
            assert!(tj >= -tol && tj <= b[j + 1] + tol);
        }
        let c = s.complement(b);
        for w in s.t.windows(2) {
            assert!(w[0] >= w[1] - tol);
        }
        for w in c.windows(2) {
            assert!(w[0] >= w[1] - tol);
        }
        let t_rest: f64 = s.t[1..].iter().sum();
        assert!((nf - 2.0) * s.t[0] <= t_rest + tol);
        let c_rest: f64 = c[1..].iter().sum();
        assert!((nf - 1.0) * c[0] <= c_rest + tol);
    }

    #[test]
    fn split_two_slots() {
        let b = [0.3, 0.3, 0.2, 0.2];
        let s = t_split(&b, 2).unwrap();
        assert_eq!(s.jbar, 2);
        let expected = [0.3 * 3.0 / 7.0, 0.2 * 3.0 / 7.0, 0.2 * 3.0 / 7.0];
        for (t, e) in s.t.iter().zip(expected) {
            assert!((t - e).abs() < 1e-15);
        }
        assert_split_properties(&b, 2, &s);
    }

    #[test]
    fn split_equal_weights() {
        let b = [0.2; 5];
        let s = t_split(&b, 3).unwrap();
        assert_eq!(s.jbar, 2);
        for t in &s.t {
            assert!((t - 0.1).abs() < 1e-15);
        }
        assert!((s.t.iter().sum::<f64>() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn split_at_equality_keeps_everything() {
        let b = [0.3, 0.15, 0.15, 0.15, 0.15];
        let s = t_split(&b, 3).unwrap();
        for (t, bj) in s.t.iter().zip(&b[1..]) {
            assert!((t - bj).abs() < 1e-15);
        }
    }

    #[test]
    fn split_rejects_heavy_first_weight() {
        assert!(matches!(
            t_split(&[0.6, 0.1, 0.1, 0.1, 0.1], 2),
            Err(ConstructError::ConditionViolated { .. })
        ));
    }

    #[test]
    fn base_weights_examples() {
        let b = [0.4, 0.35, 0.25];
        let a = base_weights(&b, 2).unwrap();
        for (x, e) in a.iter().zip([0.10, 0.15, 0.25]) {
            assert!((x - e).abs() < 1e-15);
        }
        assert!((a[1] + a[2] - 0.40).abs() < 1e-15);
        assert!((a[0] + a[2] - 0.35).abs() < 1e-15);
        assert!((a[0] + a[1] - 0.25).abs() < 1e-15);

        let third = base_weights(&[1.0 / 3.0; 3], 2).unwrap();
        for x in third {
            assert!((x - 1.0 / 6.0).abs() < 1e-15);
        }

        match base_weights(&[0.8, 0.1, 0.1], 2) {
            Err(ConstructError::NegativeWeight(a1)) => assert!((a1 + 0.3).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    fn assert_marginal(plan: &Plan, atoms: &[Atom]) {
        let m = marginal(plan).unwrap();
        assert_eq!(m.atoms.len(), atoms.len());
        for a in atoms {
            assert!((m.mass_at(&a.x) - a.b).abs() < 1e-12, "{:?}", a);
        }
    }

    #[test]
    fn four_atoms_two_slots() {
        let atoms = line_atoms(&[0.3, 0.3, 0.2, 0.2]);
        let mut ledger = Ledger::default();
        let plan = plan_discrete(1, &atoms, 2, &mut ledger).unwrap();
        assert!(plan.is_symmetrized());
        assert_marginal(&plan, &atoms);
        // the x_1 part carries 2·b_1
        let q_mass: f64 = plan
            .blocks()
            .iter()
            .filter(|b| match b {
                Block::Product(p) => p.factors.iter().any(|f| f.support().any(|(x, _)| x.coords() == [0.0])),
                Block::Map(_) => false,
            })
            .map(Block::mass)
            .sum();
        assert!((q_mass - 0.6).abs() < 1e-15);
        // independent dense path
        let dense = dense_expand(&plan, 1000).unwrap();
        for (s, a) in dense_marginal(&dense).iter().zip(&atoms) {
            assert!((s.w - a.b).abs() < 1e-12);
        }
        assert!(ledger.checks > 0);
    }

    #[test]
    fn complement_of_the_four_atom_split_uses_base_weights() {
        let b = [0.3, 0.3, 0.2, 0.2];
        let c = t_split(&b, 2).unwrap().complement(&b);
        let a = base_weights(&c, 2).unwrap();
        for (x, e) in a.iter().zip([0.2 / 7.0, 0.6 / 7.0, 0.6 / 7.0]) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn single_slot_is_the_measure_itself() {
        let atoms = line_atoms(&[0.5, 0.3, 0.2]);
        let plan = plan_discrete(1, &atoms, 1, &mut Ledger::default()).unwrap();
        assert_eq!(plan.blocks().len(), 1);
        assert_marginal(&plan, &atoms);
        assert_eq!(crate::plan::min_separation(&plan), f64::INFINITY);
    }

    #[test]
    fn boundary_base_case_omits_zero_block() {
        let atoms = line_atoms(&[0.5, 0.3, 0.2]);
        let plan = plan_discrete(1, &atoms, 2, &mut Ledger::default()).unwrap();
        assert_eq!(plan.blocks().len(), 2);
        assert_marginal(&plan, &atoms);
    }

    #[test]
    fn many_atoms_three_slots() {
        let atoms = line_atoms(&[0.25, 0.2, 0.15, 0.12, 0.1, 0.08, 0.06, 0.04]);
        let plan = plan_discrete(1, &atoms, 3, &mut Ledger::default()).unwrap();
        assert_marginal(&plan, &atoms);
        assert!(crate::plan::min_separation(&plan) >= 1.0);
    }
}
