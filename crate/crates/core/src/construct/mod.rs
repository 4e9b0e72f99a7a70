//! Symmetric plans of finite repulsive cost for marginals with
//! concentration below `1/N`.
//!
//! [`construct`] dispatches on the number `k` of atoms:
//!
//! | atoms | construction |
//! |---|---|
//! | `k = 0` | [`plan_diffuse`] |
//! | `1 ≤ k ≤ N` | [`plan_few_atoms`] |
//! | `N < k ≤ cutoff` | [`plan_discrete`] plus [`plan_diffuse`], or [`plan_with_tail`] |
//! | `k > cutoff` | [`reduce_countable`], then again on what is left |
//!
//! Every output block is symmetrized and keeps its slots at positive
//! distance from each other.

mod countable;
mod diffuse;
mod discrete;
mod few_atoms;
mod tail;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::measure::{validate_marginal_with, Atom, Cloud, Marginal, ValidationConfig, ValidationReport};
use crate::partition::{PartitionError, SplitConfig};
use crate::plan::{add_into, Plan, PlanError};

pub use countable::{reduce_countable, TailReduction};
pub use diffuse::plan_diffuse;
pub use discrete::{base_weights, discrete_condition, plan_discrete, t_split, TSplit};
pub use few_atoms::plan_few_atoms;
pub use tail::plan_with_tail;

/// Default number of atoms above which long lists are first reduced.
pub const DEFAULT_CUTOFF: usize = 64;

/// Relative tolerance of the mass bookkeeping.
pub const LEDGER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstructError {
    #[error("marginal rejected: {0}")]
    Validation(ValidationReport),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("(N − 1)·b_1 = {lhs} exceeds the remaining atomic mass {rhs}")]
    ConditionViolated { lhs: f64, rhs: f64 },
    #[error("negative weight {0} in a linear solve")]
    NegativeWeight(f64),
    #[error("{atoms} atoms cannot fill {slots} slots")]
    ArityUnderflow { atoms: usize, slots: usize },
    #[error("{atoms} atoms exceed {slots} slots")]
    TooManyAtoms { atoms: usize, slots: usize },
    #[error("diffuse mass {available} does not exceed {required}")]
    InsufficientMass { available: f64, required: f64 },
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("cloud collapses onto too few locations to keep slots apart")]
    DegenerateCloud,
    #[error("mass bookkeeping failed ({what}): expected {expected}, found {found}")]
    Ledger {
        what: &'static str,
        expected: f64,
        found: f64,
    },
}

/// Runtime record of the mass identities checked during a construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Ledger {
    pub checks: usize,
    pub violations: usize,
    /// Largest absolute deviation seen.
    pub max_error: f64,
    /// Checks per identity.
    pub by_identity: BTreeMap<&'static str, usize>,
}

impl Ledger {
    /// Records `expected = found` up to [`LEDGER_TOL`] relative to
    /// `max(1, |expected|)`.
    pub fn check(&mut self, what: &'static str, expected: f64, found: f64) -> Result<(), ConstructError> {
        self.checks += 1;
        *self.by_identity.entry(what).or_default() += 1;
        let err = (expected - found).abs();
        self.max_error = self.max_error.max(err);
        if err > LEDGER_TOL * expected.abs().max(1.0) || !found.is_finite() {
            self.violations += 1;
            return Err(ConstructError::Ledger { what, expected, found });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructConfig {
    pub cutoff: usize,
    pub split: SplitConfig,
    pub validation: ValidationConfig,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            cutoff: DEFAULT_CUTOFF,
            split: SplitConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

/// Which construction handled a (sub-)marginal.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum Branch {
    Trivial { k: usize },
    Diffuse,
    FewAtoms { k: usize },
    Discrete { k: usize },
    WithTail { k: usize },
    Reduce { k: usize, kept: usize },
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub plan: Plan,
    pub ledger: Ledger,
    /// Branches in the order they were taken.
    pub branches: Vec<Branch>,
}

/// Symmetric plan with marginal `m` and positive slot separation.
pub fn construct(m: &Marginal, n: usize, cfg: &ConstructConfig) -> Result<Construction, ConstructError> {
    let report = validate_marginal_with(m, n, &cfg.validation);
    if !report.is_ok() {
        return Err(ConstructError::Validation(report));
    }
    let mut ledger = Ledger::default();
    let mut branches = Vec::new();
    let atoms = m.atoms.entries().to_vec();
    let plan = dispatch(m.d, atoms, &m.diffuse, n, m.total_mass(), cfg, &mut ledger, &mut branches)?;
    ledger.check("|P| = |ρ|", m.total_mass(), plan.mass())?;
    Ok(Construction { plan, ledger, branches })
}

#[allow(clippy::too_many_arguments)]
fn dispatch(
    d: usize,
    atoms: Vec<Atom>,
    c: &Cloud,
    n: usize,
    total_mass: f64,
    cfg: &ConstructConfig,
    ledger: &mut Ledger,
    branches: &mut Vec<Branch>,
) -> Result<Plan, ConstructError> {
    let k = atoms.len();
    if n == 1 {
        branches.push(Branch::Trivial { k });
        let mut plan = plan_discrete(d, &atoms, 1, ledger)?;
        if !c.is_empty() {
            add_into(&mut plan, plan_diffuse(c, 1, &cfg.split)?)?;
        }
        return Ok(plan);
    }
    if k == 0 {
        branches.push(Branch::Diffuse);
        return plan_diffuse(c, n, &cfg.split);
    }
    if k <= n {
        branches.push(Branch::FewAtoms { k });
        return plan_few_atoms(c, &atoms, n, &cfg.split, ledger);
    }
    if k > cfg.cutoff && k >= n + 2 {
        let (mut prefix, residual, _) = reduce_countable(&atoms, n, total_mass, ledger)?;
        if residual.len() < k {
            branches.push(Branch::Reduce { k, kept: residual.len() });
            let prefix_mass = prefix.mass();
            let rest = dispatch(d, residual, c, n, total_mass - prefix_mass, cfg, ledger, branches)?;
            add_into(&mut prefix, rest)?;
            return Ok(prefix);
        }
    }
    let b: Vec<f64> = atoms.iter().map(|a| a.b).collect();
    if discrete_condition(&b, n) {
        branches.push(Branch::Discrete { k });
        let mut plan = plan_discrete(d, &atoms, n, ledger)?;
        if !c.is_empty() {
            add_into(&mut plan, plan_diffuse(c, n, &cfg.split)?)?;
        }
        Ok(plan)
    } else {
        branches.push(Branch::WithTail { k });
        plan_with_tail(c, &atoms, n, &cfg.split, ledger)
    }
}
