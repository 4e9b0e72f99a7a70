//! Independent checks of constructed plans, and an exact optimum for tiny
//! atomic instances.

mod simplex;

use std::collections::HashMap;

use serde::Serialize;

use crate::construct::Ledger;
use crate::cost::{pair_potential, plan_cost_with, separation_bound, CostConfig, Omega};
use crate::measure::{merge_locations, Atom, Marginal, Point};
use crate::plan::{canonical_tuples, dense_expand, dense_marginal, dense_size, marginal, min_separation, symmetrize, Plan, Tuple};

pub use simplex::{solve as solve_lp, LpOutcome};

/// Largest number of distinct-index tuples [`exact_optimum_tiny`] accepts.
pub const TINY_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("{k}^{n} tuples exceed the cap {TINY_CAP}")]
    SizeCap { k: usize, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyConfig {
    /// Tolerance on every marginal residual.
    pub tol: f64,
    /// Largest dense expansion used for the second marginal path and the
    /// symmetry probes.
    pub dense_cap: usize,
    pub cost: CostConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            tol: 1e-9,
            dense_cap: 20_000,
            cost: CostConfig::default(),
        }
    }
}

/// Residuals of `marginal(P)` against the target marginal.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MarginalReport {
    /// Largest `|π(P)(x_j) − b_j|` over the target atoms.
    pub max_atom_residual: f64,
    /// Largest per-location residual of the diffuse part after merging
    /// co-located samples.
    pub max_cloud_residual: f64,
    /// Mass that `π(P)` puts where the target has none.
    pub unmatched_mass: f64,
    /// `||P| − |ρ||`.
    pub mass_residual: f64,
    /// Largest per-location residual of the marginal computed from the
    /// dense expansion, when it fits under the cap.
    pub dense_residual: Option<f64>,
    /// Whether the block formula could be applied (all blocks symmetrized).
    pub symmetric_input: bool,
}

impl MarginalReport {
    pub fn max_residual(&self) -> f64 {
        if !self.symmetric_input {
            return f64::INFINITY;
        }
        [
            self.max_atom_residual,
            self.max_cloud_residual,
            self.unmatched_mass,
            self.mass_residual,
            self.dense_residual.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

fn by_location<'a>(items: impl Iterator<Item = (&'a Point, f64)>) -> HashMap<Vec<u64>, f64> {
    let mut out = HashMap::new();
    for s in merge_locations(items) {
        *out.entry(s.x.key()).or_insert(0.0) += s.w;
    }
    out
}

/// Largest per-key difference plus the mass of `got` at keys absent from
/// `want`.
fn compare(got: &HashMap<Vec<u64>, f64>, want: &HashMap<Vec<u64>, f64>) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut unmatched = 0.0;
    for (k, &w) in want {
        worst = worst.max((got.get(k).copied().unwrap_or(0.0) - w).abs());
    }
    for (k, &g) in got {
        if !want.contains_key(k) {
            unmatched += g;
        }
    }
    (worst, unmatched)
}

/// Compares `marginal(p)`, and the marginal of the dense expansion when it
/// has at most `dense_cap` tuples, with `m`.
pub fn check_marginals(p: &Plan, m: &Marginal, dense_cap: usize) -> MarginalReport {
    let Ok(pm) = marginal(p) else {
        return MarginalReport::default();
    };
    let want_atoms = by_location(m.atoms.iter().map(|a| (&a.x, a.b)));
    let want_cloud = by_location(m.diffuse.iter().map(|s| (&s.x, s.w)));
    let got_atoms = by_location(pm.atoms.iter().map(|a| (&a.x, a.b)));
    let got_cloud = by_location(pm.cloud.iter().map(|s| (&s.x, s.w)));
    let (max_atom_residual, unmatched_atoms) = compare(&got_atoms, &want_atoms);
    let (max_cloud_residual, unmatched_cloud) = compare(&got_cloud, &want_cloud);

    let dense_residual = (dense_size(p) <= dense_cap as f64).then(|| {
        let tuples = dense_expand(p, dense_cap).expect("size checked");
        let got = by_location(dense_marginal(&tuples).iter().map(|s| (&s.x, s.w)));
        let want = by_location(
            m.atoms
                .iter()
                .map(|a| (&a.x, a.b))
                .chain(m.diffuse.iter().map(|s| (&s.x, s.w))),
        );
        let (worst, unmatched) = compare(&got, &want);
        worst.max(unmatched)
    });
    MarginalReport {
        max_atom_residual,
        max_cloud_residual,
        unmatched_mass: unmatched_atoms + unmatched_cloud,
        mass_residual: (p.mass() - m.total_mass()).abs(),
        dense_residual,
        symmetric_input: true,
    }
}

/// Whether `p` is symmetric: every block carries the flag and, when the
/// dense expansion fits under `dense_cap`, it is invariant under every
/// adjacent transposition of slots.
pub fn check_symmetry(p: &Plan, dense_cap: usize) -> bool {
    if p.n() > 1 && !p.is_symmetrized() {
        return false;
    }
    if dense_size(p) > dense_cap as f64 {
        return true;
    }
    let tuples = dense_expand(p, dense_cap).expect("size checked");
    let base = canonical_tuples(&tuples);
    (0..p.n().saturating_sub(1)).all(|i| {
        let swapped: Vec<Tuple> = tuples
            .iter()
            .map(|t| {
                let mut x = t.x.clone();
                x.swap(i, i + 1);
                Tuple { x, w: t.w }
            })
            .collect();
        let swapped = canonical_tuples(&swapped);
        swapped.len() == base.len()
            && swapped
                .iter()
                .zip(&base)
                .all(|(a, b)| a.x == b.x && (a.w - b.w).abs() <= 1e-12 * b.w.abs().max(1e-300))
    })
}

/// Cost of the plan under one profile, with the separation bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostEntry {
    pub omega: Omega,
    #[serde(serialize_with = "crate::extended::serialize")]
    pub value: f64,
    pub error: f64,
    pub subsampled: bool,
    /// `|P| · C(N, 2) / ω(α)`.
    #[serde(serialize_with = "crate::extended::serialize")]
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub passed: bool,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub blocks: usize,
    pub mass: f64,
    pub tolerance: f64,
    pub marginal: MarginalReport,
    pub symmetry_ok: bool,
    #[serde(serialize_with = "crate::extended::serialize")]
    pub separation: f64,
    pub costs: Vec<CostEntry>,
    /// Mass identities checked during construction and here.
    pub ledger: Ledger,
    pub cost_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Human-readable reasons for a failure.
    pub failures: Vec<String>,
}

/// Runs every check on `p` against `m`. The construction ledger, if any,
/// is extended with `|symmetrize(p)| = |p|`.
pub fn certify(p: &Plan, m: &Marginal, omegas: &[Omega], ledger: Option<&Ledger>, cfg: &VerifyConfig) -> Certificate {
    let mut ledger = ledger.cloned().unwrap_or_default();
    let mut failures = Vec::new();
    if ledger.check("|symmetrize(P)| = |P|", p.mass(), symmetrize(p).mass()).is_err() {
        failures.push("symmetrization changed the mass".into());
    }
    if ledger.violations > 0 {
        failures.push(format!("{} mass bookkeeping violations", ledger.violations));
    }
    let report = check_marginals(p, m, cfg.dense_cap);
    if !report.passes(cfg.tol) {
        failures.push(format!("marginal residual {} exceeds {}", report.max_residual(), cfg.tol));
    }
    let symmetry_ok = check_symmetry(p, cfg.dense_cap);
    if !symmetry_ok {
        failures.push("plan is not symmetric".into());
    }
    let separation = min_separation(p);
    if separation <= 0.0 {
        failures.push("two slots touch".into());
    }
    let mut costs = Vec::new();
    for w in omegas {
        let est = plan_cost_with(p, w, &cfg.cost);
        let bound = if p.n() > 1 { separation_bound(p, w, separation) } else { 0.0 };
        if !est.value.is_finite() {
            failures.push(format!("cost under {w} is {}", crate::extended::format(est.value)));
        } else if est.value > bound * (1.0 + 1e-9) + est.error {
            failures.push(format!("cost under {w} exceeds the separation bound"));
        }
        costs.push(CostEntry {
            omega: w.clone(),
            value: est.value,
            error: est.error,
            subsampled: est.subsampled,
            bound,
        });
    }
    Certificate {
        passed: failures.is_empty(),
        n: p.n(),
        d: p.d(),
        blocks: p.blocks().len(),
        mass: p.mass(),
        tolerance: cfg.tol,
        marginal: report,
        symmetry_ok,
        separation,
        costs,
        ledger,
        cost_seed: cfg.cost.seed,
        config_hash: None,
        failures,
    }
}

/// Minimal cost `inf ∫ c dP` over all plans on `(ℝᵈ)ᴺ` with every marginal
/// equal to `Σ b_j δ_{x_j}`, by a dense simplex over the tuples of distinct
/// atoms. `+∞` when no such plan exists.
pub fn exact_optimum_tiny(atoms: &[Atom], n: usize, w: &Omega) -> Result<f64, VerifyError> {
    let k = atoms.len();
    if (k as f64).powi(n as i32) > TINY_CAP as f64 {
        return Err(VerifyError::SizeCap { k, n });
    }
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let mut cur = vec![0usize; n];
    'outer: loop {
        let distinct = (0..n).all(|i| (i + 1..n).all(|j| cur[i] != cur[j]));
        if distinct {
            tuples.push(cur.clone());
        }
        for s in (0..n).rev() {
            cur[s] += 1;
            if cur[s] < k {
                continue 'outer;
            }
            cur[s] = 0;
        }
        break;
    }
    if tuples.is_empty() {
        return Ok(f64::INFINITY);
    }
    let costs: Vec<f64> = tuples
        .iter()
        .map(|t| {
            let mut c = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    c += pair_potential(w, atoms[t[i]].x.distance(&atoms[t[j]].x));
                }
            }
            c
        })
        .collect();
    let mut a = Vec::with_capacity(n * k);
    let mut b = Vec::with_capacity(n * k);
    for s in 0..n {
        for (i, atom) in atoms.iter().enumerate() {
            a.push(tuples.iter().map(|t| if t[s] == i { 1.0 } else { 0.0 }).collect());
            b.push(atom.b);
        }
    }
    Ok(match simplex::solve(&a, &b, &costs) {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible => f64::INFINITY,
        LpOutcome::Unbounded => f64::NEG_INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{construct, ConstructConfig};
    use crate::measure::AtomList;
    use crate::plan::{Block, Factor, MapBlock};

    fn pt(x: f64) -> Point {
        Point::new(vec![x])
    }

    #[test]
    fn two_atoms_optimum() {
        let atoms = [Atom::new(vec![0.0], 0.5), Atom::new(vec![1.0], 0.5)];
        assert!((exact_optimum_tiny(&atoms, 2, &Omega::Identity).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_atom_has_no_plan() {
        let atoms = [Atom::new(vec![0.0], 1.0)];
        assert_eq!(exact_optimum_tiny(&atoms, 2, &Omega::Identity).unwrap(), f64::INFINITY);
        assert_eq!(exact_optimum_tiny(&atoms, 3, &Omega::Identity).unwrap(), f64::INFINITY);
    }

    #[test]
    fn size_cap() {
        let atoms: Vec<Atom> = (0..11).map(|i| Atom::new(vec![i as f64], 1.0 / 11.0)).collect();
        assert!(exact_optimum_tiny(&atoms, 4, &Omega::Identity).is_err());
    }

    #[test]
    fn optimum_below_constructed_plan() {
        let atoms = vec![
            Atom::new(vec![0.0], 0.4),
            Atom::new(vec![1.0], 0.35),
            Atom::new(vec![2.0], 0.25),
        ];
        let m = Marginal::atomic(1, AtomList::new(atoms.clone()).unwrap()).unwrap();
        let plan = construct(&m, 2, &ConstructConfig::default()).unwrap().plan;
        let built = crate::cost::plan_cost(&plan, &Omega::Identity);
        let opt = exact_optimum_tiny(&atoms, 2, &Omega::Identity).unwrap();
        assert!(opt.is_finite() && built.is_finite());
        assert!(opt <= built + 1e-12);
    }

    #[test]
    fn perturbed_block_is_flagged() {
        let atoms = AtomList::new(vec![
            Atom::new(vec![0.0], 0.4),
            Atom::new(vec![1.0], 0.35),
            Atom::new(vec![2.0], 0.25),
        ])
        .unwrap();
        let m = Marginal::atomic(1, atoms).unwrap();
        let plan = construct(&m, 2, &ConstructConfig::default()).unwrap().plan;
        let cfg = VerifyConfig::default();
        assert!(check_marginals(&plan, &m, cfg.dense_cap).passes(1e-9));
        let mut blocks = plan.clone().into_blocks();
        if let Block::Product(pb) = &mut blocks[0] {
            pb.scale += 1e-3;
        }
        let bad = Plan::from_blocks(2, 1, blocks).unwrap();
        let r = check_marginals(&bad, &m, cfg.dense_cap);
        assert!(!r.passes(1e-9));
        assert!((r.max_atom_residual - 0.5e-3).abs() < 1e-12);
    }

    #[test]
    fn single_slot_plan_against_its_measure() {
        let c = crate::measure::uniform_box(&[0.0], &[1.0], 1.0, 200, 1);
        let m = Marginal::diffuse_only(1, c).unwrap();
        let plan = construct(&m, 1, &ConstructConfig::default()).unwrap().plan;
        assert_eq!(check_marginals(&plan, &m, 1000).max_residual(), 0.0);
    }

    #[test]
    fn symmetry_checks() {
        let raw = Plan::product(1, vec![Factor::point(pt(0.0)), Factor::point(pt(1.0))], 1.0).unwrap();
        assert!(!check_symmetry(&raw, 100));
        assert!(check_symmetry(&symmetrize(&raw), 100));
        let pair = Plan::from_blocks(
            2,
            1,
            vec![Block::Map(MapBlock {
                tuples: vec![
                    Tuple { x: vec![pt(0.0), pt(1.0)], w: 0.5 },
                    Tuple { x: vec![pt(1.0), pt(0.0)], w: 0.5 },
                ],
                symmetrized: true,
            })],
        )
        .unwrap();
        assert!(check_symmetry(&pair, 100));
    }

    #[test]
    fn certificate_for_a_constructed_plan() {
        let c = crate::measure::uniform_box(&[0.0, 0.0], &[1.0, 1.0], 0.6, 200, 3);
        let atoms = AtomList::new(vec![Atom::new(vec![0.5, 0.5], 0.25), Atom::new(vec![2.0, 0.0], 0.15)]).unwrap();
        let m = Marginal::new(2, atoms, c).unwrap();
        let built = construct(&m, 3, &ConstructConfig::default()).unwrap();
        let cert = certify(&built.plan, &m, &[Omega::Identity], Some(&built.ledger), &VerifyConfig::default());
        assert!(cert.passed, "{:?}", cert.failures);
        assert!(cert.costs[0].value <= cert.costs[0].bound);
        let json = serde_json::to_value(&cert).unwrap();
        assert_eq!(json["N"], 3);
    }
}
