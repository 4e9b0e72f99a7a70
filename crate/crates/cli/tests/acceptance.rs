//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symplan::construct::{base_weights, construct, t_split, ConstructConfig, ConstructError, Ledger};
use symplan::cost::{plan_cost, sharpness_lower_bound, sharpness_marginal, sharpness_monte_carlo, Omega};
use symplan::generate::{family, FamilySpec};
use symplan::measure::{save_marginal, uniform_box, Atom, AtomList, Marginal, Point};
use symplan::plan::{dense_expand, dense_marginal, marginal, symmetrize, Block, Factor, MapBlock, Plan, ProductBlock, Tuple};
use symplan::verify::{certify, check_marginals, exact_optimum_tiny, VerifyConfig};

const RESIDUAL_TOL: f64 = 1e-9;
const EXACT_TOL: f64 = 1e-12;
const FAMILY_SECONDS: f64 = 120.0;

struct Gate {
    failed: usize,
}

impl Gate {
    fn record(&mut self, id: u32, title: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {id}. {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn main() {
    let mut gate = Gate { failed: 0 };
    let ledgers = family_runs(&mut gate);
    base_case(&mut gate);
    split(&mut gate);
    block_marginals(&mut gate);
    oracle_sandwich(&mut gate);
    sharpness(&mut gate);
    boundary_rejection(&mut gate);
    ledger_summary(&mut gate, &ledgers);
    if gate.failed > 0 {
        println!("{} criteria failed", gate.failed);
        std::process::exit(1);
    }
}

fn family_runs(gate: &mut Gate) -> Vec<Ledger> {
    let start = Instant::now();
    let cases = family(&FamilySpec::default());
    let mut failures = Vec::new();
    let mut ledgers = Vec::new();
    let mut worst: f64 = 0.0;
    for c in &cases {
        let built = match construct(&c.marginal, c.n, &ConstructConfig::default()) {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("{}: {e}", c.name));
                continue;
            }
        };
        let cert = certify(&built.plan, &c.marginal, &[Omega::Identity], Some(&built.ledger), &VerifyConfig::default());
        let r = &cert.marginal;
        worst = worst.max(r.max_residual());
        let ok = cert.passed
            && r.symmetric_input
            && r.max_atom_residual <= RESIDUAL_TOL
            && r.max_cloud_residual <= RESIDUAL_TOL
            && cert.symmetry_ok
            && cert.separation > 0.0
            && cert.costs.iter().all(|e| e.value.is_finite());
        if !ok {
            failures.push(format!("{}: {:?}", c.name, cert.failures));
        }
        ledgers.push(cert.ledger);
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = cases.len() >= 200 && failures.is_empty() && secs <= FAMILY_SECONDS;
    let mut detail = format!(
        "{}/{} marginals certified, max residual {worst:.1e}, {secs:.1} s (limit {FAMILY_SECONDS} s)",
        cases.len() - failures.len(),
        cases.len()
    );
    if let Some(f) = failures.first() {
        detail += &format!("; first failure {f}");
    }
    gate.record(1, "family construction", ok, detail);
    ledgers
}

/// Descending weights `rest` of length `len` and the admissible range
/// `[rest[0], Σ rest / (N − 1)]` for a leading weight.
fn sorted_rest(rng: &mut ChaCha8Rng, len: usize, n: usize) -> (Vec<f64>, f64) {
    loop {
        let mut rest: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..1.0)).collect();
        rest.sort_by(|a, b| b.total_cmp(a));
        let hi = rest.iter().sum::<f64>() / (n as f64 - 1.0);
        if hi >= rest[0] {
            return (rest, hi);
        }
    }
}

fn base_case(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for n in 2..=6 {
        for _ in 0..1000 {
            let (rest, hi) = sorted_rest(&mut rng, n, n);
            let mut b = vec![rest[0] + rng.random::<f64>() * (hi - rest[0])];
            b.extend(&rest);
            match base_weights(&b, n) {
                Ok(a) => {
                    let total: f64 = a.iter().sum();
                    for (j, bj) in b.iter().enumerate() {
                        worst = worst.max((total - a[j] - bj).abs());
                    }
                    if a.iter().any(|&v| v < 0.0) || a.windows(2).any(|w| w[0] > w[1]) {
                        bad += 1;
                    }
                }
                Err(_) => bad += 1,
            }

            let (rest, hi) = sorted_rest(&mut rng, n, n);
            let mut b = vec![hi * (1.0 + rng.random_range(1e-6..=1.0))];
            b.extend(&rest);
            if !matches!(base_weights(&b, n), Err(ConstructError::NegativeWeight(_))) {
                bad += 1;
            }
        }
    }
    gate.record(
        2,
        "base-case weights",
        bad == 0 && worst <= EXACT_TOL,
        format!("5 × (1000 admissible + 1000 violating) vectors, max residual {worst:.1e}, {bad} wrong outcomes"),
    );
}

/// Smallest slack over the four split properties; negative means violated.
fn split_slack(b: &[f64], n: usize, t: &[f64]) -> f64 {
    let nf = n as f64;
    let r: Vec<f64> = b[1..].iter().zip(t).map(|(b, t)| b - t).collect();
    let mut slack = -((t.iter().sum::<f64>() - (nf - 1.0) * b[0]).abs());
    for (tj, bj) in t.iter().zip(&b[1..]) {
        slack = slack.min(*tj).min(bj - tj);
    }
    for w in t.windows(2).chain(r.windows(2)) {
        slack = slack.min(w[0] - w[1]);
    }
    slack = slack.min(t[1..].iter().sum::<f64>() - (nf - 2.0) * t[0]);
    slack.min(r[1..].iter().sum::<f64>() - (nf - 1.0) * r[0])
}

/// Dyadic weights with `(N − 1) b_1 = Σ_{j≥2} b_j` exactly.
fn equality_weights(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<f64> {
    loop {
        let mut rest: Vec<u32> = (0..k - 1).map(|_| rng.random_range(1..=64)).collect();
        rest.sort_by(|a, b| b.cmp(a));
        let m = n as u32 - 1;
        rest[0] += (m - rest.iter().sum::<u32>() % m) % m;
        let first = rest.iter().sum::<u32>() / m;
        if first >= rest[0] {
            return std::iter::once(first).chain(rest).map(|v| v as f64 / 1024.0).collect();
        }
    }
}

fn split(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut min_slack = f64::INFINITY;
    let mut errors = 0;
    let mut inexact = 0;
    let mut runs = 0;
    for n in 2..=4 {
        for k in n + 2..=n + 8 {
            for _ in 0..1000 {
                let (rest, hi) = sorted_rest(&mut rng, k - 1, n);
                let mut b = vec![rest[0] + rng.random::<f64>() * (hi - rest[0])];
                b.extend(&rest);
                runs += 1;
                match t_split(&b, n) {
                    Ok(s) => min_slack = min_slack.min(split_slack(&b, n, &s.t)),
                    Err(_) => errors += 1,
                }
            }
            for _ in 0..50 {
                let b = equality_weights(&mut rng, k, n);
                match t_split(&b, n) {
                    Ok(s) if s.t == b[1..] => {}
                    _ => inexact += 1,
                }
            }
        }
    }
    gate.record(
        3,
        "atom split",
        errors == 0 && inexact == 0 && min_slack >= -EXACT_TOL,
        format!("{runs} inputs, min slack {min_slack:.1e}, {errors} errors, {inexact} inexact equality cases of 1050"),
    );
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Point {
    Point::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>())
}

/// A few symmetrized blocks: products of small atom lists and maps of
/// random tuples.
fn random_plan(rng: &mut ChaCha8Rng) -> Plan {
    let n = rng.random_range(2..=3);
    let d = rng.random_range(1..=2);
    let blocks = (0..rng.random_range(1..=3))
        .map(|_| {
            if rng.random_bool(0.5) {
                let factors = (0..n)
                    .map(|_| {
                        let atoms = (0..rng.random_range(1..=3))
                            .map(|_| Atom::new(random_point(rng, d), rng.random_range(0.1..1.0)))
                            .collect();
                        Factor::Atomic(AtomList::canonical(atoms).unwrap())
                    })
                    .collect();
                Block::Product(ProductBlock {
                    factors,
                    scale: rng.random_range(0.1..2.0),
                    symmetrized: true,
                })
            } else {
                let tuples = (0..rng.random_range(1..=4))
                    .map(|_| Tuple {
                        x: (0..n).map(|_| random_point(rng, d)).collect(),
                        w: rng.random_range(0.1..1.0),
                    })
                    .collect();
                Block::Map(MapBlock {
                    tuples,
                    symmetrized: true,
                })
            }
        })
        .collect();
    Plan::from_blocks(n, d, blocks).unwrap()
}

fn unsymmetrized(p: &Plan) -> Plan {
    let blocks = p
        .blocks()
        .iter()
        .cloned()
        .map(|mut b| {
            match &mut b {
                Block::Product(pb) => pb.symmetrized = false,
                Block::Map(mb) => mb.symmetrized = false,
            }
            b
        })
        .collect();
    Plan::from_blocks(p.n(), p.d(), blocks).unwrap()
}

fn block_marginals(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut marginal_err: f64 = 0.0;
    let mut cost_err: f64 = 0.0;
    for _ in 0..200 {
        let p = random_plan(&mut rng);
        let by_blocks = marginal(&p).unwrap();
        let dense = dense_marginal(&dense_expand(&p, 1_000_000).unwrap());
        let mut dense_mass = 0.0;
        for s in &dense {
            dense_mass += s.w;
            marginal_err = marginal_err.max((by_blocks.mass_at(&s.x) - s.w).abs());
        }
        marginal_err = marginal_err.max((dense_mass - by_blocks.mass()).abs());

        let raw = unsymmetrized(&p);
        for w in [Omega::Identity, Omega::power(2.0).unwrap()] {
            let a = plan_cost(&raw, &w);
            let b = plan_cost(&symmetrize(&raw), &w);
            cost_err = cost_err.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    gate.record(
        4,
        "block marginal formula",
        marginal_err <= EXACT_TOL && cost_err <= EXACT_TOL,
        format!("200 plans, marginal error {marginal_err:.1e}, relative cost change under symmetrization {cost_err:.1e}"),
    );
}

/// Atoms in `[0, 1]^d` with every weight below `0.95/N`.
fn tiny_marginal(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Marginal {
    let d = rng.random_range(1..=2);
    loop {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        if raw.iter().any(|w| w / total >= 0.95 / n as f64) {
            continue;
        }
        let atoms = raw
            .iter()
            .map(|w| Atom::new((0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>(), w / total))
            .collect();
        return Marginal::atomic(d, AtomList::canonical(atoms).unwrap()).unwrap();
    }
}

fn oracle_sandwich(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let instances: Vec<(usize, usize)> = (0..10).map(|i| (2, 3 + i % 3)).chain((0..10).map(|_| (3, 4))).collect();
    let mut bad = Vec::new();
    let mut worst_gap = f64::INFINITY;
    let mut worst_dense: f64 = 0.0;
    for (i, &(n, k)) in instances.iter().enumerate() {
        let m = tiny_marginal(&mut rng, k, n);
        let plan = match construct(&m, n, &ConstructConfig::default()) {
            Ok(b) => b.plan,
            Err(e) => {
                bad.push(format!("#{i}: {e}"));
                continue;
            }
        };
        let cost = plan_cost(&plan, &Omega::Identity);
        let opt = exact_optimum_tiny(m.atoms.entries(), n, &Omega::Identity).unwrap();
        worst_gap = worst_gap.min(cost - opt);
        if !(opt.is_finite() && cost.is_finite() && opt <= cost * (1.0 + EXACT_TOL)) {
            bad.push(format!("#{i}: optimum {opt} vs constructed {cost}"));
        }
        match check_marginals(&plan, &m, 20_000).dense_residual {
            Some(r) if r <= RESIDUAL_TOL => worst_dense = worst_dense.max(r),
            other => bad.push(format!("#{i}: dense residual {other:?}")),
        }
    }
    let mut detail = format!(
        "{} instances, min (constructed − optimum) {worst_gap:.3e}, max dense residual {worst_dense:.1e}",
        instances.len()
    );
    if let Some(f) = bad.first() {
        detail += &format!("; {f}");
    }
    gate.record(5, "exact optimum below constructed cost", bad.is_empty(), detail);
}

fn sharpness(gate: &mut Gate) {
    let w = Omega::Identity;
    let eps = [1e-2, 1e-3, 1e-4];
    // Reference table values, given to seven places.
    #[allow(clippy::approx_constant)]
    let published = [1.5350567, 2.3025851, 3.0701134];
    let m = sharpness_marginal(&w, 3, 3, 100_000, 1);
    let mut ok = true;
    let mut bounds = Vec::new();
    let mut worst_mc: f64 = 0.0;
    for (&e, &p) in eps.iter().zip(&published) {
        let bound = sharpness_lower_bound(&w, 3, e);
        ok &= (bound - (1.0 / e).ln() / 3.0).abs() <= RESIDUAL_TOL;
        ok &= (bound - p).abs() <= 1e-7;
        let mc = sharpness_monte_carlo(&m, &w, 3, e);
        worst_mc = worst_mc.max((mc - bound).abs() / bound);
        bounds.push(bound);
    }
    let steps: Vec<f64> = bounds.windows(2).map(|b| b[1] - b[0]).collect();
    let drift = (steps[1] - steps[0]).abs();
    ok &= worst_mc <= 0.02 && drift <= RESIDUAL_TOL;
    gate.record(
        6,
        "sharpness table",
        ok,
        format!(
            "bounds {:.7} {:.7} {:.7}, Monte-Carlo error {:.2}%, step drift {drift:.1e}",
            bounds[0],
            bounds[1],
            bounds[2],
            100.0 * worst_mc
        ),
    );
}

fn boundary_rejection(gate: &mut Gate) {
    let dir = tempfile::tempdir().unwrap();
    let cloud = |mass: f64| uniform_box(&[0.0, 0.0], &[1.0, 1.0], mass, 400, 9);
    let equal = |n: usize| {
        let atoms = (0..n).map(|i| Atom::new(vec![i as f64, 0.0], 1.0 / n as f64)).collect();
        Marginal::atomic(2, AtomList::new(atoms).unwrap()).unwrap()
    };
    let mut cases = vec![
        ("two halves", 2, equal(2)),
        ("three thirds", 3, equal(3)),
        (
            "quarter atom with cloud",
            4,
            Marginal::new(2, AtomList::single(vec![3.0, 3.0], 0.25), cloud(0.75)).unwrap(),
        ),
        ("sharpness d=1", 2, sharpness_marginal(&Omega::Identity, 1, 2, 2000, 3)),
    ];
    cases.push(("sharpness d=3", 3, sharpness_marginal(&Omega::Identity, 3, 3, 2000, 4)));

    let bin = env!("CARGO_BIN_EXE_symplan");
    let mut wrong = Vec::new();
    for (name, n, m) in &cases {
        let path = dir.path().join(format!("{}.json", name.replace(' ', "_")));
        fs::write(&path, save_marginal(m)).unwrap();
        let out = Command::new(bin)
            .args(["construct", path.to_str().unwrap(), "--n", &n.to_string(), "--out"])
            .arg(dir.path().join("out"))
            .output()
            .expect("binary runs");
        if out.status.code() != Some(2) {
            wrong.push(format!("{name}: exit {:?}", out.status.code()));
        }
    }

    let generated = dir.path().join("generated.json");
    let made = Command::new(bin)
        .args(["sharpness", "--samples", "2000", "--marginal-out"])
        .arg(&generated)
        .output()
        .expect("binary runs");
    let out = Command::new(bin)
        .args(["construct", generated.to_str().unwrap(), "--n", "3", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .expect("binary runs");
    if made.status.code() != Some(0) || out.status.code() != Some(2) {
        wrong.push(format!("cli sharpness marginal: exit {:?}", out.status.code()));
    }

    let detail = if wrong.is_empty() {
        format!("{} marginals with concentration 1/N exit 2", cases.len() + 1)
    } else {
        wrong.join("; ")
    };
    gate.record(7, "boundary rejection", wrong.is_empty(), detail);
}

fn ledger_summary(gate: &mut Gate, ledgers: &[Ledger]) {
    let mut total = Ledger::default();
    for l in ledgers {
        total.checks += l.checks;
        total.violations += l.violations;
        total.max_error = total.max_error.max(l.max_error);
        for (what, c) in &l.by_identity {
            *total.by_identity.entry(what).or_default() += c;
        }
    }
    let count = |what: &str| total.by_identity.get(what).copied().unwrap_or(0);
    let tail = count("|P_j| = (N − j + 1) q");
    let sym = count("|symmetrize(P)| = |P|");
    let ok = !ledgers.is_empty() && total.violations == 0 && tail > 0 && sym == ledgers.len();
    gate.record(
        8,
        "mass ledger",
        ok,
        format!(
            "{} checks over {} runs, {} violations, max error {:.1e}, {tail} extension checks, {sym} symmetrization checks",
            total.checks,
            ledgers.len(),
            total.violations,
            total.max_error
        ),
    );
}
