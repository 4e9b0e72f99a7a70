//! Seeded random marginals with concentration below `1/N`, grouped into the
//! family used for end-to-end runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measure::{uniform_box, Atom, AtomList, Cloud, Marginal};

/// Largest atom weight as a fraction of `1/N`.
pub const MAX_CONCENTRATION_FRACTION: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseKind {
    /// Cloud only.
    Diffuse,
    /// `k` atoms with random weights plus a cloud of mass `diffuse`.
    Atoms { k: usize, diffuse: f64 },
    /// `b_i ∝ ratio^i` for `i < k`, plus a cloud of mass `diffuse`.
    Geometric { k: usize, ratio: f64, diffuse: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Cloud samples per case.
    pub samples: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            dims: vec![1, 2, 3],
            ns: vec![2, 3, 4],
            seeds: vec![1, 2],
            samples: 384,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyCase {
    pub name: String,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub kind: CaseKind,
    pub marginal: Marginal,
}

/// Case kinds for one `N`: the cloud alone, few atoms at diffuse mass 0.3
/// and 0.7, `N < k ≤ 12` atoms at diffuse mass 0 and 0.3, and a 200-atom
/// geometric tail at diffuse mass 0 and 0.3.
pub fn case_kinds(n: usize) -> Vec<CaseKind> {
    let mut out = vec![CaseKind::Diffuse];
    for diffuse in [0.3, 0.7] {
        let atomic = 1.0 - diffuse;
        let kmin = ((atomic * n as f64 / MAX_CONCENTRATION_FRACTION).ceil() as usize).max(1);
        let mut ks = vec![kmin, n];
        ks.dedup();
        out.extend(ks.into_iter().filter(|&k| k <= n).map(|k| CaseKind::Atoms { k, diffuse }));
    }
    let mut ks = vec![n + 1, (n + 13) / 2, 12];
    ks.dedup();
    for diffuse in [0.0, 0.3] {
        out.extend(ks.iter().map(|&k| CaseKind::Atoms { k, diffuse }));
    }
    for diffuse in [0.0, 0.3] {
        out.push(CaseKind::Geometric {
            k: 200,
            ratio: 0.9,
            diffuse,
        });
    }
    out
}

fn case_seed(seed: u64, d: usize, n: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((d as u64) << 40 | (n as u64) << 32 | index as u64)
}

/// Sorted weights of total `mass` with the largest at most
/// `MAX_CONCENTRATION_FRACTION / n`, mixed towards uniform as needed.
fn atom_weights(k: usize, mass: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // cubing skews the draw so that some lists are fast-decreasing
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
    let sum: f64 = raw.iter().sum();
    let mut b: Vec<f64> = raw.iter().map(|u| u * mass / sum).collect();
    b.sort_by(|x, y| y.total_cmp(x));
    let cap = MAX_CONCENTRATION_FRACTION / n as f64;
    let uniform = mass / k as f64;
    if b[0] > cap {
        let lambda = (cap - uniform) / (b[0] - uniform);
        b.iter_mut().for_each(|v| *v = uniform + lambda * (*v - uniform));
    }
    b
}

fn random_atoms(d: usize, b: Vec<f64>, rng: &mut ChaCha8Rng) -> AtomList {
    let atoms = b
        .into_iter()
        .map(|w| Atom::new((0..d).map(|_| rng.random_range(-0.5..1.5)).collect::<Vec<f64>>(), w))
        .collect();
    AtomList::new(atoms).expect("sorted positive weights at distinct random points")
}

/// One marginal on ℝᵈ of the given kind. Atoms sit uniformly in
/// `[−0.5, 1.5]ᵈ`, the cloud uniformly in `[0, 1]ᵈ`.
pub fn generate_case(kind: CaseKind, d: usize, n: usize, samples: usize, seed: u64) -> Marginal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (atoms, diffuse) = match kind {
        CaseKind::Diffuse => (AtomList::empty(), 1.0),
        CaseKind::Atoms { k, diffuse } => {
            let b = atom_weights(k, 1.0 - diffuse, n, &mut rng);
            (random_atoms(d, b, &mut rng), diffuse)
        }
        CaseKind::Geometric { k, ratio, diffuse } => {
            let raw: Vec<f64> = (0..k).map(|i| ratio.powi(i as i32)).collect();
            let sum: f64 = raw.iter().sum();
            let b = raw.into_iter().map(|v| v * (1.0 - diffuse) / sum).collect();
            (random_atoms(d, b, &mut rng), diffuse)
        }
    };
    let cloud = if diffuse > 0.0 {
        uniform_box(&vec![0.0; d], &vec![1.0; d], diffuse, samples, rng.random())
    } else {
        Cloud::empty()
    };
    Marginal::new(d, atoms, cloud).expect("consistent dimension")
}

pub fn family(spec: &FamilySpec) -> Vec<FamilyCase> {
    let mut out = Vec::new();
    for &seed in &spec.seeds {
        for &d in &spec.dims {
            for &n in &spec.ns {
                for (i, kind) in case_kinds(n).into_iter().enumerate() {
                    let name = match kind {
                        CaseKind::Diffuse => format!("d{d}-n{n}-s{seed}-diffuse"),
                        CaseKind::Atoms { k, diffuse } => format!("d{d}-n{n}-s{seed}-k{k}-c{diffuse}"),
                        CaseKind::Geometric { k, diffuse, .. } => format!("d{d}-n{n}-s{seed}-geo{k}-c{diffuse}"),
                    };
                    out.push(FamilyCase {
                        name,
                        d,
                        n,
                        seed,
                        kind,
                        marginal: generate_case(kind, d, n, spec.samples, case_seed(seed, d, n, i)),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{concentration, validate_marginal};

    #[test]
    fn default_family_is_valid_and_large_enough() {
        let cases = family(&FamilySpec::default());
        assert!(cases.len() >= 200, "{}", cases.len());
        for c in &cases {
            let r = validate_marginal(&c.marginal, c.n);
            assert!(r.is_ok(), "{}: {r}", c.name);
            assert!(concentration(&c.marginal) <= MAX_CONCENTRATION_FRACTION / c.n as f64 + 1e-15);
        }
    }

    #[test]
    fn deterministic() {
        let spec = FamilySpec {
            dims: vec![2],
            ns: vec![3],
            seeds: vec![9],
            samples: 64,
        };
        assert_eq!(family(&spec), family(&spec));
    }

    #[test]
    fn every_kind_appears() {
        for n in [2, 3, 4] {
            let kinds = case_kinds(n);
            assert!(kinds.iter().any(|k| matches!(k, CaseKind::Atoms { k, diffuse } if *k <= n && *diffuse == 0.7)));
            assert!(kinds.iter().any(|k| matches!(k, CaseKind::Atoms { k: 12, diffuse } if *diffuse == 0.0)));
        }
    }
}
