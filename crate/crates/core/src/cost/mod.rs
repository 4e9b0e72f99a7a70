//! Repulsive cost `c(x_1, …, x_N) = Σ_{i<j} 1/ω(|x_i − x_j|)` of plans,
//! evaluated block by block.
//!
//! Infinity is an ordinary result: a plan with two touching slots costs
//! `f64::INFINITY`.

mod omega;
mod sharpness;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::plan::{Block, Factor, Plan};

pub use omega::{Omega, OmegaError};
pub use sharpness::{
    sharpness_constants, sharpness_lower_bound, sharpness_marginal, sharpness_monte_carlo, SharpnessConstants,
};

/// Default number of support points per factor above which pair sums are
/// estimated from a stratified subsample.
pub const DEFAULT_SAMPLE_CAP: usize = 2000;

/// `1/ω(r)`, infinite at `r = 0`.
pub fn pair_potential(w: &Omega, r: f64) -> f64 {
    if r == 0.0 {
        return f64::INFINITY;
    }
    1.0 / w.eval(r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostConfig {
    pub sample_cap: usize,
    pub seed: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            sample_cap: DEFAULT_SAMPLE_CAP,
            seed: 0xc057,
        }
    }
}

/// A cost value with an estimate of the subsampling error (zero when every
/// pair sum was exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostEstimate {
    pub value: f64,
    pub error: f64,
    pub subsampled: bool,
}

/// `∫ c dP` with exact pair sums.
pub fn plan_cost(p: &Plan, w: &Omega) -> f64 {
    plan_cost_with(
        p,
        w,
        &CostConfig {
            sample_cap: usize::MAX,
            ..CostConfig::default()
        },
    )
    .value
}

/// `∫ c dP`: a product block contributes
/// `scale · Σ_{i<j} (Π_{l≠i,j} |f_l|) · Σ_{u∈f_i, v∈f_j} w_u w_v/ω(|u − v|)`,
/// a map block `Σ_tuples w · Σ_{i<j} 1/ω(|x_i − x_j|)`. Symmetrization does
/// not change the value.
pub fn plan_cost_with(p: &Plan, w: &Omega, cfg: &CostConfig) -> CostEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut total = CostEstimate {
        value: 0.0,
        error: 0.0,
        subsampled: false,
    };
    for b in p.blocks() {
        let c = match b {
            Block::Product(pb) => {
                let masses: Vec<f64> = pb.factors.iter().map(Factor::mass).collect();
                let mut acc = CostEstimate {
                    value: 0.0,
                    error: 0.0,
                    subsampled: false,
                };
                for i in 0..pb.factors.len() {
                    for j in i + 1..pb.factors.len() {
                        let others: f64 = masses
                            .iter()
                            .enumerate()
                            .filter(|&(l, _)| l != i && l != j)
                            .map(|(_, m)| m)
                            .product();
                        let s = pair_sum(&pb.factors[i], &pb.factors[j], w, cfg.sample_cap, &mut rng);
                        acc.value += pb.scale * others * s.value;
                        acc.error += pb.scale * others * s.error;
                        acc.subsampled |= s.subsampled;
                    }
                }
                acc
            }
            Block::Map(mb) => {
                let mut v = 0.0;
                for t in &mb.tuples {
                    let mut c = 0.0;
                    for i in 0..t.x.len() {
                        for j in i + 1..t.x.len() {
                            c += pair_potential(w, t.x[i].distance(&t.x[j]));
                        }
                    }
                    v += t.w * c;
                }
                CostEstimate {
                    value: v,
                    error: 0.0,
                    subsampled: false,
                }
            }
        };
        total.value += c.value;
        total.error += c.error;
        total.subsampled |= c.subsampled;
    }
    total
}

type Weighted<'a> = Vec<(&'a crate::measure::Point, f64)>;

/// One point per stratum of consecutive support points, carrying the
/// stratum's mass.
fn stratified<'a>(f: &'a Factor, cap: usize, rng: &mut ChaCha8Rng) -> Weighted<'a> {
    let all: Weighted<'a> = f.support().collect();
    if all.len() <= cap {
        return all;
    }
    let mut out = Vec::with_capacity(cap);
    for s in 0..cap {
        let lo = s * all.len() / cap;
        let hi = (s + 1) * all.len() / cap;
        let stratum = &all[lo..hi];
        let mass: f64 = stratum.iter().map(|(_, w)| w).sum();
        // pick proportionally to weight within the stratum
        let mut u = rng.random::<f64>() * mass;
        let mut pick = stratum.last().expect("non-empty stratum").0;
        for (x, w) in stratum {
            if u < *w {
                pick = x;
                break;
            }
            u -= w;
        }
        out.push((pick, mass));
    }
    out
}

fn exact_pair_sum(a: &Weighted<'_>, b: &Weighted<'_>, w: &Omega) -> f64 {
    let mut s = 0.0;
    for (u, wu) in a {
        for (v, wv) in b {
            s += wu * wv * pair_potential(w, u.distance(v));
        }
    }
    s
}

fn pair_sum(a: &Factor, b: &Factor, w: &Omega, cap: usize, rng: &mut ChaCha8Rng) -> CostEstimate {
    if a.support_len() <= cap && b.support_len() <= cap {
        let (sa, sb): (Weighted<'_>, Weighted<'_>) = (a.support().collect(), b.support().collect());
        return CostEstimate {
            value: exact_pair_sum(&sa, &sb, w),
            error: 0.0,
            subsampled: false,
        };
    }
    let first = exact_pair_sum(&stratified(a, cap, rng), &stratified(b, cap, rng), w);
    let second = exact_pair_sum(&stratified(a, cap, rng), &stratified(b, cap, rng), w);
    CostEstimate {
        value: 0.5 * (first + second),
        error: (first - second).abs(),
        subsampled: true,
    }
}

/// `|p| · C(N, 2) / ω(α)`: the cost of any plan supported outside the
/// region where two slots are closer than `α`.
pub fn separation_bound(p: &Plan, w: &Omega, alpha: f64) -> f64 {
    let n = p.n() as f64;
    p.mass() * n * (n - 1.0) / 2.0 * pair_potential(w, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Cloud, Point, Sample};
    use crate::plan::{symmetrize, Factor, Plan};

    fn pt(x: f64) -> Point {
        Point::new(vec![x])
    }

    #[test]
    fn pair_potentials() {
        assert_eq!(pair_potential(&Omega::Identity, 0.5), 2.0);
        assert_eq!(pair_potential(&Omega::Identity, 0.0), f64::INFINITY);
        let sq = Omega::power(2.0).unwrap();
        assert!((pair_potential(&sq, 0.1) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn two_points() {
        let p = Plan::product(1, vec![Factor::point(pt(0.0)), Factor::point(pt(1.0))], 1.0).unwrap();
        assert_eq!(plan_cost(&p, &Omega::Identity), 1.0);
        assert_eq!(plan_cost(&symmetrize(&p), &Omega::Identity), 1.0);
        let diag = Plan::product(1, vec![Factor::point(pt(0.0)), Factor::point(pt(0.0))], 1.0).unwrap();
        assert_eq!(plan_cost(&diag, &Omega::Identity), f64::INFINITY);
    }

    #[test]
    fn point_against_uniform_cloud() {
        // ∫_2^3 dx/x = ln(3/2), midpoint samples
        let m = 10_000;
        let c = Cloud::new(
            (0..m)
                .map(|i| Sample {
                    x: pt(2.0 + (i as f64 + 0.5) / m as f64),
                    w: 1.0 / m as f64,
                })
                .collect(),
        )
        .unwrap();
        let p = Plan::product(1, vec![Factor::point(pt(0.0)), Factor::Diffuse(c)], 1.0).unwrap();
        let v = plan_cost(&p, &Omega::Identity);
        assert!((v - 1.5f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn subsampled_cloud_pair_is_close() {
        let a = crate::measure::uniform_box(&[0.0], &[1.0], 1.0, 3000, 1);
        let b = crate::measure::uniform_box(&[2.0], &[3.0], 1.0, 3000, 2);
        let p = Plan::product(1, vec![Factor::Diffuse(a), Factor::Diffuse(b)], 1.0).unwrap();
        let exact = plan_cost(&p, &Omega::Identity);
        let est = plan_cost_with(&p, &Omega::Identity, &CostConfig::default());
        assert!(est.subsampled);
        assert!((est.value - exact).abs() < 1e-2 * exact);
    }
}
