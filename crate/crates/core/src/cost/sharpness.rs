//! The marginal at concentration exactly `1/N` whose repulsive cost is
//! infinite: an atom `1/N` at the origin plus the diffuse density
//! `(N − 1)/N · ω′(|x|) / (α_d ω(1) |x|^{d−1})` on the unit ball.
//!
//! Any symmetric plan must pair the atom with diffuse mass, and the cost of
//! those pairs is bounded below by `(1/N)/ω(1) · ∫_ε^1 ω′/ω`, which diverges
//! logarithmically in `ω` as `ε → 0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::Omega;
use crate::measure::{AtomList, Cloud, Marginal, Point, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SharpnessConstants {
    /// Volume of the unit ball of ℝᵈ.
    pub alpha_d: f64,
    /// `α_d · ω(1)`.
    pub kconst: f64,
}

pub fn sharpness_constants(w: &Omega, d: usize) -> SharpnessConstants {
    // α_0 = 1, α_1 = 2, α_d = α_{d−2} · 2π/d
    let mut alpha = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        alpha *= 2.0 * PI / k as f64;
        k += 2;
    }
    SharpnessConstants {
        alpha_d: alpha,
        kconst: alpha * w.eval(1.0),
    }
}

/// Atom `1/N` at the origin and `m` samples of total mass `(N − 1)/N`.
///
/// Radii come from the inverse CDF `r = ω⁻¹(u·ω(1))` with one `u` drawn in
/// each of the strata `[i/m, (i+1)/m)`; directions are normalized Gaussian
/// vectors.
pub fn sharpness_marginal(w: &Omega, d: usize, n: usize, m: usize, seed: u64) -> Marginal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1 = w.eval(1.0);
    let weight = (n as f64 - 1.0) / (n as f64 * m as f64);
    let samples = (0..m)
        .map(|i| {
            let u = (i as f64 + rng.random::<f64>()) / m as f64;
            let r = w.inverse(u * w1);
            let dir = loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break v.into_iter().map(|c| c / norm).collect::<Vec<_>>();
                }
            };
            Sample {
                x: Point::new(dir.into_iter().map(|c| r * c).collect::<Vec<_>>()),
                w: weight,
            }
        })
        .collect();
    let atoms = AtomList::single(vec![0.0; d], 1.0 / n as f64);
    Marginal::new(d, atoms, Cloud::new(samples).expect("positive weights"))
        .expect("consistent dimension")
}

/// `(1/N) · (α_d/kconst) · ∫_ε^1 ω′(r)/ω(r) dr = ln(ω(1)/ω(ε)) / (N ω(1))`.
pub fn sharpness_lower_bound(w: &Omega, n: usize, eps: f64) -> f64 {
    let w1 = w.eval(1.0);
    (w1 / w.eval(eps)).ln() / (n as f64 * w1)
}

/// Sample estimate of [`sharpness_lower_bound`] from the diffuse part of a
/// [`sharpness_marginal`]: `(1/N) · Σ_s w_s 1{|x_s| ≥ ε}/ω(|x_s|) / |σ|`.
pub fn sharpness_monte_carlo(m: &Marginal, w: &Omega, n: usize, eps: f64) -> f64 {
    let mass = m.diffuse.total_mass();
    let s: f64 = m
        .diffuse
        .iter()
        .filter_map(|s| {
            let r = s.x.norm();
            (r >= eps).then(|| s.w / w.eval(r))
        })
        .sum();
    s / mass / n as f64
}
