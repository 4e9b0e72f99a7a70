//! Symmetric N-marginal transport plans of finite repulsive cost.
//!
//! Given a marginal `ρ` on ℝᵈ (finitely many atoms plus a diffuse part given
//! by weighted samples) with every atom lighter than `|ρ|/N`, [`construct`]
//! builds a plan whose N slots are a positive distance apart, so that
//! `∫ Σ_{i<j} 1/ω(|x_i − x_j|) dP` is finite. [`verify`] checks such a plan
//! against its marginal without trusting the construction.
//!
//! ```
//! use symplan::construct::{construct, ConstructConfig};
//! use symplan::cost::Omega;
//! use symplan::measure::load_marginal;
//! use symplan::verify::{certify, VerifyConfig};
//!
//! let m = load_marginal(r#"{"d": 1, "atoms": [
//!     {"x": [0.0], "b": 0.3}, {"x": [1.0], "b": 0.3}, {"x": [2.0], "b": 0.2}, {"x": [3.0], "b": 0.2}]}"#)
//!     .unwrap();
//! let built = construct(&m, 3, &ConstructConfig::default()).unwrap();
//! let cert = certify(&built.plan, &m, &[Omega::Identity], Some(&built.ledger), &VerifyConfig::default());
//! assert!(cert.passed);
//! ```
//!
//! The guide under `book/` walks through each module; its Rust snippets run
//! as doc-tests of this crate.

pub mod construct;
pub mod cost;
pub mod extended;
pub mod generate;
pub mod measure;
pub mod partition;
pub mod plan;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/marginals.md")]
    mod marginals {}
    #[doc = include_str!("../../../book/src/plans.md")]
    mod plans {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/constructions.md")]
    mod constructions {}
    #[doc = include_str!("../../../book/src/cost.md")]
    mod cost {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
