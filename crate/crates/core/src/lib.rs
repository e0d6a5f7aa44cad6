//! Locally dependent random fields and their normal approximation.
//!
//! The crate is organised around a handful of layers:
//!
//! - [`neighborhood`]: the dependence skeleton (`A_i`, `A_ij`) and the derived
//!   reverse neighborhoods, interference sets and the constants `κ`, `τ`.
//! - [`fields`]: sampleable fields built from independent latent sources, so
//!   that the declared neighborhoods hold by construction.
//! - [`statistics`]: per-realization statistics (`S`, `W₁`, `V`, `W₂`, `W̄₂`)
//!   and direct counters used as oracles.
//! - [`moments`]: exact or Monte-Carlo moment tables.
//! - [`bounds`]: Berry–Esseen bound shapes and the concentration-inequality
//!   components.
//! - [`oracle`]: exhaustive enumeration, exact Kolmogorov distances and
//!   checkers for the explicit-constant inequalities.
//! - [`harness`]: Monte-Carlo experiments, rate fits and ratio tables.

pub mod bounds;
pub mod codec;
pub mod config;
pub mod error;
pub mod fields;
pub mod graph;
pub mod harness;
pub mod moments;
pub mod neighborhood;
pub mod normal;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod statistics;
pub mod sum;

pub use error::{Error, Result};
