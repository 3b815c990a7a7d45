//! Entropy of measurements on classical stochastic systems.
//!
//! A system is a finite state space with a stochastic transition matrix and
//! an invariant measure. Measurements are partitions of unity, refined over
//! time either by interleaving the dynamics (AFL) or by evolving copies
//! (Makarov). The functionals in [`dynent`] turn those refinements into
//! entropy sequences and rates.

pub mod decomp;
pub mod dynent;
pub mod dynsys;
pub mod entcore;
mod error;
pub mod pou;
pub mod random;

pub use error::{Error, Result};
