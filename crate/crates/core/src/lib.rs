//! Ergodic decomposition machinery for actions of the finite symmetric-group
//! chain `S(1) ⊂ S(2) ⊂ …` on binary configuration windows.
//!
//! Coordinates and permutation points are 1-based throughout the public API,
//! matching the way configurations `x = (x_1, …, x_N)` are usually written.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: permutations, Haar sampling, exact enumeration, the action.
//! * [`measures`]: atomic, product, mixture, Pólya and orbit-counting measures.
//! * [`cocycles`]: multiplicative cocycles and their validator.
//! * [`averaging`]: the weighted orbit-averaging operators and their limit.
//! * [`decomposition`]: limit statistics, decomposing measures, conditional
//!   measures and the round-trip between them.
//! * [`infinite_measures`]: σ-finite orbit models, `P_f` normalisation, PCL.
//! * [`counterexamples`]: the full-bijection-group example and the
//!   weak/strong indecomposability check.

pub mod averaging;
pub mod cocycles;
pub mod counterexamples;
pub mod decomposition;
pub mod error;
pub mod group;
pub mod infinite_measures;
pub mod measures;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
pub use numeric::{ExtendedReal, Rational};
