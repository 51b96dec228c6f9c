//! Simulator and analysis bench for delayed mirror descent traffic assignment
//! under adversarial feedback delays.

// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod attack;
pub mod dmd;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod latency;
pub mod mirror;
pub mod network;
pub mod registry;

pub use error::{Error, Result};

/// Per-trial random stream.
pub type TrialRng = rand_chacha::ChaCha8Rng;
