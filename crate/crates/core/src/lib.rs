//! Rate-region toolkit for state-dependent multiple-access channels with
//! degraded message sets and strictly causal or causal state knowledge.
//!
//! Encoder 2 sends a common message; encoder 1 sends the common message and
//! a private one. The crate evaluates per-law rate corners for the inner and
//! outer bounds, searches over laws to trace regions, evaluates the Gaussian
//! closed forms, projects rate systems by Fourier-Motzkin elimination, and
//! simulates the block-Markov and Shannon-strategy schemes at small block
//! lengths.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod fme;
pub mod gaussian;
pub mod geometry;
pub mod prob;
pub mod search;
pub mod sim;

pub use bounds::{BoundKind, CornerEvaluation, Evaluator};
pub use channel::{builtin_channel, ChannelSpec, CondTable, FactoredLaw, LawKind, Sizes};
pub use error::{Error, Result};
pub use fme::{Atom, Inequality, SymbolicSystem};
pub use geometry::RatePoint;
pub use prob::JointPMF;
pub use search::{compute_region, membership, nested_regions, sum_capacity, RateRegion, RegionMode, SearchConfig, Verdict};
