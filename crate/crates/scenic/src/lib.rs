//! scenic: state-space exploration for small deterministic games.
//!
//! The crate bundles two toy games with emulator-style save/load, several
//! exploration strategies (attract mode, trace replay, chaos monkey, RRT
//! and combinations), screen embeddings, and spread-of-points metrics that
//! score how much of a game an exploration run has seen.

pub mod archive;
pub mod embed;
pub mod env;
pub mod explore;
pub mod harness;
pub mod metrics;
pub mod trace;
