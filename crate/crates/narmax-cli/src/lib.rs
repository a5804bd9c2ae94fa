//! Application layer for the `narmax` tool: the plain-text model-file
//! format, the Monte Carlo validation harness, and report serialization.
//!
//! The numerical substance (polynomial algebra, derivation of simulation
//! models, free-run engines, the deterministic noise sampler) lives in
//! `narmax-core`; this crate layers file formats and experiment
//! orchestration on top of it.

pub mod dsl;
pub mod harness;
pub mod report;
