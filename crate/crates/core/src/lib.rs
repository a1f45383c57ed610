//! Entanglement purification of hypergraph states.
//!
//! Modules, bottom up:
//! - [`hypergraph`]: edge sets, colorings and graphical rewrite rules.
//! - [`oracle`]: brute-force state-vector and density-matrix reference.
//! - [`states`]: noisy states in the hypergraph basis and noise channels.
//! - [`purify`]: single sub-protocol maps in coefficient space.
//! - [`schedule`]: sequences, thresholds, adaptive switching, yields.
//! - [`verify`]: sweeps comparing the fast paths against the oracle.

pub mod hypergraph;
pub mod oracle;
pub mod purify;
pub mod schedule;
pub mod states;
pub mod verify;
