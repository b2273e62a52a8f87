//! Evolution engine for hierarchical memory-prediction agents: teams of
//! linear register-machine programs arranged in tangled program graphs,
//! trained against six partially-observable classic-control tasks.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod evolve;
pub mod graph;
pub mod ids;
pub mod lgp;
pub mod population;
pub mod rng;
pub mod trace;
