//! Harness library behind the `summeans` binary: configuration, corpus
//! ingestion, experiment orchestration, drift reports, and k sweeps.

pub mod config;
pub mod corpus;
pub mod drift;
pub mod experiment;
pub mod sweep;
