//! Configuration, experiment drivers and CSV output behind the `mhd` binary.

pub mod config;
pub mod experiments;
pub mod output;
