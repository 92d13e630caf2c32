//! Command implementations behind the `fluxkit` binary.

pub mod bench;
pub mod run;
pub mod script;
