//! Shared test support: the worked-example fixture, seeded random instance
//! generators, and reference oracles that deliberately avoid the engine's own
//! graph code.

pub mod build;
pub mod fixtures;
pub mod gen;
pub mod oracle;
