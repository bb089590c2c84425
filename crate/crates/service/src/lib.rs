//! HTTP service and command-line front end for `compass_core`.

pub mod api;
pub mod cli;
pub mod store;
