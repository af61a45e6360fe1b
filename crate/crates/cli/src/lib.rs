//! Library side of the `sddr` command line tool, exposed for testing.

pub mod config;
pub mod run;
