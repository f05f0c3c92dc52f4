//! Library half of the `cjt` command: catalog loading, spec parsing and the
//! session that runs commands.

pub mod bench;
pub mod catalog;
pub mod cli;
pub mod session;
pub mod spec;
