//! Configuration, file formats, subcommands and the acceptance harness for
//! the `sdwave` command line tool.

pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod run;
pub mod verify;
