//! Command-line front end for `sgboost-core`: CSV loading, the JSON model
//! document and the table writers behind the `sgboost` binary.

pub mod cli;
pub mod document;
pub mod error;
pub mod io;

pub use error::CliError;
