//! File formats, ingestion and the command-line front end for
//! [`pairmix_core`].

pub mod artifact;
pub mod avl;
pub mod commands;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod interpret;

pub use error::{CliError, Result};
