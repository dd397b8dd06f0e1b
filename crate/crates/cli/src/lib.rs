//! Standard-library companion to `sentisarc-core`: corpus and embedding
//! file IO, stratified cross-validation, metrics, checkpoints, and run
//! manifests. The `sentisarc` binary wraps these into a CLI.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod manifest;

pub use error::{Error, Result};
