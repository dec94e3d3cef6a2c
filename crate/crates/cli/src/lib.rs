//! Command-line front end: `ingest`, `synth`, `compose` and `eval`.

pub mod args;
pub mod commands;

pub use commands::{apportion, run, Outcome};
