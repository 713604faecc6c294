//! Std companion to `earlymask-core`: grammar and vocabulary files, a
//! synthetic vocabulary generator, and the command implementations behind
//! the `earlymask` binary.

pub mod commands;
pub mod synth;
pub mod vocab_file;

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use earlymask_core::grammar::{parse_grammar_with_start, prepare};
use earlymask_core::Grammar;

pub use commands::Status;
pub use synth::{synthetic_vocab, SynthParams};
pub use vocab_file::{load_vocab, parse_vocab, save_vocab, vocab_to_json};

pub const DEFAULT_START: &str = "start";

/// Parses grammar text without any transformation.
pub fn parse_grammar_text(text: &str, start: Option<&str>) -> Result<Grammar> {
    Ok(parse_grammar_with_start(text, start.unwrap_or(DEFAULT_START))?)
}

/// Parses and prepares grammar text for the engine.
pub fn compile_grammar(text: &str, start: Option<&str>) -> Result<Arc<Grammar>> {
    let raw = parse_grammar_text(text, start)?;
    Ok(Arc::new(prepare(&raw)?))
}

pub fn read_grammar(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
