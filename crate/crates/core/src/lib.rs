//! Grammar-constrained token masking over a byte-level Earley recognizer.
//!
//! The crate is `no_std` with `alloc`. It covers the whole masking pipeline:
//!
//! - [`grammar`]: text format, regex terminals compiled to byte automata,
//!   useless-rule and nullable elimination, HRR detection.
//! - [`earley`]: the recognizer, one Earley set per consumed byte.
//! - [`pruning`]: dependency graph reachability and the compact phase.
//! - [`mask`]: token masks with the context-independent cache and the
//!   rejected-prefix trie.
//! - [`state_cache`]: canonical state fingerprints and the mask cache.
//! - [`session`]: an engine bundled with its caches for one sequence.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod automaton;
pub mod earley;
pub mod grammar;
pub mod mask;
pub mod pruning;
pub mod session;
pub mod state_cache;

#[cfg(any(test, feature = "testing"))]
pub mod testing;

pub use automaton::{compile_pattern, PatternError, TerminalAutomaton};
pub use earley::{Engine, EngineConfig, EngineError, Item, ItemRef};
pub use grammar::{parse_grammar, parse_grammar_with_start, prepare, Grammar, GrammarError};
pub use mask::{
    accept_token, compute_mask, CiTokenCache, MaskConfig, MaskOutcome, MaskStats,
    RejectedPrefixTrie, TokenId, TokenMask, TokenOutcome, Vocabulary,
};
pub use session::{Config, Session, StepMask};
pub use state_cache::{fingerprint, Fingerprint, MaskCache};
