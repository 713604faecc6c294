#![allow(dead_code)]

use std::sync::Arc;

use earlymask_core::grammar::{parse_grammar, parse_grammar_with_start, prepare};
use earlymask_core::{Engine, EngineConfig, Grammar, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const JSON: &str = include_str!("../../../../grammars/json.grammar");
pub const SUM: &str = include_str!("../../../../grammars/sum.grammar");
pub const PLUS: &str = include_str!("../../../../grammars/plus.grammar");
pub const HRR: &str = include_str!("../../../../grammars/hrr.grammar");

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grammar(text: &str) -> Arc<Grammar> {
    Arc::new(prepare(&parse_grammar(text).unwrap()).unwrap())
}

pub fn grammar_from(text: &str, start: &str) -> Arc<Grammar> {
    Arc::new(prepare(&parse_grammar_with_start(text, start).unwrap()).unwrap())
}

pub fn engine(g: &Arc<Grammar>, prune: bool) -> Engine {
    Engine::new(g.clone(), EngineConfig { prune }).unwrap()
}

pub fn feed(e: &mut Engine, bytes: &[u8]) {
    for &b in bytes {
        assert!(e.accept_byte(b), "byte {:?} rejected", b as char);
    }
}

/// Every single byte of `alphabet`, then random strings over it up to
/// `size` tokens, then EOS last.
pub fn synthetic_vocab(rng: &mut ChaCha8Rng, alphabet: &[u8], size: usize, max_len: usize) -> Vocabulary {
    let mut tokens: Vec<Vec<u8>> = alphabet.iter().map(|&b| vec![b]).collect();
    while tokens.len() < size - 1 {
        let len = rng.gen_range(2..=max_len);
        let t: Vec<u8> = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    tokens.push(Vec::new());
    let eos = (tokens.len() - 1) as u32;
    Vocabulary::new(tokens, eos).unwrap()
}

pub fn json_alphabet() -> Vec<u8> {
    let mut a: Vec<u8> = b"{}[]\":,-.0123456789abeflnrstuxyzE+ \\".to_vec();
    a.sort();
    a.dedup();
    a
}

pub fn vocab(tokens: &[&[u8]]) -> Vocabulary {
    let mut t: Vec<Vec<u8>> = tokens.iter().map(|t| t.to_vec()).collect();
    t.push(Vec::new());
    let eos = (t.len() - 1) as u32;
    Vocabulary::new(t, eos).unwrap()
}

/// Fragments that make JSON decoding move; random vocabularies over the
/// JSON alphabet alone are mostly dead.
pub const JSON_FRAGMENTS: &[&str] = &[
    "{", "}", "[", "]", ",", ":", "\"", "{\"", "\":", "\",", "\"}", "\"]", "\":\"", "true", "false", "null",
    "tr", "ue", "nu", "ll", "0", "1", "12", "-", ".5", "e+", "E-3", "\\n", "\\\"", "\\u00", "ab", "x", "y",
    "a", "b", "key", "\"key\"", "},", "],", "[]", "{}", ":[", ":{", ",\"", "1,", "2]", " ",
];

pub fn json_vocab(rng: &mut ChaCha8Rng, size: usize) -> Vocabulary {
    let alphabet = json_alphabet();
    let mut tokens: Vec<Vec<u8>> = alphabet.iter().map(|&b| vec![b]).collect();
    for f in JSON_FRAGMENTS {
        let f = f.as_bytes().to_vec();
        if !tokens.contains(&f) {
            tokens.push(f);
        }
    }
    while tokens.len() < size - 1 {
        let len = rng.gen_range(2..=6);
        let t: Vec<u8> = if rng.gen_bool(0.5) {
            // glue two fragments
            let a = JSON_FRAGMENTS[rng.gen_range(0..JSON_FRAGMENTS.len())];
            let b = JSON_FRAGMENTS[rng.gen_range(0..JSON_FRAGMENTS.len())];
            [a.as_bytes(), b.as_bytes()].concat()
        } else {
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        };
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    tokens.push(Vec::new());
    let eos = (tokens.len() - 1) as u32;
    Vocabulary::new(tokens, eos).unwrap()
}

/// Every subset of the four optimization switches.
pub fn all_configs() -> Vec<earlymask_core::Config> {
    (0..16u32)
        .map(|bits| earlymask_core::Config {
            prune: bits & 1 != 0,
            ci_cache: bits & 2 != 0,
            trie: bits & 4 != 0,
            state_cache: bits & 8 != 0,
            ..Default::default()
        })
        .collect()
}
