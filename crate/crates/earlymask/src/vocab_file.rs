//! Vocabulary files: `{"eos_id": n, "tokens": {"<id>": "<base64>", ...}}`.
//!
//! Ids must cover `0..len` densely. The EOS id may be omitted from `tokens`
//! or mapped to the empty string.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use earlymask_core::Vocabulary;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct VocabFile {
    eos_id: u32,
    tokens: BTreeMap<String, String>,
}

pub fn parse_vocab(text: &str) -> Result<Vocabulary> {
    let file: VocabFile = serde_json::from_str(text).context("malformed vocabulary JSON")?;
    let mut by_id: BTreeMap<u32, Vec<u8>> = BTreeMap::new();
    for (k, v) in &file.tokens {
        let id: u32 = k.parse().with_context(|| format!("token id {:?} is not an integer", k))?;
        let bytes = STANDARD
            .decode(v)
            .with_context(|| format!("token {}: invalid base64", id))?;
        by_id.insert(id, bytes);
    }
    by_id.entry(file.eos_id).or_default();
    let len = by_id.len();
    let mut tokens = Vec::with_capacity(len);
    for (expected, (id, bytes)) in by_id.into_iter().enumerate() {
        if id as usize != expected {
            bail!("token ids are not dense: missing id {}", expected);
        }
        tokens.push(bytes);
    }
    Ok(Vocabulary::new(tokens, file.eos_id)?)
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_vocab(&text).with_context(|| format!("in {}", path.display()))
}

pub fn vocab_to_json(vocab: &Vocabulary) -> String {
    let file = VocabFile {
        eos_id: vocab.eos(),
        tokens: vocab
            .iter()
            .map(|(id, bytes)| (id.to_string(), STANDARD.encode(bytes)))
            .collect(),
    };
    serde_json::to_string(&file).expect("vocabulary serializes")
}

pub fn save_vocab(vocab: &Vocabulary, path: &Path) -> Result<()> {
    std::fs::write(path, vocab_to_json(vocab)).with_context(|| format!("writing {}", path.display()))
}
