//! Per-step token masks.
//!
//! A token is valid when every one of its bytes can be committed from the
//! current state. Most tokens are settled without parsing: the
//! context-independent cache says, per `(terminal, automaton state)`, which
//! tokens stay inside the automaton (valid under any context) and which die
//! before ever reaching an accepting state (invalid under any context).
//! The rest are trial-parsed, with rejected prefixes remembered so later
//! tokens sharing them are cut off without parsing.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use once_cell::race::OnceBox;
use thiserror::Error;

use crate::automaton::DEAD;
use crate::earley::Engine;
use crate::grammar::{Grammar, Symbol};
use crate::state_cache::Fingerprint;

pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabularyError {
    #[error("eos id {eos} out of range for {size} tokens")]
    EosOutOfRange { eos: u32, size: usize },
    #[error("token {0} has empty bytes")]
    EmptyToken(u32),
    #[error("eos token must have empty bytes")]
    NonEmptyEos,
}

/// Token id → bytes. The EOS id carries no bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    eos: TokenId,
}

impl Vocabulary {
    pub fn new(tokens: Vec<Vec<u8>>, eos: TokenId) -> Result<Self, VocabularyError> {
        if eos as usize >= tokens.len() {
            return Err(VocabularyError::EosOutOfRange {
                eos,
                size: tokens.len(),
            });
        }
        for (i, t) in tokens.iter().enumerate() {
            if i as u32 == eos {
                if !t.is_empty() {
                    return Err(VocabularyError::NonEmptyEos);
                }
            } else if t.is_empty() {
                return Err(VocabularyError::EmptyToken(i as u32));
            }
        }
        Ok(Vocabulary { tokens, eos })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn bytes(&self, id: TokenId) -> &[u8] {
        &self.tokens[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &[u8])> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (i as TokenId, t.as_slice()))
    }

    pub fn find(&self, bytes: &[u8]) -> Option<TokenId> {
        self.tokens
            .iter()
            .position(|t| t == bytes)
            .map(|i| i as TokenId)
    }
}

/// Fixed-width bit vector over token ids.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TokenMask {
    words: Vec<u64>,
    len: usize,
}

impl core::fmt::Debug for TokenMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_set().entries(self.ones()).finish()
    }
}

impl TokenMask {
    pub fn new(len: usize) -> Self {
        TokenMask {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: TokenId) -> bool {
        self.words[i as usize / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: TokenId, value: bool) {
        let w = &mut self.words[i as usize / 64];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            core::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some((wi * 64) as TokenId + b)
            })
        })
    }

    pub fn or_assign(&mut self, other: &TokenMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn and_assign(&mut self, other: &TokenMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn fill(&mut self) {
        for w in self.words.iter_mut() {
            *w = !0;
        }
        self.clear_tail();
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1u64 << r) - 1;
            }
        }
    }

    /// Wire bytes: bit `i` is bit `i % 8` of byte `i / 8`, zero padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        (0..n)
            .map(|b| (self.words[b / 8] >> ((b % 8) * 8)) as u8)
            .collect()
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut m = TokenMask::new(len);
        for (b, &byte) in bytes.iter().enumerate() {
            m.words[b / 8] |= (byte as u64) << ((b % 8) * 8);
        }
        let clean = m.clone();
        m.clear_tail();
        (m == clean).then_some(m)
    }

    /// Lowercase hex of [`TokenMask::to_bytes`].
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.len.div_ceil(8) * 2);
        for b in self.to_bytes() {
            let _ = write!(s, "{:02x}", b);
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize) -> Option<Self> {
        if !hex.len().is_multiple_of(2) || !hex.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')) {
            return None;
        }
        let bytes: Option<Vec<u8>> = (0..hex.len() / 2)
            .map(|i| u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok())
            .collect();
        Self::from_bytes(&bytes?, len)
    }
}

/// Context-independent classification of every token for one
/// `(terminal, automaton state)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiEntry {
    /// Consumed entirely without the automaton dying.
    pub accepted: TokenMask,
    /// Kills the automaton before any accepting state was seen.
    pub rejected: TokenMask,
}

/// Classifies `vocab` against `automaton` starting from `state`.
pub fn classify_tokens(
    automaton: &crate::automaton::TerminalAutomaton,
    state: u32,
    vocab: &Vocabulary,
) -> CiEntry {
    let mut accepted = TokenMask::new(vocab.len());
    let mut rejected = TokenMask::new(vocab.len());
    for (id, bytes) in vocab.iter() {
        if id == vocab.eos() {
            continue;
        }
        let mut s = state;
        let mut seen_accept = automaton.is_accepting(s);
        let mut died = false;
        for &b in bytes {
            s = automaton.next(s, b);
            if s == DEAD {
                died = true;
                break;
            }
            seen_accept |= automaton.is_accepting(s);
        }
        if !died {
            accepted.set(id, true);
        } else if !seen_accept {
            rejected.set(id, true);
        }
    }
    CiEntry { accepted, rejected }
}

/// Lazily populated per-`(terminal, state)` classification. Entries are
/// published once and shareable across threads; racing first uses may
/// compute an entry twice and keep either (identical) result.
pub struct CiTokenCache {
    offsets: Vec<usize>,
    entries: Vec<OnceBox<CiEntry>>,
}

impl core::fmt::Debug for CiTokenCache {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CiTokenCache")
            .field("slots", &self.entries.len())
            .field("populated", &self.populated())
            .finish()
    }
}

impl CiTokenCache {
    pub fn new(g: &Grammar) -> Self {
        let mut offsets = Vec::with_capacity(g.terminals().len() + 1);
        let mut total = 0;
        for t in g.terminals() {
            offsets.push(total);
            total += t.automaton.state_count();
        }
        offsets.push(total);
        CiTokenCache {
            offsets,
            entries: (0..total).map(|_| OnceBox::new()).collect(),
        }
    }

    /// Builds every entry eagerly.
    pub fn build(g: &Grammar, vocab: &Vocabulary) -> Self {
        let cache = Self::new(g);
        for (t, term) in g.terminals().iter().enumerate() {
            for s in 0..term.automaton.state_count() {
                cache.entry(g, vocab, t as u32, s as u32);
            }
        }
        cache
    }

    pub fn entry(&self, g: &Grammar, vocab: &Vocabulary, terminal: u32, state: u32) -> &CiEntry {
        let slot = &self.entries[self.offsets[terminal as usize] + state as usize];
        slot.get_or_init(|| {
            Box::new(classify_tokens(
                &g.terminal(terminal).automaton,
                state,
                vocab,
            ))
        })
    }

    pub fn populated(&self) -> usize {
        self.entries.iter().filter(|e| e.get().is_some()).count()
    }
}

/// Minimal rejected byte prefixes observed from one engine state.
#[derive(Debug, Clone, Default)]
pub struct RejectedPrefixTrie {
    state: Option<Fingerprint>,
    // Node 0 is the root. Children are kept sorted by byte.
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(u8, u32)>,
    terminal: bool,
}

impl RejectedPrefixTrie {
    pub fn new() -> Self {
        RejectedPrefixTrie {
            state: None,
            nodes: vec![TrieNode::default()],
        }
    }

    /// Clears the trie unless it already belongs to `fingerprint`.
    pub fn reset_for_state(&mut self, fingerprint: Fingerprint) {
        if self.state != Some(fingerprint) {
            self.clear();
            self.state = Some(fingerprint);
        }
    }

    pub fn state(&self) -> Option<Fingerprint> {
        self.state
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.nodes.push(TrieNode::default());
        self.state = None;
    }

    pub fn is_empty(&self) -> bool {
        !self.nodes[0].terminal && self.nodes[0].children.is_empty()
    }

    /// Length of the stored prefix of `bytes`, if any.
    pub fn rejected_prefix(&self, bytes: &[u8]) -> Option<usize> {
        let mut node = 0usize;
        for (i, b) in bytes.iter().enumerate() {
            if self.nodes[node].terminal {
                return Some(i);
            }
            let children = &self.nodes[node].children;
            match children.binary_search_by_key(b, |&(c, _)| c) {
                Ok(k) => node = children[k].1 as usize,
                Err(_) => return None,
            }
        }
        self.nodes[node].terminal.then_some(bytes.len())
    }

    /// Records `prefix` as rejected, discarding any stored extensions of it.
    pub fn insert(&mut self, prefix: &[u8]) {
        let mut node = 0usize;
        for &b in prefix {
            if self.nodes[node].terminal {
                return;
            }
            let k = match self.nodes[node].children.binary_search_by_key(&b, |&(c, _)| c) {
                Ok(k) => k,
                Err(k) => {
                    let id = self.nodes.len() as u32;
                    self.nodes.push(TrieNode::default());
                    self.nodes[node].children.insert(k, (b, id));
                    k
                }
            };
            node = self.nodes[node].children[k].1 as usize;
        }
        self.nodes[node].terminal = true;
        self.nodes[node].children.clear();
    }

    /// Stored prefixes in lexicographic order.
    pub fn prefixes(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk(0, &mut path, &mut out);
        out
    }

    fn walk(&self, node: usize, path: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if self.nodes[node].terminal {
            out.push(path.clone());
            return;
        }
        for &(b, child) in &self.nodes[node].children {
            path.push(b);
            self.walk(child as usize, path, out);
            path.pop();
        }
    }
}

/// Which mask-side shortcuts are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskConfig {
    pub ci_cache: bool,
    pub trie: bool,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            ci_cache: true,
            trie: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskStats {
    /// Tokens settled by trial parsing.
    pub trials: u32,
    /// Tokens rejected by a stored prefix.
    pub trie_hits: u32,
    pub ci_accepted: u32,
    pub ci_rejected: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskOutcome {
    pub mask: TokenMask,
    pub stats: MaskStats,
}

impl MaskOutcome {
    /// No token and no EOS: the state has no continuation in this vocabulary.
    pub fn is_dead_end(&self) -> bool {
        self.mask.count() == 0
    }
}

/// `(terminal, automaton state)` pairs exposed by the last set.
pub fn frontier(engine: &Engine) -> Vec<(u32, u32)> {
    let g = engine.grammar();
    let mut out: Vec<(u32, u32)> = engine
        .last_set()
        .items()
        .iter()
        .filter_map(|it| match it.postdot(g) {
            Some(Symbol::Terminal(t)) => Some((
                t,
                it.fsm_state().unwrap_or(g.terminal(t).automaton.start()),
            )),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Computes the exact mask for `engine`. `trie` must already be scoped to
/// this state (see [`RejectedPrefixTrie::reset_for_state`]).
pub fn compute_mask(
    engine: &Engine,
    vocab: &Vocabulary,
    cache: &CiTokenCache,
    trie: &mut RejectedPrefixTrie,
    config: MaskConfig,
) -> MaskOutcome {
    let n = vocab.len();
    let mut mask = TokenMask::new(n);
    let mut stats = MaskStats::default();
    if engine.is_finished() {
        return MaskOutcome { mask, stats };
    }

    let mut undecided = TokenMask::new(n);
    undecided.fill();
    undecided.set(vocab.eos(), false);
    if config.ci_cache {
        let g = engine.grammar();
        let mut any_accepted = TokenMask::new(n);
        let mut all_rejected = TokenMask::new(n);
        all_rejected.fill();
        for (t, q) in frontier(engine) {
            let entry = cache.entry(g, vocab, t, q);
            any_accepted.or_assign(&entry.accepted);
            all_rejected.and_assign(&entry.rejected);
        }
        all_rejected.set(vocab.eos(), false);
        stats.ci_accepted = any_accepted.count() as u32;
        stats.ci_rejected = all_rejected.count() as u32;
        mask.or_assign(&any_accepted);
        for (a, (b, c)) in undecided
            .words
            .iter_mut()
            .zip(any_accepted.words.iter().zip(&all_rejected.words))
        {
            *a &= !(b | c);
        }
    }

    for id in undecided.ones() {
        let bytes = vocab.bytes(id);
        if config.trie && trie.rejected_prefix(bytes).is_some() {
            stats.trie_hits += 1;
            continue;
        }
        stats.trials += 1;
        match engine.probe(bytes) {
            Ok(()) => mask.set(id, true),
            Err(p) => {
                if config.trie {
                    trie.insert(&bytes[..=p]);
                }
            }
        }
    }
    mask.set(vocab.eos(), engine.is_accepting());
    MaskOutcome { mask, stats }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenOutcome {
    Accepted,
    Rejected,
}

/// Commits all bytes of `token` or nothing. EOS finalizes the engine and is
/// legal only in an accepting state.
pub fn accept_token(engine: &mut Engine, token: TokenId, vocab: &Vocabulary) -> TokenOutcome {
    if token as usize >= vocab.len() {
        return TokenOutcome::Rejected;
    }
    let ok = if token == vocab.eos() {
        engine.finish()
    } else {
        engine.accept_bytes(vocab.bytes(token)).is_ok()
    };
    if ok {
        TokenOutcome::Accepted
    } else {
        TokenOutcome::Rejected
    }
}
