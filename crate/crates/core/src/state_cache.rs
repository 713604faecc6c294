//! Canonical fingerprints of pruned engine state and a mask cache keyed by
//! them.
//!
//! Two token histories that leave the same retained items behind (up to a
//! shift of byte positions) admit the same continuations, so they can share
//! a mask. Pruning is what makes this common: without it, dead history keeps
//! every state distinct.

use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroUsize;

use lru::LruCache;
use xxhash_rust::xxh3::xxh3_128;

use crate::earley::{Engine, Item, Phase};
use crate::mask::{compute_mask, CiTokenCache, MaskConfig, MaskOutcome, RejectedPrefixTrie, Vocabulary};

/// 128-bit digest of the canonical state encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u128);

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({:032x})", self.0)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// Canonical encoding: retained sets relabeled densely, each as
/// `phase, item count, items sorted by (production, dot, origin, fsm)` with
/// origins relabeled to the dense set numbering.
pub fn canonical_encoding(engine: &Engine) -> Vec<u32> {
    let sets = engine.sets();
    let relabel = |index: u32| -> u32 {
        sets.binary_search_by_key(&index, |s| s.index())
            .map(|i| i as u32)
            .unwrap_or(u32::MAX)
    };
    let mut out = Vec::with_capacity(engine.live_item_count() * 4 + sets.len() * 2 + 1);
    out.push(sets.len() as u32);
    out.push(engine.is_finished() as u32);
    let mut items: Vec<Item> = Vec::new();
    for set in sets {
        out.push(phase_code(set.phase()));
        out.push(set.len() as u32);
        items.clear();
        items.extend(set.items().iter().map(|it| Item {
            origin: relabel(it.origin),
            ..*it
        }));
        items.sort_unstable();
        for it in &items {
            out.extend_from_slice(&[it.production, it.dot, it.origin, it.fsm]);
        }
    }
    out
}

fn phase_code(p: Phase) -> u32 {
    match p {
        Phase::Scanned => 0,
        Phase::Completed => 1,
        Phase::Compacted => 2,
        Phase::Predicted => 3,
    }
}

pub fn fingerprint(engine: &Engine) -> Fingerprint {
    let words = canonical_encoding(engine);
    let mut bytes = Vec::with_capacity(words.len() * 4);
    for w in words {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    Fingerprint(xxh3_128(&bytes))
}

pub const DEFAULT_CAPACITY: usize = 4096;

/// Bounded LRU map from state fingerprint to mask.
pub struct MaskCache {
    entries: LruCache<Fingerprint, MaskOutcome>,
    hits: u64,
    misses: u64,
}

impl fmt::Debug for MaskCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaskCache")
            .field("len", &self.entries.len())
            .field("cap", &self.entries.cap())
            .field("hits", &self.hits)
            .field("misses", &self.misses)
            .finish()
    }
}

impl Default for MaskCache {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl MaskCache {
    pub fn new(capacity: usize) -> Self {
        MaskCache {
            entries: LruCache::new(NonZeroUsize::new(capacity.max(1)).unwrap()),
            hits: 0,
            misses: 0,
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&mut self, fp: Fingerprint) -> Option<&MaskOutcome> {
        self.entries.get(&fp)
    }

    pub fn insert(&mut self, fp: Fingerprint, outcome: MaskOutcome) {
        self.entries.put(fp, outcome);
    }

    /// Returns the mask for `engine`, computing it on a miss. A hit does no
    /// parsing and reports zeroed stats.
    pub fn lookup_or_compute(
        &mut self,
        engine: &Engine,
        fp: Fingerprint,
        vocab: &Vocabulary,
        ci: &CiTokenCache,
        trie: &mut RejectedPrefixTrie,
        config: MaskConfig,
    ) -> (MaskOutcome, bool) {
        if let Some(hit) = self.entries.get(&fp) {
            self.hits += 1;
            return (
                MaskOutcome {
                    mask: hit.mask.clone(),
                    stats: Default::default(),
                },
                true,
            );
        }
        self.misses += 1;
        trie.reset_for_state(fp);
        let outcome = compute_mask(engine, vocab, ci, trie, config);
        self.entries.put(fp, outcome.clone());
        (outcome, false)
    }
}
