//! One decoding sequence: an engine plus the caches that make masking fast.

use alloc::sync::Arc;

use crate::earley::{Engine, EngineConfig, EngineError};
use crate::grammar::Grammar;
use crate::mask::{
    accept_token, compute_mask, CiTokenCache, MaskConfig, MaskOutcome, MaskStats,
    RejectedPrefixTrie, TokenId, TokenMask, TokenOutcome, Vocabulary,
};
use crate::state_cache::{fingerprint, Fingerprint, MaskCache, DEFAULT_CAPACITY};

/// Optimization switches. Every combination yields identical masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Config {
    pub prune: bool,
    pub ci_cache: bool,
    pub trie: bool,
    pub state_cache: bool,
    pub cache_capacity: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            prune: true,
            ci_cache: true,
            trie: true,
            state_cache: true,
            cache_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl Config {
    /// Everything off: plain Earley plus per-token trial parsing.
    pub fn baseline() -> Self {
        Config {
            prune: false,
            ci_cache: false,
            trie: false,
            state_cache: false,
            cache_capacity: DEFAULT_CAPACITY,
        }
    }

    fn mask_config(&self) -> MaskConfig {
        MaskConfig {
            ci_cache: self.ci_cache,
            trie: self.trie,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepMask {
    pub mask: TokenMask,
    pub stats: MaskStats,
    pub fingerprint: Fingerprint,
    pub cache_hit: bool,
}

impl StepMask {
    pub fn is_dead_end(&self) -> bool {
        self.mask.count() == 0
    }
}

pub struct Session {
    vocab: Arc<Vocabulary>,
    ci: Arc<CiTokenCache>,
    engine: Engine,
    initial: Engine,
    trie: RejectedPrefixTrie,
    cache: MaskCache,
    config: Config,
}

impl Session {
    pub fn new(grammar: Arc<Grammar>, vocab: Arc<Vocabulary>, config: Config) -> Result<Self, EngineError> {
        let ci = Arc::new(CiTokenCache::new(&grammar));
        Self::with_ci_cache(grammar, vocab, ci, config)
    }

    /// Shares an existing context-independent cache built for the same
    /// grammar and vocabulary.
    pub fn with_ci_cache(
        grammar: Arc<Grammar>,
        vocab: Arc<Vocabulary>,
        ci: Arc<CiTokenCache>,
        config: Config,
    ) -> Result<Self, EngineError> {
        let engine = Engine::new(grammar, EngineConfig { prune: config.prune })?;
        Ok(Session {
            vocab,
            ci,
            initial: engine.clone(),
            engine,
            trie: RejectedPrefixTrie::new(),
            cache: MaskCache::new(config.cache_capacity),
            config,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn config(&self) -> Config {
        self.config
    }

    pub fn trie(&self) -> &RejectedPrefixTrie {
        &self.trie
    }

    pub fn mask_cache(&self) -> &MaskCache {
        &self.cache
    }

    pub fn fingerprint(&self) -> Fingerprint {
        fingerprint(&self.engine)
    }

    pub fn mask(&mut self) -> StepMask {
        let fp = fingerprint(&self.engine);
        if self.config.state_cache {
            let (outcome, hit) = self.cache.lookup_or_compute(
                &self.engine,
                fp,
                &self.vocab,
                &self.ci,
                &mut self.trie,
                self.config.mask_config(),
            );
            return StepMask {
                mask: outcome.mask,
                stats: outcome.stats,
                fingerprint: fp,
                cache_hit: hit,
            };
        }
        self.trie.reset_for_state(fp);
        let MaskOutcome { mask, stats } = compute_mask(
            &self.engine,
            &self.vocab,
            &self.ci,
            &mut self.trie,
            self.config.mask_config(),
        );
        StepMask {
            mask,
            stats,
            fingerprint: fp,
            cache_hit: false,
        }
    }

    pub fn accept_token(&mut self, token: TokenId) -> TokenOutcome {
        let out = accept_token(&mut self.engine, token, &self.vocab);
        if out == TokenOutcome::Accepted {
            self.trie.clear();
        }
        out
    }

    pub fn accept_bytes(&mut self, bytes: &[u8]) -> Result<(), usize> {
        self.engine.accept_bytes(bytes)?;
        self.trie.clear();
        Ok(())
    }

    /// Back to the initial state; caches are kept.
    pub fn reset(&mut self) {
        self.engine = self.initial.clone();
        self.trie.clear();
    }
}
