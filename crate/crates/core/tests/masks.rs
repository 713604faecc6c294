//! Token masks against per-token trial parsing, and the laws of the caches
//! and trie that feed them.

mod common;

use std::collections::HashMap;
use std::sync::Arc;

use common::*;
use earlymask_core::mask::{classify_tokens, frontier};
use earlymask_core::testing::brute_force_mask;
use earlymask_core::{
    accept_token, compute_mask, fingerprint, CiTokenCache, Fingerprint, Config, MaskCache, MaskConfig, RejectedPrefixTrie,
    Session, TokenMask, TokenOutcome, Vocabulary,
};
use proptest::prelude::*;
use rand::Rng;

/// Random decode: at each step every configuration must produce the brute
/// force mask, then one allowed token is taken (EOS restarts).
fn check_decode(text: &str, vocab: Vocabulary, steps: usize, seed: u64) {
    let g = grammar(text);
    let vocab = Arc::new(vocab);
    let ci = Arc::new(CiTokenCache::new(&g));
    let mut sessions: Vec<Session> = all_configs()
        .into_iter()
        .map(|c| Session::with_ci_cache(g.clone(), vocab.clone(), ci.clone(), c).unwrap())
        .collect();
    let mut rng = rng(seed);
    let mut seen: HashMap<Fingerprint, TokenMask> = HashMap::new();
    for step in 0..steps {
        let expected = brute_force_mask(sessions[0].engine(), &vocab);
        for s in sessions.iter_mut() {
            let got = s.mask();
            assert_eq!(got.mask, expected, "step {} config {:?} in {}", step, s.config(), text);
            // shared fingerprint implies shared mask
            let prior = seen.entry(got.fingerprint).or_insert_with(|| expected.clone());
            assert_eq!(*prior, expected, "fingerprint collision at step {}", step);
        }
        let allowed: Vec<u32> = expected.ones().collect();
        let restart = allowed.is_empty() || {
            let t = allowed[rng.gen_range(0..allowed.len())];
            let outs: Vec<TokenOutcome> = sessions.iter_mut().map(|s| s.accept_token(t)).collect();
            assert!(outs.iter().all(|&o| o == TokenOutcome::Accepted));
            t == vocab.eos()
        };
        if restart {
            // one more mask on the finished engine, then start over
            for s in sessions.iter_mut() {
                if s.engine().is_finished() {
                    assert_eq!(s.mask().mask.count(), 0);
                }
                s.reset();
            }
        }
    }
}

#[test]
fn json_masks_match_brute_force() {
    let mut r = rng(1);
    check_decode(JSON, json_vocab(&mut r, 300), 120, 2);
}

#[test]
fn sum_masks_match_brute_force() {
    let mut r = rng(3);
    check_decode(SUM, synthetic_vocab(&mut r, b"abcd+", 260, 4), 120, 4);
}

#[test]
fn plus_masks_match_brute_force() {
    let mut r = rng(5);
    check_decode(PLUS, synthetic_vocab(&mut r, b"ab", 256, 9), 120, 6);
}

#[test]
fn json_open_brace_mask() {
    let g = grammar(JSON);
    let vocab = Arc::new(vocab(&[b"{", b"}", b"\"", b"[", b"1", b"\"a", b"}}", b"{\""]));
    let mut s = Session::new(g, vocab.clone(), Config::default()).unwrap();
    assert_eq!(s.accept_token(0), TokenOutcome::Accepted);
    let m = s.mask().mask;
    let allowed: Vec<&[u8]> = m.ones().map(|id| vocab.bytes(id)).collect();
    assert_eq!(allowed, vec![&b"}"[..], b"\"", b"\"a"]);
}

#[test]
fn eos_bit_tracks_acceptance() {
    let g = grammar(PLUS);
    let vocab = Arc::new(vocab(&[b"a", b"b"]));
    let eos = vocab.eos();
    let mut s = Session::new(g, vocab, Config::default()).unwrap();
    assert!(!s.mask().mask.get(eos));
    assert_eq!(s.accept_token(eos), TokenOutcome::Rejected);
    s.accept_token(0);
    assert!(s.mask().mask.get(eos));
    assert_eq!(s.accept_token(eos), TokenOutcome::Accepted);
    assert!(s.engine().is_finished());
    assert_eq!(s.mask().mask.count(), 0);
    assert_eq!(s.accept_token(0), TokenOutcome::Rejected);
}

#[test]
fn rejected_tokens_leave_engine_unchanged() {
    let g = grammar(JSON);
    let vocab = vocab(&[b"{\"a\":", b"1]", b"1}"]);
    let mut e = engine(&g, true);
    assert_eq!(accept_token(&mut e, 0, &vocab), TokenOutcome::Accepted);
    let before = fingerprint(&e);
    assert_eq!(accept_token(&mut e, 1, &vocab), TokenOutcome::Rejected);
    assert_eq!(fingerprint(&e), before);
    assert_eq!(accept_token(&mut e, 2, &vocab), TokenOutcome::Accepted);
    assert!(e.is_accepting());
}

#[test]
fn merged_frontier_laws() {
    // valid if any frontier entry accepts, invalid if all reject
    let g = grammar(JSON);
    let mut r = rng(9);
    let vocab = json_vocab(&mut r, 400);
    let ci = CiTokenCache::new(&g);
    let mut e = engine(&g, true);
    for prefix in [&b""[..], b"{", b"{\"k", b"{\"k\":", b"{\"k\":1", b"{\"k\":[tr", b"{\"k\":-0."] {
        let mut e2 = e.clone();
        feed(&mut e2, prefix);
        let truth = brute_force_mask(&e2, &vocab);
        let entries: Vec<_> = frontier(&e2)
            .into_iter()
            .map(|(t, q)| {
                let entry = ci.entry(&g, &vocab, t, q);
                assert_eq!(*entry, classify_tokens(&g.terminal(t).automaton, q, &vocab));
                entry.clone()
            })
            .collect();
        assert!(!entries.is_empty());
        for (id, _) in vocab.iter().filter(|&(id, _)| id != vocab.eos()) {
            if entries.iter().any(|c| c.accepted.get(id)) {
                assert!(truth.get(id), "{:?} accepted by a frontier entry", String::from_utf8_lossy(vocab.bytes(id)));
            }
            if entries.iter().all(|c| c.rejected.get(id)) {
                assert!(!truth.get(id), "{:?} rejected by every entry", String::from_utf8_lossy(vocab.bytes(id)));
            }
        }
    }
    feed(&mut e, b"{}");
    assert!(frontier(&e).is_empty());
}

#[test]
fn trie_skips_tokens_under_a_rejected_prefix() {
    let g = grammar(r#"start ::= X "b"; X ::= #"a+";"#);
    let vocab = vocab(&[b"aaac", b"aaacx", b"aaaca", b"aab", b"aaacb", b"ab"]);
    let ci = CiTokenCache::new(&g);
    let e = engine(&g, true);
    let mut trie = RejectedPrefixTrie::new();
    trie.reset_for_state(fingerprint(&e));
    let out = compute_mask(&e, &vocab, &ci, &mut trie, MaskConfig { ci_cache: false, trie: true });
    assert_eq!(out.mask, brute_force_mask(&e, &vocab));
    assert_eq!(trie.prefixes(), vec![b"aaac".to_vec()]);
    assert_eq!(out.stats.trie_hits, 3);
    assert_eq!(out.stats.trials, 3);

    // same state again: every prefixed token is settled without a trial
    let again = compute_mask(&e, &vocab, &ci, &mut trie, MaskConfig { ci_cache: false, trie: true });
    assert_eq!(again.mask, out.mask);
    assert_eq!(again.stats.trie_hits, 4);
    assert_eq!(again.stats.trials, 2);
}

#[test]
fn trie_is_reused_only_for_the_same_state() {
    let g = grammar(JSON);
    let mut r = rng(13);
    let vocab = Arc::new(json_vocab(&mut r, 300));
    let config = Config {
        ci_cache: false,
        state_cache: false,
        ..Config::default()
    };
    let mut s = Session::new(g, vocab, config).unwrap();
    s.accept_bytes(b"{\"a\":").unwrap();
    let first = s.mask();
    let second = s.mask();
    assert_eq!(first.mask, second.mask);
    assert!(second.stats.trials < first.stats.trials);
    assert!(second.stats.trie_hits > first.stats.trie_hits);
    s.accept_bytes(b"1").unwrap();
    assert!(s.trie().is_empty());
}

#[test]
fn fingerprints_converge_with_pruning() {
    let g = grammar(JSON);
    let vocab = Arc::new(vocab(&[b"{\"ab\":1,", b"{\"xy\":2,", b"\"", b"}"]));
    let mut s = Session::new(g.clone(), vocab.clone(), Config::default()).unwrap();
    s.accept_token(0);
    let a = s.mask();
    s.reset();
    s.accept_token(1);
    let b = s.mask();
    assert_eq!(a.fingerprint, b.fingerprint);
    assert!(!a.cache_hit);
    assert!(b.cache_hit);
    assert_eq!(a.mask, b.mask);

    // Unpruned, these two histories walk the same automaton states byte for
    // byte, so their item structure is identical too.
    let unpruned = |input: &[u8]| {
        let mut e = engine(&g, false);
        feed(&mut e, input);
        fingerprint(&e)
    };
    assert_eq!(unpruned(b"{\"ab\":1,"), unpruned(b"{\"xy\":2,"));

    // Histories of different shape only converge once pruned.
    let pruned = |input: &[u8]| {
        let mut e = engine(&g, true);
        feed(&mut e, input);
        fingerprint(&e)
    };
    assert_eq!(pruned(b"{\"ab\":1,"), pruned(b"{\"wxyz\":[1,{}],"));
    assert_ne!(unpruned(b"{\"ab\":1,"), unpruned(b"{\"wxyz\":[1,{}],"));
}

#[test]
fn fingerprint_ignores_absolute_positions() {
    let g = grammar(PLUS);
    let mut a = engine(&g, true);
    feed(&mut a, b"aa");
    let mut b = engine(&g, true);
    feed(&mut b, b"aaaaaaa");
    assert_eq!(fingerprint(&a), fingerprint(&b));
    let mut c = engine(&g, true);
    feed(&mut c, b"a");
    assert_ne!(fingerprint(&a), fingerprint(&c));
}

#[test]
fn cache_of_capacity_one_evicts() {
    let g = grammar(JSON);
    let vocab = vocab(&[b"{", b"}"]);
    let ci = CiTokenCache::new(&g);
    let mut trie = RejectedPrefixTrie::new();
    let mut cache = MaskCache::new(1);
    let a = engine(&g, true);
    let mut b = a.clone();
    feed(&mut b, b"{");
    let (fa, fb) = (fingerprint(&a), fingerprint(&b));
    let cfg = MaskConfig::default();
    assert!(!cache.lookup_or_compute(&a, fa, &vocab, &ci, &mut trie, cfg).1);
    assert!(cache.lookup_or_compute(&a, fa, &vocab, &ci, &mut trie, cfg).1);
    assert!(!cache.lookup_or_compute(&b, fb, &vocab, &ci, &mut trie, cfg).1);
    assert_eq!(cache.len(), 1);
    assert!(!cache.lookup_or_compute(&a, fa, &vocab, &ci, &mut trie, cfg).1);
    assert_eq!((cache.hits(), cache.misses()), (1, 3));
    assert!((cache.hit_rate() - 0.25).abs() < 1e-12);
}

#[test]
fn ci_cache_is_populated_lazily() {
    let g = grammar(JSON);
    let vocab = vocab(&[b"{", b"\"a\""]);
    let ci = CiTokenCache::new(&g);
    assert_eq!(ci.populated(), 0);
    let mut trie = RejectedPrefixTrie::new();
    let e = engine(&g, true);
    compute_mask(&e, &vocab, &ci, &mut trie, MaskConfig::default());
    assert_eq!(ci.populated(), frontier(&e).len());
    let full = CiTokenCache::build(&g, &vocab);
    let states: usize = g.terminals().iter().map(|t| t.automaton.state_count()).sum();
    assert_eq!(full.populated(), states);
}

proptest! {
    #[test]
    fn mask_wire_format_round_trips(bits in proptest::collection::vec(any::<bool>(), 1..300)) {
        let mut m = TokenMask::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            m.set(i as u32, b);
        }
        let bytes = m.to_bytes();
        prop_assert_eq!(bytes.len(), bits.len().div_ceil(8));
        for (i, &b) in bits.iter().enumerate() {
            prop_assert_eq!(bytes[i / 8] >> (i % 8) & 1 == 1, b);
        }
        prop_assert_eq!(TokenMask::from_bytes(&bytes, bits.len()), Some(m.clone()));
        prop_assert_eq!(TokenMask::from_hex(&m.to_hex(), bits.len()), Some(m.clone()));
        prop_assert_eq!(m.count(), bits.iter().filter(|&&b| b).count());
    }

    #[test]
    fn trie_prefixes_stay_minimal(words in proptest::collection::vec(proptest::collection::vec(0u8..3, 1..5), 0..20)) {
        let mut t = RejectedPrefixTrie::new();
        for w in &words {
            t.insert(w);
        }
        let stored = t.prefixes();
        for (i, p) in stored.iter().enumerate() {
            for (j, q) in stored.iter().enumerate() {
                prop_assert!(i == j || !q.starts_with(p));
            }
        }
        for w in &words {
            let k = t.rejected_prefix(w);
            prop_assert!(k.is_some());
            prop_assert!(stored.contains(&w[..k.unwrap()].to_vec()));
        }
    }
}
