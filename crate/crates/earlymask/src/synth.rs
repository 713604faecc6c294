//! Synthetic vocabularies cut from random sentences of a grammar.
//!
//! Sentences are sampled by random derivation and chopped into chunks of
//! 1..=`max_token_len` bytes. Every byte seen in a sample is also a token,
//! so any sampled sentence can be spelled out. When the language runs out of
//! new chunks, the rest is random printable strings biased toward the bytes
//! seen so far.

use std::collections::HashSet;

use earlymask_core::automaton::DEAD;
use earlymask_core::grammar::Symbol;
use earlymask_core::{Grammar, Vocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    /// Total size including EOS.
    pub size: usize,
    pub max_token_len: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            size: 512,
            max_token_len: 6,
            seed: 0,
        }
    }
}

/// Derivation height per nonterminal: the least depth of a complete
/// derivation tree. Used to steer sampling toward termination.
fn heights(g: &Grammar) -> Vec<u32> {
    let mut h = vec![u32::MAX; g.nonterminal_count()];
    loop {
        let mut changed = false;
        for p in g.productions() {
            let mut m = 0u32;
            for s in &p.rhs {
                if let Symbol::Nonterminal(n) = *s {
                    m = m.max(h[n as usize]);
                }
            }
            if m != u32::MAX && m + 1 < h[p.lhs as usize] {
                h[p.lhs as usize] = m + 1;
                changed = true;
            }
        }
        if !changed {
            return h;
        }
    }
}

struct Sampler<'a> {
    g: &'a Grammar,
    heights: Vec<u32>,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn sentence(&mut self, budget: usize) -> Vec<u8> {
        let mut out = Vec::new();
        self.expand(self.g.start(), budget, &mut out);
        out
    }

    fn expand(&mut self, nt: u32, budget: usize, out: &mut Vec<u8>) {
        let prods = self.g.productions_of(nt);
        let p = if out.len() < budget {
            *prods.choose(&mut self.rng).unwrap()
        } else {
            // out of budget: take a shallowest alternative
            let cost = |p: u32| {
                self.g.production(p)
                    .rhs
                    .iter()
                    .map(|s| match *s {
                        Symbol::Nonterminal(n) => self.heights[n as usize],
                        Symbol::Terminal(_) => 0,
                    })
                    .max()
                    .unwrap_or(0)
            };
            *prods.iter().min_by_key(|&&p| cost(p)).unwrap()
        };
        let rhs = self.g.production(p).rhs.clone();
        for s in rhs {
            match s {
                Symbol::Terminal(t) => self.terminal(t, out),
                Symbol::Nonterminal(n) => self.expand(n, budget, out),
            }
        }
    }

    fn terminal(&mut self, t: u32, out: &mut Vec<u8>) {
        let a = &self.g.terminal(t).automaton;
        let mut s = a.start();
        let mut len = 0;
        loop {
            let exits: Vec<u8> = (0..=255u8).filter(|&b| a.next(s, b) != DEAD).collect();
            let stop = a.is_accepting(s) && (exits.is_empty() || len >= 12 || self.rng.gen_bool(0.3));
            if stop {
                return;
            }
            // printable bytes first so tokens stay readable
            let printable: Vec<u8> = exits.iter().copied().filter(|b| b.is_ascii_graphic() || *b == b' ').collect();
            let pool = if printable.is_empty() { &exits } else { &printable };
            let b = *pool.choose(&mut self.rng).unwrap();
            out.push(b);
            s = a.next(s, b);
            len += 1;
        }
    }
}

pub fn synthetic_vocab(g: &Grammar, params: SynthParams) -> Vocabulary {
    assert!(params.size >= 2 && params.max_token_len >= 1);
    let mut sampler = Sampler {
        g,
        heights: heights(g),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
    };
    let mut tokens: Vec<Vec<u8>> = Vec::new();
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut push = |t: Vec<u8>, tokens: &mut Vec<Vec<u8>>| {
        if tokens.len() < params.size - 1 && seen.insert(t.clone()) {
            tokens.push(t);
        }
    };
    let mut chunks: Vec<Vec<u8>> = Vec::new();
    let mut stale = 0;
    while tokens.len() < params.size - 1 && stale < 200 {
        let before = tokens.len();
        let s = sampler.sentence(64);
        for &b in &s {
            push(vec![b], &mut tokens);
        }
        let mut i = 0;
        while i < s.len() {
            let len = sampler.rng.gen_range(1..=params.max_token_len).min(s.len() - i);
            chunks.push(s[i..i + len].to_vec());
            i += len;
        }
        for c in chunks.drain(..) {
            push(c, &mut tokens);
        }
        stale = if tokens.len() == before { stale + 1 } else { 0 };
    }
    let seen_bytes: Vec<u8> = {
        let mut a: Vec<u8> = tokens.iter().flatten().copied().collect();
        a.sort_unstable();
        a.dedup();
        a
    };
    let printable: Vec<u8> = (b' '..=b'~').collect();
    while tokens.len() < params.size - 1 {
        let len = sampler.rng.gen_range(1..=params.max_token_len);
        let t: Vec<u8> = (0..len)
            .map(|_| {
                if !seen_bytes.is_empty() && sampler.rng.gen_bool(0.7) {
                    *seen_bytes.choose(&mut sampler.rng).unwrap()
                } else {
                    *printable.choose(&mut sampler.rng).unwrap()
                }
            })
            .collect();
        push(t, &mut tokens);
    }
    tokens.push(Vec::new());
    let eos = (tokens.len() - 1) as u32;
    Vocabulary::new(tokens, eos).expect("tokens are nonempty and unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use earlymask_core::{parse_grammar, prepare};

    #[test]
    fn deterministic_and_sized() {
        let g = prepare(&parse_grammar(include_str!("../../../grammars/json.grammar")).unwrap()).unwrap();
        let p = SynthParams {
            size: 300,
            ..Default::default()
        };
        let a = synthetic_vocab(&g, p);
        assert_eq!(a, synthetic_vocab(&g, p));
        assert_eq!(a.len(), 300);
        assert_eq!(a.eos(), 299);
        assert!(a.find(b"{").is_some());
    }

    #[test]
    fn small_language_is_padded() {
        let g = prepare(&parse_grammar(r#"start ::= "a" "b";"#).unwrap()).unwrap();
        let v = synthetic_vocab(&g, SynthParams { size: 40, ..Default::default() });
        assert_eq!(v.len(), 40);
        assert!(v.find(b"a").is_some() && v.find(b"b").is_some() && v.find(b"ab").is_some());
    }
}
