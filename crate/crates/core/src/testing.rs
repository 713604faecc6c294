//! Brute-force oracles for tests. None of this shares code paths with the
//! engine it checks except where noted.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::automaton::{TerminalAutomaton, DEAD};
use crate::earley::{DepKind, Engine, ItemRef};
use crate::grammar::{Grammar, Symbol};
use crate::mask::{TokenMask, Vocabulary};

/// Every string of length ≤ `max_len` accepted by `a`.
pub fn automaton_language(a: &TerminalAutomaton, max_len: usize) -> BTreeSet<Vec<u8>> {
    let all: Vec<u8> = (0..=255u8).collect();
    automaton_language_over(a, &all, max_len)
}

/// [`automaton_language`] restricted to strings over `alphabet`.
pub fn automaton_language_over(a: &TerminalAutomaton, alphabet: &[u8], max_len: usize) -> BTreeSet<Vec<u8>> {
    // Shortest distance to acceptance per state, so prefixes that cannot
    // finish within the budget are not extended.
    let n = a.state_count();
    let mut dist = vec![usize::MAX; n];
    for (s, d) in dist.iter_mut().enumerate() {
        if a.is_accepting(s as u32) {
            *d = 0;
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            for &b in alphabet {
                let t = a.next(s as u32, b);
                if t != DEAD && dist[t as usize] != usize::MAX && dist[t as usize] + 1 < dist[s] {
                    dist[s] = dist[t as usize] + 1;
                    changed = true;
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![(a.start(), Vec::new())];
    while let Some((s, w)) = stack.pop() {
        if a.is_accepting(s) {
            out.insert(w.clone());
        }
        for &b in alphabet {
            let t = a.next(s, b);
            if t != DEAD && dist[t as usize] != usize::MAX && w.len() + 1 + dist[t as usize] <= max_len {
                let mut w2 = w.clone();
                w2.push(b);
                stack.push((t, w2));
            }
        }
    }
    out
}

/// Every string of length ≤ `max_len` derivable from the start symbol, by
/// fixpoint over per-nonterminal string sets. Handles ε-rules, nullable
/// terminals and left recursion.
pub fn enumerate_language(g: &Grammar, max_len: usize) -> BTreeSet<Vec<u8>> {
    let all: Vec<u8> = (0..=255u8).collect();
    enumerate_language_over(g, &all, max_len)
}

/// [`enumerate_language`] restricted to strings over `alphabet`.
pub fn enumerate_language_over(g: &Grammar, alphabet: &[u8], max_len: usize) -> BTreeSet<Vec<u8>> {
    // Built one length at a time: strings of length n only combine shorter
    // strings, except along unit and nullable chains, which the inner
    // fixpoint handles.
    type Buckets = Vec<BTreeSet<Vec<u8>>>;
    let mut terms: Vec<Buckets> = Vec::new();
    for t in g.terminals() {
        let mut b: Buckets = vec![BTreeSet::new(); max_len + 1];
        for w in automaton_language_over(&t.automaton, alphabet, max_len) {
            let n = w.len();
            b[n].insert(w);
        }
        terms.push(b);
    }
    let mut langs: Vec<Buckets> = vec![vec![BTreeSet::new(); max_len + 1]; g.nonterminal_count()];

    fn extend(
        rhs: &[Symbol],
        remaining: usize,
        prefix: &mut Vec<u8>,
        terms: &[Buckets],
        langs: &[Buckets],
        out: &mut Vec<Vec<u8>>,
    ) {
        let Some((first, rest)) = rhs.split_first() else {
            if remaining == 0 {
                out.push(prefix.clone());
            }
            return;
        };
        let part = match *first {
            Symbol::Terminal(t) => &terms[t as usize],
            Symbol::Nonterminal(n) => &langs[n as usize],
        };
        for (len, words) in part.iter().enumerate().take(remaining + 1) {
            for w in words {
                let keep = prefix.len();
                prefix.extend_from_slice(w);
                extend(rest, remaining - len, prefix, terms, langs, out);
                prefix.truncate(keep);
            }
        }
    }

    let mut fresh = Vec::new();
    for n in 0..=max_len {
        loop {
            let mut changed = false;
            for p in g.productions() {
                fresh.clear();
                extend(&p.rhs, n, &mut Vec::new(), &terms, &langs, &mut fresh);
                for w in fresh.drain(..) {
                    changed |= langs[p.lhs as usize][n].insert(w);
                }
            }
            if !changed {
                break;
            }
        }
    }
    core::mem::take(&mut langs[g.start() as usize]).into_iter().flatten().collect()
}

/// All byte strings over `alphabet` with length ≤ `max_len`, shortest first.
pub fn all_strings(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &b in alphabet {
                let mut w2: Vec<u8> = w.clone();
                w2.push(b);
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Acceptance of every string over `alphabet` up to `max_len`, by walking the
/// prefix tree with committed engine clones.
pub fn engine_language(engine: &Engine, alphabet: &[u8], max_len: usize) -> BTreeSet<Vec<u8>> {
    let mut out = BTreeSet::new();
    let mut stack = vec![(engine.clone(), Vec::new())];
    while let Some((e, w)) = stack.pop() {
        if e.is_accepting() {
            out.insert(w.clone());
        }
        if w.len() == max_len {
            continue;
        }
        for &b in alphabet {
            let mut e2 = e.clone();
            if e2.accept_byte(b) {
                let mut w2 = w.clone();
                w2.push(b);
                stack.push((e2, w2));
            }
        }
    }
    out
}

/// Mask obtained by trial-parsing every token with no shortcuts.
pub fn brute_force_mask(engine: &Engine, vocab: &Vocabulary) -> TokenMask {
    let mut mask = TokenMask::new(vocab.len());
    if engine.is_finished() {
        return mask;
    }
    for (id, bytes) in vocab.iter() {
        if id == vocab.eos() {
            mask.set(id, engine.is_accepting());
        } else {
            let mut e = engine.clone();
            if bytes.iter().all(|&b| e.accept_byte(b)) {
                mask.set(id, true);
            }
        }
    }
    mask
}

/// Retained items that have no forward path (over followed edges) to an item
/// of the last set, found by a separate forward search from each item.
pub fn unreachable_items(engine: &Engine) -> Vec<ItemRef> {
    let last = engine.last_set().index();
    let refs: Vec<ItemRef> = engine
        .sets()
        .iter()
        .flat_map(|s| {
            (0..s.len()).map(move |pos| ItemRef {
                set: s.index(),
                pos: pos as u32,
            })
        })
        .collect();
    let edges: Vec<(ItemRef, ItemRef)> = engine
        .edges()
        .filter(|&(_, _, k)| k != DepKind::CompleteChild)
        .map(|(s, t, _)| (s, t))
        .collect();
    refs.iter()
        .copied()
        .filter(|&start| {
            if start.set == last {
                return false;
            }
            let mut seen = BTreeSet::new();
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                if x.set == last {
                    return false;
                }
                for &(s, t) in &edges {
                    if s == x && seen.insert(t) {
                        stack.push(t);
                    }
                }
            }
            true
        })
        .collect()
}

/// Edges whose endpoints do not name a retained item.
pub fn dangling_edges(engine: &Engine) -> usize {
    engine
        .edges()
        .filter(|&(s, t, _)| engine.item(s).is_none() || engine.item(t).is_none())
        .count()
}

/// Shape limits for [`random_grammar`].
#[derive(Debug, Clone, Copy)]
pub struct RandomGrammarParams {
    pub nonterminals: u32,
    pub terminals: u32,
    pub max_alternatives: u32,
    pub max_rhs: u32,
    /// Terminal literals are drawn from these bytes.
    pub alphabet: &'static [u8],
    /// Allow empty alternatives.
    pub epsilon: bool,
    /// Allow `x+` regex terminals.
    pub regex: bool,
}

/// Grammar text with `nonterminals` rules over `terminals` distinct
/// terminals. `below(n)` must return a uniform value in `0..n`.
pub fn random_grammar(params: &RandomGrammarParams, below: &mut impl FnMut(u32) -> u32) -> String {
    let mut terminals: Vec<String> = Vec::new();
    while (terminals.len() as u32) < params.terminals {
        let len = 1 + below(2);
        let mut lit = String::new();
        for _ in 0..len {
            let b = params.alphabet[below(params.alphabet.len() as u32) as usize];
            lit.push(b as char);
        }
        let t = if params.regex && below(4) == 0 {
            format!("#\"({})+\"", lit)
        } else {
            format!("\"{}\"", lit)
        };
        if !terminals.contains(&t) {
            terminals.push(t);
        }
    }
    let name = |i: u32| if i == 0 { String::from("start") } else { format!("n{}", i) };
    let mut text = String::new();
    for nt in 0..params.nonterminals {
        text.push_str(&name(nt));
        text.push_str(" ::=");
        let alts = 1 + below(params.max_alternatives);
        for a in 0..alts {
            if a > 0 {
                text.push_str(" |");
            }
            let len = if params.epsilon {
                below(params.max_rhs + 1)
            } else {
                1 + below(params.max_rhs)
            };
            for _ in 0..len {
                text.push(' ');
                if below(2) == 0 {
                    text.push_str(&terminals[below(params.terminals) as usize]);
                } else {
                    text.push_str(&name(below(params.nonterminals)));
                }
            }
        }
        text.push_str(" ;\n");
    }
    text
}
