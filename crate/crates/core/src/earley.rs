//! Byte-level Earley recognizer.
//!
//! One Earley set is created per consumed byte. Terminals are matched through
//! their automata with the partial match state stored in the item, so a
//! regex terminal spans as many sets as it has bytes. Each committed byte
//! runs scan → complete → compact → predict on the new set.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::automaton::DEAD;
use crate::grammar::{Grammar, ProductionId, Symbol};
use crate::pruning;

/// `fsm` value of items that are not inside a terminal match.
pub const NO_FSM: u32 = u32::MAX;

/// A dotted rule with its origin. The end position is the index of the set
/// holding the item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Item {
    pub production: ProductionId,
    pub dot: u32,
    pub origin: u32,
    /// Automaton state of a partially matched postdot terminal, or [`NO_FSM`].
    pub fsm: u32,
}

impl Item {
    pub fn new(production: ProductionId, dot: u32, origin: u32) -> Self {
        Item {
            production,
            dot,
            origin,
            fsm: NO_FSM,
        }
    }

    pub fn fsm_state(&self) -> Option<u32> {
        (self.fsm != NO_FSM).then_some(self.fsm)
    }

    pub fn postdot(&self, g: &Grammar) -> Option<Symbol> {
        g.production(self.production).rhs.get(self.dot as usize).copied()
    }

    pub fn is_complete(&self, g: &Grammar) -> bool {
        self.fsm == NO_FSM && self.dot as usize == g.production(self.production).rhs.len()
    }

    pub fn display<'a>(&'a self, g: &'a Grammar, end: u32) -> ItemDisplay<'a> {
        ItemDisplay {
            item: self,
            grammar: g,
            end,
        }
    }
}

pub struct ItemDisplay<'a> {
    item: &'a Item,
    grammar: &'a Grammar,
    end: u32,
}

impl fmt::Display for ItemDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}",
            self.grammar
                .display_dotted(self.item.production, self.item.dot as usize),
            self.item.origin,
            self.end
        )?;
        if let Some(q) = self.item.fsm_state() {
            write!(f, ", fsm={}", q)?;
        }
        f.write_str(")")
    }
}

/// Position of an item: the set's byte index and the item's slot in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemRef {
    pub set: u32,
    pub pos: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepKind {
    Predict,
    Scan,
    /// The completed child `p` of a completion.
    CompleteChild,
    /// The waiting parent `q` of a completion.
    CompleteParent,
}

/// An edge `source → target`: the target item depends on `source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dep {
    pub kind: DepKind,
    pub source: ItemRef,
}

pub(crate) type Deps = SmallVec<[Dep; 2]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Scanned,
    Completed,
    Compacted,
    Predicted,
}

#[derive(Debug, Clone)]
pub struct EarleySet {
    pub(crate) index: u32,
    pub(crate) items: Vec<Item>,
    pub(crate) deps: Vec<Deps>,
    pub(crate) phase: Phase,
    /// `(postdot nonterminal, pos)` sorted, for completion lookups.
    pub(crate) waiting: Vec<(u32, u32)>,
}

impl EarleySet {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn deps(&self, pos: usize) -> &[Dep] {
        &self.deps[pos]
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub(crate) fn waiting_on(&self, nt: u32) -> impl Iterator<Item = u32> + '_ {
        let lo = self.waiting.partition_point(|&(n, _)| n < nt);
        self.waiting[lo..]
            .iter()
            .take_while(move |&&(n, _)| n == nt)
            .map(|&(_, pos)| pos)
    }

    pub(crate) fn rebuild_waiting(&mut self, g: &Grammar) {
        self.waiting.clear();
        for (pos, item) in self.items.iter().enumerate() {
            if let Some(Symbol::Nonterminal(y)) = item.postdot(g) {
                self.waiting.push((y, pos as u32));
            }
        }
        self.waiting.sort_unstable();
    }
}

/// A set under construction, with its dedup index.
pub(crate) struct SetBuilder {
    pub(crate) set: EarleySet,
    seen: HashMap<Item, u32>,
    track_deps: bool,
}

impl SetBuilder {
    fn new(index: u32, track_deps: bool) -> Self {
        SetBuilder {
            set: EarleySet {
                index,
                items: Vec::new(),
                deps: Vec::new(),
                phase: Phase::Scanned,
                waiting: Vec::new(),
            },
            seen: HashMap::new(),
            track_deps,
        }
    }

    /// Inserts `item`, or unions `deps` onto the existing vertex.
    fn add(&mut self, item: Item, deps: &[Dep]) {
        match self.seen.get(&item) {
            Some(&pos) => {
                if self.track_deps {
                    let existing = &mut self.set.deps[pos as usize];
                    for d in deps {
                        if !existing.contains(d) {
                            existing.push(*d);
                        }
                    }
                }
            }
            None => {
                self.seen.insert(item, self.set.items.len() as u32);
                self.set.items.push(item);
                self.set.deps.push(if self.track_deps {
                    deps.iter().copied().collect()
                } else {
                    Deps::new()
                });
            }
        }
    }

    fn finish(mut self, g: &Grammar) -> EarleySet {
        self.set.rebuild_waiting(g);
        self.set.phase = Phase::Predicted;
        self.set
    }
}

/// Committed sets followed by uncommitted speculative sets.
struct History<'a> {
    committed: &'a [EarleySet],
    scratch: &'a [EarleySet],
}

impl<'a> History<'a> {
    fn get(&self, index: u32) -> Option<&'a EarleySet> {
        if let Some(first) = self.scratch.first() {
            if index >= first.index {
                return self.scratch.get((index - first.index) as usize);
            }
        }
        find_set(self.committed, index)
    }
}

pub(crate) fn find_set(sets: &[EarleySet], index: u32) -> Option<&EarleySet> {
    sets.binary_search_by_key(&index, |s| s.index)
        .ok()
        .map(|i| &sets[i])
}

fn scan(g: &Grammar, last: &EarleySet, byte: u8, track_deps: bool) -> SetBuilder {
    let mut out = SetBuilder::new(last.index + 1, track_deps);
    let mut deps: SmallVec<[Dep; 4]> = SmallVec::new();
    for (pos, item) in last.items.iter().enumerate() {
        let Some(Symbol::Terminal(t)) = item.postdot(g) else {
            continue;
        };
        let automaton = &g.terminal(t).automaton;
        let from = item.fsm_state().unwrap_or(automaton.start());
        let to = automaton.next(from, byte);
        if to == DEAD {
            continue;
        }
        deps.clear();
        if track_deps {
            // A terminal is one scan step: byte-level successors hang off the
            // item that preceded the match, not off intermediate fsm items.
            if item.fsm == NO_FSM {
                deps.push(Dep {
                    kind: DepKind::Scan,
                    source: ItemRef {
                        set: last.index,
                        pos: pos as u32,
                    },
                });
            } else {
                deps.extend(
                    last.deps[pos]
                        .iter()
                        .filter(|d| d.kind == DepKind::Scan)
                        .copied(),
                );
            }
        }
        if automaton.has_exits(to) {
            out.add(Item { fsm: to, ..*item }, &deps);
        }
        if automaton.is_accepting(to) {
            out.add(Item::new(item.production, item.dot + 1, item.origin), &deps);
        }
    }
    out
}

fn complete(g: &Grammar, history: &History<'_>, b: &mut SetBuilder) {
    let index = b.set.index;
    let mut i = 0;
    while i < b.set.items.len() {
        let item = b.set.items[i];
        i += 1;
        if !item.is_complete(g) || item.origin == index {
            // Origin == index only for a start ε-rule, whose lhs never
            // occurs on a rhs.
            continue;
        }
        let lhs = g.production(item.production).lhs;
        let Some(origin) = history.get(item.origin) else {
            debug_assert!(false, "origin set {} was pruned", item.origin);
            continue;
        };
        for pos in origin.waiting_on(lhs) {
            let parent = origin.items[pos as usize];
            let advanced = Item::new(parent.production, parent.dot + 1, parent.origin);
            b.add(
                advanced,
                &[
                    Dep {
                        kind: DepKind::CompleteChild,
                        source: ItemRef {
                            set: index,
                            pos: (i - 1) as u32,
                        },
                    },
                    Dep {
                        kind: DepKind::CompleteParent,
                        source: ItemRef {
                            set: origin.index,
                            pos,
                        },
                    },
                ],
            );
        }
    }
    b.set.phase = Phase::Completed;
}

fn predict(g: &Grammar, b: &mut SetBuilder) {
    let index = b.set.index;
    let mut i = 0;
    while i < b.set.items.len() {
        let item = b.set.items[i];
        i += 1;
        let Some(Symbol::Nonterminal(y)) = item.postdot(g) else {
            continue;
        };
        let dep = [Dep {
            kind: DepKind::Predict,
            source: ItemRef {
                set: index,
                pos: (i - 1) as u32,
            },
        }];
        for &p in g.productions_of(y) {
            b.add(Item::new(p, 0, index), &dep);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("grammar has ε-rules other than a start rule; run grammar::prepare first")]
    UnpreparedGrammar,
    #[error("grammar denotes the empty language")]
    EmptyLanguage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Run the compact phase after each completion.
    pub prune: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { prune: true }
    }
}

/// Parse state over a shared grammar. Cloning yields an independent state.
#[derive(Debug, Clone)]
pub struct Engine {
    grammar: Arc<Grammar>,
    sets: Vec<EarleySet>,
    consumed: u32,
    config: EngineConfig,
    finished: bool,
}

impl Engine {
    pub fn new(grammar: Arc<Grammar>, config: EngineConfig) -> Result<Self, EngineError> {
        if grammar.has_inner_epsilon() {
            return Err(EngineError::UnpreparedGrammar);
        }
        let g = &*grammar;
        let mut b = SetBuilder::new(0, true);
        for &p in g.productions_of(g.start()) {
            b.add(Item::new(p, 0, 0), &[]);
        }
        if b.set.is_empty() {
            return Err(EngineError::EmptyLanguage);
        }
        complete(
            g,
            &History {
                committed: &[],
                scratch: &[],
            },
            &mut b,
        );
        b.set.phase = Phase::Compacted;
        predict(g, &mut b);
        let set0 = b.finish(g);
        Ok(Engine {
            grammar,
            sets: alloc::vec![set0],
            consumed: 0,
            config,
            finished: false,
        })
    }

    pub fn grammar(&self) -> &Arc<Grammar> {
        &self.grammar
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    /// Retained sets in index order. With pruning, indices may have gaps.
    pub fn sets(&self) -> &[EarleySet] {
        &self.sets
    }

    pub fn set(&self, index: u32) -> Option<&EarleySet> {
        find_set(&self.sets, index)
    }

    pub fn last_set(&self) -> &EarleySet {
        self.sets.last().expect("engine always holds a set")
    }

    pub fn consumed(&self) -> u32 {
        self.consumed
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Marks the sequence as terminated. Only legal when accepting.
    pub fn finish(&mut self) -> bool {
        if self.finished || !self.is_accepting() {
            return false;
        }
        self.finished = true;
        true
    }

    pub fn is_accepting(&self) -> bool {
        let g = &*self.grammar;
        self.last_set()
            .items
            .iter()
            .any(|it| it.origin == 0 && it.is_complete(g) && g.production(it.production).lhs == g.start())
    }

    pub fn live_item_count(&self) -> usize {
        self.sets.iter().map(|s| s.items.len()).sum()
    }

    /// Scans one byte and, when something survives, commits the new set
    /// through complete, compact and predict. Rejection leaves `self`
    /// untouched.
    pub fn accept_byte(&mut self, byte: u8) -> bool {
        if self.finished {
            return false;
        }
        let g = &*self.grammar;
        let mut b = scan(g, self.last_set(), byte, true);
        if b.set.is_empty() {
            return false;
        }
        complete(
            g,
            &History {
                committed: &self.sets,
                scratch: &[],
            },
            &mut b,
        );
        if self.config.prune {
            pruning::compact(g, &mut self.sets, &mut b.set);
        }
        b.set.phase = Phase::Compacted;
        predict(g, &mut b);
        self.sets.push(b.finish(g));
        self.consumed += 1;
        true
    }

    /// Commits `bytes` atomically. On failure returns the offset of the
    /// first rejected byte and leaves `self` untouched.
    pub fn accept_bytes(&mut self, bytes: &[u8]) -> Result<(), usize> {
        self.probe(bytes)?;
        for &b in bytes {
            let ok = self.accept_byte(b);
            debug_assert!(ok);
        }
        Ok(())
    }

    /// Checks whether `bytes` can be consumed from this state without
    /// committing anything. Returns the offset of the first rejected byte.
    pub fn probe(&self, bytes: &[u8]) -> Result<(), usize> {
        if self.finished {
            return if bytes.is_empty() { Ok(()) } else { Err(0) };
        }
        let g = &*self.grammar;
        let mut scratch: Vec<EarleySet> = Vec::with_capacity(bytes.len());
        for (i, &byte) in bytes.iter().enumerate() {
            let last = scratch.last().unwrap_or_else(|| self.last_set());
            let mut b = scan(g, last, byte, false);
            if b.set.is_empty() {
                return Err(i);
            }
            if i + 1 == bytes.len() {
                break;
            }
            complete(
                g,
                &History {
                    committed: &self.sets,
                    scratch: &scratch,
                },
                &mut b,
            );
            predict(g, &mut b);
            scratch.push(b.finish(g));
        }
        Ok(())
    }

    /// Every dependency edge currently in the graph as `(source, target, kind)`.
    pub fn edges(&self) -> impl Iterator<Item = (ItemRef, ItemRef, DepKind)> + '_ {
        self.sets.iter().flat_map(|s| {
            s.deps.iter().enumerate().flat_map(move |(pos, deps)| {
                deps.iter().map(move |d| {
                    (
                        d.source,
                        ItemRef {
                            set: s.index,
                            pos: pos as u32,
                        },
                        d.kind,
                    )
                })
            })
        })
    }

    pub fn item(&self, r: ItemRef) -> Option<&Item> {
        self.set(r.set).and_then(|s| s.items.get(r.pos as usize))
    }

    /// Active items of the committed state: everything the last set
    /// transitively depends on.
    pub fn active_set(&self) -> pruning::ActiveSet {
        let (last, history) = self.sets.split_last().unwrap();
        pruning::compute_active(history, last)
    }
}
