//! Dependency-driven pruning of Earley state.
//!
//! Every item records the items it was derived from (see [`DepKind`]). After
//! the complete phase of a new set, the items that the new set transitively
//! depends on are the only ones a future scan, completion or prediction can
//! touch; everything else is deleted, and sets left empty are dropped from the
//! chain while their indices stay reserved.
//!
//! The traversal follows predict, scan and completion-parent edges.
//! Completion-child edges are kept as provenance but not followed: a
//! completed child only ever feeds the set it completes in, so once that set
//! is done the child is dead even though the advanced parent survives.

use alloc::vec;
use alloc::vec::Vec;

use crate::earley::{DepKind, EarleySet, ItemRef};
use crate::grammar::Grammar;

/// Membership flags over the items of the historical sets. Every item of the
/// last set is active by definition and is not tracked here.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    last: u32,
    /// Per historical set, in chain order: `(set index, flags)`.
    marks: Vec<(u32, Vec<bool>)>,
}

impl ActiveSet {
    pub fn contains(&self, r: ItemRef) -> bool {
        if r.set == self.last {
            return true;
        }
        self.marks
            .binary_search_by_key(&r.set, |(i, _)| *i)
            .ok()
            .is_some_and(|i| self.marks[i].1.get(r.pos as usize).copied().unwrap_or(false))
    }

    /// Number of active items outside the last set.
    pub fn historical_len(&self) -> usize {
        self.marks
            .iter()
            .map(|(_, m)| m.iter().filter(|&&b| b).count())
            .sum()
    }
}

#[inline]
pub fn followed(kind: DepKind) -> bool {
    !matches!(kind, DepKind::CompleteChild)
}

/// Backward traversal from every item of `last` over `history`.
pub fn compute_active(history: &[EarleySet], last: &EarleySet) -> ActiveSet {
    let mut marks: Vec<(u32, Vec<bool>)> = history
        .iter()
        .map(|s| (s.index, vec![false; s.items.len()]))
        .collect();
    let mut stack: Vec<(usize, u32)> = Vec::new();
    let visit = |r: ItemRef, marks: &mut Vec<(u32, Vec<bool>)>, stack: &mut Vec<(usize, u32)>| {
        if r.set == last.index {
            return;
        }
        let Ok(si) = marks.binary_search_by_key(&r.set, |(i, _)| *i) else {
            debug_assert!(false, "edge into dropped set {}", r.set);
            return;
        };
        let flag = &mut marks[si].1[r.pos as usize];
        if !*flag {
            *flag = true;
            stack.push((si, r.pos));
        }
    };
    for deps in &last.deps {
        for d in deps.iter().filter(|d| followed(d.kind)) {
            visit(d.source, &mut marks, &mut stack);
        }
    }
    while let Some((si, pos)) = stack.pop() {
        for d in history[si].deps[pos as usize].iter().filter(|d| followed(d.kind)) {
            visit(d.source, &mut marks, &mut stack);
        }
    }
    ActiveSet {
        last: last.index,
        marks,
    }
}

/// Deletes inactive historical items and their edges, then drops emptied
/// sets. `last` is the set being built, already through its complete phase.
pub fn compact(g: &Grammar, history: &mut Vec<EarleySet>, last: &mut EarleySet) {
    let active = compute_active(history, last);
    // Old → new positions per historical set (u32::MAX = deleted).
    let mut remaps: Vec<(u32, Vec<u32>)> = Vec::with_capacity(history.len());
    let mut touched = vec![false; history.len()];
    for (si, set) in history.iter_mut().enumerate() {
        let flags = &active.marks[si].1;
        let mut remap = vec![u32::MAX; set.items.len()];
        let mut next = 0u32;
        for (pos, &keep) in flags.iter().enumerate() {
            if keep {
                remap[pos] = next;
                next += 1;
            }
        }
        if next as usize != set.items.len() {
            touched[si] = true;
            let mut pos = 0;
            set.items.retain(|_| {
                pos += 1;
                flags[pos - 1]
            });
            let mut pos = 0;
            set.deps.retain(|_| {
                pos += 1;
                flags[pos - 1]
            });
        }
        remaps.push((set.index, remap));
    }

    let relocate = |r: &mut ItemRef| -> bool {
        if r.set == last.index {
            return true;
        }
        match remaps.binary_search_by_key(&r.set, |(i, _)| *i) {
            Ok(i) => {
                let new = remaps[i].1[r.pos as usize];
                r.pos = new;
                new != u32::MAX
            }
            Err(_) => false,
        }
    };
    let any_touched = touched.iter().any(|&t| t);
    if any_touched {
        for (si, set) in history.iter_mut().enumerate() {
            for deps in set.deps.iter_mut() {
                deps.retain(|d| relocate(&mut d.source));
            }
            if touched[si] {
                set.rebuild_waiting(g);
            }
        }
        let last_index = last.index;
        for deps in last.deps.iter_mut() {
            deps.retain(|d| d.source.set == last_index || relocate(&mut d.source));
        }
    }
    history.retain(|s| !s.items.is_empty());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earley::{Engine, EngineConfig};
    use crate::grammar::{parse_grammar, prepare};
    use alloc::string::{String, ToString};
    use alloc::sync::Arc;

    fn engine(text: &str, prune: bool) -> Engine {
        let g = prepare(&parse_grammar(text).unwrap()).unwrap();
        Engine::new(Arc::new(g), EngineConfig { prune }).unwrap()
    }

    fn all_items(e: &Engine) -> Vec<String> {
        e.sets()
            .iter()
            .flat_map(|s| s.items().iter().map(move |it| it.display(e.grammar(), s.index()).to_string()))
            .collect()
    }

    #[test]
    fn fresh_engine_is_all_active() {
        let e = engine(r#"start ::= A B; A ::= "a"; B ::= "b";"#, true);
        assert_eq!(e.active_set().historical_len(), 0);
        assert_eq!(e.live_item_count(), 2);
    }

    #[test]
    fn completed_child_is_dropped() {
        let mut e = engine(r#"start ::= start B | B; B ::= "a";"#, true);
        assert!(e.accept_byte(b'a'));
        assert!(e.accept_byte(b'a'));
        let items = all_items(&e);
        assert!(!items.iter().any(|s| s == "(B ::= \"a\" •, 0, 1)"));
        assert!(!items.iter().any(|s| s == "(start ::= B •, 0, 1)"));
    }

    #[test]
    fn straight_line_keeps_single_spine() {
        let mut e = engine(r#"start ::= "a" "b" "c";"#, true);
        for &b in b"abc" {
            assert!(e.accept_byte(b));
            assert!(e.sets().iter().all(|s| s.len() <= 2));
        }
        assert_eq!(
            all_items(&e),
            [
                "(start ::= • \"a\" \"b\" \"c\", 0, 0)",
                "(start ::= \"a\" • \"b\" \"c\", 0, 1)",
                "(start ::= \"a\" \"b\" • \"c\", 0, 2)",
                "(start ::= \"a\" \"b\" \"c\" •, 0, 3)",
            ]
        );
    }

    #[test]
    fn disabled_pruning_is_identity() {
        let mut on = engine(r#"start ::= start B | B; B ::= "a";"#, true);
        let mut off = engine(r#"start ::= start B | B; B ::= "a";"#, false);
        for _ in 0..4 {
            on.accept_byte(b'a');
            off.accept_byte(b'a');
        }
        assert_eq!(off.sets().len(), 5);
        assert!(on.live_item_count() < off.live_item_count());
    }

    #[test]
    fn no_dangling_edges() {
        let mut e = engine(r#"start ::= "[" els "]"; els ::= #"[0-9]+" | els "," #"[0-9]+";"#, true);
        for &b in b"[12,3,45,6" {
            assert!(e.accept_byte(b));
            for (src, dst, _) in e.edges() {
                assert!(e.item(src).is_some(), "dangling source {:?}", src);
                assert!(e.item(dst).is_some());
            }
        }
    }
}
