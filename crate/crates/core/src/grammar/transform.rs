//! Language-preserving grammar rewrites.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;

use super::{Grammar, GrammarError, Production, ProductionId, Symbol};

/// Drops every production that mentions an unproductive symbol or whose lhs
/// is unreachable from the start symbol, then renumbers ids densely.
pub fn remove_useless_rules(g: &Grammar) -> Result<Grammar, GrammarError> {
    let n = g.nonterminal_count();
    let mut productive = vec![false; n];
    let sym_productive = |s: &Symbol, productive: &[bool]| match *s {
        // Terminal automata are trimmed at compile time, so never empty.
        Symbol::Terminal(_) => true,
        Symbol::Nonterminal(x) => productive[x as usize],
    };
    let mut changed = true;
    while changed {
        changed = false;
        for p in g.productions() {
            if !productive[p.lhs as usize] && p.rhs.iter().all(|s| sym_productive(s, &productive)) {
                productive[p.lhs as usize] = true;
                changed = true;
            }
        }
    }
    if !productive[g.start() as usize] {
        return Err(GrammarError::EmptyLanguage);
    }
    let kept: Vec<&Production> = g
        .productions()
        .iter()
        .filter(|p| {
            productive[p.lhs as usize] && p.rhs.iter().all(|s| sym_productive(s, &productive))
        })
        .collect();

    let mut reachable = vec![false; n];
    reachable[g.start() as usize] = true;
    let mut stack = vec![g.start()];
    while let Some(a) = stack.pop() {
        for p in kept.iter().filter(|p| p.lhs == a) {
            for s in &p.rhs {
                if let Symbol::Nonterminal(b) = *s {
                    if !reachable[b as usize] {
                        reachable[b as usize] = true;
                        stack.push(b);
                    }
                }
            }
        }
    }
    let kept: Vec<&Production> = kept
        .into_iter()
        .filter(|p| reachable[p.lhs as usize])
        .collect();
    Ok(renumber(g, kept.into_iter().cloned().collect(), g.start()))
}

/// Rebuilds `g` around `productions`, keeping only used symbols and
/// preserving their relative order.
fn renumber(g: &Grammar, productions: Vec<Production>, start: u32) -> Grammar {
    let mut nt_used = vec![false; g.nonterminal_count()];
    let mut t_used = vec![false; g.terminals().len()];
    nt_used[start as usize] = true;
    for p in &productions {
        nt_used[p.lhs as usize] = true;
        for s in &p.rhs {
            match *s {
                Symbol::Terminal(t) => t_used[t as usize] = true,
                Symbol::Nonterminal(x) => nt_used[x as usize] = true,
            }
        }
    }
    let nt_map = dense_map(&nt_used);
    let t_map = dense_map(&t_used);
    let names = (0..g.nonterminal_count())
        .filter(|&i| nt_used[i])
        .map(|i| String::from(g.nonterminal_name(i as u32)))
        .collect();
    let terminals = (0..g.terminals().len())
        .filter(|&i| t_used[i])
        .map(|i| g.terminals()[i].clone())
        .collect();
    let productions = productions
        .into_iter()
        .map(|p| Production {
            lhs: nt_map[p.lhs as usize],
            rhs: p
                .rhs
                .iter()
                .map(|s| match *s {
                    Symbol::Terminal(t) => Symbol::Terminal(t_map[t as usize]),
                    Symbol::Nonterminal(x) => Symbol::Nonterminal(nt_map[x as usize]),
                })
                .collect(),
        })
        .collect();
    Grammar::new(names, terminals, productions, nt_map[start as usize])
}

fn dense_map(used: &[bool]) -> Vec<u32> {
    let mut next = 0;
    used.iter()
        .map(|&u| {
            if u {
                next += 1;
                next - 1
            } else {
                u32::MAX
            }
        })
        .collect()
}

/// Nullable flags for nonterminals and terminals (a terminal is nullable
/// when its automaton accepts the empty string).
pub fn nullable_symbols(g: &Grammar) -> (Vec<bool>, Vec<bool>) {
    let term: Vec<bool> = g
        .terminals()
        .iter()
        .map(|t| t.automaton.accepts_empty())
        .collect();
    let mut nt = vec![false; g.nonterminal_count()];
    let mut changed = true;
    while changed {
        changed = false;
        for p in g.productions() {
            if nt[p.lhs as usize] {
                continue;
            }
            let all = p.rhs.iter().all(|s| match *s {
                Symbol::Terminal(t) => term[t as usize],
                Symbol::Nonterminal(x) => nt[x as usize],
            });
            if all {
                nt[p.lhs as usize] = true;
                changed = true;
            }
        }
    }
    (nt, term)
}

/// Expands every nullable occurrence into present/absent alternatives and
/// drops ε-rules. A start ε-rule is kept exactly when the language contains
/// the empty string; if the start symbol also occurs on some rhs, a fresh
/// start symbol takes over so that no rhs symbol is nullable.
pub fn eliminate_nullables(g: &Grammar) -> Grammar {
    let (nt_null, t_null) = nullable_symbols(g);
    let nullable = |s: &Symbol| match *s {
        Symbol::Terminal(t) => t_null[t as usize],
        Symbol::Nonterminal(x) => nt_null[x as usize],
    };

    let mut seen: HashSet<Production> = HashSet::new();
    let mut out: Vec<Production> = Vec::new();
    for p in g.productions() {
        let mut variants: Vec<Vec<Symbol>> = vec![Vec::new()];
        for s in &p.rhs {
            if nullable(s) {
                let mut next = Vec::with_capacity(variants.len() * 2);
                for v in &variants {
                    let mut with = v.clone();
                    with.push(*s);
                    next.push(with);
                }
                next.extend(variants.iter().cloned());
                variants = next;
            } else {
                for v in &mut variants {
                    v.push(*s);
                }
            }
        }
        // Present-first order: the unmodified rhs leads.
        variants.sort_by_key(|v| core::cmp::Reverse(v.len()));
        for rhs in variants {
            if rhs.is_empty() || rhs == [Symbol::Nonterminal(p.lhs)] {
                continue;
            }
            let prod = Production { lhs: p.lhs, rhs };
            if seen.insert(prod.clone()) {
                out.push(prod);
            }
        }
    }

    let start = g.start();
    if !nt_null[start as usize] {
        return Grammar::new(names_of(g), g.terminals().to_vec(), out, start);
    }
    let start_on_rhs = out
        .iter()
        .any(|p| p.rhs.contains(&Symbol::Nonterminal(start)));
    let mut names = names_of(g);
    if start_on_rhs {
        let mut fresh = format!("{}'", g.nonterminal_name(start));
        while names.contains(&fresh) {
            fresh.push('\'');
        }
        let new_start = names.len() as u32;
        names.push(fresh);
        out.push(Production {
            lhs: new_start,
            rhs: vec![Symbol::Nonterminal(start)],
        });
        out.push(Production {
            lhs: new_start,
            rhs: Vec::new(),
        });
        Grammar::new(names, g.terminals().to_vec(), out, new_start)
    } else {
        out.push(Production {
            lhs: start,
            rhs: Vec::new(),
        });
        Grammar::new(names, g.terminals().to_vec(), out, start)
    }
}

fn names_of(g: &Grammar) -> Vec<String> {
    (0..g.nonterminal_count())
        .map(|i| String::from(g.nonterminal_name(i as u32)))
        .collect()
}

/// The full pipeline run before parsing: useless-rule removal, nullable
/// elimination, and a second removal pass for rules orphaned by the second.
pub fn prepare(g: &Grammar) -> Result<Grammar, GrammarError> {
    let g = remove_useless_rules(g)?;
    let g = eliminate_nullables(&g);
    remove_useless_rules(&g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrrForm {
    /// `A ::= c`
    Terminal,
    /// `A ::= B a` with `B` defined by a single production.
    NonterminalTerminal,
    /// `A ::= ε`
    Empty,
}

impl HrrForm {
    pub fn tag(self) -> &'static str {
        match self {
            HrrForm::Terminal => "A->c",
            HrrForm::NonterminalTerminal => "A->Ba",
            HrrForm::Empty => "A->eps",
        }
    }
}

/// Productions whose completed sub-parses can be dropped. Diagnostic only.
pub fn detect_hrr_rules(g: &Grammar) -> Vec<(ProductionId, HrrForm)> {
    g.productions()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let form = match p.rhs.as_slice() {
                [] => HrrForm::Empty,
                [Symbol::Terminal(_)] => HrrForm::Terminal,
                [Symbol::Nonterminal(b), Symbol::Terminal(_)]
                    if g.productions_of(*b).len() == 1 =>
                {
                    HrrForm::NonterminalTerminal
                }
                _ => return None,
            };
            Some((i as ProductionId, form))
        })
        .collect()
}
