//! Context-free grammars over byte-level terminal automata.

mod parse;
mod transform;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::automaton::{PatternError, TerminalAutomaton};

pub use parse::{parse_grammar, parse_grammar_with_start};
pub use transform::{
    detect_hrr_rules, eliminate_nullables, nullable_symbols, prepare, remove_useless_rules,
    HrrForm,
};

pub type NonterminalId = u32;
pub type TerminalId = u32;
pub type ProductionId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Terminal(TerminalId),
    Nonterminal(NonterminalId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Production {
    pub lhs: NonterminalId,
    pub rhs: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerminalSource {
    /// `"..."` in grammar text, already unescaped.
    Literal(Vec<u8>),
    /// `#"..."` in grammar text, verbatim.
    Pattern(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terminal {
    pub source: TerminalSource,
    pub automaton: TerminalAutomaton,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: undefined nonterminal `{name}`")]
    UndefinedNonterminal {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("grammar defines no rules")]
    EmptyGrammar,
    #[error("start symbol `{0}` is not defined")]
    UnknownStart(String),
    #[error("{line}:{column}: invalid regex `{pattern}`: {source}")]
    InvalidRegex {
        pattern: String,
        line: usize,
        column: usize,
        source: PatternError,
    },
    #[error("grammar denotes the empty language")]
    EmptyLanguage,
}

/// An immutable rule set. Nonterminal and terminal ids are dense and stable
/// in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    nonterminals: Vec<String>,
    terminals: Vec<Terminal>,
    productions: Vec<Production>,
    start: NonterminalId,
    by_lhs: Vec<Vec<ProductionId>>,
}

impl Grammar {
    /// Assembles a grammar. Panics if any symbol id is out of range.
    pub fn new(
        nonterminals: Vec<String>,
        terminals: Vec<Terminal>,
        productions: Vec<Production>,
        start: NonterminalId,
    ) -> Self {
        assert!((start as usize) < nonterminals.len(), "start out of range");
        let mut by_lhs = alloc::vec![Vec::new(); nonterminals.len()];
        for (i, p) in productions.iter().enumerate() {
            assert!((p.lhs as usize) < nonterminals.len(), "lhs out of range");
            for s in &p.rhs {
                match *s {
                    Symbol::Terminal(t) => assert!((t as usize) < terminals.len()),
                    Symbol::Nonterminal(n) => assert!((n as usize) < nonterminals.len()),
                }
            }
            by_lhs[p.lhs as usize].push(i as ProductionId);
        }
        Grammar {
            nonterminals,
            terminals,
            productions,
            start,
            by_lhs,
        }
    }

    pub fn start(&self) -> NonterminalId {
        self.start
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, id: ProductionId) -> &Production {
        &self.productions[id as usize]
    }

    pub fn productions_of(&self, lhs: NonterminalId) -> &[ProductionId] {
        &self.by_lhs[lhs as usize]
    }

    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub fn terminal(&self, id: TerminalId) -> &Terminal {
        &self.terminals[id as usize]
    }

    pub fn nonterminal_count(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn nonterminal_name(&self, id: NonterminalId) -> &str {
        &self.nonterminals[id as usize]
    }

    pub fn nonterminal_by_name(&self, name: &str) -> Option<NonterminalId> {
        self.nonterminals
            .iter()
            .position(|n| n == name)
            .map(|i| i as NonterminalId)
    }

    /// True when some production other than a start ε-rule has an empty rhs.
    pub fn has_inner_epsilon(&self) -> bool {
        self.productions
            .iter()
            .any(|p| p.rhs.is_empty() && (p.lhs != self.start || self.start_on_rhs()))
    }

    pub(crate) fn start_on_rhs(&self) -> bool {
        self.productions
            .iter()
            .any(|p| p.rhs.contains(&Symbol::Nonterminal(self.start)))
    }

    /// True when some rhs uses a terminal whose automaton accepts the empty
    /// string. The engine only ever scans such terminals over non-empty input.
    pub fn has_nullable_terminal_use(&self) -> bool {
        self.productions.iter().any(|p| {
            p.rhs.iter().any(|s| match *s {
                Symbol::Terminal(t) => self.terminals[t as usize].automaton.accepts_empty(),
                Symbol::Nonterminal(_) => false,
            })
        })
    }

    pub fn display_symbol(&self, s: Symbol) -> SymbolDisplay<'_> {
        SymbolDisplay { grammar: self, symbol: s }
    }

    pub fn display_production(&self, id: ProductionId) -> ProductionDisplay<'_> {
        ProductionDisplay {
            grammar: self,
            production: id,
            dot: None,
        }
    }

    pub fn display_dotted(&self, id: ProductionId, dot: usize) -> ProductionDisplay<'_> {
        ProductionDisplay {
            grammar: self,
            production: id,
            dot: Some(dot),
        }
    }
}

pub struct SymbolDisplay<'a> {
    grammar: &'a Grammar,
    symbol: Symbol,
}

impl fmt::Display for SymbolDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.symbol {
            Symbol::Nonterminal(n) => f.write_str(self.grammar.nonterminal_name(n)),
            Symbol::Terminal(t) => match &self.grammar.terminal(t).source {
                TerminalSource::Literal(bytes) => {
                    f.write_str("\"")?;
                    for &b in bytes {
                        match b {
                            b'"' => f.write_str("\\\"")?,
                            b'\\' => f.write_str("\\\\")?,
                            b'\n' => f.write_str("\\n")?,
                            b'\t' => f.write_str("\\t")?,
                            0x20..=0x7e => write!(f, "{}", b as char)?,
                            _ => write!(f, "\\x{:02x}", b)?,
                        }
                    }
                    f.write_str("\"")
                }
                TerminalSource::Pattern(p) => write!(f, "#\"{}\"", p),
            },
        }
    }
}

pub struct ProductionDisplay<'a> {
    grammar: &'a Grammar,
    production: ProductionId,
    dot: Option<usize>,
}

impl fmt::Display for ProductionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.grammar.production(self.production);
        write!(f, "{} ::=", self.grammar.nonterminal_name(p.lhs))?;
        for (i, s) in p.rhs.iter().enumerate() {
            if self.dot == Some(i) {
                f.write_str(" •")?;
            }
            write!(f, " {}", self.grammar.display_symbol(*s))?;
        }
        if self.dot == Some(p.rhs.len()) {
            f.write_str(" •")?;
        }
        if p.rhs.is_empty() && self.dot.is_none() {
            f.write_str(" \"\"")?;
        }
        Ok(())
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.productions.len() {
            writeln!(f, "{} ;", self.display_production(i as ProductionId))?;
        }
        Ok(())
    }
}
