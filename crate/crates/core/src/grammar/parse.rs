//! Text format:
//!
//! ```text
//! // comment
//! start ::= item "+" item ;
//! item  ::= "a" | #"[0-9]+" | ;
//! ```
//!
//! `"..."` is a literal byte string (escapes `\" \\ \n \t \r \xHH`), `#"..."`
//! is a regex passed verbatim to the pattern compiler, and an empty
//! alternative or `""` denotes ε.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{Grammar, GrammarError, Production, Symbol, Terminal, TerminalSource};
use crate::automaton::{compile_pattern, TerminalAutomaton};

pub const DEFAULT_START: &str = "start";

pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    parse_grammar_with_start(text, DEFAULT_START)
}

pub fn parse_grammar_with_start(text: &str, start: &str) -> Result<Grammar, GrammarError> {
    let rules = Lexer::new(text).rules()?;
    if rules.is_empty() {
        return Err(GrammarError::EmptyGrammar);
    }

    let mut nt_ids: HashMap<&str, u32> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    for rule in &rules {
        if !nt_ids.contains_key(rule.name) {
            nt_ids.insert(rule.name, names.len() as u32);
            names.push(rule.name.to_owned());
        }
    }
    let start_id = *nt_ids
        .get(start)
        .ok_or_else(|| GrammarError::UnknownStart(start.to_owned()))?;

    let mut term_ids: HashMap<TerminalSource, u32> = HashMap::new();
    let mut terminals: Vec<Terminal> = Vec::new();
    let mut productions = Vec::new();
    for rule in rules {
        let lhs = nt_ids[rule.name];
        for alt in rule.alternatives {
            let mut rhs = Vec::with_capacity(alt.len());
            for item in alt {
                match item.kind {
                    ItemKind::Name(name) => {
                        let id = nt_ids.get(name).ok_or_else(|| {
                            GrammarError::UndefinedNonterminal {
                                name: name.to_owned(),
                                line: item.line,
                                column: item.column,
                            }
                        })?;
                        rhs.push(Symbol::Nonterminal(*id));
                    }
                    ItemKind::Literal(bytes) if bytes.is_empty() => {}
                    ItemKind::Literal(bytes) => {
                        let source = TerminalSource::Literal(bytes);
                        let id = match term_ids.get(&source) {
                            Some(&id) => id,
                            None => {
                                let automaton = match &source {
                                    TerminalSource::Literal(b) => TerminalAutomaton::literal(b),
                                    TerminalSource::Pattern(_) => unreachable!(),
                                };
                                push_terminal(&mut terminals, &mut term_ids, source, automaton)
                            }
                        };
                        rhs.push(Symbol::Terminal(id));
                    }
                    ItemKind::Pattern(pattern) => {
                        let source = TerminalSource::Pattern(pattern.to_owned());
                        let id = match term_ids.get(&source) {
                            Some(&id) => id,
                            None => {
                                let automaton = compile_pattern(pattern).map_err(|e| {
                                    GrammarError::InvalidRegex {
                                        pattern: pattern.to_owned(),
                                        line: item.line,
                                        column: item.column,
                                        source: e,
                                    }
                                })?;
                                push_terminal(&mut terminals, &mut term_ids, source, automaton)
                            }
                        };
                        rhs.push(Symbol::Terminal(id));
                    }
                }
            }
            productions.push(Production { lhs, rhs });
        }
    }
    Ok(Grammar::new(names, terminals, productions, start_id))
}

fn push_terminal(
    terminals: &mut Vec<Terminal>,
    ids: &mut HashMap<TerminalSource, u32>,
    source: TerminalSource,
    automaton: TerminalAutomaton,
) -> u32 {
    let id = terminals.len() as u32;
    ids.insert(source.clone(), id);
    terminals.push(Terminal { source, automaton });
    id
}

struct Rule<'a> {
    name: &'a str,
    alternatives: Vec<Vec<Item<'a>>>,
}

struct Item<'a> {
    kind: ItemKind<'a>,
    line: usize,
    column: usize,
}

enum ItemKind<'a> {
    Name(&'a str),
    Literal(Vec<u8>),
    Pattern(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn err(&self, message: impl ToString) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            column: self.column,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.src[self.pos..].starts_with("//") => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        {
            self.bump();
        }
        Some(&self.src[start..self.pos])
    }

    fn rules(mut self) -> Result<Vec<Rule<'a>>, GrammarError> {
        let mut rules = Vec::new();
        loop {
            self.skip_trivia();
            if self.peek().is_none() {
                return Ok(rules);
            }
            let name = self.ident().ok_or_else(|| self.err("expected rule name"))?;
            self.skip_trivia();
            if !self.src[self.pos..].starts_with("::=") {
                return Err(self.err("expected `::=`"));
            }
            for _ in 0..3 {
                self.bump();
            }
            let mut alternatives = alloc::vec![Vec::new()];
            loop {
                self.skip_trivia();
                let (line, column) = (self.line, self.column);
                match self.peek() {
                    None => return Err(self.err("unterminated rule, expected `;`")),
                    Some(';') => {
                        self.bump();
                        break;
                    }
                    Some('|') => {
                        self.bump();
                        alternatives.push(Vec::new());
                    }
                    Some('"') => {
                        let bytes = self.literal()?;
                        alternatives.last_mut().unwrap().push(Item {
                            kind: ItemKind::Literal(bytes),
                            line,
                            column,
                        });
                    }
                    Some('#') => {
                        self.bump();
                        if self.peek() != Some('"') {
                            return Err(self.err("expected `\"` after `#`"));
                        }
                        let pattern = self.raw_string()?;
                        alternatives.last_mut().unwrap().push(Item {
                            kind: ItemKind::Pattern(pattern),
                            line,
                            column,
                        });
                    }
                    Some(_) => {
                        let name = self.ident().ok_or_else(|| {
                            self.err(alloc::format!("unexpected character {:?}", self.peek().unwrap()))
                        })?;
                        alternatives.last_mut().unwrap().push(Item {
                            kind: ItemKind::Name(name),
                            line,
                            column,
                        });
                    }
                }
            }
            rules.push(Rule { name, alternatives });
        }
    }

    fn literal(&mut self) -> Result<Vec<u8>, GrammarError> {
        self.bump();
        let mut out = Vec::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string literal")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push(b'"'),
                    Some('\\') => out.push(b'\\'),
                    Some('n') => out.push(b'\n'),
                    Some('t') => out.push(b'\t'),
                    Some('r') => out.push(b'\r'),
                    Some('x') => {
                        let hi = self.bump().and_then(|c| c.to_digit(16));
                        let lo = self.bump().and_then(|c| c.to_digit(16));
                        match (hi, lo) {
                            (Some(h), Some(l)) => out.push((h * 16 + l) as u8),
                            _ => return Err(self.err("`\\x` needs two hex digits")),
                        }
                    }
                    Some(c) => return Err(self.err(alloc::format!("unknown escape `\\{}`", c))),
                    None => return Err(self.err("unterminated string literal")),
                },
                Some(c) => {
                    let mut buf = [0u8; 4];
                    out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                }
            }
        }
    }

    /// Regex body between quotes; `\"` does not terminate it.
    fn raw_string(&mut self) -> Result<&'a str, GrammarError> {
        self.bump();
        let start = self.pos;
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated regex literal")),
                Some('\\') => {
                    if self.bump().is_none() {
                        return Err(self.err("unterminated regex literal"));
                    }
                }
                Some('"') => return Ok(&self.src[start..self.pos - 1]),
                Some(_) => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_grammar() {
        let g = parse_grammar(r#"start ::= A "+" B; A ::= "a" | "c"; B ::= "b" | "d";"#).unwrap();
        assert_eq!(g.nonterminal_count(), 3);
        assert_eq!(g.terminals().len(), 5);
        assert_eq!(g.productions().len(), 5);
        assert_eq!(g.nonterminal_name(g.start()), "start");
    }

    #[test]
    fn minimal() {
        let g = parse_grammar(r#"start ::= "a";"#).unwrap();
        assert_eq!(g.productions().len(), 1);
        assert_eq!(g.terminals().len(), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_grammar("  // nothing\n"), Err(GrammarError::EmptyGrammar));
        assert!(matches!(
            parse_grammar("start ::= foo;"),
            Err(GrammarError::UndefinedNonterminal { ref name, line: 1, column: 11 }) if name == "foo"
        ));
        assert!(matches!(
            parse_grammar("start ::= \"a\""),
            Err(GrammarError::Syntax { .. })
        ));
        assert!(matches!(
            parse_grammar("start = \"a\";"),
            Err(GrammarError::Syntax { line: 1, column: 7, .. })
        ));
        assert!(matches!(
            parse_grammar("start ::= #\"(a\";"),
            Err(GrammarError::InvalidRegex { .. })
        ));
        assert!(matches!(
            parse_grammar_with_start("a ::= \"x\";", "b"),
            Err(GrammarError::UnknownStart(_))
        ));
    }

    #[test]
    fn escapes_and_comments() {
        let g = parse_grammar("// head\nstart ::= \"\\\"\\\\\\n\\t\\x7b\" ; // tail").unwrap();
        assert_eq!(
            g.terminal(0).source,
            TerminalSource::Literal(b"\"\\\n\t{".to_vec())
        );
    }

    #[test]
    fn regex_body_keeps_escaped_quote() {
        let g = parse_grammar(r#"start ::= #"\"[a-z]*\"";"#).unwrap();
        assert!(g.terminal(0).automaton.matches(b"\"abc\""));
    }

    #[test]
    fn empty_alternative_is_epsilon() {
        let g = parse_grammar(r#"start ::= "a" | ; x ::= "";"#).unwrap();
        assert!(g.productions()[1].rhs.is_empty());
        assert!(g.productions()[2].rhs.is_empty());
    }

    #[test]
    fn stable_ids() {
        let text = r#"start ::= b a; a ::= "x"; b ::= "y" | a;"#;
        assert_eq!(parse_grammar(text).unwrap(), parse_grammar(text).unwrap());
        let g = parse_grammar(text).unwrap();
        assert_eq!(g.nonterminal_by_name("a"), Some(1));
        assert_eq!(g.nonterminal_by_name("b"), Some(2));
    }
}
