//! Byte-level deterministic automata for grammar terminals.
//!
//! Patterns are parsed into a small syntax tree, lowered to a Thompson NFA,
//! determinized by subset construction, trimmed of states that cannot reach
//! an accepting state, and minimized. Every transition that would lead to a
//! trimmed state points at [`DEAD`] instead.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Sentinel successor for bytes that kill the match.
pub const DEAD: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("unsupported construct at offset {offset}: {what}")]
    Unsupported { offset: usize, what: String },
    #[error("malformed pattern at offset {offset}: {what}")]
    Syntax { offset: usize, what: String },
    #[error("pattern matches no string")]
    EmptyLanguage,
}

/// A total DFA over bytes. State ids are dense; `start` is always 0.
#[derive(Clone, PartialEq, Eq)]
pub struct TerminalAutomaton {
    table: Vec<u32>,
    accepting: Vec<bool>,
    has_exits: Vec<bool>,
}

impl core::fmt::Debug for TerminalAutomaton {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TerminalAutomaton")
            .field("states", &self.state_count())
            .field("accepting", &self.accepting)
            .finish()
    }
}

impl TerminalAutomaton {
    /// Automaton accepting exactly `bytes`. `bytes` must be non-empty.
    pub fn literal(bytes: &[u8]) -> Self {
        let n = bytes.len() + 1;
        let mut table = vec![DEAD; n * 256];
        for (i, &b) in bytes.iter().enumerate() {
            table[i * 256 + b as usize] = (i + 1) as u32;
        }
        let mut accepting = vec![false; n];
        accepting[n - 1] = true;
        Self::from_parts(table, accepting)
    }

    fn from_parts(table: Vec<u32>, accepting: Vec<bool>) -> Self {
        let has_exits = (0..accepting.len())
            .map(|s| table[s * 256..(s + 1) * 256].iter().any(|&t| t != DEAD))
            .collect();
        TerminalAutomaton {
            table,
            accepting,
            has_exits,
        }
    }

    #[inline]
    pub fn start(&self) -> u32 {
        0
    }

    #[inline]
    pub fn next(&self, state: u32, byte: u8) -> u32 {
        self.table[state as usize * 256 + byte as usize]
    }

    #[inline]
    pub fn is_accepting(&self, state: u32) -> bool {
        self.accepting[state as usize]
    }

    /// True when some byte leads to a live state.
    #[inline]
    pub fn has_exits(&self, state: u32) -> bool {
        self.has_exits[state as usize]
    }

    pub fn state_count(&self) -> usize {
        self.accepting.len()
    }

    pub fn accepts_empty(&self) -> bool {
        self.accepting[0]
    }

    /// Runs the automaton over `input` from the start state.
    pub fn matches(&self, input: &[u8]) -> bool {
        let mut s = self.start();
        for &b in input {
            s = self.next(s, b);
            if s == DEAD {
                return false;
            }
        }
        self.is_accepting(s)
    }

    /// Bytes with at least one live transition from any state.
    pub fn alphabet(&self) -> Vec<u8> {
        (0..=255u8)
            .filter(|&b| (0..self.state_count()).any(|s| self.table[s * 256 + b as usize] != DEAD))
            .collect()
    }
}

/// Compiles a pattern in the supported regex subset.
pub fn compile_pattern(pattern: &str) -> Result<TerminalAutomaton, PatternError> {
    let ast = Parser::new(pattern).parse()?;
    let mut nfa = Nfa::default();
    let frag = nfa.build(&ast);
    let accept = nfa.add_state();
    nfa.eps[frag.end as usize].push(accept);
    let dfa = determinize(&nfa, frag.start, accept);
    let dfa = trim(dfa)?;
    Ok(minimize(dfa))
}

// ---------------------------------------------------------------------------
// Syntax

type ByteSet = [u64; 4];

fn set_insert(set: &mut ByteSet, b: u8) {
    set[(b >> 6) as usize] |= 1 << (b & 63);
}

fn set_contains(set: &ByteSet, b: u8) -> bool {
    set[(b >> 6) as usize] & (1 << (b & 63)) != 0
}

fn set_range(set: &mut ByteSet, lo: u8, hi: u8) {
    for b in lo..=hi {
        set_insert(set, b);
    }
}

fn set_negate(set: &mut ByteSet) {
    for w in set.iter_mut() {
        *w = !*w;
    }
}

#[derive(Debug, Clone)]
enum Ast {
    Empty,
    Class(ByteSet),
    Concat(Vec<Ast>),
    Alt(Vec<Ast>),
    Repeat {
        inner: Box<Ast>,
        min: u32,
        max: Option<u32>,
    },
}

const MAX_COUNTED_REPEAT: u32 = 1000;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn err(&self, what: &str) -> PatternError {
        PatternError::Syntax {
            offset: self.pos,
            what: what.to_string(),
        }
    }

    fn unsupported(&self, what: &str) -> PatternError {
        PatternError::Unsupported {
            offset: self.pos,
            what: what.to_string(),
        }
    }

    fn parse(mut self) -> Result<Ast, PatternError> {
        let ast = self.alternation()?;
        if self.pos != self.src.len() {
            return Err(self.err("unbalanced ')'"));
        }
        Ok(ast)
    }

    fn alternation(&mut self) -> Result<Ast, PatternError> {
        let mut alts = vec![self.concat()?];
        while self.peek() == Some('|') {
            self.bump();
            alts.push(self.concat()?);
        }
        Ok(if alts.len() == 1 {
            alts.pop().unwrap()
        } else {
            Ast::Alt(alts)
        })
    }

    fn concat(&mut self) -> Result<Ast, PatternError> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            let atom = self.atom()?;
            items.push(self.postfix(atom)?);
        }
        Ok(match items.len() {
            0 => Ast::Empty,
            1 => items.pop().unwrap(),
            _ => Ast::Concat(items),
        })
    }

    fn postfix(&mut self, mut atom: Ast) -> Result<Ast, PatternError> {
        loop {
            let (min, max) = match self.peek() {
                Some('*') => {
                    self.bump();
                    (0, None)
                }
                Some('+') => {
                    self.bump();
                    (1, None)
                }
                Some('?') => {
                    self.bump();
                    (0, Some(1))
                }
                Some('{') => self.counted()?,
                _ => return Ok(atom),
            };
            if self.peek() == Some('?') {
                return Err(self.unsupported("lazy quantifier"));
            }
            atom = Ast::Repeat {
                inner: Box::new(atom),
                min,
                max,
            };
        }
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some('0'..='9')) {
            self.bump();
        }
        self.src[start..self.pos].parse().ok()
    }

    fn counted(&mut self) -> Result<(u32, Option<u32>), PatternError> {
        self.bump();
        let min = self.number().ok_or_else(|| self.err("expected repetition count"))?;
        let max = if self.peek() == Some(',') {
            self.bump();
            if self.peek() == Some('}') {
                None
            } else {
                Some(self.number().ok_or_else(|| self.err("expected repetition bound"))?)
            }
        } else {
            Some(min)
        };
        if self.bump() != Some('}') {
            return Err(self.err("expected '}'"));
        }
        if max.is_some_and(|m| m < min) {
            return Err(self.err("repetition bounds out of order"));
        }
        if max.unwrap_or(min) > MAX_COUNTED_REPEAT {
            return Err(self.unsupported("repetition count too large"));
        }
        Ok((min, max))
    }

    fn atom(&mut self) -> Result<Ast, PatternError> {
        let c = self.bump().ok_or_else(|| self.err("unexpected end"))?;
        match c {
            '(' => {
                if self.peek() == Some('?') {
                    // Only non-capturing groups; lookaround is not regular.
                    self.bump();
                    if self.bump() != Some(':') {
                        return Err(self.unsupported("group flags or lookaround"));
                    }
                }
                let inner = self.alternation()?;
                if self.bump() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            '[' => self.class(),
            '.' => {
                let mut set = [0u64; 4];
                set_negate(&mut set);
                set[0] &= !(1 << b'\n');
                Ok(Ast::Class(set))
            }
            '\\' => self.escape(false).map(|set| match set {
                Escaped::Byte(b) => byte_ast(b),
                Escaped::Set(s) => Ast::Class(s),
            }),
            '*' | '+' | '?' => Err(self.err("quantifier without operand")),
            '^' | '$' => Err(self.unsupported("anchors")),
            c => Ok(char_ast(c)),
        }
    }

    fn escape(&mut self, in_class: bool) -> Result<Escaped, PatternError> {
        let c = self.bump().ok_or_else(|| self.err("dangling escape"))?;
        let mut set = [0u64; 4];
        Ok(match c {
            'n' => Escaped::Byte(b'\n'),
            't' => Escaped::Byte(b'\t'),
            'r' => Escaped::Byte(b'\r'),
            'f' => Escaped::Byte(0x0c),
            'v' => Escaped::Byte(0x0b),
            '0' => Escaped::Byte(0),
            'x' => {
                let hi = self.bump().and_then(|c| c.to_digit(16));
                let lo = self.bump().and_then(|c| c.to_digit(16));
                match (hi, lo) {
                    (Some(h), Some(l)) => Escaped::Byte((h * 16 + l) as u8),
                    _ => return Err(self.err("\\x needs two hex digits")),
                }
            }
            'd' | 'D' => {
                set_range(&mut set, b'0', b'9');
                if c == 'D' {
                    set_negate(&mut set);
                }
                Escaped::Set(set)
            }
            'w' | 'W' => {
                set_range(&mut set, b'a', b'z');
                set_range(&mut set, b'A', b'Z');
                set_range(&mut set, b'0', b'9');
                set_insert(&mut set, b'_');
                if c == 'W' {
                    set_negate(&mut set);
                }
                Escaped::Set(set)
            }
            's' | 'S' => {
                for b in [b' ', b'\t', b'\n', b'\r', 0x0b, 0x0c] {
                    set_insert(&mut set, b);
                }
                if c == 'S' {
                    set_negate(&mut set);
                }
                Escaped::Set(set)
            }
            '1'..='9' => return Err(self.unsupported("backreference")),
            'b' if !in_class => return Err(self.unsupported("word boundary")),
            'B' | 'A' | 'z' | 'Z' => return Err(self.unsupported("assertion")),
            'p' | 'P' => return Err(self.unsupported("unicode class")),
            c if c.is_ascii_punctuation() || c == ' ' => Escaped::Byte(c as u8),
            _ => return Err(self.unsupported("unknown escape")),
        })
    }

    fn class_byte(&mut self) -> Result<Escaped, PatternError> {
        match self.bump() {
            None => Err(self.err("unterminated class")),
            Some('\\') => self.escape(true),
            Some(c) if c.is_ascii() => Ok(Escaped::Byte(c as u8)),
            Some(_) => Err(self.unsupported("non-ASCII character in class")),
        }
    }

    fn class(&mut self) -> Result<Ast, PatternError> {
        let mut set = [0u64; 4];
        let negated = if self.peek() == Some('^') {
            self.bump();
            true
        } else {
            false
        };
        let mut first = true;
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated class")),
                Some(']') if !first => {
                    self.bump();
                    break;
                }
                _ => {}
            }
            first = false;
            let lo = self.class_byte()?;
            let lo = match lo {
                Escaped::Set(s) => {
                    for (w, x) in set.iter_mut().zip(s) {
                        *w |= x;
                    }
                    continue;
                }
                Escaped::Byte(b) => b,
            };
            if self.peek() == Some('-') && !self.src[self.pos + 1..].starts_with(']') {
                self.bump();
                match self.class_byte()? {
                    Escaped::Byte(hi) if hi >= lo => set_range(&mut set, lo, hi),
                    Escaped::Byte(_) => return Err(self.err("class range out of order")),
                    Escaped::Set(_) => return Err(self.err("class escape as range bound")),
                }
            } else {
                set_insert(&mut set, lo);
            }
        }
        if negated {
            set_negate(&mut set);
        }
        Ok(Ast::Class(set))
    }
}

enum Escaped {
    Byte(u8),
    Set(ByteSet),
}

fn byte_ast(b: u8) -> Ast {
    let mut set = [0u64; 4];
    set_insert(&mut set, b);
    Ast::Class(set)
}

fn char_ast(c: char) -> Ast {
    let mut buf = [0u8; 4];
    let bytes = c.encode_utf8(&mut buf).as_bytes();
    if bytes.len() == 1 {
        byte_ast(bytes[0])
    } else {
        Ast::Concat(bytes.iter().map(|&b| byte_ast(b)).collect())
    }
}

// ---------------------------------------------------------------------------
// Thompson construction

#[derive(Default)]
struct Nfa {
    eps: Vec<Vec<u32>>,
    edges: Vec<Vec<(ByteSet, u32)>>,
}

#[derive(Clone, Copy)]
struct Frag {
    start: u32,
    end: u32,
}

impl Nfa {
    fn add_state(&mut self) -> u32 {
        self.eps.push(Vec::new());
        self.edges.push(Vec::new());
        (self.eps.len() - 1) as u32
    }

    fn build(&mut self, ast: &Ast) -> Frag {
        match ast {
            Ast::Empty => {
                let s = self.add_state();
                Frag { start: s, end: s }
            }
            Ast::Class(set) => {
                let s = self.add_state();
                let e = self.add_state();
                self.edges[s as usize].push((*set, e));
                Frag { start: s, end: e }
            }
            Ast::Concat(items) => {
                let mut frag: Option<Frag> = None;
                for item in items {
                    let f = self.build(item);
                    frag = Some(match frag {
                        None => f,
                        Some(prev) => {
                            self.eps[prev.end as usize].push(f.start);
                            Frag {
                                start: prev.start,
                                end: f.end,
                            }
                        }
                    });
                }
                frag.unwrap_or_else(|| self.build(&Ast::Empty))
            }
            Ast::Alt(alts) => {
                let s = self.add_state();
                let e = self.add_state();
                for alt in alts {
                    let f = self.build(alt);
                    self.eps[s as usize].push(f.start);
                    self.eps[f.end as usize].push(e);
                }
                Frag { start: s, end: e }
            }
            Ast::Repeat { inner, min, max } => {
                let s = self.add_state();
                let mut cur = s;
                for _ in 0..*min {
                    let f = self.build(inner);
                    self.eps[cur as usize].push(f.start);
                    cur = f.end;
                }
                match max {
                    None => {
                        let f = self.build(inner);
                        let e = self.add_state();
                        self.eps[cur as usize].push(f.start);
                        self.eps[cur as usize].push(e);
                        self.eps[f.end as usize].push(f.start);
                        self.eps[f.end as usize].push(e);
                        Frag { start: s, end: e }
                    }
                    Some(max) => {
                        let e = self.add_state();
                        self.eps[cur as usize].push(e);
                        for _ in *min..*max {
                            let f = self.build(inner);
                            self.eps[cur as usize].push(f.start);
                            self.eps[f.end as usize].push(e);
                            cur = f.end;
                        }
                        Frag { start: s, end: e }
                    }
                }
            }
        }
    }

    fn closure(&self, states: &mut Vec<u32>) {
        let mut seen = vec![false; self.eps.len()];
        for &s in states.iter() {
            seen[s as usize] = true;
        }
        let mut i = 0;
        while i < states.len() {
            let s = states[i] as usize;
            for &t in &self.eps[s] {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    states.push(t);
                }
            }
            i += 1;
        }
        states.sort_unstable();
    }
}

struct RawDfa {
    table: Vec<u32>,
    accepting: Vec<bool>,
}

fn determinize(nfa: &Nfa, start: u32, accept: u32) -> RawDfa {
    let mut ids: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    let mut sets: Vec<Vec<u32>> = Vec::new();
    let mut first = vec![start];
    nfa.closure(&mut first);
    ids.insert(first.clone(), 0);
    sets.push(first);
    let mut table = Vec::new();
    let mut accepting = Vec::new();
    let mut i = 0;
    while i < sets.len() {
        let cur = sets[i].clone();
        accepting.push(cur.binary_search(&accept).is_ok());
        let base = table.len();
        table.resize(base + 256, DEAD);
        for b in 0..=255u8 {
            let mut next: Vec<u32> = Vec::new();
            for &s in &cur {
                for (set, t) in &nfa.edges[s as usize] {
                    if set_contains(set, b) && !next.contains(t) {
                        next.push(*t);
                    }
                }
            }
            if next.is_empty() {
                continue;
            }
            nfa.closure(&mut next);
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = sets.len() as u32;
                    ids.insert(next.clone(), id);
                    sets.push(next);
                    id
                }
            };
            table[base + b as usize] = id;
        }
        i += 1;
    }
    RawDfa { table, accepting }
}

/// Drops states that cannot reach an accepting state.
fn trim(dfa: RawDfa) -> Result<RawDfa, PatternError> {
    let n = dfa.accepting.len();
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for s in 0..n {
        for &t in &dfa.table[s * 256..(s + 1) * 256] {
            if t != DEAD {
                preds[t as usize].push(s as u32);
            }
        }
    }
    let mut live = dfa.accepting.clone();
    let mut stack: Vec<u32> = (0..n as u32).filter(|&s| live[s as usize]).collect();
    while let Some(s) = stack.pop() {
        for &p in &preds[s as usize] {
            if !live[p as usize] {
                live[p as usize] = true;
                stack.push(p);
            }
        }
    }
    if !live[0] {
        return Err(PatternError::EmptyLanguage);
    }
    // Renumber live states reachable from the start in BFS order.
    let mut remap = vec![DEAD; n];
    let mut order = vec![0u32];
    remap[0] = 0;
    let mut i = 0;
    while i < order.len() {
        let s = order[i] as usize;
        for &t in &dfa.table[s * 256..(s + 1) * 256] {
            if t != DEAD && live[t as usize] && remap[t as usize] == DEAD {
                remap[t as usize] = order.len() as u32;
                order.push(t);
            }
        }
        i += 1;
    }
    let mut table = vec![DEAD; order.len() * 256];
    let mut accepting = vec![false; order.len()];
    for (new, &old) in order.iter().enumerate() {
        accepting[new] = dfa.accepting[old as usize];
        for b in 0..256 {
            let t = dfa.table[old as usize * 256 + b];
            if t != DEAD {
                table[new * 256 + b] = remap[t as usize];
            }
        }
    }
    Ok(RawDfa { table, accepting })
}

/// Moore partition refinement.
fn minimize(dfa: RawDfa) -> TerminalAutomaton {
    let n = dfa.accepting.len();
    let mut class: Vec<u32> = dfa.accepting.iter().map(|&a| a as u32).collect();
    let mut count = {
        let mut c = class.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    loop {
        let mut sigs: BTreeMap<(u32, Vec<u32>), u32> = BTreeMap::new();
        let mut next = vec![0u32; n];
        for s in 0..n {
            let row: Vec<u32> = dfa.table[s * 256..(s + 1) * 256]
                .iter()
                .map(|&t| if t == DEAD { DEAD } else { class[t as usize] })
                .collect();
            let len = sigs.len() as u32;
            next[s] = *sigs.entry((class[s], row)).or_insert(len);
        }
        let new_count = sigs.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    // Renumber classes so the start state's class is 0, in BFS order.
    let mut remap = vec![DEAD; count];
    let mut reps: Vec<usize> = Vec::new();
    remap[class[0] as usize] = 0;
    reps.push(0);
    let mut i = 0;
    while i < reps.len() {
        let s = reps[i];
        for &t in &dfa.table[s * 256..(s + 1) * 256] {
            if t != DEAD && remap[class[t as usize] as usize] == DEAD {
                remap[class[t as usize] as usize] = reps.len() as u32;
                reps.push(t as usize);
            }
        }
        i += 1;
    }
    let mut table = vec![DEAD; reps.len() * 256];
    let mut accepting = vec![false; reps.len()];
    for (new, &old) in reps.iter().enumerate() {
        accepting[new] = dfa.accepting[old];
        for b in 0..256 {
            let t = dfa.table[old * 256 + b];
            if t != DEAD {
                table[new * 256 + b] = remap[class[t as usize] as usize];
            }
        }
    }
    TerminalAutomaton::from_parts(table, accepting)
}
