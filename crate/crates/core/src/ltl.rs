//! LTL formulas: surface syntax, negation normal form, co-safety and a
//! reference evaluator over finite and lasso-shaped words.
//!
//! The concrete grammar is documented in `docs/grammar.md`. In short, from
//! tightest to loosest binding: unary `!`, `X`, `F`, `G`; `U` (right
//! associative); `&`; `|`; `->` (right associative, desugared to `!p | q`).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// A set of atomic propositions holding at one position of a word.
pub type LabelSet = BTreeSet<String>;

/// Build a label set from string slices.
pub fn label_set<I, S>(atoms: I) -> LabelSet
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    atoms.into_iter().map(Into::into).collect()
}

/// LTL abstract syntax tree.
///
/// `False` and `Release` never come out of the surface parser except through
/// the `false` keyword; they exist so that negation normal form is closed.
/// `Release(l, r)` is `!(!l U !r)`: `r` must hold up to and including the
/// first position where `l` holds, or forever.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Self {
        Formula::Until(Box::new(l), Box::new(r))
    }

    pub fn release(l: Formula, r: Formula) -> Self {
        Formula::Release(Box::new(l), Box::new(r))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    /// Conjunction of a nonempty list, folded to the left.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Self {
        let mut it = parts.into_iter();
        let first = it.next().unwrap_or(Formula::True);
        it.fold(first, Formula::and)
    }

    /// Number of children for this node kind.
    pub fn arity(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(_) | Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) => 1,
            Formula::And(..) | Formula::Or(..) | Formula::Until(..) | Formula::Release(..) => 2,
        }
    }

    /// Every atom name mentioned by the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Not(f) | Formula::Next(f) | Formula::Eventually(f) | Formula::Always(f) => {
                f.collect_atoms(out)
            }
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until(l, r)
            | Formula::Release(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    /// Count of temporal operators (`X`, `U`, `R`, `F`, `G`).
    pub fn temporal_depth_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(f) => f.temporal_depth_count(),
            Formula::Next(f) | Formula::Eventually(f) | Formula::Always(f) => {
                1 + f.temporal_depth_count()
            }
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.temporal_depth_count() + r.temporal_depth_count()
            }
            Formula::Until(l, r) | Formula::Release(l, r) => {
                1 + l.temporal_depth_count() + r.temporal_depth_count()
            }
        }
    }

    /// Number of distinct subformulas (the closure size used for bounds).
    pub fn closure_size(&self) -> usize {
        let mut seen = BTreeSet::new();
        self.collect_subformulas(&mut seen);
        seen.len()
    }

    fn collect_subformulas<'a>(&'a self, seen: &mut BTreeSet<&'a Formula>) {
        if !seen.insert(self) {
            return;
        }
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => {}
            Formula::Not(f) | Formula::Next(f) | Formula::Eventually(f) | Formula::Always(f) => {
                f.collect_subformulas(seen)
            }
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until(l, r)
            | Formula::Release(l, r) => {
                l.collect_subformulas(seen);
                r.collect_subformulas(seen);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("syntax error at offset {offset}: found {found}, expected one of {}", expected.join(", "))]
pub struct ParseError {
    /// Byte offset into the formula text.
    pub offset: usize,
    pub found: String,
    pub expected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Arrow,
    Next,
    Eventually,
    Always,
    Until,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("atom `{s}`"),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Next => "`X`".into(),
            Tok::Eventually => "`F`".into(),
            Tok::Always => "`G`".into(),
            Tok::Until => "`U`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> std::result::Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'!' => Tok::Not,
            b'&' => Tok::And,
            b'|' => Tok::Or,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            c if c.is_ascii_alphanumeric() || c == b'_' => {
                while i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_')
                {
                    i += 1;
                }
                match &text[start..=i] {
                    "X" => Tok::Next,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "U" => Tok::Until,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    word => Tok::Ident(word.to_string()),
                }
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    found: format!("character `{ch}`"),
                    expected: vec!["atom".into(), "operator".into(), "parenthesis".into()],
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

const OPERAND_START: &[&str] = &[
    "atom", "`true`", "`false`", "`(`", "`!`", "`X`", "`F`", "`G`",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let (offset, tok) = &self.toks[self.pos];
        ParseError {
            offset: *offset,
            found: tok.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn implication(&mut self) -> std::result::Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Formula::or(Formula::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> std::result::Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> std::result::Result<Formula, ParseError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> std::result::Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if *self.peek() == Tok::Until {
            self.bump();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> std::result::Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Next => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.implication()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["`)`", "`&`", "`|`", "`U`", "`->`"]));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error(OPERAND_START)),
        }
    }
}

/// Parse formula text in the concrete grammar.
pub fn parse(text: &str) -> std::result::Result<Formula, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let f = p.implication()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["end of input", "`&`", "`|`", "`U`", "`->`"]));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------------------
// Printing

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_UNTIL: u8 = 3;
const PREC_UNARY: u8 = 4;

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Or(..) => PREC_OR,
        Formula::And(..) => PREC_AND,
        Formula::Until(..) => PREC_UNTIL,
        _ => PREC_UNARY,
    }
}

fn write_formula(f: &Formula, min_prec: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let parens = precedence(f) < min_prec;
    if parens {
        out.write_str("(")?;
    }
    match f {
        Formula::True => out.write_str("true")?,
        Formula::False => out.write_str("false")?,
        Formula::Atom(a) => out.write_str(a)?,
        Formula::Not(g) => {
            out.write_str("!")?;
            write_formula(g, PREC_UNARY, out)?;
        }
        Formula::Next(g) => {
            out.write_str("X ")?;
            write_formula(g, PREC_UNARY, out)?;
        }
        Formula::Eventually(g) => {
            out.write_str("F ")?;
            write_formula(g, PREC_UNARY, out)?;
        }
        Formula::Always(g) => {
            out.write_str("G ")?;
            write_formula(g, PREC_UNARY, out)?;
        }
        Formula::Or(l, r) => {
            write_formula(l, PREC_OR, out)?;
            out.write_str(" | ")?;
            write_formula(r, PREC_AND, out)?;
        }
        Formula::And(l, r) => {
            write_formula(l, PREC_AND, out)?;
            out.write_str(" & ")?;
            write_formula(r, PREC_UNTIL, out)?;
        }
        Formula::Until(l, r) => {
            write_formula(l, PREC_UNARY, out)?;
            out.write_str(" U ")?;
            write_formula(r, PREC_UNTIL, out)?;
        }
        // No surface syntax for release; print its definition.
        Formula::Release(l, r) => {
            let dual = Formula::until(Formula::not((**l).clone()), Formula::not((**r).clone()));
            out.write_str("!(")?;
            write_formula(&dual, 0, out)?;
            out.write_str(")")?;
        }
    }
    if parens {
        out.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self, 0, f)
    }
}

// ---------------------------------------------------------------------------
// Normal forms

/// Push negations down to atoms.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, negated: bool) -> Formula {
    use Formula::*;
    match (f, negated) {
        (True, false) | (False, true) => True,
        (True, true) | (False, false) => False,
        (Atom(a), false) => Atom(a.clone()),
        (Atom(a), true) => Formula::not(Atom(a.clone())),
        (Not(g), neg) => nnf(g, !neg),
        (And(l, r), false) => Formula::and(nnf(l, false), nnf(r, false)),
        (And(l, r), true) => Formula::or(nnf(l, true), nnf(r, true)),
        (Or(l, r), false) => Formula::or(nnf(l, false), nnf(r, false)),
        (Or(l, r), true) => Formula::and(nnf(l, true), nnf(r, true)),
        (Next(g), neg) => Formula::next(nnf(g, neg)),
        (Until(l, r), false) => Formula::until(nnf(l, false), nnf(r, false)),
        (Until(l, r), true) => Formula::release(nnf(l, true), nnf(r, true)),
        (Release(l, r), false) => Formula::release(nnf(l, false), nnf(r, false)),
        (Release(l, r), true) => Formula::until(nnf(l, true), nnf(r, true)),
        (Eventually(g), false) => Formula::eventually(nnf(g, false)),
        (Eventually(g), true) => Formula::always(nnf(g, true)),
        (Always(g), false) => Formula::always(nnf(g, false)),
        (Always(g), true) => Formula::eventually(nnf(g, true)),
    }
}

/// True when every negation sits directly on an atom.
pub fn is_nnf(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) => true,
        Formula::Not(g) => matches!(**g, Formula::Atom(_)),
        Formula::Next(g) | Formula::Eventually(g) | Formula::Always(g) => is_nnf(g),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) | Formula::Release(l, r) => {
            is_nnf(l) && is_nnf(r)
        }
    }
}

/// Membership in the syntactically co-safe fragment. Expects NNF input;
/// a negation above a non-atom is reported as not co-safe.
pub fn is_syntactically_cosafe(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) => true,
        Formula::Not(g) => matches!(**g, Formula::Atom(_)),
        Formula::Next(g) | Formula::Eventually(g) => is_syntactically_cosafe(g),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) => {
            is_syntactically_cosafe(l) && is_syntactically_cosafe(r)
        }
        Formula::Always(_) | Formula::Release(..) => false,
    }
}

// ---------------------------------------------------------------------------
// Words and the reference evaluator

/// A finite word, optionally marked as a lasso: `letters[lasso..]` repeats
/// forever after `letters[..lasso]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub letters: Vec<LabelSet>,
    pub lasso: Option<usize>,
}

impl Word {
    pub fn finite(letters: Vec<LabelSet>) -> Self {
        Word {
            letters,
            lasso: None,
        }
    }

    /// `prefix` followed by `cycle` repeated forever. Panics on an empty cycle.
    pub fn lasso(prefix: Vec<LabelSet>, cycle: Vec<LabelSet>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        let lasso = prefix.len();
        let mut letters = prefix;
        letters.extend(cycle);
        Word {
            letters,
            lasso: Some(lasso),
        }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn prefix(&self) -> &[LabelSet] {
        match self.lasso {
            Some(i) => &self.letters[..i],
            None => &self.letters,
        }
    }

    pub fn cycle(&self) -> &[LabelSet] {
        match self.lasso {
            Some(i) => &self.letters[i..],
            None => &[],
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(i) = self.lasso {
            if i >= self.letters.len() {
                return Err(Error::InvalidRequest(format!(
                    "lasso index {i} out of range for word of length {}",
                    self.letters.len()
                )));
            }
        }
        Ok(())
    }
}

/// Decide `w |= f`.
///
/// Finite words use finite-trace semantics with a strong next operator on
/// the negation normal form of `f`, and are only accepted for co-safe
/// formulas. Lasso words are evaluated on `f` itself. Each `U`/`F`/`G`
/// scan walks the successor chain for `len(w)` steps, which visits every
/// position reachable from the start point, so the result is exact.
pub fn check_word(f: &Formula, w: &Word) -> Result<bool> {
    w.validate()?;
    match w.lasso {
        None => {
            let g = to_nnf(f);
            if !is_syntactically_cosafe(&g) {
                return Err(Error::LassoRequired(f.to_string()));
            }
            Ok(eval_finite(&g, &w.letters, 0))
        }
        Some(loop_start) => {
            let mut eval = LassoEval {
                letters: &w.letters,
                loop_start,
            };
            Ok(eval.truth(f)[0])
        }
    }
}

fn eval_finite(f: &Formula, w: &[LabelSet], i: usize) -> bool {
    let n = w.len();
    if i >= n {
        return matches!(f, Formula::True);
    }
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => w[i].contains(a),
        Formula::Not(g) => match &**g {
            Formula::Atom(a) => !w[i].contains(a),
            _ => unreachable!("finite evaluation runs on NNF"),
        },
        Formula::And(l, r) => eval_finite(l, w, i) && eval_finite(r, w, i),
        Formula::Or(l, r) => eval_finite(l, w, i) || eval_finite(r, w, i),
        Formula::Next(g) => i + 1 < n && eval_finite(g, w, i + 1),
        Formula::Until(l, r) => {
            for k in i..n {
                if eval_finite(r, w, k) {
                    return true;
                }
                if !eval_finite(l, w, k) {
                    return false;
                }
            }
            false
        }
        Formula::Eventually(g) => (i..n).any(|k| eval_finite(g, w, k)),
        Formula::Always(_) | Formula::Release(..) => {
            unreachable!("finite evaluation runs on co-safe formulas")
        }
    }
}

struct LassoEval<'a> {
    letters: &'a [LabelSet],
    loop_start: usize,
}

impl LassoEval<'_> {
    fn succ(&self, i: usize) -> usize {
        if i + 1 < self.letters.len() {
            i + 1
        } else {
            self.loop_start
        }
    }

    /// Positions visited from `i` within one full sweep of the word.
    fn sweep(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.letters.len());
        let mut j = i;
        for _ in 0..self.letters.len() {
            out.push(j);
            j = self.succ(j);
        }
        out
    }

    /// Truth value of `f` at every position.
    fn truth(&mut self, f: &Formula) -> Vec<bool> {
        let n = self.letters.len();
        match f {
            Formula::True => vec![true; n],
            Formula::False => vec![false; n],
            Formula::Atom(a) => self.letters.iter().map(|l| l.contains(a)).collect(),
            Formula::Not(g) => self.truth(g).into_iter().map(|b| !b).collect(),
            Formula::And(l, r) => {
                let (l, r) = (self.truth(l), self.truth(r));
                l.iter().zip(&r).map(|(a, b)| *a && *b).collect()
            }
            Formula::Or(l, r) => {
                let (l, r) = (self.truth(l), self.truth(r));
                l.iter().zip(&r).map(|(a, b)| *a || *b).collect()
            }
            Formula::Next(g) => {
                let g = self.truth(g);
                (0..n).map(|i| g[self.succ(i)]).collect()
            }
            Formula::Until(l, r) => {
                let (l, r) = (self.truth(l), self.truth(r));
                (0..n)
                    .map(|i| {
                        for j in self.sweep(i) {
                            if r[j] {
                                return true;
                            }
                            if !l[j] {
                                return false;
                            }
                        }
                        false
                    })
                    .collect()
            }
            Formula::Release(l, r) => {
                let (l, r) = (self.truth(l), self.truth(r));
                (0..n)
                    .map(|i| {
                        for j in self.sweep(i) {
                            if !r[j] {
                                return false;
                            }
                            if l[j] {
                                return true;
                            }
                        }
                        true
                    })
                    .collect()
            }
            Formula::Eventually(g) => {
                let g = self.truth(g);
                (0..n)
                    .map(|i| self.sweep(i).into_iter().any(|j| g[j]))
                    .collect()
            }
            Formula::Always(g) => {
                let g = self.truth(g);
                (0..n)
                    .map(|i| self.sweep(i).into_iter().all(|j| g[j]))
                    .collect()
            }
        }
    }
}
