//! First-order sentences over 0/1 words.
//!
//! Linear vocabulary: `=`, `<=`, `U`. Circular vocabulary: `=`, `C`, `U`
//! with `C(x,y,z)` true when `x -> y -> z` runs clockwise.
//!
//! Grammar (quantifier bodies extend as far right as possible):
//!
//! ```text
//! formula  := implies
//! implies  := or [ "->" implies ]
//! or       := and { "|" and }
//! and      := unary { "&" unary }
//! unary    := "!" unary | quant | "(" formula ")" | atom
//! quant    := ("exists" | "forall") var { "," var } "." formula
//! atom     := var ("<=" | "<" | ">=" | ">" | "=" | "!=") var
//!           | "U" "(" var ")" | "C" "(" var "," var "," var ")"
//! ```
//!
//! `x<y` is read as `x<=y & !(x=y)`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::word_types::{Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("free variable `{name}` at {pos}")]
    FreeVariable { name: String, pos: usize },
    #[error("`{name}` is reserved and cannot name a variable (at {pos})")]
    ReservedName { name: String, pos: usize },
    #[error("sentence mixes the linear and circular vocabularies (at {pos})")]
    VocabularyMix { pos: usize },
    #[error("{sentence:?} sentence evaluated on a {model:?} model")]
    VocabularyMismatch { sentence: Vocabulary, model: Vocabulary },
    #[error("evaluation exceeded the work cap of {0} steps")]
    WorkCapExceeded(u64),
    #[error("unknown built-in sentence `{0}`")]
    UnknownBuiltin(String),
    #[error("A_k needs k >= 1")]
    BadK,
}

pub type Result<T> = std::result::Result<T, LogicError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Vocabulary {
    Linear,
    Circular,
}

/// Variable slot; slots are numbered in order of their binders.
pub type Var = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Eq(Var, Var),
    Le(Var, Var),
    U(Var),
    C(Var, Var, Var),
}

impl Formula {
    pub fn qdepth(&self) -> usize {
        match self {
            Formula::Exists(_, f) | Formula::Forall(_, f) => 1 + f.qdepth(),
            Formula::Not(f) => f.qdepth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.qdepth().max(b.qdepth()),
            _ => 0,
        }
    }

    fn free_vars(&self, out: &mut Vec<Var>) {
        match self {
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                let mut inner = Vec::new();
                f.free_vars(&mut inner);
                out.extend(inner.into_iter().filter(|x| x != v));
            }
            Formula::Not(f) => f.free_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Formula::Eq(a, b) | Formula::Le(a, b) => out.extend([*a, *b]),
            Formula::U(a) => out.push(*a),
            Formula::C(a, b, c) => out.extend([*a, *b, *c]),
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Renumbers slots in binder order, returning the old slot of each new one.
    fn renumber(&self, map: &mut HashMap<Var, Var>, order: &mut Vec<Var>) -> Formula {
        let r = |v: &Var, map: &HashMap<Var, Var>| *map.get(v).expect("bound variable");
        match self {
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                let new = order.len();
                order.push(*v);
                let saved = map.insert(*v, new);
                let body = Box::new(f.renumber(map, order));
                match saved {
                    Some(s) => map.insert(*v, s),
                    None => map.remove(v),
                };
                if matches!(self, Formula::Exists(..)) {
                    Formula::Exists(new, body)
                } else {
                    Formula::Forall(new, body)
                }
            }
            Formula::Not(f) => Formula::Not(Box::new(f.renumber(map, order))),
            Formula::And(a, b) => Formula::And(Box::new(a.renumber(map, order)), Box::new(b.renumber(map, order))),
            Formula::Or(a, b) => Formula::Or(Box::new(a.renumber(map, order)), Box::new(b.renumber(map, order))),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.renumber(map, order)), Box::new(b.renumber(map, order)))
            }
            Formula::Eq(a, b) => Formula::Eq(r(a, map), r(b, map)),
            Formula::Le(a, b) => Formula::Le(r(a, map), r(b, map)),
            Formula::U(a) => Formula::U(r(a, map)),
            Formula::C(a, b, c) => Formula::C(r(a, map), r(b, map), r(c, map)),
        }
    }
}

/// A closed formula with its vocabulary and variable names.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub formula: Formula,
    pub vocabulary: Vocabulary,
    /// Name of each slot.
    pub names: Vec<String>,
}

impl Sentence {
    /// Normalizes slot numbering; `names[v]` names slot `v` of `formula`.
    /// Panics if `formula` has free variables.
    pub fn new(formula: Formula, vocabulary: Vocabulary, names: &[String]) -> Sentence {
        let mut order = Vec::new();
        let formula = formula.renumber(&mut HashMap::new(), &mut order);
        let names = order.iter().map(|&v| names[v].clone()).collect();
        Sentence {
            formula,
            vocabulary,
            names,
        }
    }

    pub fn qdepth(&self) -> usize {
        self.formula.qdepth()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, &self.formula, &self.names, true)
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, x: &Formula, names: &[String], top: bool) -> fmt::Result {
    match x {
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            let q = if matches!(x, Formula::Exists(..)) { "exists" } else { "forall" };
            if !top {
                write!(f, "(")?;
            }
            write!(f, "{q} {}. ", names[*v])?;
            write_formula(f, b, names, true)?;
            if !top {
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::Not(b) => {
            write!(f, "!")?;
            write_formula(f, b, names, false)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let op = match x {
                Formula::And(..) => "&",
                Formula::Or(..) => "|",
                _ => "->",
            };
            write!(f, "(")?;
            write_formula(f, a, names, false)?;
            write!(f, " {op} ")?;
            write_formula(f, b, names, false)?;
            write!(f, ")")
        }
        Formula::Eq(a, b) => write!(f, "{}={}", names[*a], names[*b]),
        Formula::Le(a, b) => write!(f, "{}<={}", names[*a], names[*b]),
        Formula::U(a) => write!(f, "U({})", names[*a]),
        Formula::C(a, b, c) => write!(f, "C({},{},{})", names[*a], names[*b], names[*c]),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Exists,
    Forall,
    Dot,
    Comma,
    LParen,
    RParen,
    And,
    Or,
    Not,
    Implies,
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Neq,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next = chars.get(i + 1).map(|p| p.1);
        let (tok, width) = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '.' => (Tok::Dot, 1),
            ',' => (Tok::Comma, 1),
            '(' | '[' => (Tok::LParen, 1),
            ')' | ']' => (Tok::RParen, 1),
            '&' | '∧' => (Tok::And, 1),
            '|' | '∨' => (Tok::Or, 1),
            '!' if next == Some('=') => (Tok::Neq, 2),
            '!' | '¬' | '~' => (Tok::Not, 1),
            '-' if next == Some('>') => (Tok::Implies, 2),
            '→' => (Tok::Implies, 1),
            '<' if next == Some('=') => (Tok::Le, 2),
            '≤' => (Tok::Le, 1),
            '<' => (Tok::Lt, 1),
            '>' if next == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            '=' => (Tok::Eq, 1),
            '∃' => (Tok::Exists, 1),
            '∀' => (Tok::Forall, 1),
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().map(|p| p.1).collect();
                let tok = match word.as_str() {
                    "exists" => Tok::Exists,
                    "forall" => Tok::Forall,
                    _ => Tok::Ident(word),
                };
                (tok, j - i)
            }
            _ => {
                return Err(LogicError::Syntax {
                    pos,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, pos));
        i += width;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    scope: Vec<(String, Var)>,
    names: Vec<String>,
    order_pos: Option<usize>,
    cyclic_pos: Option<usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(LogicError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<(String, usize)> {
        match self.toks.get(self.at) {
            Some((Tok::Ident(name), pos)) => {
                let r = (name.clone(), *pos);
                self.at += 1;
                Ok(r)
            }
            _ => self.err("expected a variable"),
        }
    }

    fn var(&mut self) -> Result<Var> {
        let (name, pos) = self.ident()?;
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .ok_or(LogicError::FreeVariable { name, pos })
    }

    fn formula(&mut self) -> Result<Formula> {
        let left = self.or()?;
        if self.peek() == Some(&Tok::Implies) {
            self.at += 1;
            let right = self.formula()?;
            return Ok(Formula::Implies(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut left = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            let right = self.and()?;
            left = Formula::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut left = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            let right = self.unary()?;
            left = Formula::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Not) => {
                self.at += 1;
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some(Tok::Exists) | Some(Tok::Forall) => self.quantified(),
            Some(Tok::LParen) => {
                self.at += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(_)) => self.atom(),
            Some(_) => self.err("expected a formula"),
            None => self.err("unexpected end of input"),
        }
    }

    fn quantified(&mut self) -> Result<Formula> {
        let exists = self.peek() == Some(&Tok::Exists);
        self.at += 1;
        let mut vars = Vec::new();
        loop {
            let (name, pos) = self.ident()?;
            if matches!(name.as_str(), "U" | "C") {
                return Err(LogicError::ReservedName { name, pos });
            }
            let v = self.names.len();
            self.names.push(name.clone());
            self.scope.push((name, v));
            vars.push(v);
            if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
            } else {
                break;
            }
        }
        self.expect(Tok::Dot, "`.` after quantified variables")?;
        if self.peek().is_none() {
            return self.err("missing quantifier body");
        }
        let mut body = self.formula()?;
        for &v in vars.iter().rev() {
            self.scope.pop();
            body = if exists {
                Formula::Exists(v, Box::new(body))
            } else {
                Formula::Forall(v, Box::new(body))
            };
        }
        Ok(body)
    }

    fn atom(&mut self) -> Result<Formula> {
        let start = self.pos();
        if let Some(Tok::Ident(name)) = self.peek() {
            let pred = name.clone();
            if (pred == "U" || pred == "C") && self.toks.get(self.at + 1).map(|t| &t.0) == Some(&Tok::LParen) {
                self.at += 2;
                let a = self.var()?;
                let f = if pred == "U" {
                    Formula::U(a)
                } else {
                    self.cyclic_pos.get_or_insert(start);
                    self.expect(Tok::Comma, "`,`")?;
                    let b = self.var()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let c = self.var()?;
                    Formula::C(a, b, c)
                };
                self.expect(Tok::RParen, "`)`")?;
                return Ok(f);
            }
        }
        let a = self.var()?;
        let op = self.peek().cloned();
        self.at += 1;
        let b = match op {
            Some(Tok::Le | Tok::Lt | Tok::Ge | Tok::Gt | Tok::Eq | Tok::Neq) => self.var()?,
            _ => {
                self.at -= 1;
                return self.err("expected a comparison");
            }
        };
        if !matches!(op, Some(Tok::Eq | Tok::Neq)) {
            self.order_pos.get_or_insert(start);
        }
        let lt = |x: Var, y: Var| {
            Formula::And(
                Box::new(Formula::Le(x, y)),
                Box::new(Formula::Not(Box::new(Formula::Eq(x, y)))),
            )
        };
        Ok(match op {
            Some(Tok::Le) => Formula::Le(a, b),
            Some(Tok::Ge) => Formula::Le(b, a),
            Some(Tok::Lt) => lt(a, b),
            Some(Tok::Gt) => lt(b, a),
            Some(Tok::Eq) => Formula::Eq(a, b),
            _ => Formula::Not(Box::new(Formula::Eq(a, b))),
        })
    }
}

fn parse_inner(text: &str, vocabulary: Option<Vocabulary>) -> Result<Sentence> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        scope: Vec::new(),
        names: Vec::new(),
        order_pos: None,
        cyclic_pos: None,
    };
    let formula = p.formula()?;
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    let inferred = match (p.order_pos, p.cyclic_pos) {
        (Some(a), Some(b)) => return Err(LogicError::VocabularyMix { pos: a.max(b) }),
        (_, Some(_)) => Vocabulary::Circular,
        _ => Vocabulary::Linear,
    };
    let vocabulary = match vocabulary {
        None => inferred,
        Some(Vocabulary::Linear) => match p.cyclic_pos {
            Some(pos) => return Err(LogicError::VocabularyMix { pos }),
            None => Vocabulary::Linear,
        },
        Some(Vocabulary::Circular) => match p.order_pos {
            Some(pos) => return Err(LogicError::VocabularyMix { pos }),
            None => Vocabulary::Circular,
        },
    };
    Ok(Sentence::new(formula, vocabulary, &p.names))
}

/// Parses a sentence, inferring the vocabulary (circular iff `C` occurs).
pub fn parse(text: &str) -> Result<Sentence> {
    parse_inner(text, None)
}

/// Parses a sentence in a given vocabulary.
pub fn parse_with(text: &str, vocabulary: Vocabulary) -> Result<Sentence> {
    parse_inner(text, Some(vocabulary))
}

/// A 0/1 word viewed as a structure on positions `0..n`.
#[derive(Copy, Clone, Debug)]
pub struct ModelView<'a> {
    pub letters: &'a [Letter],
    pub vocabulary: Vocabulary,
}

impl<'a> ModelView<'a> {
    pub fn linear(word: &'a Word) -> Self {
        ModelView {
            letters: word.letters(),
            vocabulary: Vocabulary::Linear,
        }
    }

    pub fn circular(word: &'a Word) -> Self {
        ModelView {
            letters: word.letters(),
            vocabulary: Vocabulary::Circular,
        }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn u(&self, i: usize) -> bool {
        self.letters[i].0 == 1
    }
}

/// Clockwise order on a cycle.
pub fn clockwise(x: usize, y: usize, z: usize) -> bool {
    (x < y && y < z) || (y < z && z < x) || (z < x && x < y)
}

/// Default cap on quantifier iterations during evaluation.
pub const DEFAULT_WORK_CAP: u64 = 200_000_000;

/// Direct recursive evaluation; quantifier results are cached on the values
/// of the quantified subformula's free variables.
pub fn evaluate(model: &ModelView<'_>, sentence: &Sentence) -> Result<bool> {
    evaluate_capped(model, sentence, DEFAULT_WORK_CAP)
}

pub fn evaluate_capped(model: &ModelView<'_>, sentence: &Sentence, cap: u64) -> Result<bool> {
    if model.vocabulary != sentence.vocabulary {
        return Err(LogicError::VocabularyMismatch {
            sentence: sentence.vocabulary,
            model: model.vocabulary,
        });
    }
    let mut ev = Evaluator {
        model,
        env: vec![usize::MAX; sentence.names.len()],
        work: 0,
        cap,
        free: HashMap::new(),
        memo: HashMap::new(),
    };
    ev.eval(&sentence.formula)
}

const MEMO_LIMIT: usize = 1 << 20;

struct Evaluator<'a, 'm> {
    model: &'a ModelView<'m>,
    env: Vec<usize>,
    work: u64,
    cap: u64,
    free: HashMap<*const Formula, Vec<Var>>,
    memo: HashMap<(*const Formula, Vec<usize>), bool>,
}

impl Evaluator<'_, '_> {
    fn eval(&mut self, f: &Formula) -> Result<bool> {
        Ok(match f {
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                let exists = matches!(f, Formula::Exists(..));
                let key_ptr = f as *const Formula;
                let free = self
                    .free
                    .entry(key_ptr)
                    .or_insert_with(|| {
                        let mut out = Vec::new();
                        f.free_vars(&mut out);
                        out
                    })
                    .clone();
                let key = (key_ptr, free.iter().map(|&x| self.env[x]).collect::<Vec<_>>());
                if let Some(&r) = self.memo.get(&key) {
                    return Ok(r);
                }
                let saved = self.env[*v];
                let mut result = !exists;
                for i in 0..self.model.len() {
                    self.work += 1;
                    if self.work > self.cap {
                        return Err(LogicError::WorkCapExceeded(self.cap));
                    }
                    self.env[*v] = i;
                    if self.eval(body)? == exists {
                        result = exists;
                        break;
                    }
                }
                self.env[*v] = saved;
                if self.memo.len() < MEMO_LIMIT {
                    self.memo.insert(key, result);
                }
                result
            }
            Formula::Not(b) => !self.eval(b)?,
            Formula::And(a, b) => self.eval(a)? && self.eval(b)?,
            Formula::Or(a, b) => self.eval(a)? || self.eval(b)?,
            Formula::Implies(a, b) => !self.eval(a)? || self.eval(b)?,
            Formula::Eq(a, b) => self.env[*a] == self.env[*b],
            Formula::Le(a, b) => self.env[*a] <= self.env[*b],
            Formula::U(a) => self.model.u(self.env[*a]),
            Formula::C(a, b, c) => clockwise(self.env[*a], self.env[*b], self.env[*c]),
        })
    }
}

/// The named example sentences.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// Some position is in `U`.
    A,
    /// The first position is in `U`.
    B,
    /// Two adjacent positions are in `U`.
    C,
    /// `k` cyclically consecutive distinct positions are in `U`.
    Ak(usize),
    /// Among positions `x` in `U` with `x+1` or `x+2` in `U`, the first has
    /// `x+1` in `U`.
    D,
}

impl Builtin {
    pub fn parse_name(name: &str) -> Result<Builtin> {
        let upper = name.trim();
        match upper {
            "A" => Ok(Builtin::A),
            "B" => Ok(Builtin::B),
            "C" => Ok(Builtin::C),
            "D" => Ok(Builtin::D),
            _ => {
                let k = upper
                    .strip_prefix("A_")
                    .or_else(|| upper.strip_prefix('A'))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| LogicError::UnknownBuiltin(name.to_string()))?;
                if k == 0 {
                    return Err(LogicError::BadK);
                }
                Ok(Builtin::Ak(k))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Builtin::A => "A".into(),
            Builtin::B => "B".into(),
            Builtin::C => "C".into(),
            Builtin::Ak(k) => format!("A_{k}"),
            Builtin::D => "D".into(),
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        match self {
            Builtin::Ak(_) => Vocabulary::Circular,
            _ => Vocabulary::Linear,
        }
    }

    pub fn sentence(&self) -> Result<Sentence> {
        builtin(*self)
    }

    /// Linear-time evaluation equivalent to the sentence.
    pub fn scan(&self, letters: &[Letter]) -> bool {
        let one = |i: usize| letters[i].0 == 1;
        let n = letters.len();
        match self {
            Builtin::A => letters.iter().any(|l| l.0 == 1),
            Builtin::B => n > 0 && one(0),
            Builtin::C => (1..n).any(|i| one(i - 1) && one(i)),
            Builtin::Ak(k) => scan_cyclic_run(letters, *k),
            Builtin::D => scan_d(letters),
        }
    }
}

/// Whether a cycle has `k` consecutive distinct positions in `U`.
pub fn scan_cyclic_run(letters: &[Letter], k: usize) -> bool {
    let n = letters.len();
    if n < k {
        return false;
    }
    let Some(zero) = letters.iter().position(|l| l.0 == 0) else {
        return true;
    };
    let mut run = 0;
    for i in 1..=n {
        if letters[(zero + i) % n].0 == 1 {
            run += 1;
            if run >= k {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// Scanner for D: stops at the first `x` in `U` with `x+1` or `x+2` in `U`.
pub fn scan_d(letters: &[Letter]) -> bool {
    scan_d_iter(letters.iter().map(|l| l.0 == 1))
}

/// [`scan_d`] over a lazily produced sequence, reading only as far as needed.
pub fn scan_d_iter(bits: impl Iterator<Item = bool>) -> bool {
    // A pending 1 two back always has a 0 one back, else we returned already.
    let (mut prev2, mut prev1) = (false, false);
    for b in bits {
        if b && prev1 {
            return true;
        }
        if b && prev2 {
            return false;
        }
        (prev2, prev1) = (prev1, b);
    }
    false
}

struct Build {
    names: Vec<String>,
}

impl Build {
    fn fresh(&mut self, base: &str) -> Var {
        let count = self.names.iter().filter(|n| n.trim_end_matches(char::is_numeric) == base).count();
        let name = if count == 0 { base.to_string() } else { format!("{base}{count}") };
        self.names.push(name);
        self.names.len() - 1
    }
}

fn ex(v: Var, f: Formula) -> Formula {
    Formula::Exists(v, Box::new(f))
}
fn all(v: Var, f: Formula) -> Formula {
    Formula::Forall(v, Box::new(f))
}
fn not(f: Formula) -> Formula {
    Formula::Not(Box::new(f))
}
fn and(a: Formula, b: Formula) -> Formula {
    Formula::And(Box::new(a), Box::new(b))
}
fn or(a: Formula, b: Formula) -> Formula {
    Formula::Or(Box::new(a), Box::new(b))
}
fn lt(a: Var, b: Var) -> Formula {
    and(Formula::Le(a, b), not(Formula::Eq(a, b)))
}
fn and_all(mut parts: Vec<Formula>) -> Formula {
    let first = parts.remove(0);
    parts.into_iter().fold(first, and)
}

/// `z` is the successor of `x`.
fn succ(b: &mut Build, x: Var, z: Var) -> Formula {
    let w = b.fresh("w");
    and(lt(x, z), not(ex(w, and(lt(x, w), lt(w, z)))))
}

fn u_plus1(b: &mut Build, x: Var) -> Formula {
    let z = b.fresh("z");
    ex(z, and(succ(b, x, z), Formula::U(z)))
}

fn u_plus2(b: &mut Build, x: Var) -> Formula {
    let z1 = b.fresh("z");
    let z2 = b.fresh("z");
    let s1 = succ(b, x, z1);
    let s2 = succ(b, z1, z2);
    ex(z1, ex(z2, and_all(vec![s1, s2, Formula::U(z2)])))
}

fn pattern(b: &mut Build, x: Var) -> Formula {
    let p1 = u_plus1(b, x);
    let p2 = u_plus2(b, x);
    and(Formula::U(x), or(p1, p2))
}

/// The named sentence as a formula.
pub fn builtin(which: Builtin) -> Result<Sentence> {
    let mut b = Build { names: Vec::new() };
    let formula = match which {
        Builtin::A => {
            let x = b.fresh("x");
            ex(x, Formula::U(x))
        }
        Builtin::B => {
            let x = b.fresh("x");
            let y = b.fresh("y");
            ex(x, and(Formula::U(x), all(y, not(lt(y, x)))))
        }
        Builtin::C => {
            let x = b.fresh("x");
            let y = b.fresh("y");
            let z = b.fresh("z");
            ex(
                x,
                ex(
                    y,
                    and_all(vec![
                        Formula::U(x),
                        Formula::U(y),
                        lt(x, y),
                        all(z, not(and(lt(x, z), lt(z, y)))),
                    ]),
                ),
            )
        }
        Builtin::Ak(k) => {
            if k == 0 {
                return Err(LogicError::BadK);
            }
            let xs: Vec<Var> = (0..k).map(|_| b.fresh("x")).collect();
            let mut parts = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    parts.push(not(Formula::Eq(xs[i], xs[j])));
                }
            }
            for &x in &xs {
                parts.push(Formula::U(x));
            }
            for i in 0..k.saturating_sub(1) {
                let z = b.fresh("z");
                parts.push(not(ex(z, Formula::C(xs[i], z, xs[i + 1]))));
            }
            xs.iter().rev().fold(and_all(parts), |f, &x| ex(x, f))
        }
        Builtin::D => {
            let x = b.fresh("x");
            let y = b.fresh("y");
            let px = pattern(&mut b, x);
            let py = pattern(&mut b, y);
            let next = u_plus1(&mut b, x);
            ex(x, and_all(vec![px, not(ex(y, and(py, lt(y, x)))), next]))
        }
    };
    Ok(Sentence::new(formula, which.vocabulary(), &b.names))
}

/// Every built-in: `A, B, C, D` and `A_1 ..= A_max_k`.
pub fn catalog(max_k: usize) -> Vec<Builtin> {
    let mut out = vec![Builtin::A, Builtin::B, Builtin::C, Builtin::D];
    out.extend((1..=max_k).map(Builtin::Ak));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(bits: &str) -> Word {
        Word::parse_bits(bits).unwrap()
    }

    fn lin(s: &Sentence, bits: &str) -> bool {
        let word = w(bits);
        evaluate(&ModelView::linear(&word), s).unwrap()
    }

    #[test]
    fn parse_examples() {
        let a = parse("exists x. U(x)").unwrap();
        assert_eq!(a, builtin(Builtin::A).unwrap());
        assert_eq!(a.qdepth(), 1);
        let b = parse("exists x. U(x) & forall y. !(y < x)").unwrap();
        assert_eq!(b, builtin(Builtin::B).unwrap());
        assert!(matches!(parse("exists x."), Err(LogicError::Syntax { .. })));
        assert!(matches!(parse("exists x. U(y)"), Err(LogicError::FreeVariable { .. })));
        assert!(matches!(
            parse("exists x,y,z. C(x,y,z) & x<=y"),
            Err(LogicError::VocabularyMix { .. })
        ));
        assert!(matches!(parse("exists x. U(x) )"), Err(LogicError::Syntax { .. })));
        assert_eq!(parse("∃x. ∀y. y ≤ x").unwrap().qdepth(), 2);
    }

    #[test]
    fn depth_of_consecutive_101() {
        // 1, 0, 1 at consecutive positions.
        let s = parse(
            "exists x,y,z. x<y & y<z & U(x) & !U(y) & U(z) & \
             !(exists w. (x<w & w<y) | (y<w & w<z))",
        )
        .unwrap();
        assert_eq!(s.qdepth(), 4);
        assert!(lin(&s, "0011010"));
        assert!(!lin(&s, "0110011"));
    }

    #[test]
    fn builtin_depths() {
        assert_eq!(builtin(Builtin::C).unwrap().qdepth(), 3);
        assert_eq!(builtin(Builtin::Ak(1)).unwrap().qdepth(), 1);
        assert_eq!(builtin(Builtin::Ak(3)).unwrap().qdepth(), 4);
        assert_eq!(builtin(Builtin::D).unwrap().qdepth(), 5);
        assert_eq!(Builtin::parse_name("A_3").unwrap(), Builtin::Ak(3));
        assert!(Builtin::parse_name("E").is_err());
        assert_eq!(Builtin::parse_name("A_0").unwrap_err(), LogicError::BadK);
    }

    #[test]
    fn small_evaluations() {
        let a = builtin(Builtin::A).unwrap();
        assert!(lin(&a, "0010"));
        assert!(!lin(&a, "000"));
        let b = builtin(Builtin::B).unwrap();
        assert!(lin(&b, "100"));
        assert!(!lin(&b, "010"));
        let d = builtin(Builtin::D).unwrap();
        assert!(lin(&d, "0110"));
        assert!(!lin(&d, "1011"));
        assert!(lin(&d, "1110"));
        assert!(!lin(&d, "1"));
    }

    #[test]
    fn printer_round_trip() {
        for which in catalog(3) {
            let s = builtin(which).unwrap();
            let text = s.to_string();
            assert_eq!(parse_with(&text, s.vocabulary).unwrap(), s, "{text}");
        }
    }

    #[test]
    fn vocabulary_checks() {
        let ak = builtin(Builtin::Ak(2)).unwrap();
        let word = w("11");
        assert!(matches!(
            evaluate(&ModelView::linear(&word), &ak),
            Err(LogicError::VocabularyMismatch { .. })
        ));
        assert!(evaluate(&ModelView::circular(&word), &ak).unwrap());
        assert!(evaluate(&ModelView::circular(&w("1001")), &ak).unwrap());
        assert!(!evaluate(&ModelView::circular(&w("1")), &ak).unwrap());
    }

    #[test]
    fn work_cap() {
        let s = parse("forall x,y,z. x<=y | y<=z | z<=x").unwrap();
        let word = Word::from_bits(&[0; 40]);
        assert_eq!(
            evaluate_capped(&ModelView::linear(&word), &s, 1000),
            Err(LogicError::WorkCapExceeded(1000))
        );
    }

    #[test]
    fn scanners_match_direct_evaluation() {
        for n in 0..=10usize {
            for mask in 0..(1u32 << n) {
                let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let word = Word::from_bits(&bits);
                for which in catalog(4) {
                    let s = builtin(which).unwrap();
                    if which == Builtin::D && n > 8 {
                        continue;
                    }
                    let model = match which.vocabulary() {
                        Vocabulary::Linear => ModelView::linear(&word),
                        Vocabulary::Circular => ModelView::circular(&word),
                    };
                    assert_eq!(which.scan(word.letters()), evaluate(&model, &s).unwrap(), "{} on {word}", which.name());
                }
            }
        }
    }
}
