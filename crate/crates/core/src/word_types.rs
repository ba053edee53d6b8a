//! Depth-`t` Ehrenfeucht types of finite words.
//!
//! A type at depth 0 is a single unit marker. A type at depth `d >= 1` is the
//! finite set of triples `(prefix type, letter, suffix type)` over all split
//! positions of the word, where prefix and suffix types are taken at depth
//! `d - 1`. Two words get the same depth-`d` body exactly when Duplicator wins
//! the `d`-round game on them, so bodies are interned and compared by id.
//!
//! [`TypeTable`] owns the interned bodies. Two independent routes produce a
//! type: [`TypeTable::ef_type`] recomputes the split set over every subword
//! interval, while [`TypeTable::compose`] combines bodies structurally and is
//! what every fast path (folds over long words, monoid generation) uses.
//! [`game_oracle`] is a third, fully independent route that plays the game.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

/// Errors raised by type computations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("alphabet must contain at least one letter")]
    EmptyAlphabet,
    #[error("duplicate letter `{0}` in alphabet")]
    DuplicateLetter(String),
    #[error("invalid letter symbol `{0}`: symbols must be nonempty and avoid whitespace and `[](),;.`")]
    InvalidSymbol(String),
    #[error("letter {letter} is outside an alphabet of {size} letters")]
    LetterOutOfRange { letter: u16, size: usize },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("depth mismatch: {left} vs {right}")]
    DepthMismatch { left: usize, right: usize },
    #[error("depth {requested} exceeds the table depth {max}")]
    DepthTooLarge { requested: usize, max: usize },
    #[error("game too large for exhaustive search: total length {total_len} (max {max_len}), rounds {rounds} (max {max_rounds})")]
    GameTooLarge {
        total_len: usize,
        max_len: usize,
        rounds: usize,
        max_rounds: usize,
    },
}

pub type Result<T> = std::result::Result<T, TypeError>;

/// A letter, stored as its index in the owning [`Alphabet`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub u16);

impl Letter {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An ordered finite set of letter symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(TypeError::EmptyAlphabet);
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(|c| c.is_whitespace() || "[](),;.".contains(c)) {
                return Err(TypeError::InvalidSymbol(s.clone()));
            }
            if symbols[..i].contains(s) {
                return Err(TypeError::DuplicateLetter(s.clone()));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// The alphabet `{0, 1}` used for unary predicates.
    pub fn binary() -> Self {
        Alphabet {
            symbols: vec!["0".into(), "1".into()],
        }
    }

    /// `n` letters named `prefix0`, `prefix1`, ...
    pub fn indexed(prefix: &str, n: usize) -> Result<Self> {
        Alphabet::new((0..n).map(|i| format!("{prefix}{i}")))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, letter: Letter) -> &str {
        &self.symbols[letter.index()]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn letter(&self, symbol: &str) -> Option<Letter> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .map(|i| Letter(i as u16))
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.symbols.len()).map(|i| Letter(i as u16))
    }

    pub fn contains(&self, letter: Letter) -> bool {
        letter.index() < self.symbols.len()
    }

    /// Parses a word. When every symbol is a single character the text is read
    /// character by character (whitespace ignored), otherwise it is split on
    /// whitespace.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let single = self.symbols.iter().all(|s| s.chars().count() == 1);
        let tokens: Vec<String> = if single {
            text.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c.to_string())
                .collect()
        } else {
            text.split_whitespace().map(str::to_string).collect()
        };
        tokens
            .iter()
            .map(|t| self.letter(t).ok_or_else(|| TypeError::UnknownSymbol(t.clone())))
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn format_word(&self, word: &Word) -> String {
        let single = self.symbols.iter().all(|s| s.chars().count() == 1);
        let parts: Vec<&str> = word.iter().map(|&l| self.symbol(l)).collect();
        if single {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }

    pub fn check_word(&self, word: &Word) -> Result<()> {
        match word.iter().find(|l| !self.contains(**l)) {
            Some(l) => Err(TypeError::LetterOutOfRange {
                letter: l.0,
                size: self.len(),
            }),
            None => Ok(()),
        }
    }
}

/// A finite sequence of letters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a binary word from `0`/`1` values.
    pub fn from_bits(bits: &[u8]) -> Self {
        Word(bits.iter().map(|&b| Letter(b as u16)).collect())
    }

    /// Parses a `0`/`1` string, e.g. `"01110001"`.
    pub fn parse_bits(text: &str) -> Result<Self> {
        Alphabet::binary().parse_word(text)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Letter> {
        self.0.iter()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn repeat(&self, times: usize) -> Word {
        Word(self.0.repeat(times))
    }

    /// Letter values as bits; only meaningful for binary words.
    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|l| l.0 as u8).collect()
    }
}

impl From<Vec<Letter>> for Word {
    fn from(v: Vec<Letter>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.0)?;
        }
        Ok(())
    }
}

/// Handle to an interned type; only meaningful together with the
/// [`TypeTable`] that produced it.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EfType {
    depth: u8,
    id: u32,
}

impl EfType {
    pub fn depth(self) -> usize {
        self.depth as usize
    }

    pub fn id(self) -> u32 {
        self.id
    }
}

type Triple = (u32, Letter, u32);
type Body = Box<[Triple]>;

#[derive(Default)]
struct Level {
    bodies: Vec<Body>,
    index: HashMap<Body, u32>,
    reps: Vec<Word>,
    lower: Vec<Option<u32>>,
    compose_memo: HashMap<(u32, u32), u32>,
}

/// Interned depth-`d` types for `d = 0..=depth` over one alphabet.
pub struct TypeTable {
    alphabet: Alphabet,
    depth: usize,
    levels: Vec<Level>,
}

impl fmt::Debug for TypeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TypeTable")
            .field("alphabet", &self.alphabet)
            .field("depth", &self.depth)
            .field(
                "sizes",
                &self.levels.iter().map(|l| l.bodies.len()).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl TypeTable {
    pub fn new(alphabet: Alphabet, depth: usize) -> Self {
        let mut levels: Vec<Level> = (0..=depth).map(|_| Level::default()).collect();
        // Depth 0 has a single class shared by every word.
        let unit: Body = Box::new([]);
        levels[0].index.insert(unit.clone(), 0);
        levels[0].bodies.push(unit);
        levels[0].reps.push(Word::empty());
        levels[0].lower.push(None);
        TypeTable {
            alphabet,
            depth,
            levels,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of distinct types interned so far at depth `d`.
    pub fn interned(&self, d: usize) -> usize {
        self.levels[d].bodies.len()
    }

    fn intern(&mut self, depth: usize, mut triples: Vec<Triple>, rep: &[Letter]) -> u32 {
        if depth == 0 {
            return 0;
        }
        triples.sort_unstable();
        triples.dedup();
        let body: Body = triples.into_boxed_slice();
        let level = &mut self.levels[depth];
        if let Some(&id) = level.index.get(&body) {
            if rep.len() < level.reps[id as usize].len() {
                level.reps[id as usize] = Word(rep.to_vec());
            }
            return id;
        }
        let id = level.bodies.len() as u32;
        level.index.insert(body.clone(), id);
        level.bodies.push(body);
        level.reps.push(Word(rep.to_vec()));
        level.lower.push(None);
        id
    }

    fn handle(depth: usize, id: u32) -> EfType {
        EfType {
            depth: depth as u8,
            id,
        }
    }

    fn check_depth(&self, d: usize) -> Result<()> {
        if d > self.depth {
            Err(TypeError::DepthTooLarge {
                requested: d,
                max: self.depth,
            })
        } else {
            Ok(())
        }
    }

    /// The identity class `O` (type of the empty word) at the table depth.
    pub fn identity(&mut self) -> EfType {
        self.identity_at(self.depth)
    }

    pub fn identity_at(&mut self, d: usize) -> EfType {
        let id = self.intern(d, Vec::new(), &[]);
        Self::handle(d, id)
    }

    /// The class of the one-letter word `a`.
    pub fn generator(&mut self, a: Letter) -> EfType {
        self.generator_at(a, self.depth)
    }

    pub fn generator_at(&mut self, a: Letter, d: usize) -> EfType {
        let id = self.generator_id(a, d);
        Self::handle(d, id)
    }

    fn generator_id(&mut self, a: Letter, d: usize) -> u32 {
        if d == 0 {
            return 0;
        }
        let empty = self.intern(d - 1, Vec::new(), &[]);
        self.intern(d, vec![(empty, a, empty)], &[a])
    }

    /// Depth-`t` type of `w` by the split-set recursion, memoized over
    /// `(start, end, depth)` subword intervals. Cost is cubic in `|w|` per
    /// depth, so this is the reference route for short words.
    pub fn ef_type(&mut self, w: &Word) -> Result<EfType> {
        self.ef_type_at(w, self.depth)
    }

    pub fn ef_type_at(&mut self, w: &Word, t: usize) -> Result<EfType> {
        self.check_depth(t)?;
        self.alphabet.check_word(w)?;
        let n = w.len();
        let letters = w.letters();
        if t == 0 {
            return Ok(Self::handle(0, 0));
        }
        // below[i][j - i] holds the depth d-1 id of w[i..j).
        let mut below: Vec<Vec<u32>> = (0..=n).map(|i| vec![0; n - i + 1]).collect();
        for d in 1..t {
            let mut current: Vec<Vec<u32>> = (0..=n).map(|i| vec![0; n - i + 1]).collect();
            for i in 0..=n {
                for j in i..=n {
                    let triples = (i..j)
                        .map(|m| (below[i][m - i], letters[m], below[m + 1][j - m - 1]))
                        .collect();
                    current[i][j - i] = self.intern(d, triples, &letters[i..j]);
                }
            }
            below = current;
        }
        let triples = (0..n)
            .map(|m| (below[0][m], letters[m], below[m + 1][n - m - 1]))
            .collect();
        let id = self.intern(t, triples, letters);
        Ok(Self::handle(t, id))
    }

    /// Type of `w` by folding [`TypeTable::compose`] over its letters; linear in
    /// `|w|` once the compose memo is warm.
    pub fn fold_word(&mut self, w: &Word) -> Result<EfType> {
        self.fold_word_at(w, self.depth)
    }

    pub fn fold_word_at(&mut self, w: &Word, t: usize) -> Result<EfType> {
        self.check_depth(t)?;
        self.alphabet.check_word(w)?;
        let mut acc = self.intern(t, Vec::new(), &[]);
        for &a in w.iter() {
            let g = self.generator_id(a, t);
            acc = self.compose_ids(t, acc, g);
        }
        Ok(Self::handle(t, acc))
    }

    /// Concatenation of classes. The result equals the type of the
    /// concatenated representatives and does not depend on which
    /// representatives are chosen.
    pub fn compose(&mut self, x: EfType, y: EfType) -> Result<EfType> {
        if x.depth != y.depth {
            return Err(TypeError::DepthMismatch {
                left: x.depth(),
                right: y.depth(),
            });
        }
        self.check_depth(x.depth())?;
        let id = self.compose_ids(x.depth(), x.id, y.id);
        Ok(Self::handle(x.depth(), id))
    }

    fn compose_ids(&mut self, d: usize, x: u32, y: u32) -> u32 {
        if d == 0 {
            return 0;
        }
        if let Some(&z) = self.levels[d].compose_memo.get(&(x, y)) {
            return z;
        }
        let xl = self.lower_id(d, x);
        let yl = self.lower_id(d, y);
        let bx = self.levels[d].bodies[x as usize].clone();
        let by = self.levels[d].bodies[y as usize].clone();
        let mut triples = Vec::with_capacity(bx.len() + by.len());
        for &(p, a, s) in bx.iter() {
            let s2 = self.compose_ids(d - 1, s, yl);
            triples.push((p, a, s2));
        }
        for &(p, a, s) in by.iter() {
            let p2 = self.compose_ids(d - 1, xl, p);
            triples.push((p2, a, s));
        }
        let mut rep = self.levels[d].reps[x as usize].0.clone();
        rep.extend_from_slice(&self.levels[d].reps[y as usize].0);
        let z = self.intern(d, triples, &rep);
        self.levels[d].compose_memo.insert((x, y), z);
        z
    }

    /// Projection of a depth-`d` class to depth `d - 1`.
    fn lower_id(&mut self, d: usize, x: u32) -> u32 {
        debug_assert!(d >= 1);
        if d == 1 {
            return 0;
        }
        if let Some(l) = self.levels[d].lower[x as usize] {
            return l;
        }
        let body = self.levels[d].bodies[x as usize].clone();
        let triples = body
            .iter()
            .map(|&(p, a, s)| {
                let p2 = self.lower_id(d - 1, p);
                let s2 = self.lower_id(d - 1, s);
                (p2, a, s2)
            })
            .collect();
        let rep = self.levels[d].reps[x as usize].clone();
        let l = self.intern(d - 1, triples, &rep.0);
        self.levels[d].lower[x as usize] = Some(l);
        l
    }

    /// The same class viewed at a smaller depth.
    pub fn project(&mut self, x: EfType, d: usize) -> Result<EfType> {
        if d > x.depth() {
            return Err(TypeError::DepthMismatch {
                left: x.depth(),
                right: d,
            });
        }
        let mut id = x.id;
        for level in (d + 1..=x.depth()).rev() {
            id = self.lower_id(level, id);
        }
        Ok(Self::handle(d, id))
    }

    /// `j * x`, i.e. `x` composed with itself `j` times (`0 * x = O`).
    pub fn power(&mut self, x: EfType, j: usize) -> EfType {
        let d = x.depth();
        let mut acc = self.intern(d, Vec::new(), &[]);
        for _ in 0..j {
            acc = self.compose_ids(d, acc, x.id);
        }
        Self::handle(d, acc)
    }

    /// Minimal `s'` such that `j * x = s' * x` for every `s' <= j <= s' + 3^t`.
    /// For `O` this is 1.
    pub fn power_collapse_index(&mut self, x: EfType) -> usize {
        let window = 3usize.pow(x.depth() as u32);
        let mut powers = vec![self.power(x, 0)];
        let mut s = 1;
        loop {
            while powers.len() <= s + window {
                let next = self.compose(*powers.last().unwrap(), x).unwrap();
                powers.push(next);
            }
            if powers[s..=s + window].iter().all(|&p| p == powers[s]) {
                return s;
            }
            s += 1;
        }
    }

    /// Shortest word seen so far in this class.
    pub fn representative(&self, x: EfType) -> &Word {
        &self.levels[x.depth()].reps[x.id as usize]
    }

    /// Whether the two words have the same depth-`t` type.
    pub fn ef_equivalent(&mut self, w1: &Word, w2: &Word, t: usize) -> Result<bool> {
        let a = self.ef_type_at(w1, t)?;
        let b = self.ef_type_at(w2, t)?;
        Ok(a == b)
    }

    /// Deterministic text form of a class.
    ///
    /// ```text
    /// type    := "." | "[" [ triple { ";" triple } ] "]"
    /// triple  := "(" type "," symbol "," type ")"
    /// ```
    ///
    /// Depth 0 prints as `.`; triples are sorted by their own serialized text,
    /// so the output does not depend on interning order.
    pub fn serialize(&self, x: EfType) -> String {
        let mut memo: Vec<BTreeMap<u32, String>> = vec![BTreeMap::new(); self.depth + 1];
        self.serialize_rec(x.depth(), x.id, &mut memo)
    }

    fn serialize_rec(&self, d: usize, id: u32, memo: &mut Vec<BTreeMap<u32, String>>) -> String {
        if d == 0 {
            return ".".to_string();
        }
        if let Some(s) = memo[d].get(&id) {
            return s.clone();
        }
        let body = &self.levels[d].bodies[id as usize];
        let mut parts: Vec<String> = body
            .iter()
            .map(|&(p, a, s)| {
                format!(
                    "({},{},{})",
                    self.serialize_rec(d - 1, p, memo),
                    self.alphabet.symbol(a),
                    self.serialize_rec(d - 1, s, memo)
                )
            })
            .collect();
        parts.sort();
        let out = format!("[{}]", parts.join(";"));
        memo[d].insert(id, out.clone());
        out
    }

    /// Number of split triples in the body of `x`.
    pub fn body_len(&self, x: EfType) -> usize {
        self.levels[x.depth()].bodies[x.id as usize].len()
    }
}

/// Size limits for the exhaustive game search.
#[derive(Copy, Clone, Debug)]
pub struct GameGuard {
    pub max_total_len: usize,
    pub max_rounds: usize,
}

impl Default for GameGuard {
    fn default() -> Self {
        GameGuard {
            max_total_len: 24,
            max_rounds: 3,
        }
    }
}

/// State of a partially played game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameState<'a> {
    pub left: &'a [Letter],
    pub right: &'a [Letter],
    pub left_picks: Vec<usize>,
    pub right_picks: Vec<usize>,
    pub rounds_left: usize,
}

impl<'a> GameState<'a> {
    pub fn new(left: &'a Word, right: &'a Word, rounds: usize) -> Self {
        GameState {
            left: left.letters(),
            right: right.letters(),
            left_picks: Vec::new(),
            right_picks: Vec::new(),
            rounds_left: rounds,
        }
    }

    /// Whether adding the pair `(i, j)` keeps the picks a partial isomorphism.
    fn compatible(&self, i: usize, j: usize) -> bool {
        if self.left[i] != self.right[j] {
            return false;
        }
        self.left_picks
            .iter()
            .zip(&self.right_picks)
            .all(|(&a, &b)| (i < a) == (j < b) && (i == a) == (j == b))
    }

    fn duplicator_wins(&mut self) -> bool {
        if self.rounds_left == 0 {
            return true;
        }
        for spoiler_left in [true, false] {
            let spoiler_len = if spoiler_left { self.left.len() } else { self.right.len() };
            let reply_len = if spoiler_left { self.right.len() } else { self.left.len() };
            for m in 0..spoiler_len {
                let mut answered = false;
                for r in 0..reply_len {
                    let (i, j) = if spoiler_left { (m, r) } else { (r, m) };
                    if !self.compatible(i, j) {
                        continue;
                    }
                    self.left_picks.push(i);
                    self.right_picks.push(j);
                    self.rounds_left -= 1;
                    let win = self.duplicator_wins();
                    self.rounds_left += 1;
                    self.left_picks.pop();
                    self.right_picks.pop();
                    if win {
                        answered = true;
                        break;
                    }
                }
                if !answered {
                    return false;
                }
            }
        }
        true
    }
}

/// Exhaustive minimax: true iff Duplicator wins the `t`-round game on the two
/// words, preserving letters, order and equality of picked positions.
pub fn game_oracle(w1: &Word, w2: &Word, t: usize) -> Result<bool> {
    game_oracle_guarded(w1, w2, t, GameGuard::default())
}

pub fn game_oracle_guarded(w1: &Word, w2: &Word, t: usize, guard: GameGuard) -> Result<bool> {
    let total = w1.len() + w2.len();
    if total > guard.max_total_len || t > guard.max_rounds {
        return Err(TypeError::GameTooLarge {
            total_len: total,
            max_len: guard.max_total_len,
            rounds: t,
            max_rounds: guard.max_rounds,
        });
    }
    Ok(GameState::new(w1, w2, t).duplicator_wins())
}
