//! Leveled interval values of 0/1 words.
//!
//! A 1-interval runs from its start to and including the next one. Its value
//! is `a_i` (i-1 zeroes then a one, `i <= s`) or `b` (at least `s` zeroes),
//! with `s = 3^t`. A (j+1)-interval concatenates j-intervals up to and
//! including the first transient j-value `y`; its value is the pair `(α, y)`
//! where `α` is the depth-`t` class of the string of persistent j-values in
//! the string monoid over `P_j`. The pair is persistent iff `α` is.

use thiserror::Error;

use crate::monoid::{MonoidError, MonoidTable};
use crate::word_types::{Alphabet, EfType, Letter, TypeError, TypeTable, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntervalError {
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("level {level} is not built (max level {max})")]
    LevelNotBuilt { level: usize, max: usize },
    #[error("interval words must be over {{0,1}}, found letter {0}")]
    NotBinary(u16),
    #[error("interval index {index} out of range ({count} complete intervals)")]
    NoSuchInterval { index: usize, count: usize },
    #[error("tail is not an incomplete {0}-interval")]
    NotIncomplete(usize),
    #[error("successor is not a single persistent super {0}-interval")]
    NotPersistentSuper(usize),
    #[error("level {level} has no persistent values to build a string monoid over")]
    NoPersistentValues { level: usize },
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

pub type Result<T> = std::result::Result<T, IntervalError>;

/// How a value is defined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValueKind {
    /// `a_i`: `i - 1` zeroes then a one.
    Ones { index: usize },
    /// `b`: at least `s` zeroes then a one.
    Saturated,
    /// `(α, y)`: `alpha` is an element of the string monoid over `P_{j-1}`,
    /// `tail` the index of a transient `(j-1)`-value.
    Pair { alpha: usize, tail: usize },
}

#[derive(Clone, Debug)]
pub struct Value {
    pub name: String,
    pub persistent: bool,
    pub kind: ValueKind,
    /// A shortest-form word forming exactly one interval of this value.
    pub word: Word,
    /// Depth-`t` type of `word` (equal for every interval with this value).
    pub ef_type: EfType,
}

#[derive(Clone, Debug)]
pub struct LevelValues {
    pub values: Vec<Value>,
    /// `P_j` as value indices; position in this list is the letter in `ΣP_j`.
    pub persistent: Vec<usize>,
    /// `T_j` as value indices.
    pub transient: Vec<usize>,
    letter_of: Vec<Option<Letter>>,
    transient_pos: Vec<Option<usize>>,
}

impl LevelValues {
    fn new(values: Vec<Value>) -> Self {
        let mut persistent = Vec::new();
        let mut transient = Vec::new();
        let mut letter_of = vec![None; values.len()];
        let mut transient_pos = vec![None; values.len()];
        for (i, v) in values.iter().enumerate() {
            if v.persistent {
                letter_of[i] = Some(Letter(persistent.len() as u16));
                persistent.push(i);
            } else {
                transient_pos[i] = Some(transient.len());
                transient.push(i);
            }
        }
        LevelValues {
            values,
            persistent,
            transient,
            letter_of,
            transient_pos,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Letter of a persistent value in the alphabet `P_j`.
    pub fn letter_of(&self, value: usize) -> Option<Letter> {
        self.letter_of[value]
    }

    /// Value index of a letter of `P_j`.
    pub fn value_of_letter(&self, a: Letter) -> usize {
        self.persistent[a.index()]
    }

    pub fn transient_position(&self, value: usize) -> Option<usize> {
        self.transient_pos[value]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.values.iter().position(|v| v.name == name)
    }
}

/// The values `E_1, ..., E_k` for a fixed depth `t`.
#[derive(Debug)]
pub struct ValueSystem {
    t: usize,
    s: usize,
    levels: Vec<LevelValues>,
    /// `monoids[j-1]` is the string monoid over `P_j`, for `j < k`.
    monoids: Vec<MonoidTable>,
    types: TypeTable,
}

/// A complete interval `[start, end)` with its value index at the
/// decomposition's level.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
    pub value: usize,
    pub persistent: bool,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub word: Word,
    pub level: usize,
    pub intervals: Vec<Interval>,
    /// Start of the trailing incomplete interval, which runs to the end.
    pub tail: Option<usize>,
}

impl Decomposition {
    pub fn tail_range(&self) -> Option<(usize, usize)> {
        self.tail.map(|s| (s, self.word.len()))
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.intervals.iter().map(Interval::len).collect()
    }

    pub fn interval_word(&self, index: usize) -> Word {
        let iv = self.intervals[index];
        Word(self.word.0[iv.start..iv.end].to_vec())
    }
}

/// Default element cap for the string monoids.
pub const DEFAULT_LEVEL_CAP: usize = crate::monoid::DEFAULT_CAP;

impl ValueSystem {
    /// Builds levels `1..=k` at depth `t`.
    pub fn build(t: usize, k: usize, cap: usize) -> Result<Self> {
        if k == 0 {
            return Err(IntervalError::ZeroLevel);
        }
        let s = 3usize.pow(t as u32);
        let mut types = TypeTable::new(Alphabet::binary(), t);
        let mut level1 = Vec::with_capacity(s + 1);
        for i in 1..=s {
            let word = ones_word(i - 1);
            let ef_type = types.ef_type(&word)?;
            level1.push(Value {
                name: format!("a{i}"),
                persistent: false,
                kind: ValueKind::Ones { index: i },
                word,
                ef_type,
            });
        }
        let word = ones_word(s);
        let ef_type = types.ef_type(&word)?;
        level1.push(Value {
            name: "b".into(),
            persistent: true,
            kind: ValueKind::Saturated,
            word,
            ef_type,
        });
        let mut vs = ValueSystem {
            t,
            s,
            levels: vec![LevelValues::new(level1)],
            monoids: Vec::new(),
            types,
        };
        for j in 1..k {
            let monoid = vs.string_monoid(j, cap)?;
            let next = vs.pair_level(j, &monoid)?;
            vs.monoids.push(monoid);
            vs.levels.push(next);
        }
        Ok(vs)
    }

    /// Generates the depth-`t` monoid of strings over `P_j`.
    pub fn string_monoid(&self, j: usize, cap: usize) -> Result<MonoidTable> {
        let level = self.level(j)?;
        if level.persistent.is_empty() {
            return Err(IntervalError::NoPersistentValues { level: j });
        }
        let symbols = level
            .persistent
            .iter()
            .map(|&v| component_name(j, &level.values[v].name));
        let alphabet = Alphabet::new(symbols)?;
        Ok(MonoidTable::generate(alphabet, self.t, cap)?)
    }

    fn pair_level(&mut self, j: usize, monoid: &MonoidTable) -> Result<LevelValues> {
        let lower = &self.levels[j - 1];
        let mut values = Vec::with_capacity(monoid.len() * lower.transient.len());
        for alpha in 0..monoid.len() {
            let rep = monoid.representative(alpha);
            let alpha_name = if rep.is_empty() {
                "O".to_string()
            } else {
                rep.iter()
                    .map(|&a| monoid.alphabet().symbol(a).to_string())
                    .collect::<Vec<_>>()
                    .join("+")
            };
            let mut prefix = Word::empty();
            for &a in rep.iter() {
                prefix = prefix.concat(&lower.values[lower.value_of_letter(a)].word);
            }
            for &y in &lower.transient {
                let tail = &lower.values[y];
                let word = prefix.concat(&tail.word);
                values.push((
                    format!("{}|{}", alpha_name, component_name(j, &tail.name)),
                    monoid.is_persistent(alpha),
                    ValueKind::Pair { alpha, tail: y },
                    word,
                ));
            }
        }
        let values = values
            .into_iter()
            .map(|(name, persistent, kind, word)| {
                let ef_type = self.types.fold_word(&word)?;
                Ok(Value {
                    name,
                    persistent,
                    kind,
                    word,
                    ef_type,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LevelValues::new(values))
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Saturation threshold `s = 3^t`.
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, j: usize) -> Result<&LevelValues> {
        if j == 0 {
            return Err(IntervalError::ZeroLevel);
        }
        self.levels.get(j - 1).ok_or(IntervalError::LevelNotBuilt {
            level: j,
            max: self.levels.len(),
        })
    }

    /// String monoid over `P_j`, available for `j < k`.
    pub fn monoid(&self, j: usize) -> Result<&MonoidTable> {
        if j == 0 {
            return Err(IntervalError::ZeroLevel);
        }
        self.monoids.get(j - 1).ok_or(IntervalError::LevelNotBuilt {
            level: j + 1,
            max: self.levels.len(),
        })
    }

    pub fn value(&self, j: usize, index: usize) -> Result<&Value> {
        Ok(&self.level(j)?.values[index])
    }

    /// Binary type table holding every value's linked type.
    pub fn types(&self) -> &TypeTable {
        &self.types
    }

    /// Level-1 value of `zeros` zeroes followed by a one.
    pub fn level1_value(&self, zeros: usize) -> usize {
        zeros.min(self.s)
    }

    /// Index of the `b` value at level 1.
    pub fn b(&self) -> usize {
        self.s
    }

    /// Index of `(α, y)` at level `j + 1`.
    pub fn pair_index(&self, j: usize, alpha: usize, y: usize) -> Result<usize> {
        let lower = self.level(j)?;
        let pos = lower.transient_position(y).expect("tail value must be transient");
        Ok(alpha * lower.transient.len() + pos)
    }

    /// Splits a 0/1 word into consecutive complete `level`-intervals from the
    /// start, plus an incomplete tail.
    pub fn decompose(&self, word: &Word, level: usize) -> Result<Decomposition> {
        self.level(level)?;
        if let Some(l) = word.iter().find(|l| l.0 > 1) {
            return Err(IntervalError::NotBinary(l.0));
        }
        let (mut intervals, mut tail) = self.level_one(word);
        for j in 1..level {
            let (next, next_tail) = self.group(j, &intervals, tail, word.len())?;
            intervals = next;
            tail = next_tail;
        }
        Ok(Decomposition {
            word: word.clone(),
            level,
            intervals,
            tail,
        })
    }

    fn level_one(&self, word: &Word) -> (Vec<Interval>, Option<usize>) {
        let mut intervals = Vec::new();
        let mut start = 0;
        for (i, l) in word.iter().enumerate() {
            if l.0 == 1 {
                let value = self.level1_value(i - start);
                intervals.push(Interval {
                    start,
                    end: i + 1,
                    value,
                    persistent: value == self.s,
                });
                start = i + 1;
            }
        }
        let tail = (start < word.len()).then_some(start);
        (intervals, tail)
    }

    fn group(
        &self,
        j: usize,
        lower: &[Interval],
        lower_tail: Option<usize>,
        len: usize,
    ) -> Result<(Vec<Interval>, Option<usize>)> {
        let values = self.level(j)?;
        let monoid = self.monoid(j)?;
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        let mut alpha = monoid.identity();
        for iv in lower {
            let first = *start.get_or_insert(iv.start);
            if iv.persistent {
                alpha = monoid.right(alpha, values.letter_of(iv.value).unwrap());
            } else {
                let value = self.pair_index(j, alpha, iv.value)?;
                out.push(Interval {
                    start: first,
                    end: iv.end,
                    value,
                    persistent: monoid.is_persistent(alpha),
                });
                start = None;
                alpha = monoid.identity();
            }
        }
        let tail = start.or(lower_tail).filter(|&s| s < len);
        Ok((out, tail))
    }

    /// Whether complete interval `index` of `d` is a super interval: for each
    /// `j < level`, the persistent j-values of the (j+1)-interval starting at
    /// the interval's start, with the first one dropped, form a persistent
    /// string. Every 1-interval qualifies vacuously.
    pub fn is_super(&self, d: &Decomposition, index: usize) -> Result<bool> {
        let iv = *d.intervals.get(index).ok_or(IntervalError::NoSuchInterval {
            index,
            count: d.intervals.len(),
        })?;
        self.is_super_word(&Word(d.word.0[iv.start..iv.end].to_vec()), d.level)
    }

    /// [`Self::is_super`] for a word that is exactly one `level`-interval.
    pub fn is_super_word(&self, word: &Word, level: usize) -> Result<bool> {
        for j in 1..level {
            let inner = self.decompose(word, j)?;
            let values = self.level(j)?;
            let monoid = self.monoid(j)?;
            let mut alpha = monoid.identity();
            for iv in inner.intervals.iter().skip(1) {
                if !iv.persistent {
                    break;
                }
                alpha = monoid.right(alpha, values.letter_of(iv.value).unwrap());
            }
            let first_persistent = inner.intervals.first().is_some_and(|iv| iv.persistent);
            if !first_persistent || !monoid.is_persistent(alpha) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Value of `tail ++ successor` where `tail` is an incomplete
    /// `level`-interval and `successor` a persistent super `level`-interval,
    /// computed level by level from the two pieces' own decompositions.
    pub fn glue(&self, tail: &Word, successor: &Word, level: usize) -> Result<usize> {
        let t = self.decompose(tail, level)?;
        if !t.intervals.is_empty() {
            return Err(IntervalError::NotIncomplete(level));
        }
        let s = self.decompose(successor, level)?;
        let single = s.tail.is_none() && s.intervals.len() == 1 && s.intervals[0].persistent;
        if !single || !self.is_super(&s, 0)? {
            return Err(IntervalError::NotPersistentSuper(level));
        }
        self.glue_inner(tail, successor, level)
    }

    fn glue_inner(&self, tail: &Word, successor: &Word, level: usize) -> Result<usize> {
        if level == 1 {
            return Ok(self.b());
        }
        let j = level - 1;
        let values = self.level(j)?;
        let monoid = self.monoid(j)?;
        let lt = self.decompose(tail, j)?;
        let ls = self.decompose(successor, j)?;
        let (last, body) = ls.intervals.split_last().expect("complete interval");
        let (first, rest) = body.split_first().expect("persistent interval");
        let inner_tail = Word(tail.0[lt.tail.unwrap_or(tail.len())..].to_vec());
        let merged = self.glue_inner(&inner_tail, &ls.interval_word(0), j)?;
        debug_assert!(first.persistent);
        let mut alpha = monoid.identity();
        for iv in &lt.intervals {
            alpha = monoid.right(alpha, values.letter_of(iv.value).unwrap());
        }
        alpha = monoid.right(alpha, values.letter_of(merged).unwrap());
        for iv in rest {
            alpha = monoid.right(alpha, values.letter_of(iv.value).unwrap());
        }
        self.pair_index(j, alpha, last.value)
    }

    /// Counts per level: `(|E_j|, |P_j|, |T_j|)`.
    pub fn summary(&self) -> Vec<(usize, usize, usize)> {
        self.levels
            .iter()
            .map(|l| (l.len(), l.persistent.len(), l.transient.len()))
            .collect()
    }
}

fn ones_word(zeros: usize) -> Word {
    let mut bits = vec![0u8; zeros];
    bits.push(1);
    Word::from_bits(&bits)
}

/// Name of a `j`-value when used as a letter or a component of a higher
/// value; composite names are bracketed.
fn component_name(j: usize, name: &str) -> String {
    if j >= 2 {
        format!("<{name}>")
    } else {
        name.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs22() -> ValueSystem {
        ValueSystem::build(2, 2, DEFAULT_LEVEL_CAP).unwrap()
    }

    #[test]
    fn level_counts_at_depth_two() {
        let vs = vs22();
        assert_eq!(vs.s(), 9);
        assert_eq!(vs.summary()[0], (10, 1, 9));
        // Powers of b collapse from 3b on at depth 2, so α ranges over O, b, 2b, 3b.
        assert_eq!(vs.summary()[1], (36, 9, 27));
        let l2 = vs.level(2).unwrap();
        for &v in &l2.persistent {
            assert!(l2.values[v].name.starts_with("b+b+b|"));
        }
    }

    #[test]
    fn single_one_is_transient_at_every_level() {
        let vs = vs22();
        let d1 = vs.decompose(&Word::parse_bits("1").unwrap(), 1).unwrap();
        assert_eq!(d1.intervals, vec![Interval { start: 0, end: 1, value: 0, persistent: false }]);
        let d2 = vs.decompose(&Word::parse_bits("1").unwrap(), 2).unwrap();
        assert_eq!(d2.intervals.len(), 1);
        assert_eq!(d2.intervals[0].end, 1);
        assert!(!d2.intervals[0].persistent);
        assert_eq!(vs.value(2, d2.intervals[0].value).unwrap().name, "O|a1");
    }

    #[test]
    fn level_one_examples() {
        let vs = vs22();
        let d = vs.decompose(&Word::parse_bits("001").unwrap(), 1).unwrap();
        assert_eq!(d.intervals.len(), 1);
        assert_eq!(vs.value(1, d.intervals[0].value).unwrap().name, "a3");
        assert_eq!(d.tail, None);
        let d = vs.decompose(&Word::parse_bits("000").unwrap(), 1).unwrap();
        assert!(d.intervals.is_empty());
        assert_eq!(d.tail, Some(0));
        let d = vs.decompose(&Word::empty(), 2).unwrap();
        assert!(d.intervals.is_empty() && d.tail.is_none());
    }

    #[test]
    fn two_saturated_runs_then_short_gap() {
        let vs = vs22();
        let w = Word::parse_bits("0000000001000000000101").unwrap();
        let d = vs.decompose(&w, 2).unwrap();
        assert_eq!(d.intervals.len(), 1);
        let iv = d.intervals[0];
        assert_eq!((iv.start, iv.end), (0, 22));
        assert!(!iv.persistent);
        assert_eq!(vs.value(2, iv.value).unwrap().name, "b+b|a2");
    }

    #[test]
    fn linked_types_match_intervals() {
        let vs = vs22();
        let mut tt = TypeTable::new(Alphabet::binary(), 2);
        for j in 1..=2 {
            for v in &vs.level(j).unwrap().values {
                let d = vs.decompose(&v.word, j).unwrap();
                assert_eq!(d.intervals.len(), 1, "{}", v.name);
                assert_eq!(d.tail, None);
                assert_eq!(vs.value(j, d.intervals[0].value).unwrap().name, v.name);
                let direct = tt.ef_type(&v.word).unwrap();
                assert_eq!(tt.serialize(direct), vs.types().serialize(v.ef_type));
            }
        }
    }

    #[test]
    fn super_intervals() {
        let vs = vs22();
        let b = "0000000001";
        // Three saturated runs make the 2-value persistent but dropping the
        // first leaves only two.
        let w3 = Word::parse_bits(&format!("{b}{b}{b}1")).unwrap();
        let d = vs.decompose(&w3, 2).unwrap();
        assert!(d.intervals[0].persistent);
        assert!(!vs.is_super(&d, 0).unwrap());
        let w4 = Word::parse_bits(&format!("{b}{b}{b}{b}1")).unwrap();
        let d = vs.decompose(&w4, 2).unwrap();
        assert!(vs.is_super(&d, 0).unwrap());
        // Level one is vacuous.
        let d = vs.decompose(&Word::parse_bits(b).unwrap(), 1).unwrap();
        assert!(vs.is_super(&d, 0).unwrap());
    }

    #[test]
    fn glue_level_one_and_two() {
        let vs = vs22();
        let b = "0000000001";
        let g = vs
            .glue(&Word::parse_bits("000").unwrap(), &Word::parse_bits(b).unwrap(), 1)
            .unwrap();
        assert_eq!(g, vs.b());
        let succ = Word::parse_bits(&format!("{b}{b}{b}{b}001")).unwrap();
        let tail = Word::parse_bits(&format!("{b}00000")).unwrap();
        let g = vs.glue(&tail, &succ, 2).unwrap();
        assert!(vs.value(2, g).unwrap().persistent);
        let d = vs.decompose(&tail.concat(&succ), 2).unwrap();
        assert_eq!(d.intervals.len(), 1);
        assert_eq!(d.intervals[0].value, g);
        assert_eq!(vs.glue(&Word::empty(), &succ, 2).unwrap(), vs.decompose(&succ, 2).unwrap().intervals[0].value);
        assert_eq!(
            vs.glue(&tail, &Word::parse_bits(&format!("{b}{b}{b}1")).unwrap(), 2),
            Err(IntervalError::NotPersistentSuper(2))
        );
        assert_eq!(
            vs.glue(&Word::parse_bits("1").unwrap(), &succ, 2),
            Err(IntervalError::NotIncomplete(2))
        );
    }

    #[test]
    fn missing_levels_are_errors() {
        let vs = ValueSystem::build(2, 1, 100).unwrap();
        assert!(matches!(vs.decompose(&Word::empty(), 2), Err(IntervalError::LevelNotBuilt { .. })));
        assert_eq!(ValueSystem::build(2, 0, 100).unwrap_err(), IntervalError::ZeroLevel);
        assert!(matches!(
            vs.decompose(&Word(vec![Letter(2)]), 1),
            Err(IntervalError::NotBinary(2))
        ));
    }
}
