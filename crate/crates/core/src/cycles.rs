//! Words read cyclically.
//!
//! Removing one chosen position from a cycle leaves the linear word that
//! starts there, so the depth-`(t+1)` class of a cycle is the set of
//! depth-`t` types of its rotations.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::intervals::{IntervalError, ValueSystem};
use crate::monoid::{MonoidError, MonoidTable};
use crate::word_types::{EfType, Letter, TypeError, TypeTable, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycleError {
    #[error("a cycle needs at least one position")]
    EmptyCycle,
    #[error("segments do not tile the cycle: {0}")]
    CoverMismatch(String),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

pub type Result<T> = std::result::Result<T, CycleError>;

/// A nonempty word with position 0 following the last position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CycleWord(Word);

impl CycleWord {
    pub fn new(word: Word) -> Result<Self> {
        if word.is_empty() {
            return Err(CycleError::EmptyCycle);
        }
        Ok(CycleWord(word))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn letters(&self) -> &[Letter] {
        self.0.letters()
    }

    /// The linear word read from position `r`.
    pub fn rotation(&self, r: usize) -> Word {
        let r = r % self.len();
        let mut v = self.0 .0[r..].to_vec();
        v.extend_from_slice(&self.0 .0[..r]);
        Word(v)
    }

    pub fn rotate(&self, r: usize) -> CycleWord {
        CycleWord(self.rotation(r))
    }
}

/// The set of rotation types, sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CircularType {
    pub types: Vec<EfType>,
}

impl CircularType {
    /// Canonical serializations, sorted.
    pub fn serialize(&self, tt: &TypeTable) -> Vec<String> {
        let mut out: Vec<String> = self.types.iter().map(|&x| tt.serialize(x)).collect();
        out.sort();
        out
    }
}

/// Rotation types computed one rotation at a time with the type table.
pub fn circular_type(tt: &mut TypeTable, cycle: &CycleWord) -> Result<CircularType> {
    let mut set = BTreeSet::new();
    for r in 0..cycle.len() {
        set.insert(tt.fold_word(&cycle.rotation(r))?);
    }
    Ok(CircularType {
        types: set.into_iter().collect(),
    })
}

/// Rotation types as monoid elements, from prefix and suffix classes:
/// the rotation at `r` is `class(c[r..]) + class(c[..r])`.
pub fn circular_type_in(m: &MonoidTable, cycle: &CycleWord) -> BTreeSet<usize> {
    let letters = cycle.letters();
    let n = letters.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(m.identity());
    for &a in letters {
        prefix.push(m.right(*prefix.last().unwrap(), a));
    }
    let mut suffix = vec![m.identity(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = m.compose(m.generator(letters[i]), suffix[i + 1]);
    }
    (0..n).map(|r| m.compose(suffix[r], prefix[r])).collect()
}

/// A word whose presence as a contiguous block fixes the circular class.
///
/// For each persistent `x` in element order take a witness `(p, s)` with
/// `p + y + s = x` for all `y`, and emit the block `S ++ P` of their
/// representatives: read from the first letter of `P`, any cycle containing
/// the block wraps around to end with `S`, giving class `x`. With a single
/// persistent element the block is repeated so every position misses one
/// full copy.
pub fn universal_sequence(m: &MonoidTable) -> Result<Word> {
    let blocks = universal_blocks(m)?;
    let mut word = Word::empty();
    let repeat = if blocks.len() == 1 { 2 } else { 1 };
    for _ in 0..repeat {
        for (_, block) in &blocks {
            word = word.concat(block);
        }
    }
    Ok(word)
}

/// The per-element blocks of [`universal_sequence`], in element order.
pub fn universal_blocks(m: &MonoidTable) -> Result<Vec<(usize, Word)>> {
    m.persistent_elements()
        .into_iter()
        .map(|x| {
            let w = m.prefix_suffix_witness(x)?;
            let block = m.representative(w.suffix).concat(m.representative(w.prefix));
            Ok((x, block))
        })
        .collect()
}

/// A piece of a cyclic tiling: `len` positions starting at `start`, with an
/// associated value or class.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub value: usize,
}

fn check_cover(n: usize, segments: &[Segment]) -> Result<()> {
    if segments.is_empty() {
        return Err(CycleError::CoverMismatch("no segments".into()));
    }
    let total: usize = segments.iter().map(|s| s.len).sum();
    if total != n {
        return Err(CycleError::CoverMismatch(format!("lengths sum to {total}, cycle has {n}")));
    }
    for (i, s) in segments.iter().enumerate() {
        let next = &segments[(i + 1) % segments.len()];
        if s.len == 0 || s.start >= n || (s.start + s.len) % n != next.start {
            return Err(CycleError::CoverMismatch(format!("segment {i} does not meet its successor")));
        }
    }
    Ok(())
}

/// Predicts the rotation classes of a cycle from a tiling whose segment
/// values are monoid classes.
///
/// A rotation starting inside segment `i` at offset `m` reads the rest of
/// that segment, the values of the other segments in cyclic order, then the
/// beginning of segment `i`. Only the split segment is read letter by letter.
pub fn circular_value_from_decomposition(
    m: &MonoidTable,
    cycle: &CycleWord,
    segments: &[Segment],
) -> Result<BTreeSet<usize>> {
    let n = cycle.len();
    check_cover(n, segments)?;
    let letters = cycle.letters();
    let r = segments.len();
    let mut out = BTreeSet::new();
    for i in 0..r {
        let middle = (1..r).fold(m.identity(), |acc, d| m.compose(acc, segments[(i + d) % r].value));
        let seg = segments[i];
        let piece: Vec<Letter> = (0..seg.len).map(|o| letters[(seg.start + o) % n]).collect();
        let mut suffix = vec![m.identity(); seg.len + 1];
        for o in (0..seg.len).rev() {
            suffix[o] = m.compose(m.generator(piece[o]), suffix[o + 1]);
        }
        let mut prefix = m.identity();
        for o in 0..seg.len {
            out.insert(m.compose(m.compose(suffix[o], middle), prefix));
            prefix = m.right(prefix, piece[o]);
        }
    }
    Ok(out)
}

/// Why a cycle has no wrap-around tiling into complete intervals.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Undecomposable {
    /// No interval of the level completes anywhere in the linear reading.
    NoCompleteInterval,
    /// The trailing incomplete piece cannot be glued onto the first interval
    /// because that interval is not a persistent super interval.
    FirstNotPersistentSuper,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CircularOutcome {
    /// Segments with value indices at the requested level; the first segment
    /// starts at the trailing piece when one was glued on.
    Decomposed(Vec<Segment>),
    Undecomposable(Undecomposable),
}

/// Tiles a 0/1 cycle by `level`-intervals: decompose the linear reading from
/// position 0 and glue the trailing incomplete piece onto the first interval.
pub fn circular_decomposition(vs: &ValueSystem, cycle: &CycleWord, level: usize) -> Result<CircularOutcome> {
    let d = vs.decompose(cycle.word(), level)?;
    let n = cycle.len();
    if d.intervals.is_empty() {
        return Ok(CircularOutcome::Undecomposable(Undecomposable::NoCompleteInterval));
    }
    let mut segments: Vec<Segment> = d
        .intervals
        .iter()
        .map(|iv| Segment {
            start: iv.start,
            len: iv.len(),
            value: iv.value,
        })
        .collect();
    if let Some(tail_start) = d.tail {
        let first = d.intervals[0];
        if !first.persistent || !vs.is_super(&d, 0)? {
            return Ok(CircularOutcome::Undecomposable(Undecomposable::FirstNotPersistentSuper));
        }
        let tail = Word(cycle.word().0[tail_start..].to_vec());
        let value = vs.glue(&tail, &d.interval_word(0), level)?;
        segments.remove(0);
        segments.insert(
            0,
            Segment {
                start: tail_start,
                len: n - tail_start + first.end,
                value,
            },
        );
    }
    Ok(CircularOutcome::Decomposed(segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::DEFAULT_CAP;
    use crate::word_types::Alphabet;

    fn cyc(bits: &str) -> CycleWord {
        CycleWord::new(Word::parse_bits(bits).unwrap()).unwrap()
    }

    #[test]
    fn rotations_of_each_other_agree() {
        let mut tt = TypeTable::new(Alphabet::binary(), 2);
        let a = circular_type(&mut tt, &cyc("10")).unwrap();
        let b = circular_type(&mut tt, &cyc("01")).unwrap();
        assert_eq!(a, b);
        let c = cyc("0110100");
        let base = circular_type(&mut tt, &c).unwrap();
        for r in 0..c.len() {
            assert_eq!(circular_type(&mut tt, &c.rotate(r)).unwrap(), base);
        }
        assert_eq!(CycleWord::new(Word::empty()).unwrap_err(), CycleError::EmptyCycle);
    }

    #[test]
    fn table_and_fold_agree() {
        let m = MonoidTable::generate(Alphabet::binary(), 2, DEFAULT_CAP).unwrap();
        let mut tt = TypeTable::new(Alphabet::binary(), 2);
        for bits in ["1", "0110100", "000100010011", "1111011"] {
            let c = cyc(bits);
            let via_table: Vec<String> = circular_type_in(&m, &c).iter().map(|&x| m.serialize(x)).collect();
            let mut via_table = via_table;
            via_table.sort();
            assert_eq!(via_table, circular_type(&mut tt, &c).unwrap().serialize(&tt));
        }
    }

    #[test]
    fn universal_sequence_gives_all_persistent_rotations() {
        let m = MonoidTable::generate(Alphabet::binary(), 2, DEFAULT_CAP).unwrap();
        let r = universal_sequence(&m).unwrap();
        let persistent: BTreeSet<usize> = m.persistent_elements().into_iter().collect();
        for pad in ["", "0", "1", "0011", "10101"] {
            let c = CycleWord::new(r.concat(&Word::parse_bits(pad).unwrap())).unwrap();
            assert_eq!(circular_type_in(&m, &c), persistent);
        }
        // Blocks appear in element order.
        let blocks = universal_blocks(&m).unwrap();
        let joined = blocks.iter().fold(Word::empty(), |acc, (_, b)| acc.concat(b));
        assert_eq!(joined, r);
    }

    #[test]
    fn single_persistent_element_repeats_block() {
        let m = MonoidTable::generate(Alphabet::indexed("x", 1).unwrap(), 2, 100).unwrap();
        let r = universal_sequence(&m).unwrap();
        assert_eq!(r.len(), 6);
        let c = CycleWord::new(r).unwrap();
        assert_eq!(circular_type_in(&m, &c), BTreeSet::from([3]));
    }

    #[test]
    fn single_segment_prediction() {
        let m = MonoidTable::generate(Alphabet::binary(), 2, DEFAULT_CAP).unwrap();
        let c = cyc("0010110");
        let whole = m.element_of(c.letters());
        let seg = [Segment { start: 0, len: c.len(), value: whole }];
        assert_eq!(circular_value_from_decomposition(&m, &c, &seg).unwrap(), circular_type_in(&m, &c));
        let bad = [Segment { start: 1, len: c.len() - 1, value: whole }];
        assert!(circular_value_from_decomposition(&m, &c, &bad).is_err());
    }

    #[test]
    fn wrap_around_tiling() {
        let vs = ValueSystem::build(2, 2, DEFAULT_CAP).unwrap();
        let b = "0000000001";
        let c = cyc(&format!("{b}{b}{b}{b}001{b}1000"));
        let CircularOutcome::Decomposed(segs) = circular_decomposition(&vs, &c, 2).unwrap() else {
            panic!("expected a tiling");
        };
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].start, c.len() - 3);
        assert!(vs.value(2, segs[0].value).unwrap().persistent);
        assert_eq!(
            circular_decomposition(&vs, &cyc("000"), 1).unwrap(),
            CircularOutcome::Undecomposable(Undecomposable::NoCompleteInterval)
        );
        assert_eq!(
            circular_decomposition(&vs, &cyc("10"), 2).unwrap(),
            CircularOutcome::Undecomposable(Undecomposable::FirstNotPersistentSuper)
        );
    }
}
