//! The finite monoid of depth-`t` types under concatenation.
//!
//! Elements are numbered in breadth-first discovery order starting from the
//! identity `O` and multiplying on the right by single letters in alphabet
//! order. An element `x` is *persistent* when `forall y exists z: x+y+z = x`;
//! persistent elements form the minimal two-sided ideal and split into
//! R-classes (`x+M`) and L-classes (`M+x`) with `R_x ∩ L_y = {x+y}`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::word_types::{Alphabet, EfType, Letter, TypeError, TypeTable, Word};

/// Default bound on the number of monoid elements.
pub const DEFAULT_CAP: usize = 50_000;

/// Above this many elements the full composition table is not materialized.
const FULL_TABLE_LIMIT: usize = 8_192;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonoidError {
    #[error("monoid exceeds the element cap: reached {reached} elements (cap {cap})")]
    CapExceeded { reached: usize, cap: usize },
    #[error("cap must be positive")]
    ZeroCap,
    #[error("monoid of {0} elements is too large for a full composition table")]
    TableTooLarge(usize),
    #[error("element {0} is not persistent")]
    NotPersistent(usize),
    #[error("element {0} is out of range")]
    NoSuchElement(usize),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, MonoidError>;

/// A fully enumerated monoid of types with its composition table.
#[derive(Debug)]
pub struct MonoidTable {
    types: TypeTable,
    elements: Vec<EfType>,
    reps: Vec<Word>,
    generators: Vec<usize>,
    right: Vec<usize>,
    table: Vec<u32>,
    persistent: Vec<bool>,
}

impl MonoidTable {
    /// Breadth-first closure of `{O}` under right multiplication by letters.
    pub fn generate(alphabet: Alphabet, t: usize, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(MonoidError::ZeroCap);
        }
        let letters = alphabet.len();
        let mut types = TypeTable::new(alphabet, t);
        let identity = types.identity();
        let gens: Vec<EfType> = (0..letters)
            .map(|a| types.generator(Letter(a as u16)))
            .collect();

        let mut index: HashMap<EfType, usize> = HashMap::new();
        let mut elements = vec![identity];
        let mut reps = vec![Word::empty()];
        index.insert(identity, 0);
        let mut right = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for (a, &g) in gens.iter().enumerate() {
                let y = types.compose(elements[x], g)?;
                let id = match index.get(&y) {
                    Some(&id) => id,
                    None => {
                        let id = elements.len();
                        if id >= cap {
                            return Err(MonoidError::CapExceeded {
                                reached: id + 1,
                                cap,
                            });
                        }
                        index.insert(y, id);
                        elements.push(y);
                        let mut rep = reps[x].clone();
                        rep.0.push(Letter(a as u16));
                        reps.push(rep);
                        queue.push_back(id);
                        id
                    }
                };
                // Queue order equals discovery order, so row x is filled in order.
                debug_assert_eq!(right.len(), x * letters + a);
                right.push(id);
            }
        }
        let n = elements.len();
        let generators = (0..letters).map(|a| right[a]).collect();
        if n > FULL_TABLE_LIMIT {
            return Err(MonoidError::TableTooLarge(n));
        }
        let mut table = vec![0u32; n * n];
        for y in 0..n {
            for x in 0..n {
                let z = reps[y]
                    .iter()
                    .fold(x, |acc, a| right[acc * letters + a.index()]);
                table[x * n + y] = z as u32;
            }
        }
        let mut m = MonoidTable {
            types,
            elements,
            reps,
            generators,
            right,
            table,
            persistent: Vec::new(),
        };
        m.persistent = m.closed_component_flags();
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.types.alphabet()
    }

    pub fn depth(&self) -> usize {
        self.types.depth()
    }

    pub fn identity(&self) -> usize {
        0
    }

    /// Element of each single letter, in alphabet order.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn generator(&self, a: Letter) -> usize {
        self.generators[a.index()]
    }

    pub fn compose(&self, x: usize, y: usize) -> usize {
        self.table[x * self.len() + y] as usize
    }

    pub fn right(&self, x: usize, a: Letter) -> usize {
        self.right[x * self.alphabet().len() + a.index()]
    }

    pub fn ef_type(&self, x: usize) -> EfType {
        self.elements[x]
    }

    pub fn types(&self) -> &TypeTable {
        &self.types
    }

    /// Shortest word in the class (breadth-first discovery path).
    pub fn representative(&self, x: usize) -> &Word {
        &self.reps[x]
    }

    pub fn serialize(&self, x: usize) -> String {
        self.types.serialize(self.elements[x])
    }

    /// Class of a word, by folding the right action over its letters.
    pub fn element_of(&self, word: &[Letter]) -> usize {
        self.fold_from(self.identity(), word)
    }

    pub fn fold_from(&self, x: usize, word: &[Letter]) -> usize {
        let k = self.alphabet().len();
        word.iter().fold(x, |acc, a| self.right[acc * k + a.index()])
    }

    /// Element index of a type handle produced by this table's [`TypeTable`].
    pub fn find(&self, ty: EfType) -> Option<usize> {
        self.elements.iter().position(|&e| e == ty)
    }

    pub fn is_persistent(&self, x: usize) -> bool {
        self.persistent[x]
    }

    pub fn persistent_flags(&self) -> &[bool] {
        &self.persistent
    }

    pub fn persistent_elements(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.persistent[x]).collect()
    }

    /// `R_x = {x + v}` as a membership mask.
    pub fn right_ideal(&self, x: usize) -> Vec<bool> {
        let n = self.len();
        let mut mask = vec![false; n];
        for v in 0..n {
            mask[self.compose(x, v)] = true;
        }
        mask
    }

    /// `L_x = {v + x}` as a membership mask.
    pub fn left_ideal(&self, x: usize) -> Vec<bool> {
        let n = self.len();
        let mut mask = vec![false; n];
        for v in 0..n {
            mask[self.compose(v, x)] = true;
        }
        mask
    }

    /// Persistence as membership in a closed strongly connected component of
    /// the right Cayley graph (a state that every successor can return to).
    fn closed_component_flags(&self) -> Vec<bool> {
        let n = self.len();
        let k = self.alphabet().len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, n * k);
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for x in 0..n {
            for a in 0..k {
                graph.add_edge(nodes[x], nodes[self.right[x * k + a]], ());
            }
        }
        let mut comp = vec![0; n];
        for (c, members) in tarjan_scc(&graph).iter().enumerate() {
            for v in members {
                comp[v.index()] = c;
            }
        }
        let count = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut closed = vec![true; count];
        for x in 0..n {
            for a in 0..k {
                if comp[self.right[x * k + a]] != comp[x] {
                    closed[comp[x]] = false;
                }
            }
        }
        (0..n).map(|x| closed[comp[x]]).collect()
    }

    /// Property (1): `forall y exists z: x+y+z = x`.
    pub fn satisfies_right_return(&self, x: usize) -> bool {
        (0..self.len()).all(|y| {
            let u = self.compose(x, y);
            (0..self.len()).any(|z| self.compose(u, z) == x)
        })
    }

    /// Property (2): `forall y exists z: z+y+x = x`.
    pub fn satisfies_left_return(&self, x: usize) -> bool {
        (0..self.len()).all(|y| {
            let u = self.compose(y, x);
            (0..self.len()).any(|z| self.compose(z, u) == x)
        })
    }

    /// Property (3): `exists p, s forall y: p+y+s = x`, by exhaustive search.
    pub fn exhaustive_witness(&self, x: usize) -> Option<PrefixSuffixWitness> {
        let n = self.len();
        for p in 0..n {
            let row = self.right_ideal(p);
            for s in 0..n {
                // y = O forces p + s = x.
                if self.compose(p, s) != x {
                    continue;
                }
                if (0..n).all(|r| !row[r] || self.compose(r, s) == x) {
                    return Some(PrefixSuffixWitness { prefix: p, suffix: s });
                }
            }
        }
        None
    }

    /// Evaluates properties (1), (2), (3) independently on every element.
    pub fn check_persistence_equivalence(&self) -> PersistenceReport {
        let mut rows = Vec::with_capacity(self.len());
        for x in 0..self.len() {
            let right_return = self.satisfies_right_return(x);
            let left_return = self.satisfies_left_return(x);
            let prefix_suffix = self.exhaustive_witness(x).is_some();
            rows.push(PersistenceRow {
                element: x,
                right_return,
                left_return,
                prefix_suffix,
                flagged: self.persistent[x],
            });
        }
        PersistenceReport { rows }
    }

    /// A prefix/suffix pair `(p, s)` with `p + y + s = x` for every `y`.
    ///
    /// Takes `u` minimizing `|R_x + u|` (the minimum is 1), reads off the single
    /// element `u5` of `R_x + u`, returns to `x` with some `u6`, and answers
    /// `(x, u + u6)`. Falls back to exhaustive search if that path fails.
    pub fn prefix_suffix_witness(&self, x: usize) -> Result<PrefixSuffixWitness> {
        if x >= self.len() {
            return Err(MonoidError::NoSuchElement(x));
        }
        if !self.persistent[x] {
            return Err(MonoidError::NotPersistent(x));
        }
        let n = self.len();
        let rx: Vec<usize> = (0..n).filter(|&v| self.right_ideal(x)[v]).collect();
        let mut best: Option<(usize, usize)> = None;
        for u in 0..n {
            let mut image: Vec<usize> = rx.iter().map(|&r| self.compose(r, u)).collect();
            image.sort_unstable();
            image.dedup();
            if best.is_none_or(|(size, _)| image.len() < size) {
                best = Some((image.len(), u));
                if image.len() == 1 {
                    break;
                }
            }
        }
        if let Some((1, u)) = best {
            let u5 = self.compose(x, u);
            if let Some(u6) = (0..n).find(|&v| self.compose(u5, v) == x) {
                let w = PrefixSuffixWitness {
                    prefix: x,
                    suffix: self.compose(u, u6),
                };
                if self.verify_witness(x, w) {
                    return Ok(w);
                }
            }
        }
        self.exhaustive_witness(x)
            .ok_or_else(|| MonoidError::Internal(format!("no prefix/suffix witness for persistent {x}")))
    }

    pub fn verify_witness(&self, x: usize, w: PrefixSuffixWitness) -> bool {
        (0..self.len()).all(|y| self.compose(self.compose(w.prefix, y), w.suffix) == x)
    }

    /// R- and L-class partitions of the persistent elements and their
    /// pairwise intersections.
    pub fn green_classes(&self) -> GreenClasses {
        let n = self.len();
        let mut r_classes: Vec<Vec<usize>> = Vec::new();
        let mut l_classes: Vec<Vec<usize>> = Vec::new();
        let mut r_class_of = vec![None; n];
        let mut l_class_of = vec![None; n];
        for x in self.persistent_elements() {
            if r_class_of[x].is_none() {
                let mask = self.right_ideal(x);
                let id = r_classes.len();
                let members: Vec<usize> = (0..n).filter(|&v| mask[v]).collect();
                for &m in &members {
                    r_class_of[m] = Some(id);
                }
                r_classes.push(members);
            }
            if l_class_of[x].is_none() {
                let mask = self.left_ideal(x);
                let id = l_classes.len();
                let members: Vec<usize> = (0..n).filter(|&v| mask[v]).collect();
                for &m in &members {
                    l_class_of[m] = Some(id);
                }
                l_classes.push(members);
            }
        }
        let intersections = r_classes
            .iter()
            .map(|r| {
                l_classes
                    .iter()
                    .map(|l| r.iter().copied().filter(|x| l.contains(x)).collect())
                    .collect()
            })
            .collect();
        GreenClasses {
            r_classes,
            l_classes,
            r_class_of,
            l_class_of,
            intersections,
        }
    }

    /// Deterministic text export of elements, flags, classes and table.
    pub fn export(&self) -> String {
        let green = self.green_classes();
        let mut out = String::new();
        let alphabet = self.alphabet();
        writeln!(out, "# type monoid v1").unwrap();
        writeln!(out, "alphabet {}", alphabet.symbols().join(" ")).unwrap();
        writeln!(out, "depth {}", self.depth()).unwrap();
        writeln!(out, "elements {}", self.len()).unwrap();
        writeln!(out, "persistent {}", self.persistent_elements().len()).unwrap();
        writeln!(out, "r_classes {}", green.r_classes.len()).unwrap();
        writeln!(out, "l_classes {}", green.l_classes.len()).unwrap();
        writeln!(out, "identity {}", self.identity()).unwrap();
        let gens: Vec<String> = alphabet
            .letters()
            .map(|a| format!("{}:{}", alphabet.symbol(a), self.generator(a)))
            .collect();
        writeln!(out, "generators {}", gens.join(" ")).unwrap();
        for x in 0..self.len() {
            let rep = if self.reps[x].is_empty() {
                "-".to_string()
            } else {
                alphabet.format_word(&self.reps[x]).replace(' ', "_")
            };
            let cls = |c: Option<usize>| c.map_or("-".to_string(), |c| c.to_string());
            writeln!(
                out,
                "element {} rep={} persistent={} r={} l={} type={}",
                x,
                rep,
                u8::from(self.persistent[x]),
                cls(green.r_class_of[x]),
                cls(green.l_class_of[x]),
                self.serialize(x)
            )
            .unwrap();
        }
        writeln!(out, "table").unwrap();
        for x in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|y| self.compose(x, y).to_string())
                .collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }
}

/// `(p, s)` with `p + y + s = x` for all `y`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PrefixSuffixWitness {
    pub prefix: usize,
    pub suffix: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersistenceRow {
    pub element: usize,
    pub right_return: bool,
    pub left_return: bool,
    pub prefix_suffix: bool,
    pub flagged: bool,
}

impl PersistenceRow {
    pub fn consistent(&self) -> bool {
        self.right_return == self.left_return
            && self.left_return == self.prefix_suffix
            && self.prefix_suffix == self.flagged
    }
}

#[derive(Clone, Debug)]
pub struct PersistenceReport {
    pub rows: Vec<PersistenceRow>,
}

impl PersistenceReport {
    /// Elements where the three properties (or the stored flag) disagree.
    pub fn disagreements(&self) -> Vec<&PersistenceRow> {
        self.rows.iter().filter(|r| !r.consistent()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct GreenClasses {
    pub r_classes: Vec<Vec<usize>>,
    pub l_classes: Vec<Vec<usize>>,
    pub r_class_of: Vec<Option<usize>>,
    pub l_class_of: Vec<Option<usize>>,
    /// `intersections[r][l]` lists the elements of `R ∩ L`.
    pub intersections: Vec<Vec<Vec<usize>>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(t: usize) -> MonoidTable {
        MonoidTable::generate(Alphabet::binary(), t, DEFAULT_CAP).unwrap()
    }

    #[test]
    fn depth_zero_has_one_element() {
        let m = binary(0);
        assert_eq!(m.len(), 1);
        assert!(m.is_persistent(0));
        assert!(m.check_persistence_equivalence().disagreements().is_empty());
        let w = m.prefix_suffix_witness(0).unwrap();
        assert_eq!(w, PrefixSuffixWitness { prefix: 0, suffix: 0 });
    }

    #[test]
    fn unary_monoid_depth_one() {
        let m = MonoidTable::generate(Alphabet::indexed("x", 1).unwrap(), 1, 100).unwrap();
        // O and x = 2x = ...
        assert_eq!(m.len(), 2);
        assert!(!m.is_persistent(0));
        assert!(m.is_persistent(1));
        assert!(m.check_persistence_equivalence().disagreements().is_empty());
        let w = m.prefix_suffix_witness(1).unwrap();
        assert!(m.verify_witness(1, w));
    }

    #[test]
    fn unary_monoid_depth_two() {
        let m = MonoidTable::generate(Alphabet::indexed("x", 1).unwrap(), 2, 100).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.persistent_elements(), vec![3]);
        assert!(matches!(m.prefix_suffix_witness(2), Err(MonoidError::NotPersistent(2))));
    }

    #[test]
    fn binary_sizes() {
        assert_eq!(binary(1).len(), 4);
        assert_eq!(binary(2).len(), 97);
        assert!(matches!(
            MonoidTable::generate(Alphabet::binary(), 3, DEFAULT_CAP),
            Err(MonoidError::CapExceeded { cap: DEFAULT_CAP, .. })
        ));
        assert!(matches!(
            MonoidTable::generate(Alphabet::binary(), 2, 10),
            Err(MonoidError::CapExceeded { reached: 11, cap: 10 })
        ));
        assert_eq!(
            MonoidTable::generate(Alphabet::binary(), 2, 0).unwrap_err(),
            MonoidError::ZeroCap
        );
    }

    #[test]
    fn identity_and_closure() {
        let m = binary(2);
        for x in 0..m.len() {
            assert_eq!(m.compose(0, x), x);
            assert_eq!(m.compose(x, 0), x);
            assert_eq!(m.element_of(m.representative(x).letters()), x);
        }
    }

    #[test]
    fn identity_is_transient_in_binary() {
        let m = binary(2);
        assert!(!m.is_persistent(m.identity()));
        assert!(!m.satisfies_right_return(m.identity()));
    }

    #[test]
    fn saturated_class_absorbs_from_both_sides() {
        // (0^s 1)^s with s = 9: every persistent element absorbs x + z + x = x.
        let m = binary(2);
        let block: Vec<Letter> = std::iter::repeat_n(Letter(0), 9)
            .chain([Letter(1)])
            .collect();
        let word: Vec<Letter> = block.repeat(9);
        let b = m.element_of(&word);
        assert!(m.is_persistent(b));
        for z in 0..m.len() {
            assert_eq!(m.compose(m.compose(b, z), b), b);
        }
    }

    #[test]
    fn table_matches_type_composition() {
        let m = binary(2);
        let mut tt = TypeTable::new(Alphabet::binary(), 2);
        for x in (0..m.len()).step_by(7) {
            for y in (0..m.len()).step_by(5) {
                let w = m.representative(x).concat(m.representative(y));
                let direct = tt.ef_type(&w).unwrap();
                let z = m.compose(x, y);
                assert_eq!(tt.serialize(direct), m.serialize(z));
            }
        }
    }

    #[test]
    fn persistence_properties_agree() {
        for t in 1..=2 {
            let m = binary(t);
            assert!(m.check_persistence_equivalence().disagreements().is_empty());
        }
    }

    #[test]
    fn witnesses_and_green_structure() {
        let m = binary(2);
        for x in m.persistent_elements() {
            let w = m.prefix_suffix_witness(x).unwrap();
            assert!(m.verify_witness(x, w));
            assert_eq!(m.compose(w.prefix, w.suffix), x);
        }
        let g = m.green_classes();
        for x in m.persistent_elements() {
            for y in m.persistent_elements() {
                let r = g.r_class_of[x].unwrap();
                let l = g.l_class_of[y].unwrap();
                assert_eq!(g.intersections[r][l], vec![m.compose(x, y)]);
            }
        }
    }

    #[test]
    fn export_is_deterministic() {
        let a = binary(1).export();
        let b = binary(1).export();
        assert_eq!(a, b);
        assert!(a.starts_with("# type monoid v1\nalphabet 0 1\ndepth 1\nelements 4\n"));
    }
}
