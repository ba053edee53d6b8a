use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_unary::cycles::{circular_type_in, CycleWord};
use sparse_unary::intervals::{ValueSystem, DEFAULT_LEVEL_CAP};
use sparse_unary::logic::{self, Formula, ModelView, Sentence, Vocabulary};
use sparse_unary::monoid::{MonoidTable, DEFAULT_CAP};
use sparse_unary::simulate::sample_predicate;
use sparse_unary::word_types::{Alphabet, EfType, TypeTable, Word};

/// Random sentence of quantifier depth at most `depth`.
fn random_sentence(seed: u64, depth: usize, vocabulary: Vocabulary) -> Sentence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Vec::new();
    let f = gen(&mut rng, depth, &mut Vec::new(), &mut names, vocabulary, 6);
    Sentence::new(f, vocabulary, &names)
}

fn gen(
    rng: &mut ChaCha8Rng,
    qleft: usize,
    bound: &mut Vec<usize>,
    names: &mut Vec<String>,
    vocabulary: Vocabulary,
    size: usize,
) -> Formula {
    let quantify = !bound.is_empty() && qleft > 0 && size > 0 && rng.random_bool(0.4);
    if bound.is_empty() || quantify {
        let v = names.len();
        names.push(format!("v{v}"));
        bound.push(v);
        let body = Box::new(gen(rng, qleft - 1, bound, names, vocabulary, size.saturating_sub(1)));
        bound.pop();
        return if rng.random_bool(0.5) { Formula::Exists(v, body) } else { Formula::Forall(v, body) };
    }
    let pick = |rng: &mut ChaCha8Rng, bound: &[usize]| bound[rng.random_range(0..bound.len())];
    if size == 0 || rng.random_bool(0.35) {
        return match rng.random_range(0..3) {
            0 => Formula::U(pick(rng, bound)),
            1 => Formula::Eq(pick(rng, bound), pick(rng, bound)),
            _ => match vocabulary {
                Vocabulary::Linear => Formula::Le(pick(rng, bound), pick(rng, bound)),
                Vocabulary::Circular => Formula::C(pick(rng, bound), pick(rng, bound), pick(rng, bound)),
            },
        };
    }
    let mut sub = |rng: &mut ChaCha8Rng| Box::new(gen(rng, qleft, bound, names, vocabulary, size - 1));
    match rng.random_range(0..4) {
        0 => Formula::Not(sub(rng)),
        1 => Formula::And(sub(rng), sub(rng)),
        2 => Formula::Or(sub(rng), sub(rng)),
        _ => Formula::Implies(sub(rng), sub(rng)),
    }
}

fn words_up_to(max_len: usize) -> Vec<Word> {
    (0..=max_len)
        .flat_map(|len| {
            (0u32..(1 << len)).map(move |m| Word::from_bits(&(0..len).map(|i| ((m >> i) & 1) as u8).collect::<Vec<_>>()))
        })
        .collect()
}

fn bits(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..2, 0..=max_len).prop_map(|b| Word::from_bits(&b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ef_classes_agree_on_sentences(seed in any::<u64>(), t in 1usize..=2) {
        let s = random_sentence(seed, t, Vocabulary::Linear);
        prop_assert!(s.qdepth() <= t);
        let mut tt = TypeTable::new(Alphabet::binary(), t);
        let mut seen: HashMap<EfType, bool> = HashMap::new();
        for w in words_up_to(6) {
            let ty = tt.ef_type(&w).unwrap();
            let truth = logic::evaluate(&ModelView::linear(&w), &s).unwrap();
            let first = *seen.entry(ty).or_insert(truth);
            prop_assert_eq!(first, truth, "{} on {}", s, w);
        }
    }

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), depth in 1usize..=4, circular in any::<bool>()) {
        let vocabulary = if circular { Vocabulary::Circular } else { Vocabulary::Linear };
        let s = random_sentence(seed, depth, vocabulary);
        let back = logic::parse_with(&s.to_string(), vocabulary).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn circular_sentences_ignore_rotation(seed in any::<u64>(), w in bits(9), r in 0usize..9) {
        prop_assume!(!w.is_empty());
        let s = random_sentence(seed, 3, Vocabulary::Circular);
        let c = CycleWord::new(w).unwrap();
        let rotated = c.rotate(r % c.len());
        prop_assert_eq!(
            logic::evaluate(&ModelView::circular(c.word()), &s).unwrap(),
            logic::evaluate(&ModelView::circular(rotated.word()), &s).unwrap()
        );
    }

    #[test]
    fn type_of_concatenation(u in bits(25), v in bits(25), t in 1usize..=3) {
        let mut tt = TypeTable::new(Alphabet::binary(), t);
        let whole = tt.ef_type(&u.concat(&v)).unwrap();
        let (x, y) = (tt.ef_type(&u).unwrap(), tt.ef_type(&v).unwrap());
        prop_assert_eq!(tt.compose(x, y).unwrap(), whole);
        prop_assert_eq!(tt.fold_word(&u).unwrap(), x);
    }

    #[test]
    fn monoid_elements_follow_words(u in bits(20), v in bits(20)) {
        let m = MonoidTable::generate(Alphabet::binary(), 2, DEFAULT_CAP).unwrap();
        let (x, y) = (m.element_of(u.letters()), m.element_of(v.letters()));
        prop_assert_eq!(m.element_of(u.concat(&v).letters()), m.compose(x, y));
        // Type ids are per table; compare serialized forms.
        let mut tt = TypeTable::new(Alphabet::binary(), 2);
        let direct = tt.fold_word(&u).unwrap();
        prop_assert_eq!(m.types().serialize(m.ef_type(x)), tt.serialize(direct));
    }

    #[test]
    fn circular_type_ignores_rotation(w in bits(16), r in 0usize..16) {
        prop_assume!(!w.is_empty());
        let m = MonoidTable::generate(Alphabet::binary(), 2, DEFAULT_CAP).unwrap();
        let c = CycleWord::new(w).unwrap();
        let rotated = c.rotate(r % c.len());
        prop_assert_eq!(circular_type_in(&m, &c), circular_type_in(&m, &rotated));
    }

    #[test]
    fn intervals_tile_and_carry_their_type(seed in any::<u64>(), len in 0usize..400, level in 1usize..=2) {
        let vs = ValueSystem::build(2, 2, DEFAULT_LEVEL_CAP).unwrap();
        let w = sample_predicate(len, 0.15, seed, 0).unwrap();
        let d = vs.decompose(&w, level).unwrap();
        let mut at = 0;
        for iv in &d.intervals {
            prop_assert_eq!(iv.start, at);
            at = iv.end;
        }
        match d.tail {
            Some(s) => prop_assert_eq!(s, at),
            None => prop_assert_eq!(at, w.len()),
        }
        let mut tt = TypeTable::new(Alphabet::binary(), 2);
        let values = vs.level(level).unwrap();
        for i in 0..d.intervals.len() {
            let v = &values.values[d.intervals[i].value];
            prop_assert_eq!(tt.fold_word(&d.interval_word(i)).unwrap(), tt.fold_word(&v.word).unwrap());
            prop_assert_eq!(v.persistent, d.intervals[i].persistent);
        }
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), trial in 0u64..1000, p in 0.0f64..=1.0) {
        prop_assert_eq!(sample_predicate(300, p, seed, trial).unwrap(), sample_predicate(300, p, seed, trial).unwrap());
    }
}

#[test]
fn builtins_agree_within_types() {
    // Every built-in of quantifier depth at most 2 is constant on depth-2 classes.
    let mut tt = TypeTable::new(Alphabet::binary(), 2);
    for b in logic::catalog(3) {
        let s = b.sentence().unwrap();
        if s.qdepth() > 2 || b.vocabulary() != Vocabulary::Linear {
            continue;
        }
        let mut seen: HashMap<EfType, bool> = HashMap::new();
        for w in words_up_to(8) {
            let ty = tt.ef_type(&w).unwrap();
            let truth = b.scan(w.letters());
            assert_eq!(*seen.entry(ty).or_insert(truth), truth, "{} on {w}", b.name());
        }
    }
}

#[test]
fn a2_is_c_read_around_the_cycle() {
    // A_2 on a cycle is C on the word with its first letter appended; and
    // C on a word is A_2 on the cycle closed by a zero.
    let a2 = logic::builtin(logic::Builtin::Ak(2)).unwrap();
    let c = logic::builtin(logic::Builtin::C).unwrap();
    for w in words_up_to(8) {
        if w.len() >= 2 {
            let closed = w.concat(&Word(vec![w.letters()[0]]));
            assert_eq!(
                logic::evaluate(&ModelView::circular(&w), &a2).unwrap(),
                logic::evaluate(&ModelView::linear(&closed), &c).unwrap(),
                "{w}"
            );
        }
        let padded = w.concat(&Word::from_bits(&[0]));
        assert_eq!(
            logic::evaluate(&ModelView::linear(&w), &c).unwrap(),
            logic::evaluate(&ModelView::circular(&padded), &a2).unwrap(),
            "{w}"
        );
    }
}

#[test]
fn d_on_constructed_prefixes() {
    let d = logic::builtin(logic::Builtin::D).unwrap();
    let eval = |s: &str| logic::evaluate(&ModelView::linear(&Word::parse_bits(s).unwrap()), &d).unwrap();
    assert!(eval("0110101"));
    assert!(eval("00110"));
    assert!(!eval("1011"));
    assert!(!eval("0010110"));
    assert!(!eval("00000"));
}
