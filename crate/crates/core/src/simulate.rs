//! Seeded sampling of sparse random predicates and empirical checks.
//!
//! Trial `i` under seed `s` draws from `ChaCha8Rng::seed_from_u64(s)` on
//! stream `i`, so every trial is reproducible on its own and trials can run
//! in any order. Letters come from geometric gaps between ones, which has
//! the same law as independent Bernoulli draws.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cycles::{universal_sequence, CycleError};
use crate::intervals::{Decomposition, IntervalError, ValueSystem};
use crate::logic::{self, Builtin, LogicError, ModelView, Sentence, Vocabulary};
use crate::monoid::{MonoidError, MonoidTable};
use crate::word_types::{Alphabet, Letter, Word};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("need at least one trial")]
    ZeroTrials,
    #[error("level {0} has no string monoid in this value system")]
    NoMonoid(usize),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

pub type Result<T> = std::result::Result<T, SimError>;

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::BadProbability(p))
    }
}

/// `n^(-alpha)`.
pub fn p_from_alpha(n: usize, alpha: f64) -> f64 {
    (n as f64).powf(-alpha)
}

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Endless Bernoulli(p) letters.
pub struct BitStream {
    rng: ChaCha8Rng,
    geo: Option<Geometric>,
    p: f64,
    zeros_left: u64,
}

impl BitStream {
    pub fn new(p: f64, seed: u64, trial: u64) -> Result<Self> {
        check_p(p)?;
        let mut rng = trial_rng(seed, trial);
        let geo = (p > 0.0 && p < 1.0).then(|| Geometric::new(p).expect("p in (0,1)"));
        let zeros_left = geo.as_ref().map_or(0, |g| g.sample(&mut rng));
        Ok(BitStream { rng, geo, p, zeros_left })
    }
}

impl Iterator for BitStream {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        let Some(geo) = &self.geo else {
            return Some(self.p >= 1.0);
        };
        if self.zeros_left > 0 {
            self.zeros_left -= 1;
            return Some(false);
        }
        self.zeros_left = geo.sample(&mut self.rng);
        Some(true)
    }
}

/// The random predicate `U_{n,p}` for one trial.
pub fn sample_predicate(n: usize, p: f64, seed: u64, trial: u64) -> Result<Word> {
    Ok(Word(BitStream::new(p, seed, trial)?.take(n).map(|b| Letter(b as u16)).collect()))
}

#[derive(Clone, Debug)]
pub enum SentenceSpec {
    Builtin(Builtin),
    Formula(Sentence),
}

impl SentenceSpec {
    pub fn label(&self) -> String {
        match self {
            SentenceSpec::Builtin(b) => b.name(),
            SentenceSpec::Formula(s) => s.to_string(),
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        match self {
            SentenceSpec::Builtin(b) => b.vocabulary(),
            SentenceSpec::Formula(s) => s.vocabulary,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialPlan {
    pub n: usize,
    pub p: f64,
    /// Exponent with `p = n^-alpha`, when the plan was given that way.
    pub alpha: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub sentence: SentenceSpec,
    /// Cap on quantifier iterations per trial for non-built-in sentences.
    pub work_cap: u64,
}

impl TrialPlan {
    pub fn new(n: usize, p: f64, trials: u64, seed: u64, sentence: SentenceSpec) -> Self {
        TrialPlan {
            n,
            p,
            alpha: None,
            trials,
            seed,
            sentence,
            work_cap: logic::DEFAULT_WORK_CAP,
        }
    }

    pub fn with_alpha(n: usize, alpha: f64, trials: u64, seed: u64, sentence: SentenceSpec) -> Self {
        TrialPlan {
            alpha: Some(alpha),
            ..TrialPlan::new(n, p_from_alpha(n, alpha), trials, seed, sentence)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub n: usize,
    pub alpha: Option<f64>,
    pub p: f64,
    pub sentence: String,
    pub trials: u64,
    pub successes: u64,
    pub empirical: f64,
    pub std_error: f64,
    pub error: Option<String>,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "label,n,alpha,p,sentence,trials,successes,empirical,std_error,error";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.6e},{},{},{},{:.6},{:.6},{}",
            self.label,
            self.n,
            self.alpha.map_or(String::new(), |a| format!("{a:.4}")),
            self.p,
            csv_field(&self.sentence),
            self.trials,
            self.successes,
            self.empirical,
            self.std_error,
            csv_field(self.error.as_deref().unwrap_or("")),
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SweepRow::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }
}

/// Evaluates one trial. Built-ins use their scanners; `D` reads letters
/// only until it is decided.
fn run_trial(plan: &TrialPlan, trial: u64) -> Result<bool> {
    match &plan.sentence {
        SentenceSpec::Builtin(Builtin::D) => {
            Ok(logic::scan_d_iter(BitStream::new(plan.p, plan.seed, trial)?.take(plan.n)))
        }
        SentenceSpec::Builtin(b) => Ok(b.scan(sample_predicate(plan.n, plan.p, plan.seed, trial)?.letters())),
        SentenceSpec::Formula(s) => {
            let word = sample_predicate(plan.n, plan.p, plan.seed, trial)?;
            let model = match s.vocabulary {
                Vocabulary::Linear => ModelView::linear(&word),
                Vocabulary::Circular => ModelView::circular(&word),
            };
            Ok(logic::evaluate_capped(&model, s, plan.work_cap)?)
        }
    }
}

/// Success frequency of the plan's sentence over its trials.
pub fn empirical_probability(plan: &TrialPlan) -> Result<SweepRow> {
    check_p(plan.p)?;
    if plan.trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let outcomes = (0..plan.trials)
        .into_par_iter()
        .map(|i| run_trial(plan, i))
        .collect::<Result<Vec<bool>>>()?;
    let successes = outcomes.iter().filter(|&&b| b).count() as u64;
    Ok(row(String::new(), plan, successes, None))
}

fn row(label: String, plan: &TrialPlan, successes: u64, error: Option<String>) -> SweepRow {
    let q = successes as f64 / plan.trials as f64;
    SweepRow {
        label,
        n: plan.n,
        alpha: plan.alpha,
        p: plan.p,
        sentence: plan.sentence.label(),
        trials: plan.trials,
        successes,
        empirical: q,
        std_error: (q * (1.0 - q) / plan.trials as f64).sqrt(),
        error,
    }
}

/// Probability that `11` appears before `101` in an endless Bernoulli(p)
/// sequence: `q = p + (1-p)^2 q`.
pub fn race_oracle_d(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(SimError::BadProbability(p));
    }
    Ok(1.0 / (2.0 - p))
}

/// Outcome of the `D` race on a finite prefix, if the prefix decides it.
pub fn race_decided(bits: &[bool]) -> Option<bool> {
    for i in 0..bits.len() {
        if !bits[i] {
            continue;
        }
        match (bits.get(i + 1), bits.get(i + 2)) {
            (Some(true), _) => return Some(true),
            (Some(false), Some(true)) => return Some(false),
            (None, _) | (Some(false), None) => return None,
            _ => {}
        }
    }
    None
}

/// Enumerates all strings of length `len`: returns the probability of those
/// decided true and the probability left undecided.
pub fn race_enumeration(p: f64, len: usize) -> (f64, f64) {
    let mut yes = 0.0;
    let mut open = 0.0;
    let mut bits = vec![false; len];
    for mask in 0u64..(1u64 << len) {
        let mut weight = 1.0;
        for (i, b) in bits.iter_mut().enumerate() {
            *b = (mask >> i) & 1 == 1;
            weight *= if *b { p } else { 1.0 - p };
        }
        match race_decided(&bits) {
            Some(true) => yes += weight,
            Some(false) => {}
            None => open += weight,
        }
    }
    (yes, open)
}

/// `Pr[no two cyclically adjacent ones]` on a cycle of length `n >= 2`,
/// as the trace of the `n`-th power of the letter transfer matrix.
pub fn circular_no_11(n: usize, p: f64) -> f64 {
    let q = 1.0 - p;
    let t = Matrix2::new(q, p, q, 0.0);
    let mut acc = Matrix2::identity();
    let mut base = t;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc.trace()
}

/// [`circular_no_11`] in closed form. The eigenvalues are `1 - e` and
/// `e - p` with `e^2 - (1+p) e + p^2 = 0`; `e` is taken in the form that
/// avoids cancellation.
pub fn circular_no_11_eigen(n: usize, p: f64) -> f64 {
    let e = 2.0 * p * p / ((1.0 + p) + ((1.0 + p).powi(2) - 4.0 * p * p).sqrt());
    (n as f64 * (-e).ln_1p()).exp() + (e - p).powi(n as i32)
}

/// `Pr[no k cyclically consecutive ones]` on a cycle of length `n >= k`,
/// from the transfer matrix on the last `k - 1` letters.
pub fn circular_no_run(n: usize, p: f64, k: usize) -> f64 {
    assert!(k >= 1 && n >= k, "need n >= k >= 1");
    if k == 1 {
        return (1.0 - p).powi(n as i32);
    }
    let states = 1usize << (k - 1);
    let full = states - 1;
    let mut t = DMatrix::<f64>::zeros(states, states);
    for s in 0..states {
        for bit in 0..2usize {
            if s == full && bit == 1 {
                continue;
            }
            let next = ((s << 1) | bit) & full;
            t[(s, next)] += if bit == 1 { p } else { 1.0 - p };
        }
    }
    let mut acc = DMatrix::<f64>::identity(states, states);
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &t;
        }
        t = &t * &t;
        e >>= 1;
    }
    acc.trace()
}

/// How `p` depends on `n` in a sweep cell.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub enum PSpec {
    /// `p = c n^-alpha`.
    Alpha { alpha: f64, c: f64 },
    /// `1 - p = c n^-alpha`.
    ComplementAlpha { alpha: f64, c: f64 },
    Fixed(f64),
}

impl PSpec {
    pub fn p(&self, n: usize) -> f64 {
        match *self {
            PSpec::Alpha { alpha, c } => (c * p_from_alpha(n, alpha)).min(1.0),
            PSpec::ComplementAlpha { alpha, c } => 1.0 - (c * p_from_alpha(n, alpha)).min(1.0),
            PSpec::Fixed(p) => p,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            PSpec::Alpha { alpha, .. } => Some(alpha),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub label: String,
    pub n: usize,
    pub p: PSpec,
    pub sentence: SentenceSpec,
}

/// The five zero-one categories for a given `k`, plus the knife edges
/// `p = n^-1/k` and `p = n^-1/(k+1)`.
pub fn theorem1_preset(k: usize) -> Vec<(String, PSpec)> {
    let kf = k as f64;
    let mid = (1.0 / kf + 1.0 / (kf + 1.0)) / 2.0;
    vec![
        ("p<<1/n".into(), PSpec::Alpha { alpha: 1.5, c: 1.0 }),
        (format!("k={k} regime"), PSpec::Alpha { alpha: mid, c: 1.0 }),
        (format!("knife n^-1/{k}"), PSpec::Alpha { alpha: 1.0 / kf, c: 1.0 }),
        (format!("knife n^-1/{}", k + 1), PSpec::Alpha { alpha: 1.0 / (kf + 1.0), c: 1.0 }),
        ("p=1/2".into(), PSpec::Fixed(0.5)),
        (format!("1-p k={k} regime"), PSpec::ComplementAlpha { alpha: mid, c: 1.0 }),
        ("1-p<<1/n".into(), PSpec::ComplementAlpha { alpha: 1.5, c: 1.0 }),
    ]
}

/// Grid of cells for the preset: every category, every `n`, and the
/// sentences `A_1 ..= A_{k+1}`.
pub fn theorem1_cells(k: usize, ns: &[usize]) -> Vec<SweepCell> {
    let mut out = Vec::new();
    for &n in ns {
        for (label, p) in theorem1_preset(k) {
            for j in 1..=k + 1 {
                out.push(SweepCell {
                    label: label.clone(),
                    n,
                    p,
                    sentence: SentenceSpec::Builtin(Builtin::Ak(j)),
                });
            }
        }
    }
    out
}

/// Runs each cell with its own seed derived from `seed` and the cell index.
/// Cell errors are recorded in the row.
pub fn regime_sweep(cells: &[SweepCell], trials: u64, seed: u64) -> SweepResult {
    let rows = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let cell_seed = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut plan = TrialPlan::new(cell.n, cell.p.p(cell.n), trials, cell_seed, cell.sentence.clone());
            plan.alpha = cell.p.alpha();
            match empirical_probability(&plan) {
                Ok(mut r) => {
                    r.label = cell.label.clone();
                    r
                }
                Err(e) => row(cell.label.clone(), &plan, 0, Some(e.to_string())),
            }
        })
        .collect();
    SweepResult { rows }
}

/// Draws one `level`-interval value from an endless Bernoulli(p) sequence.
pub fn sample_interval_value<R: Rng>(vs: &ValueSystem, level: usize, p: f64, rng: &mut R) -> Result<usize> {
    check_p(p)?;
    if level == 1 {
        let zeros = if p >= 1.0 {
            0
        } else if p <= 0.0 {
            u64::MAX
        } else {
            Geometric::new(p).expect("p in (0,1)").sample(rng)
        };
        return Ok(vs.level1_value(zeros.min(usize::MAX as u64) as usize));
    }
    let j = level - 1;
    let monoid = vs.monoid(j)?;
    let lower = vs.level(j)?;
    let mut alpha = monoid.identity();
    loop {
        let v = sample_interval_value(vs, j, p, rng)?;
        match lower.letter_of(v) {
            Some(a) => alpha = monoid.right(alpha, a),
            None => return Ok(vs.pair_index(j, alpha, v)?),
        }
    }
}

/// Counts of each `level`-value over `samples` independent intervals.
pub fn sample_value_counts(vs: &ValueSystem, level: usize, p: f64, samples: u64, seed: u64) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; vs.level(level)?.len()];
    let mut rng = trial_rng(seed, 0);
    for _ in 0..samples {
        counts[sample_interval_value(vs, level, p, &mut rng)?] += 1;
    }
    Ok(counts)
}

/// The block `A_1 ... A_R` as `level`-value indices: the universal sequence
/// of the string monoid over `P_level`.
pub fn universal_block(vs: &ValueSystem, level: usize) -> Result<Vec<usize>> {
    let m = vs.monoid(level).map_err(|_| SimError::NoMonoid(level))?;
    let values = vs.level(level)?;
    Ok(universal_sequence(m)?.iter().map(|&a| values.value_of_letter(a)).collect())
}

fn occurrences(d: &Decomposition, block: &[usize]) -> Vec<(usize, usize)> {
    let iv = &d.intervals;
    if block.is_empty() || iv.len() < block.len() {
        return Vec::new();
    }
    (0..=iv.len() - block.len())
        .filter(|&i| block.iter().enumerate().all(|(j, &v)| iv[i + j].value == v))
        .map(|i| (iv[i].start, iv[i + block.len() - 1].end))
        .collect()
}

/// Whether every window of `width` positions contains a whole occurrence.
fn block_everywhere(occ: &[(usize, usize)], n: usize, width: usize) -> bool {
    if width > n {
        return !occ.is_empty();
    }
    // Occurrences are sorted by start; suffix minima of their ends.
    let mut best = vec![usize::MAX; occ.len() + 1];
    for i in (0..occ.len()).rev() {
        best[i] = best[i + 1].min(occ[i].1);
    }
    let mut idx = 0;
    for s in 0..=n - width {
        while idx < occ.len() && occ[idx].0 < s {
            idx += 1;
        }
        if best[idx] > s + width {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug, Serialize)]
pub struct RegimeStats {
    pub n: usize,
    pub p: f64,
    pub level: usize,
    pub trials: u64,
    /// Mean number of complete `level`-intervals.
    pub mean_intervals: f64,
    /// Mean of `N / (n p^level)`.
    pub n_ratio: f64,
    /// Fraction of trials with a transient value among the complete intervals.
    pub transient_fraction: f64,
    /// Fraction of trials whose value sequence contains the universal block.
    pub block_fraction: f64,
}

/// Interval counts, transient scarcity and block presence at one `(n, p)`.
pub fn regime_stats(vs: &ValueSystem, level: usize, n: usize, p: f64, trials: u64, seed: u64) -> Result<RegimeStats> {
    check_p(p)?;
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let block = universal_block(vs, level)?;
    let per = (0..trials)
        .into_par_iter()
        .map(|i| {
            let word = sample_predicate(n, p, seed, i)?;
            let d = vs.decompose(&word, level)?;
            let transient = d.intervals.iter().any(|iv| !iv.persistent);
            let found = !occurrences(&d, &block).is_empty();
            Ok((d.intervals.len(), transient, found))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = n as f64 * p.powi(level as i32);
    let t = trials as f64;
    Ok(RegimeStats {
        n,
        p,
        level,
        trials,
        mean_intervals: per.iter().map(|r| r.0 as f64).sum::<f64>() / t,
        n_ratio: per.iter().map(|r| r.0 as f64 / scale).sum::<f64>() / t,
        transient_fraction: per.iter().filter(|r| r.1).count() as f64 / t,
        block_fraction: per.iter().filter(|r| r.2).count() as f64 / t,
    })
}

/// `10^-2 3^-t`.
pub fn default_delta(t: usize) -> f64 {
    1e-2 / 3f64.powi(t as i32)
}

/// Largest `k` in the default probe catalog's `A_k`.
pub const CATALOG_MAX_K: usize = 3;

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub n: usize,
    pub p: f64,
    pub level: usize,
    pub trials: u64,
    pub seed: u64,
    pub delta: f64,
    /// Number of equal-class pairs to compare.
    pub pairs: usize,
    pub catalog: Vec<Builtin>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTrial {
    pub forward_class: Option<usize>,
    pub reverse_class: Option<usize>,
    pub all_persistent: bool,
    pub block_everywhere: bool,
    pub nice: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JointCell {
    pub forward: usize,
    pub reverse: usize,
    pub observed: u64,
    pub expected: f64,
    pub sigma: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearLawProbe {
    pub n: usize,
    pub p: f64,
    pub t: usize,
    pub level: usize,
    pub trials: u64,
    pub window: usize,
    pub r_classes: usize,
    pub nice_fraction: f64,
    pub classified: u64,
    pub joint: Vec<JointCell>,
    pub max_z: f64,
    pub pairs_checked: usize,
    pub catalog_disagreements: usize,
    pub type_disagreements: usize,
    pub per_trial: Vec<ProbeTrial>,
}

impl LinearLawProbe {
    pub fn report(&self) -> String {
        let mut out = String::from("# linear law probe v1\n");
        out += &format!("n {}\np {:.6e}\nt {}\nlevel {}\ntrials {}\n", self.n, self.p, self.t, self.level, self.trials);
        out += &format!("window {}\nr_classes {}\n", self.window, self.r_classes);
        out += &format!("nice_fraction {:.6}\nclassified {}\nmax_z {:.4}\n", self.nice_fraction, self.classified, self.max_z);
        out += &format!(
            "pairs_checked {}\ncatalog_disagreements {}\ntype_disagreements {}\n",
            self.pairs_checked, self.catalog_disagreements, self.type_disagreements
        );
        for c in &self.joint {
            out += &format!(
                "joint {} {} observed={} expected={:.3} sigma={:.3} z={:.3}\n",
                c.forward, c.reverse, c.observed, c.expected, c.sigma, c.z
            );
        }
        out
    }
}

fn class_of(vs: &ValueSystem, m: &MonoidTable, r_class_of: &[Option<usize>], d: &Decomposition) -> Option<usize> {
    let values = vs.level(d.level).ok()?;
    let mut x = m.identity();
    for iv in &d.intervals {
        x = m.right(x, values.letter_of(iv.value)?);
    }
    r_class_of[x]
}

fn catalog_values(catalog: &[Builtin], word: &Word) -> Vec<bool> {
    catalog.iter().map(|b| b.scan(word.letters())).collect()
}

/// Samples `U_{n,p}`, classifies the persistent value strings of the word
/// and of its reversal by right class, tests independence of the two
/// classes, and compares nice trials with equal class pairs.
pub fn theorem2_probe(vs: &ValueSystem, cfg: &ProbeConfig) -> Result<LinearLawProbe> {
    check_p(cfg.p)?;
    if cfg.trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let m = vs.monoid(cfg.level).map_err(|_| SimError::NoMonoid(cfg.level))?;
    let green = m.green_classes();
    let block = universal_block(vs, cfg.level)?;
    let window = (cfg.delta * cfg.n as f64).ceil() as usize;
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let word = sample_predicate(cfg.n, cfg.p, cfg.seed, i)?;
            let mut all_persistent = true;
            let mut everywhere = true;
            let mut classes = [None, None];
            for (side, w) in [word.clone(), word.reversed()].iter().enumerate() {
                let d = vs.decompose(w, cfg.level)?;
                all_persistent &= d.intervals.iter().all(|iv| iv.persistent);
                everywhere &= block_everywhere(&occurrences(&d, &block), cfg.n, window);
                classes[side] = class_of(vs, m, &green.r_class_of, &d);
            }
            Ok(ProbeTrial {
                forward_class: classes[0],
                reverse_class: classes[1],
                all_persistent,
                block_everywhere: everywhere,
                nice: all_persistent && everywhere,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut joint_counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut fwd: BTreeMap<usize, u64> = BTreeMap::new();
    let mut rev: BTreeMap<usize, u64> = BTreeMap::new();
    for tr in &per_trial {
        if let (Some(a), Some(b)) = (tr.forward_class, tr.reverse_class) {
            *joint_counts.entry((a, b)).or_default() += 1;
            *fwd.entry(a).or_default() += 1;
            *rev.entry(b).or_default() += 1;
        }
    }
    let classified: u64 = joint_counts.values().sum();
    let mut joint = Vec::new();
    let mut max_z = 0.0f64;
    if classified > 0 {
        let total = classified as f64;
        for (&a, &ca) in &fwd {
            for (&b, &cb) in &rev {
                let q = (ca as f64 / total) * (cb as f64 / total);
                let expected = total * q;
                let sigma = (total * q * (1.0 - q)).sqrt();
                let observed = joint_counts.get(&(a, b)).copied().unwrap_or(0);
                let diff = (observed as f64 - expected).abs();
                let z = if sigma > 0.0 {
                    diff / sigma
                } else if diff < 1e-9 {
                    0.0
                } else {
                    f64::INFINITY
                };
                max_z = max_z.max(z);
                joint.push(JointCell {
                    forward: a,
                    reverse: b,
                    observed,
                    expected,
                    sigma,
                    z,
                });
            }
        }
    }

    // Pairs of nice trials with equal class pairs, in trial order.
    let mut groups: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
    for (i, tr) in per_trial.iter().enumerate() {
        if let (true, Some(a), Some(b)) = (tr.nice, tr.forward_class, tr.reverse_class) {
            groups.entry((a, b)).or_default().push(i as u64);
        }
    }
    let mut pairs = Vec::new();
    'outer: for members in groups.values() {
        for w in members.chunks_exact(2) {
            if pairs.len() >= cfg.pairs {
                break 'outer;
            }
            pairs.push((w[0], w[1]));
        }
    }
    let binary = MonoidTable::generate(Alphabet::binary(), vs.t(), crate::monoid::DEFAULT_CAP)?;
    let checks = pairs
        .par_iter()
        .map(|&(i, j)| {
            let u = sample_predicate(cfg.n, cfg.p, cfg.seed, i)?;
            let v = sample_predicate(cfg.n, cfg.p, cfg.seed, j)?;
            let catalog_ok = catalog_values(&cfg.catalog, &u) == catalog_values(&cfg.catalog, &v);
            let type_ok = binary.element_of(u.letters()) == binary.element_of(v.letters());
            Ok((catalog_ok, type_ok))
        })
        .collect::<Result<Vec<_>>>()?;

    let nice = per_trial.iter().filter(|t| t.nice).count();
    Ok(LinearLawProbe {
        n: cfg.n,
        p: cfg.p,
        t: vs.t(),
        level: cfg.level,
        trials: cfg.trials,
        window,
        r_classes: green.r_classes.len(),
        nice_fraction: nice as f64 / cfg.trials as f64,
        classified,
        joint,
        max_z,
        pairs_checked: checks.len(),
        catalog_disagreements: checks.iter().filter(|c| !c.0).count(),
        type_disagreements: checks.iter().filter(|c| !c.1).count(),
        per_trial,
    })
}

/// Builds the value system the probe needs (levels up to `level + 1`).
pub fn probe_system(t: usize, level: usize, cap: usize) -> Result<ValueSystem> {
    Ok(ValueSystem::build(t, level + 1, cap)?)
}

/// Names of the `level`-values a word's complete intervals take.
pub fn value_names(vs: &ValueSystem, d: &Decomposition) -> Result<Vec<String>> {
    let values = vs.level(d.level)?;
    Ok(d.intervals.iter().map(|iv| values.values[iv.value].name.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_probabilities() {
        let w = sample_predicate(50, 0.0, 1, 0).unwrap();
        assert!(w.iter().all(|l| l.0 == 0));
        let w = sample_predicate(50, 1.0, 1, 0).unwrap();
        assert!(w.iter().all(|l| l.0 == 1));
        assert!(sample_predicate(5, 1.5, 1, 0).is_err());
    }

    #[test]
    fn half_density() {
        let n = 100_000;
        let w = sample_predicate(n, 0.5, 3, 0).unwrap();
        let ones = w.iter().filter(|l| l.0 == 1).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn reproducible() {
        assert_eq!(sample_predicate(1000, 0.1, 9, 4).unwrap(), sample_predicate(1000, 0.1, 9, 4).unwrap());
        assert_ne!(sample_predicate(1000, 0.1, 9, 4).unwrap(), sample_predicate(1000, 0.1, 9, 5).unwrap());
    }

    #[test]
    fn race_values() {
        assert!((race_oracle_d(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((race_oracle_d(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((race_oracle_d(1e-9).unwrap() - 0.5).abs() < 1e-9);
        assert!(race_oracle_d(0.0).is_err());
        let (yes, open) = race_enumeration(0.5, 20);
        let q = race_oracle_d(0.5).unwrap();
        assert!(yes <= q + 1e-12 && q <= yes + open + 1e-12, "{yes} {open}");
        assert!(open < 0.01);
    }

    #[test]
    fn race_decision_matches_scanner() {
        for n in 0..=12usize {
            for mask in 0u32..(1 << n) {
                let bits: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
                let scanned = logic::scan_d_iter(bits.iter().copied());
                if let Some(d) = race_decided(&bits) {
                    assert_eq!(d, scanned, "{bits:?}");
                } else {
                    assert!(!scanned);
                }
            }
        }
    }

    #[test]
    fn transfer_matrix_matches_enumeration() {
        for n in 2..=12usize {
            for &p in &[0.1f64, 0.37, 0.8] {
                let mut exact = 0.0;
                for mask in 0u32..(1 << n) {
                    let bits: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
                    if (0..n).any(|i| bits[i] && bits[(i + 1) % n]) {
                        continue;
                    }
                    let ones = bits.iter().filter(|&&b| b).count() as i32;
                    exact += p.powi(ones) * (1.0 - p).powi(n as i32 - ones);
                }
                assert!((circular_no_11(n, p) - exact).abs() < 1e-12);
                assert!((circular_no_11_eigen(n, p) - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn run_transfer_matrix_matches_enumeration() {
        for k in 1..=3usize {
            for n in k.max(2)..=11usize {
                let p = 0.3f64;
                let mut exact = 0.0;
                for mask in 0u32..(1 << n) {
                    let bits: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
                    if (0..n).any(|i| (0..k).all(|j| bits[(i + j) % n])) {
                        continue;
                    }
                    let ones = bits.iter().filter(|&&b| b).count() as i32;
                    exact += p.powi(ones) * (1.0 - p).powi(n as i32 - ones);
                }
                assert!((circular_no_run(n, p, k) - exact).abs() < 1e-12, "n={n} k={k}");
            }
        }
        assert!((circular_no_run(50, 0.2, 2) - circular_no_11(50, 0.2)).abs() < 1e-12);
    }

    #[test]
    fn window_check() {
        let occ = [(0, 3), (5, 8)];
        assert!(block_everywhere(&occ, 8, 7));
        assert!(!block_everywhere(&occ, 8, 6));
        assert!(!block_everywhere(&occ, 8, 4));
        assert!(!block_everywhere(&[], 8, 20));
    }

    #[test]
    fn sweep_records_cell_errors() {
        let cells = vec![SweepCell {
            label: "bad".into(),
            n: 10,
            p: PSpec::Fixed(2.0),
            sentence: SentenceSpec::Builtin(Builtin::A),
        }];
        let r = regime_sweep(&cells, 5, 1);
        assert!(r.rows[0].error.is_some());
        assert!(r.to_csv().starts_with(SweepRow::CSV_HEADER));
    }
}
