//! Exact and limiting value distributions, and random walks on type monoids.
//!
//! For level `j + 1` the persistent j-values seen before the first transient
//! one drive a walk `α -> α + β` on the string monoid over `P_j`. With `p*`
//! the probability that a j-value is transient, exactly `u` persistent steps
//! happen with probability `(1 - p*)^u p*`, so the class `W` of the
//! persistent string has `Pr[W = α] = Σ_u f(u, α) (1 - p*)^u p*`.

use nalgebra::DMatrix;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::intervals::{IntervalError, ValueSystem};
use crate::monoid::MonoidTable;

/// Default truncation tolerance for series and power iteration.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default cap on iteration steps.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("probability {0} must lie strictly between 0 and 1")]
    ProbabilityOutOfRange(f64),
    #[error("series did not converge within {steps} steps (remaining mass {remaining:e})")]
    NotConverged { steps: usize, remaining: f64 },
    #[error("linear system is singular")]
    Singular,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be non-negative with positive total")]
    BadWeights,
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

pub type Result<T> = std::result::Result<T, MarkovError>;

/// Numerical settings for truncated series and power iteration.
#[derive(Copy, Clone, Debug)]
pub struct Numerics {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tol: DEFAULT_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// A random walk on a monoid: from `x` move to `x + a` with weight `w_a`.
#[derive(Clone, Debug)]
pub struct Walk<'a> {
    pub monoid: &'a MonoidTable,
    pub weights: Vec<f64>,
}

impl<'a> Walk<'a> {
    pub fn new(monoid: &'a MonoidTable, weights: Vec<f64>) -> Result<Self> {
        let k = monoid.alphabet().len();
        if weights.len() != k {
            return Err(MarkovError::WeightCount {
                expected: k,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(MarkovError::BadWeights);
        }
        Ok(Walk { monoid, weights })
    }

    pub fn states(&self) -> usize {
        self.monoid.len()
    }

    /// One application of the transition operator to a distribution.
    pub fn step(&self, dist: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; dist.len()];
        for (x, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for a in self.monoid.alphabet().letters() {
                next[self.monoid.right(x, a)] += mass * self.weights[a.index()];
            }
        }
        next
    }

    /// `f(u, ·)`: distribution after `u` steps from the identity.
    pub fn step_distribution(&self, u: usize) -> Vec<f64> {
        let mut dist = vec![0.0; self.states()];
        dist[self.monoid.identity()] = 1.0;
        for _ in 0..u {
            dist = self.step(&dist);
        }
        dist
    }

    /// Dense transition matrix, rows indexed by source state.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.states();
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            for a in self.monoid.alphabet().letters() {
                m[(x, self.monoid.right(x, a))] += self.weights[a.index()];
            }
        }
        m
    }

    /// States lying in a minimal closed set, from reachability on the
    /// support of the weights.
    pub fn recurrent_states(&self) -> Vec<bool> {
        let reach = self.reachability();
        (0..self.states())
            .map(|x| (0..self.states()).all(|y| !reach[x][y] || reach[y][x]))
            .collect()
    }

    fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.states();
        let support: Vec<_> = self
            .monoid
            .alphabet()
            .letters()
            .filter(|a| self.weights[a.index()] > 0.0)
            .collect();
        (0..n)
            .map(|x| {
                let mut seen = vec![false; n];
                let mut stack = vec![x];
                seen[x] = true;
                while let Some(v) = stack.pop() {
                    for &a in &support {
                        let w = self.monoid.right(v, a);
                        if !seen[w] {
                            seen[w] = true;
                            stack.push(w);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    /// Minimal closed sets, each sorted, ordered by smallest member.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let reach = self.reachability();
        let recurrent = self.recurrent_states();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut assigned = vec![false; self.states()];
        for x in 0..self.states() {
            if recurrent[x] && !assigned[x] {
                let class: Vec<usize> = (0..self.states()).filter(|&y| reach[x][y]).collect();
                for &y in &class {
                    assigned[y] = true;
                }
                classes.push(class);
            }
        }
        classes
    }

    /// Probability of ending in each minimal closed set, starting from the
    /// identity, by solving the first-step equations on transient states.
    pub fn absorption(&self) -> Result<Absorption> {
        let classes = self.closed_classes();
        let n = self.states();
        let total: f64 = self.weights.iter().sum();
        let mut class_of = vec![None; n];
        for (c, members) in classes.iter().enumerate() {
            for &x in members {
                class_of[x] = Some(c);
            }
        }
        let transient: Vec<usize> = (0..n).filter(|&x| class_of[x].is_none()).collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &x) in transient.iter().enumerate() {
            pos[x] = i;
        }
        let m = transient.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut b = DMatrix::<f64>::zeros(m, classes.len());
        for (i, &x) in transient.iter().enumerate() {
            for l in self.monoid.alphabet().letters() {
                let w = self.weights[l.index()] / total;
                let y = self.monoid.right(x, l);
                match class_of[y] {
                    Some(c) => b[(i, c)] += w,
                    None => a[(i, pos[y])] -= w,
                }
            }
        }
        let start = self.monoid.identity();
        let probabilities = match class_of[start] {
            Some(c) => (0..classes.len()).map(|d| f64::from(u8::from(c == d))).collect(),
            None => {
                let h = a.lu().solve(&b).ok_or(MarkovError::Singular)?;
                (0..classes.len()).map(|c| h[(pos[start], c)]).collect()
            }
        };
        Ok(Absorption {
            classes,
            probabilities,
        })
    }

    /// Monte Carlo hit counts per minimal closed set over `runs` walks.
    pub fn sample_absorption(&self, runs: usize, seed: u64) -> Result<Vec<usize>> {
        let classes = self.closed_classes();
        let mut class_of = vec![None; self.states()];
        for (c, members) in classes.iter().enumerate() {
            for &x in members {
                class_of[x] = Some(c);
            }
        }
        let dist = WeightedIndex::new(&self.weights).map_err(|_| MarkovError::BadWeights)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let letters: Vec<_> = self.monoid.alphabet().letters().collect();
        let mut counts = vec![0; classes.len()];
        for _ in 0..runs {
            let mut x = self.monoid.identity();
            while class_of[x].is_none() {
                x = self.monoid.right(x, letters[dist.sample(&mut rng)]);
            }
            counts[class_of[x].unwrap()] += 1;
        }
        Ok(counts)
    }
}

#[derive(Clone, Debug)]
pub struct Absorption {
    /// Minimal closed sets (the R-classes when every weight is positive).
    pub classes: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
}

/// The walk driving level `j + 1` at finite `p`: step weights `p_β⁺` over
/// `P_j` and stop probability `p*`.
#[derive(Clone, Debug)]
pub struct ChainSpec<'a> {
    pub walk: Walk<'a>,
    pub stop: f64,
}

/// The `p -> 0` limit of [`ChainSpec`]: step weights `c_β`.
pub type LimitChain<'a> = Walk<'a>;

/// Probabilities (finite `p`) or limit coefficients of the values at a level.
#[derive(Clone, Debug)]
pub struct ValueDistribution {
    pub level: usize,
    /// Indexed by value index at `level`.
    pub probabilities: Vec<f64>,
    /// Total probability (or coefficient) of the transient values.
    pub transient_mass: f64,
    /// Conditional distribution of the transient values, in `T_level` order.
    pub tail_weights: Vec<f64>,
}

impl ValueDistribution {
    fn new(vs: &ValueSystem, level: usize, probabilities: Vec<f64>) -> Result<Self> {
        let values = vs.level(level)?;
        let transient_mass: f64 = values.transient.iter().map(|&y| probabilities[y]).sum();
        let tail_weights = values
            .transient
            .iter()
            .map(|&y| probabilities[y] / transient_mass)
            .collect();
        Ok(ValueDistribution {
            level,
            probabilities,
            transient_mass,
            tail_weights,
        })
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

impl<'a> ChainSpec<'a> {
    /// Chain over the string monoid of `P_j` built from the exact j-value
    /// distribution at `p`.
    pub fn at_level(vs: &'a ValueSystem, j: usize, p: f64, num: Numerics) -> Result<Self> {
        let lower = kvalue_distribution_with(vs, p, j, num)?;
        Self::from_distribution(vs, &lower)
    }

    fn from_distribution(vs: &'a ValueSystem, lower: &ValueDistribution) -> Result<Self> {
        let j = lower.level;
        let monoid = vs.monoid(j)?;
        let values = vs.level(j)?;
        let stop = lower.transient_mass;
        let weights = values
            .persistent
            .iter()
            .map(|&b| lower.probabilities[b] / (1.0 - stop))
            .collect();
        Ok(ChainSpec {
            walk: Walk::new(monoid, weights)?,
            stop,
        })
    }

    /// `Pr[W = α]` as a truncated series over the number of persistent steps.
    pub fn class_distribution(&self, num: Numerics) -> Result<Vec<f64>> {
        let r = 1.0 - self.stop;
        let mut dist = self.walk.step_distribution(0);
        let mut acc = vec![0.0; dist.len()];
        let mut coef = self.stop;
        let mut remaining = 1.0;
        for _ in 0..num.max_steps {
            for (a, d) in acc.iter_mut().zip(&dist) {
                *a += coef * d;
            }
            remaining *= r;
            if remaining < num.tol {
                return Ok(acc);
            }
            dist = self.walk.step(&dist);
            coef *= r;
        }
        Err(MarkovError::NotConverged {
            steps: num.max_steps,
            remaining,
        })
    }

    /// `Pr[W = ·] = p* e_O (I - (1 - p*) P)^{-1}`, by a dense solve.
    pub fn class_distribution_solve(&self) -> Result<Vec<f64>> {
        let n = self.walk.states();
        let a = DMatrix::<f64>::identity(n, n) - self.walk.matrix() * (1.0 - self.stop);
        let mut rhs = DMatrix::<f64>::zeros(n, 1);
        rhs[(self.walk.monoid.identity(), 0)] = self.stop;
        let x = a.transpose().lu().solve(&rhs).ok_or(MarkovError::Singular)?;
        Ok(x.column(0).iter().copied().collect())
    }
}

/// Exact distribution of the `level`-value of a fixed position at `p`.
pub fn kvalue_distribution(vs: &ValueSystem, p: f64, level: usize) -> Result<ValueDistribution> {
    kvalue_distribution_with(vs, p, level, Numerics::default())
}

pub fn kvalue_distribution_with(
    vs: &ValueSystem,
    p: f64,
    level: usize,
    num: Numerics,
) -> Result<ValueDistribution> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MarkovError::ProbabilityOutOfRange(p));
    }
    if level == 1 {
        let s = vs.s();
        let mut probs: Vec<f64> = (1..=s).map(|i| (1.0 - p).powi(i as i32 - 1) * p).collect();
        probs.push((1.0 - p).powi(s as i32));
        return ValueDistribution::new(vs, 1, probs);
    }
    let j = level - 1;
    let lower = kvalue_distribution_with(vs, p, j, num)?;
    let chain = ChainSpec::from_distribution(vs, &lower)?;
    let w = chain.class_distribution(num)?;
    pair_distribution(vs, level, &w, &lower.tail_weights)
}

fn pair_distribution(
    vs: &ValueSystem,
    level: usize,
    class: &[f64],
    tail_weights: &[f64],
) -> Result<ValueDistribution> {
    let lower = vs.level(level - 1)?;
    let mut probs = vec![0.0; vs.level(level)?.len()];
    for (alpha, &w) in class.iter().enumerate() {
        for (pos, &y) in lower.transient.iter().enumerate() {
            probs[vs.pair_index(level - 1, alpha, y)?] = w * tail_weights[pos];
        }
    }
    ValueDistribution::new(vs, level, probs)
}

/// Limit form: `c_β` for persistent values and the coefficient of `p` for
/// transient ones.
pub fn limit_coefficients(vs: &ValueSystem, level: usize) -> Result<ValueDistribution> {
    limit_coefficients_with(vs, level, Numerics::default())
}

pub fn limit_coefficients_with(
    vs: &ValueSystem,
    level: usize,
    num: Numerics,
) -> Result<ValueDistribution> {
    if level == 1 {
        let n = vs.level(1)?.len();
        return ValueDistribution::new(vs, 1, vec![1.0; n]);
    }
    let j = level - 1;
    let lower = limit_coefficients_with(vs, j, num)?;
    let chain = limit_chain(vs, &lower)?;
    let (long_run, transient_sums) = limit_class_weights(&chain, num)?;
    let c = lower.transient_mass;
    let weights: Vec<f64> = (0..chain.states())
        .map(|alpha| {
            if chain.monoid.is_persistent(alpha) {
                long_run[alpha]
            } else {
                c * transient_sums[alpha]
            }
        })
        .collect();
    pair_distribution(vs, level, &weights, &lower.tail_weights)
}

fn limit_chain<'a>(vs: &'a ValueSystem, lower: &ValueDistribution) -> Result<LimitChain<'a>> {
    let values = vs.level(lower.level)?;
    let weights = values
        .persistent
        .iter()
        .map(|&b| lower.probabilities[b])
        .collect();
    Walk::new(vs.monoid(lower.level)?, weights)
}

/// The limit chain driving level `level` (over `P_{level-1}`).
pub fn limit_chain_at(vs: &ValueSystem, level: usize) -> Result<LimitChain<'_>> {
    let lower = limit_coefficients(vs, level - 1)?;
    limit_chain(vs, &lower)
}

/// Long-run distribution from the identity and `Σ_u f°(u, α)` on transient
/// states, iterating until both the transient mass and the total variation
/// between successive steps fall below tolerance.
pub fn limit_class_weights(chain: &Walk<'_>, num: Numerics) -> Result<(Vec<f64>, Vec<f64>)> {
    let persistent = chain.monoid.persistent_flags();
    let mut dist = chain.step_distribution(0);
    let mut sums = vec![0.0; dist.len()];
    for _ in 0..num.max_steps {
        let mut transient_mass = 0.0;
        for (x, &d) in dist.iter().enumerate() {
            if !persistent[x] {
                sums[x] += d;
                transient_mass += d;
            }
        }
        let next = chain.step(&dist);
        let tv: f64 = next.iter().zip(&dist).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        dist = next;
        if transient_mass < num.tol && tv < num.tol {
            return Ok((dist, sums));
        }
    }
    let remaining = dist
        .iter()
        .enumerate()
        .filter(|(x, _)| !persistent[*x])
        .map(|(_, d)| d)
        .sum();
    Err(MarkovError::NotConverged {
        steps: num.max_steps,
        remaining,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::DEFAULT_LEVEL_CAP;
    use crate::word_types::Alphabet;

    fn vs22() -> ValueSystem {
        ValueSystem::build(2, 2, DEFAULT_LEVEL_CAP).unwrap()
    }

    #[test]
    fn level_one_closed_form() {
        let vs = vs22();
        let d = kvalue_distribution(&vs, 0.1, 1).unwrap();
        assert!((d.probabilities[0] - 0.1).abs() < 1e-15);
        assert!((d.probabilities[2] - 0.081).abs() < 1e-15);
        assert!((d.probabilities[vs.b()] - 0.9f64.powi(9)).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(matches!(kvalue_distribution(&vs, 0.0, 1), Err(MarkovError::ProbabilityOutOfRange(_))));
    }

    #[test]
    fn level_two_series_matches_solve_and_sums_to_one() {
        let vs = vs22();
        for p in [0.5, 0.1, 0.01] {
            let chain = ChainSpec::at_level(&vs, 1, p, Numerics::default()).unwrap();
            let a = chain.class_distribution(Numerics::default()).unwrap();
            let b = chain.class_distribution_solve().unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-11);
            }
            let d = kvalue_distribution(&vs, p, 2).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn level_two_limit_coefficients() {
        let vs = vs22();
        let c = limit_coefficients(&vs, 2).unwrap();
        let level = vs.level(2).unwrap();
        for &v in &level.persistent {
            assert!((c.probabilities[v] - 1.0 / 9.0).abs() < 1e-12);
        }
        for &v in &level.transient {
            assert!((c.probabilities[v] - 1.0).abs() < 1e-12);
        }
        assert!((c.transient_mass - 27.0).abs() < 1e-9);
    }

    #[test]
    fn step_distribution_basics() {
        let vs = vs22();
        let chain = ChainSpec::at_level(&vs, 1, 0.2, Numerics::default()).unwrap();
        let f0 = chain.walk.step_distribution(0);
        assert_eq!(f0[0], 1.0);
        for u in [1, 2, 5, 40] {
            let f = chain.walk.step_distribution(u);
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // The unary chain moves deterministically O -> b -> 2b -> 3b.
        assert!((chain.walk.step_distribution(2)[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absorption_on_binary_monoid() {
        let m = MonoidTable::generate(Alphabet::binary(), 2, 1000).unwrap();
        let walk = Walk::new(&m, vec![0.7, 0.3]).unwrap();
        let rec = walk.recurrent_states();
        for (x, &r) in rec.iter().enumerate() {
            assert_eq!(r, m.satisfies_right_return(x));
        }
        let abs = walk.absorption().unwrap();
        assert_eq!(abs.classes.len(), 4);
        assert!((abs.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let unary = MonoidTable::generate(Alphabet::indexed("x", 1).unwrap(), 2, 100).unwrap();
        let abs = Walk::new(&unary, vec![1.0]).unwrap().absorption().unwrap();
        assert_eq!(abs.probabilities, vec![1.0]);
    }

    #[test]
    fn bad_weights_rejected() {
        let m = MonoidTable::generate(Alphabet::binary(), 1, 100).unwrap();
        assert!(matches!(Walk::new(&m, vec![1.0]), Err(MarkovError::WeightCount { .. })));
        assert_eq!(Walk::new(&m, vec![0.0, 0.0]).unwrap_err(), MarkovError::BadWeights);
    }
}
