//! One-dimensional constructions: the greedy sign rule that steers a
//! divergent null series onto any real target, and the block set
//! `Lambda(L, k)` whose words converge to `L` with at least `2^(k-2)`
//! admissible continuations per block.

use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;

use crate::block::BlockScheme;
use crate::error::{Error, Result};
use crate::exact::{Real, ScaledIntegers};
use crate::sequence::{SequenceSpec, Summability};
use crate::sign::{Sign, SignWord};
use crate::trace::PartialSumTrace;

/// Running state of the greedy rule `eps_n = +1 iff S_{n-1} <= x`.
#[derive(Debug, Clone)]
pub struct GreedyState {
    target: f64,
    sum: f64,
    steps: u64,
    max_term: f64,
}

impl GreedyState {
    pub fn new(target: f64) -> Self {
        GreedyState { target, sum: 0.0, steps: 0, max_term: 0.0 }
    }

    /// Consumes one term and returns its sign. For `alpha < 0` the sign is
    /// mirrored so that `eps * alpha` still moves towards the target.
    pub fn step(&mut self, alpha: f64) -> Sign {
        let toward = self.sum <= self.target;
        let sign = Sign::from_bool(toward == (alpha >= 0.0));
        self.sum += sign.value() * alpha;
        self.steps += 1;
        self.max_term = self.max_term.max(alpha.abs());
        sign
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// Sets a new target without touching the running sum.
    pub fn retarget(&mut self, target: f64) {
        self.target = target;
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `|x| + max_{m <= n} |alpha_m|`.
    pub fn bound(&self) -> f64 {
        self.target.abs() + self.max_term
    }

    pub fn error(&self) -> f64 {
        (self.target - self.sum).abs()
    }
}

/// Greedy signs for the first `depth` terms of a one-dimensional,
/// certified non-summable null sequence.
pub fn greedy_signs(spec: &SequenceSpec, target: f64, depth: u64) -> Result<(SignWord, PartialSumTrace)> {
    if spec.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: spec.dim() });
    }
    spec.require_null()?;
    if spec.summability() != Summability::Divergent {
        return Err(Error::precondition(
            "greedy targeting needs a non-summable sequence; this family is in l1",
        ));
    }
    let mut state = GreedyState::new(target);
    let mut trace = PartialSumTrace::with_capacity(1, Some(vec![target]), depth as usize)?;
    let mut signs = Vec::with_capacity(depth as usize);
    let mut buf = [0.0];
    for i in 0..depth {
        spec.term_into(spec.start_index() + i, &mut buf);
        let s = state.step(buf[0]);
        trace.push(s, &buf);
        signs.push(s);
    }
    Ok((SignWord::from_signs(signs), trace))
}

/// First `N` at which `S_N - x` has the opposite sign to `S_0 - x`
/// (or hits zero), if any.
pub fn first_crossing(trace: &PartialSumTrace, x: f64) -> Option<usize> {
    let initial = -x;
    (1..=trace.len()).find(|&n| {
        let d = trace.sum(n)[0] - x;
        d == 0.0 || d.signum() != initial.signum()
    })
}

/// Parameters of the block set `Lambda`.
#[derive(Debug, Clone)]
pub struct LambdaParams {
    target: Real,
    scheme: BlockScheme,
}

impl LambdaParams {
    pub fn new(target: Real, k: usize, start_index: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::precondition(format!("block width k = {k}; an integer k >= 2 is required")));
        }
        Ok(LambdaParams { target, scheme: BlockScheme::new(k, start_index)? })
    }

    pub fn for_spec(spec: &SequenceSpec, target: Real, k: usize) -> Result<Self> {
        Self::new(target, k, spec.start_index())
    }

    pub fn k(&self) -> usize {
        self.scheme.width()
    }

    pub fn target(&self) -> &Real {
        &self.target
    }

    pub fn scheme(&self) -> &BlockScheme {
        &self.scheme
    }
}

/// Which defining inequality of `Lambda` failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaCondition {
    /// `(s_j - L)(s_{j+1} - s_j) <= 0`
    TowardTarget,
    /// `|s_{j+1} - s_j| >= |a_{m(j)}|`
    BlockMagnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    pub member: bool,
    pub blocks: usize,
    pub first_violation: Option<(usize, LambdaCondition)>,
    pub arithmetic: Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    Exact,
    Float64,
}

/// Numbers usable by the block enumeration.
trait Scalar: Signed + Copy + PartialOrd + Send + Sync {}
impl Scalar for i128 {}
impl Scalar for f64 {}

/// Precomputed block sums over a window of `levels` blocks.
struct Window<T> {
    k: usize,
    target: T,
    terms: Vec<T>,
    /// `|a_{m(j)}|` per block.
    peak: Vec<T>,
    tables: Vec<Vec<T>>,
}

const TABLE_LIMIT: usize = 20;

impl<T: Scalar> Window<T> {
    fn new(k: usize, levels: usize, terms: Vec<T>, target: T) -> Self {
        let peak = (0..levels)
            .map(|j| {
                terms[j * k..(j + 1) * k]
                    .iter()
                    .map(|t| t.abs())
                    .fold(T::zero(), |m, v| if v > m { v } else { m })
            })
            .collect();
        let tables = if k <= TABLE_LIMIT {
            (0..levels).map(|j| Self::table(&terms[j * k..(j + 1) * k])).collect()
        } else {
            Vec::new()
        };
        Window { k, target, terms, peak, tables }
    }

    /// Sums for every word in lexicographic order (`+` before `-`).
    fn table(block: &[T]) -> Vec<T> {
        let mut sums = vec![T::zero()];
        for &t in block {
            let mut next = Vec::with_capacity(sums.len() * 2);
            for &s in &sums {
                next.push(s + t);
                next.push(s - t);
            }
            sums = next;
        }
        sums
    }

    fn block_sum(&self, level: usize, bits: u64) -> T {
        if let Some(t) = self.tables.get(level) {
            return t[bits as usize];
        }
        let block = &self.terms[level * self.k..(level + 1) * self.k];
        block.iter().enumerate().fold(T::zero(), |acc, (i, &t)| {
            if bits >> (self.k - 1 - i) & 1 == 0 {
                acc + t
            } else {
                acc - t
            }
        })
    }

    fn check(&self, level: usize, s: T, b: T) -> Option<LambdaCondition> {
        let off = s - self.target;
        let toward = off.is_zero() || b.is_zero() || off.is_positive() != b.is_positive();
        if !toward {
            Some(LambdaCondition::TowardTarget)
        } else if b.abs() < self.peak[level] {
            Some(LambdaCondition::BlockMagnitude)
        } else {
            None
        }
    }

    fn children(&self, level: usize, s: T) -> Vec<(u64, T)> {
        (0..1u64 << self.k)
            .filter_map(|bits| {
                let b = self.block_sum(level, bits);
                self.check(level, s, b).is_none().then_some((bits, s + b))
            })
            .collect()
    }

    fn membership(&self, word: &SignWord) -> (bool, Option<(usize, LambdaCondition)>) {
        let mut s = T::zero();
        for level in 0..word.len() / self.k {
            let b = word.signs()[level * self.k..(level + 1) * self.k]
                .iter()
                .zip(&self.terms[level * self.k..])
                .fold(T::zero(), |acc, (sg, &t)| if *sg == Sign::Plus { acc + t } else { acc - t });
            if let Some(c) = self.check(level, s, b) {
                return (false, Some((level, c)));
            }
            s = s + b;
        }
        (true, None)
    }

    fn count(&self, levels: usize) -> (Vec<u64>, Vec<u64>) {
        let root = self.children(0, T::zero());
        let mut counts = vec![0u64; levels + 1];
        let mut branching = vec![u64::MAX; levels];
        counts[0] = 1;
        if levels == 0 {
            return (counts, branching);
        }
        branching[0] = root.len() as u64;
        let parts: Vec<(Vec<u64>, Vec<u64>)> = root
            .par_iter()
            .map(|&(_, s)| {
                let mut c = vec![0u64; levels + 1];
                let mut b = vec![u64::MAX; levels];
                self.descend(1, levels, s, &mut c, &mut b);
                (c, b)
            })
            .collect();
        for (c, b) in parts {
            for i in 0..=levels {
                counts[i] += c[i];
            }
            for i in 0..levels {
                branching[i] = branching[i].min(b[i]);
            }
        }
        (counts, branching)
    }

    fn descend(&self, level: usize, levels: usize, s: T, counts: &mut [u64], branching: &mut [u64]) {
        counts[level] += 1;
        if level == levels {
            return;
        }
        let kids = self.children(level, s);
        branching[level] = branching[level].min(kids.len() as u64);
        for (_, t) in kids {
            self.descend(level + 1, levels, t, counts, branching);
        }
    }

    /// Keeps the first `per_node` children of every node, level by level.
    fn select(&self, levels: usize, per_node: usize) -> std::result::Result<Vec<Vec<SignWord>>, (usize, SignWord, usize)> {
        let mut frontier: Vec<(SignWord, T)> = vec![(SignWord::new(), T::zero())];
        let mut out = vec![vec![SignWord::new()]];
        for level in 0..levels {
            let mut next = Vec::with_capacity(frontier.len() * per_node);
            for (w, s) in &frontier {
                let kids = self.children(level, *s);
                if kids.len() < per_node {
                    return Err((level, w.clone(), kids.len()));
                }
                for &(bits, t) in kids.iter().take(per_node) {
                    next.push((w.concat(&SignWord::from_bits(bits, self.k)), t));
                }
            }
            out.push(next.iter().map(|(w, _)| w.clone()).collect());
            frontier = next;
        }
        Ok(out)
    }
}

enum AnyWindow {
    Exact(Window<i128>),
    Float(Window<f64>),
}

impl AnyWindow {
    fn build(params: &LambdaParams, spec: &SequenceSpec, levels: usize) -> Result<AnyWindow> {
        if spec.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: spec.dim() });
        }
        let k = params.k();
        let len = levels * k;
        if let (Some(terms), Some(l)) = (spec.terms_exact(0, len), params.target.exact()) {
            let mut vals: Vec<BigRational> = terms.into_iter().map(|mut t| t.remove(0)).collect();
            vals.push(l.clone());
            if let Some(scaled) = ScaledIntegers::new(&vals, 4 * (len as u32 + 2)) {
                let mut nums = scaled.nums;
                let target = nums.pop().unwrap();
                return Ok(AnyWindow::Exact(Window::new(k, levels, nums, target)));
            }
        }
        let terms = spec.terms(0, len).into_iter().map(|t| t[0]).collect();
        Ok(AnyWindow::Float(Window::new(k, levels, terms, params.target.value())))
    }

    fn arithmetic(&self) -> Arithmetic {
        match self {
            AnyWindow::Exact(_) => Arithmetic::Exact,
            AnyWindow::Float(_) => Arithmetic::Float64,
        }
    }
}

/// Checks both defining inequalities of `Lambda` on every completed block
/// of `signs`.
pub fn lambda_membership(params: &LambdaParams, signs: &SignWord, spec: &SequenceSpec) -> Result<LambdaReport> {
    let k = params.k();
    if !signs.len().is_multiple_of(k) {
        return Err(Error::precondition(format!(
            "word length {} is not a multiple of k = {k}",
            signs.len()
        )));
    }
    let levels = signs.len() / k;
    let w = AnyWindow::build(params, spec, levels)?;
    let (member, first_violation) = match &w {
        AnyWindow::Exact(w) => w.membership(signs),
        AnyWindow::Float(w) => w.membership(signs),
    };
    Ok(LambdaReport { member, blocks: levels, first_violation, arithmetic: w.arithmetic() })
}

/// Largest `levels * k` accepted by the exhaustive routines.
pub const LAMBDA_BUDGET: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCount {
    pub k: usize,
    pub levels: usize,
    pub target: String,
    /// `counts[i]` = number of words of length `i k` in `Lambda_i`.
    pub counts: Vec<u64>,
    /// `min_branching[i]` = fewest admissible extensions of a surviving
    /// level-`i` word.
    pub min_branching: Vec<u64>,
    /// `2^(k-2)`.
    pub required_branching: u64,
    pub arithmetic: Arithmetic,
}

impl LambdaCount {
    pub fn branching_holds(&self) -> bool {
        self.min_branching.iter().all(|&b| b >= self.required_branching)
    }
}

fn check_budget(params: &LambdaParams, levels: usize) -> Result<()> {
    if levels.saturating_mul(params.k()) > LAMBDA_BUDGET {
        return Err(Error::Budget(format!(
            "levels * k = {} exceeds the enumeration budget {LAMBDA_BUDGET}",
            levels * params.k()
        )));
    }
    Ok(())
}

/// Exhaustive survivor counts of `Lambda_i` for `i <= levels`.
pub fn lambda_count(params: &LambdaParams, spec: &SequenceSpec, levels: usize) -> Result<LambdaCount> {
    check_budget(params, levels)?;
    let w = AnyWindow::build(params, spec, levels)?;
    let (counts, min_branching) = match &w {
        AnyWindow::Exact(w) => w.count(levels),
        AnyWindow::Float(w) => w.count(levels),
    };
    Ok(LambdaCount {
        k: params.k(),
        levels,
        target: params.target.to_string(),
        counts,
        min_branching,
        required_branching: 1 << (params.k() - 2),
        arithmetic: w.arithmetic(),
    })
}

/// The tree obtained by keeping the lexicographically first `per_node`
/// admissible children at every node; `levels + 1` layers of words.
pub fn lambda_tree(
    params: &LambdaParams,
    spec: &SequenceSpec,
    levels: usize,
    per_node: usize,
) -> Result<Vec<Vec<SignWord>>> {
    check_budget(params, levels)?;
    let w = AnyWindow::build(params, spec, levels)?;
    let res = match &w {
        AnyWindow::Exact(w) => w.select(levels, per_node),
        AnyWindow::Float(w) => w.select(levels, per_node),
    };
    res.map_err(|(level, word, found)| {
        Error::precondition(format!(
            "branching deficit at level {level}, node `{word}`: {found} admissible children, {per_node} needed"
        ))
    })
}

/// All words of `Lambda_levels`, in lexicographic order.
pub fn lambda_words(params: &LambdaParams, spec: &SequenceSpec, levels: usize) -> Result<Vec<SignWord>> {
    check_budget(params, levels)?;
    let w = AnyWindow::build(params, spec, levels)?;
    Ok(match &w {
        AnyWindow::Exact(w) => collect_words(w, levels),
        AnyWindow::Float(w) => collect_words(w, levels),
    })
}

fn collect_words<T: Scalar>(w: &Window<T>, levels: usize) -> Vec<SignWord> {
    let mut frontier = vec![(SignWord::new(), T::zero())];
    for level in 0..levels {
        frontier = frontier
            .iter()
            .flat_map(|(word, s)| {
                w.children(level, *s)
                    .into_iter()
                    .map(move |(bits, t)| (word.concat(&SignWord::from_bits(bits, w.k)), t))
            })
            .collect();
    }
    frontier.into_iter().map(|(w, _)| w).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;
    use crate::trace::partial_sums;

    fn harmonic() -> SequenceSpec {
        parse_spec("family = power-decay\ncoeffs = 1\nexponents = 1\n").unwrap()
    }

    #[test]
    fn harmonic_toward_zero_first_five() {
        let (w, t) = greedy_signs(&harmonic(), 0.0, 5).unwrap();
        assert_eq!(w.to_string(), "+---+");
        // 1 - 1/2 - 1/3 - 1/4 + 1/5 = 7/60
        assert!((t.sum(5)[0] - 7.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn zero_terms_take_plus() {
        let mut st = GreedyState::new(0.0);
        for _ in 0..10 {
            assert_eq!(st.step(0.0), Sign::Plus);
        }
        assert_eq!(st.sum(), 0.0);
    }

    #[test]
    fn summable_sequence_rejected() {
        let g = parse_spec("family = geometric\nratio = 1/2\n").unwrap();
        assert!(matches!(greedy_signs(&g, 0.3, 10), Err(Error::Precondition(_))));
        let sq = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 2\n").unwrap();
        assert!(matches!(greedy_signs(&sq, 0.3, 10), Err(Error::Precondition(_))));
    }

    #[test]
    fn bound_holds_at_every_step() {
        let spec = harmonic();
        for x in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            let (_, t) = greedy_signs(&spec, x, 20_000).unwrap();
            let mut max_term: f64 = 0.0;
            for n in 1..=t.len() {
                max_term = max_term.max(1.0 / n as f64);
                let err = (x - t.sum(n)[0]).abs();
                // |x - S_n| <= max(|x|, max |a_m|) <= |x| + max |a_m|
                assert!(err <= x.abs().max(max_term), "x={x} n={n}");
                if x != 0.0 {
                    assert!(err < x.abs() + max_term);
                }
            }
        }
    }

    #[test]
    fn crossing_contraction_on_power_decay() {
        for (exp, x) in [("1", 1.3), ("1/2", -2.0), ("3/4", 0.25)] {
            let spec = parse_spec(&format!("family = power-decay\ncoeffs = 1\nexponents = {exp}\n")).unwrap();
            let (_, t) = greedy_signs(&spec, x, 50_000).unwrap();
            let c = first_crossing(&t, x).expect("crossing within horizon");
            for n in c..=t.len() {
                // terms decrease, so the sup over m >= crossing is a_c
                let bound = spec.term(c as u64).unwrap()[0];
                assert!((t.sum(n)[0] - x).abs() <= bound, "n={n}");
            }
        }
    }

    #[test]
    fn negative_terms_still_steer() {
        let spec = parse_spec(
            "family = alternating\ninner.family = power-decay\ninner.coeffs = 1\ninner.exponents = 1\n",
        )
        .unwrap();
        let (_, t) = greedy_signs(&spec, 1.5, 100_000).unwrap();
        assert!(t.settling_index(1e-3).is_some());
    }

    #[test]
    fn k_must_be_at_least_two() {
        assert!(LambdaParams::new(Real::int(0), 1, 1).is_err());
        assert!(LambdaParams::new(Real::int(0), 2, 1).is_ok());
    }

    #[test]
    fn membership_examples() {
        let spec = harmonic();
        let p = LambdaParams::new(Real::int(0), 3, 1).unwrap();
        let empty = lambda_membership(&p, &SignWord::new(), &spec).unwrap();
        assert!(empty.member);
        let r = lambda_membership(&p, &"-++".parse().unwrap(), &spec).unwrap();
        assert_eq!(r.first_violation, Some((0, LambdaCondition::BlockMagnitude)));
        assert_eq!(r.arithmetic, Arithmetic::Exact);
        let r = lambda_membership(&p, &"+--".parse().unwrap(), &spec).unwrap();
        assert!(!r.member);
        let r = lambda_membership(&p, &"++-".parse().unwrap(), &spec).unwrap();
        assert!(r.member);
        assert!(lambda_membership(&p, &"++".parse().unwrap(), &spec).is_err());
    }

    #[test]
    fn direction_condition_detected() {
        // after "++-" s_1 = 7/6 > 0 = L, so the next block must not increase s
        let spec = harmonic();
        let p = LambdaParams::new(Real::int(0), 3, 1).unwrap();
        let r = lambda_membership(&p, &"++-+++".parse().unwrap(), &spec).unwrap();
        assert_eq!(r.first_violation, Some((1, LambdaCondition::TowardTarget)));
    }

    /// Independent count: enumerate every word and test membership directly
    /// from rational partial sums.
    fn brute_count(spec: &SequenceSpec, k: usize, levels: usize) -> u64 {
        let n = k * levels;
        let terms: Vec<BigRational> = spec.terms_exact(0, n).unwrap().into_iter().map(|mut t| t.remove(0)).collect();
        let mut count = 0;
        for bits in 0..1u64 << n {
            let w = SignWord::from_bits(bits, n);
            let mut s = BigRational::from_integer(0.into());
            let mut ok = true;
            for j in 0..levels {
                let mut b = BigRational::from_integer(0.into());
                for i in j * k..(j + 1) * k {
                    b += &terms[i] * BigRational::from_integer(w.signs()[i].as_i8().into());
                }
                let peak = terms[j * k..(j + 1) * k].iter().map(|t| t.abs()).max().unwrap();
                let toward = (&s * &b) <= BigRational::from_integer(0.into());
                if !toward || b.abs() < peak {
                    ok = false;
                    break;
                }
                s += b;
            }
            count += u64::from(ok);
        }
        count
    }

    #[test]
    fn count_k3_single_level() {
        let spec = harmonic();
        let p = LambdaParams::new(Real::int(0), 3, 1).unwrap();
        let c = lambda_count(&p, &spec, 1).unwrap();
        assert_eq!(c.counts, vec![1, 4]);
        assert_eq!(brute_count(&spec, 3, 1), 4);
        assert!(c.counts[1] >= 2);
    }

    #[test]
    fn count_matches_brute_force() {
        let spec = harmonic();
        for (k, levels) in [(2, 5), (3, 3), (4, 3), (5, 2)] {
            let p = LambdaParams::new(Real::int(0), k, 1).unwrap();
            let c = lambda_count(&p, &spec, levels).unwrap();
            assert_eq!(c.counts[levels], brute_count(&spec, k, levels), "k={k}");
            assert!(c.branching_holds(), "k={k} {:?}", c.min_branching);
            assert_eq!(lambda_words(&p, &spec, levels).unwrap().len() as u64, c.counts[levels]);
        }
    }

    #[test]
    fn count_k4_three_levels() {
        let p = LambdaParams::new(Real::int(0), 4, 1).unwrap();
        let c = lambda_count(&p, &harmonic(), 3).unwrap();
        assert!(c.counts[3] >= 64);
        assert_eq!(c.counts[3], brute_count(&harmonic(), 4, 3));
    }

    #[test]
    fn k2_branching_at_least_one() {
        let p = LambdaParams::new(Real::int(0), 2, 1).unwrap();
        let c = lambda_count(&p, &harmonic(), 1).unwrap();
        assert!(c.min_branching[0] >= 1);
        assert_eq!(c.required_branching, 1);
    }

    #[test]
    fn budget_exceeded() {
        let p = LambdaParams::new(Real::int(0), 5, 1).unwrap();
        assert!(matches!(lambda_count(&p, &harmonic(), 5), Err(Error::Budget(_))));
    }

    #[test]
    fn float_fallback_agrees() {
        let spec = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 1/2\n").unwrap();
        let p = LambdaParams::new("0.3".parse().unwrap(), 3, 1).unwrap();
        let c = lambda_count(&p, &spec, 3).unwrap();
        assert_eq!(c.arithmetic, Arithmetic::Float64);
        assert!(c.branching_holds());
    }

    #[test]
    fn lambda_words_settle_on_target() {
        // once a block crossed L, |s_j - L| <= k |a_{m(i)}| for the last crossing block i
        let spec = harmonic();
        let (k, levels) = (3, 4);
        let p = LambdaParams::new(Real::ratio(1, 10), k, 1).unwrap();
        let l = 0.1;
        for w in lambda_words(&p, &spec, levels).unwrap() {
            let t = partial_sums(&spec, &w, None).unwrap();
            let s = |j: usize| if j == 0 { 0.0 } else { t.sum(j * k)[0] };
            let last_cross = (0..levels).filter(|&j| (s(j) - l) * (s(j + 1) - l) <= 0.0).last();
            if let Some(i) = last_cross {
                let peak = 1.0 / (i * k + 1) as f64;
                assert!((s(levels) - l).abs() <= k as f64 * peak + 1e-12, "{w}");
            }
        }
    }
}
