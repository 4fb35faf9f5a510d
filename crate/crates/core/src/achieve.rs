//! Finite-depth pictures of the set of signed sums.
//!
//! For a summable sequence every full sum lies within the tail mass
//! `r_N = sum_{n > N} |a_n|` of some depth-`N` sum, so the union of the
//! intervals `[s - r_N, s + r_N]` is an outer cover and the holes between
//! them are genuine gaps.

use std::collections::BTreeSet;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{RationalText, ScaledIntegers};
use crate::greedy1d::{greedy_signs, Arithmetic};
use crate::sequence::{SequenceSpec, Summability};
use crate::sign::SignWord;
use crate::trace::partial_sums;

pub const MAX_DEPTH: usize = 22;

/// Signs fixed before the enumeration fans out in parallel.
const SPLIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_exact: Option<RationalText>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_exact: Option<RationalText>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    IntervalLike,
    Gapped,
}

/// Occupied cells of a square grid with side `cell`, for `d = 2`.
#[derive(Debug, Clone, Serialize)]
pub struct GridCover {
    pub cell: f64,
    pub occupied: usize,
    /// Lower-left and upper-right corners of the occupied region.
    pub bounds: [[f64; 2]; 2],
    /// Occupied cells over cells in the bounding box.
    pub fill_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AchievementCover {
    pub schema_version: String,
    pub depth: usize,
    pub dim: usize,
    pub tail: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_exact: Option<Vec<RationalText>>,
    pub arithmetic: Arithmetic,
    pub intervals: Vec<Interval>,
    pub gaps: Vec<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCover>,
    pub classification: Classification,
}

/// Depth-`N` sums of a summable sequence with the tail-inflated cover.
pub fn explore(spec: &SequenceSpec, depth: usize) -> Result<AchievementCover> {
    spec.require_null()?;
    if spec.summability() != Summability::Summable {
        return Err(Error::precondition("the cover needs an absolutely summable sequence with a tail bound"));
    }
    if depth > MAX_DEPTH {
        return Err(Error::Budget(format!("depth {depth} exceeds the enumeration cap {MAX_DEPTH}")));
    }
    let tail = spec
        .tail_bound(spec.start_index() + depth as u64)
        .ok_or_else(|| Error::precondition("no closed-form tail bound for this family"))?;
    let tail_f: Vec<f64> = tail.iter().map(|r| r.value()).collect();
    let tail_exact: Option<Vec<BigRational>> = tail.iter().map(|r| r.exact().cloned()).collect();
    match spec.dim() {
        1 => explore_line(spec, depth, &tail_f, tail_exact),
        2 => Ok(explore_plane(spec, depth, &tail_f)),
        d => Err(Error::precondition(format!("covers are implemented for d <= 2, got d = {d}"))),
    }
}

/// All `2^n` signed sums of `values`; bit `i` of the index (from the top)
/// is the sign of `values[i]`.
fn all_sums<T>(values: &[T], zero: T) -> Vec<T>
where
    T: Copy + Send + Sync + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let split = values.len().min(SPLIT);
    let (head, rest) = values.split_at(split);
    let expand = |vals: &[T]| {
        let mut sums = vec![zero];
        for &v in vals {
            sums = sums.iter().flat_map(|&s| [s + v, s - v]).collect();
        }
        sums
    };
    let heads = expand(head);
    let tails = expand(rest);
    heads.par_iter().flat_map_iter(|&h| tails.iter().map(move |&t| h + t)).collect()
}

fn explore_line(
    spec: &SequenceSpec,
    depth: usize,
    tail: &[f64],
    tail_exact: Option<Vec<BigRational>>,
) -> Result<AchievementCover> {
    let exact = spec.terms_exact(0, depth).zip(tail_exact.clone()).and_then(|(terms, t)| {
        let mut vals: Vec<BigRational> = terms.into_iter().map(|mut v| v.remove(0)).collect();
        vals.push(t[0].clone());
        ScaledIntegers::new(&vals, 2 * depth as u32 + 4)
    });
    let (intervals, gaps, arithmetic) = match exact {
        Some(scaled) => {
            let r = scaled.nums[depth];
            let mut sums = all_sums(&scaled.nums[..depth], 0i128);
            sums.par_sort_unstable();
            sums.dedup();
            let merged = merge(sums.iter().map(|&s| (s - r, s + r)));
            let to = |v: i128| (scaled.to_f64(v), Some(RationalText::from(&scaled.to_rational(v))));
            let (iv, gp) = intervals_and_gaps(&merged, to);
            (iv, gp, Arithmetic::Exact)
        }
        None => {
            let terms: Vec<f64> = spec.terms(0, depth).into_iter().map(|v| v[0]).collect();
            let r = tail[0];
            let mut sums = all_sums(&terms, 0.0f64);
            sums.par_sort_unstable_by(f64::total_cmp);
            sums.dedup();
            let merged = merge(sums.iter().map(|&s| (s - r, s + r)));
            let (iv, gp) = intervals_and_gaps(&merged, |v| (v, None));
            (iv, gp, Arithmetic::Float64)
        }
    };
    let classification = if gaps.is_empty() { Classification::IntervalLike } else { Classification::Gapped };
    Ok(AchievementCover {
        schema_version: "1".into(),
        depth,
        dim: 1,
        tail: tail.to_vec(),
        tail_exact: tail_exact.map(|t| t.iter().map(RationalText::from).collect()),
        arithmetic,
        intervals,
        gaps,
        grid: None,
        classification,
    })
}

/// Sweeps sorted closed intervals; touching endpoints merge.
fn merge<T: PartialOrd + Copy>(iv: impl Iterator<Item = (T, T)>) -> Vec<(T, T)> {
    let mut out: Vec<(T, T)> = Vec::new();
    for (lo, hi) in iv {
        match out.last_mut() {
            Some(last) if lo <= last.1 => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn intervals_and_gaps<T: Copy>(
    merged: &[(T, T)],
    to: impl Fn(T) -> (f64, Option<RationalText>),
) -> (Vec<Interval>, Vec<Interval>) {
    let mk = |a: T, b: T| {
        let (lo, lo_exact) = to(a);
        let (hi, hi_exact) = to(b);
        Interval { lo, hi, lo_exact, hi_exact }
    };
    let intervals = merged.iter().map(|&(a, b)| mk(a, b)).collect();
    let gaps = merged.windows(2).map(|w| mk(w[0].1, w[1].0)).collect();
    (intervals, gaps)
}

fn explore_plane(spec: &SequenceSpec, depth: usize, tail: &[f64]) -> AchievementCover {
    let terms = spec.terms(0, depth);
    let sums = all_sums(
        &terms.iter().map(|v| Pair(v[0], v[1])).collect::<Vec<_>>(),
        Pair(0.0, 0.0),
    );
    let r = tail.iter().copied().fold(0.0, f64::max);
    let cell = if r > 0.0 { r } else { 1.0 };
    let cell_of = |x: f64| (x / cell).floor() as i64;
    let occupied: BTreeSet<(i64, i64)> = sums
        .par_iter()
        .flat_map_iter(|p| {
            let (x0, x1) = (cell_of(p.0 - tail[0]), cell_of(p.0 + tail[0]));
            let (y0, y1) = (cell_of(p.1 - tail[1]), cell_of(p.1 + tail[1]));
            (x0..=x1).flat_map(move |x| (y0..=y1).map(move |y| (x, y)))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let xs = occupied.iter().map(|c| c.0);
    let ys = occupied.iter().map(|c| c.1);
    let (xmin, xmax) = (xs.clone().min().unwrap_or(0), xs.max().unwrap_or(0));
    let (ymin, ymax) = (ys.clone().min().unwrap_or(0), ys.max().unwrap_or(0));
    let boxed = ((xmax - xmin + 1) * (ymax - ymin + 1)) as f64;
    let grid = GridCover {
        cell,
        occupied: occupied.len(),
        bounds: [
            [xmin as f64 * cell, ymin as f64 * cell],
            [(xmax + 1) as f64 * cell, (ymax + 1) as f64 * cell],
        ],
        fill_ratio: occupied.len() as f64 / boxed,
    };
    let classification =
        if occupied.len() as f64 == boxed { Classification::IntervalLike } else { Classification::Gapped };
    AchievementCover {
        schema_version: "1".into(),
        depth,
        dim: 2,
        tail: tail.to_vec(),
        tail_exact: None,
        arithmetic: Arithmetic::Float64,
        intervals: Vec::new(),
        gaps: Vec::new(),
        grid: Some(grid),
        classification,
    }
}

#[derive(Debug, Clone, Copy)]
struct Pair(f64, f64);

impl std::ops::Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl std::ops::Sub for Pair {
    type Output = Pair;
    fn sub(self, o: Pair) -> Pair {
        Pair(self.0 - o.0, self.1 - o.1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityWitness {
    pub target: f64,
    pub witnessed: bool,
    /// First depth with `|S_N - L| < delta`.
    pub depth: Option<u64>,
    /// `|S - L|` at that depth, or at the horizon on failure.
    pub error: f64,
    #[serde(skip)]
    pub signs: Option<SignWord>,
}

/// Greedy witnesses of `|S_N - L| < delta` for each target.
pub fn probe_density(spec: &SequenceSpec, targets: &[f64], delta: f64, horizon: u64) -> Result<Vec<DensityWitness>> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::precondition("delta must be positive"));
    }
    targets
        .par_iter()
        .map(|&x| {
            let (signs, trace) = greedy_signs(spec, x, horizon)?;
            let hit = (1..=trace.len()).find(|&n| (trace.sum(n)[0] - x).abs() < delta);
            Ok(match hit {
                Some(n) => DensityWitness {
                    target: x,
                    witnessed: true,
                    depth: Some(n as u64),
                    error: (trace.sum(n)[0] - x).abs(),
                    signs: Some(signs.prefix(n)),
                },
                None => DensityWitness {
                    target: x,
                    witnessed: false,
                    depth: None,
                    error: trace.dist_to_target(trace.len()).unwrap_or(f64::INFINITY),
                    signs: None,
                },
            })
        })
        .collect()
}

/// Replays `signs` and returns `||S_N - target||` when it is below `delta`.
pub fn verify_witness(spec: &SequenceSpec, signs: &SignWord, target: &[f64], delta: f64) -> Result<Option<f64>> {
    let trace = partial_sums(spec, signs, Some(target))?;
    let err = trace.dist_to_target(trace.len()).unwrap_or_else(|| crate::linalg::norm(target));
    Ok((err < delta).then_some(err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;
    use crate::exact::pow2_neg;
    use num_bigint::BigInt;
    use proptest::prelude::{prop_assert, proptest};

    fn binary() -> SequenceSpec {
        parse_spec("family = geometric\nratio = 1/2\nstart_index = 0\n").unwrap()
    }

    fn triadic() -> SequenceSpec {
        parse_spec("family = geometric\nratio = 1/3\n").unwrap()
    }

    fn rat(s: &str) -> BigRational {
        RationalText(s.into()).parse().unwrap()
    }

    #[test]
    fn binary_cover_is_the_interval() {
        let c = explore(&binary(), 20).unwrap();
        assert_eq!(c.arithmetic, Arithmetic::Exact);
        assert_eq!(c.classification, Classification::IntervalLike);
        assert_eq!(c.intervals.len(), 1);
        assert_eq!(c.tail_exact.as_ref().unwrap()[0].parse().unwrap(), pow2_neg(19));
        assert_eq!(c.intervals[0].lo_exact.as_ref().unwrap().0, "-2");
        assert_eq!(c.intervals[0].hi_exact.as_ref().unwrap().0, "2");
    }

    #[test]
    fn triadic_gap_is_exact() {
        let c = explore(&triadic(), 12).unwrap();
        assert_eq!(c.classification, Classification::Gapped);
        let mid = c.gaps.iter().find(|g| g.lo < 0.0 && g.hi > 0.0).unwrap();
        assert_eq!(mid.lo_exact.as_ref().unwrap().parse().unwrap(), rat("-1/6"));
        assert_eq!(mid.hi_exact.as_ref().unwrap().parse().unwrap(), rat("1/6"));
    }

    /// Independent oracle: brute-force rational sums, no rescaling.
    #[test]
    fn triadic_small_depth_against_rationals() {
        let depth = 6;
        let c = explore(&triadic(), depth).unwrap();
        let terms: Vec<BigRational> = (1..=depth as u32)
            .map(|n| BigRational::new(BigInt::from(1), BigInt::from(3).pow(n)))
            .collect();
        let r = BigRational::new(BigInt::from(1), BigInt::from(3).pow(depth as u32) * 2);
        let mut sums: Vec<BigRational> = (0..1u64 << depth)
            .map(|bits| {
                let w = SignWord::from_bits(bits, depth);
                terms.iter().zip(w.signs()).map(|(t, s)| t * BigRational::from_integer(s.as_i8().into())).sum()
            })
            .collect();
        sums.sort();
        let mut merged: Vec<(BigRational, BigRational)> = Vec::new();
        for s in sums {
            let (lo, hi) = (&s - &r, &s + &r);
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = hi.max(last.1.clone()),
                _ => merged.push((lo, hi)),
            }
        }
        assert_eq!(c.intervals.len(), merged.len());
        for (a, b) in c.intervals.iter().zip(&merged) {
            assert_eq!(a.lo_exact.as_ref().unwrap().parse().unwrap(), b.0);
            assert_eq!(a.hi_exact.as_ref().unwrap().parse().unwrap(), b.1);
        }
    }

    #[test]
    fn zero_sequence_is_a_point() {
        let spec = parse_spec("family = explicit\nterms = 0\n").unwrap();
        let c = explore(&spec, 4).unwrap();
        assert_eq!(c.intervals.len(), 1);
        assert_eq!(c.intervals[0].lo, 0.0);
        assert_eq!(c.intervals[0].hi, 0.0);
    }

    #[test]
    fn divergent_and_deep_rejected() {
        let h = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 1\n").unwrap();
        assert!(matches!(explore(&h, 5), Err(Error::Precondition(_))));
        assert!(matches!(explore(&binary(), 23), Err(Error::Budget(_))));
    }

    #[test]
    fn cover_is_symmetric() {
        let c = explore(&triadic(), 8).unwrap();
        let n = c.intervals.len();
        for i in 0..n {
            assert_eq!(c.intervals[i].lo, -c.intervals[n - 1 - i].hi);
        }
    }

    proptest! {
        #[test]
        fn extensions_stay_in_cover(bits in 0u64..1 << 16) {
            let (depth, spec) = (8usize, triadic());
            let c = explore(&spec, depth).unwrap();
            let w = SignWord::from_bits(bits, 2 * depth);
            let t = partial_sums(&spec, &w, None).unwrap();
            let s = t.sum(2 * depth)[0];
            prop_assert!(c.intervals.iter().any(|iv| iv.lo <= s && s <= iv.hi));
            let base = t.sum(depth)[0];
            prop_assert!((s - base).abs() <= c.tail[0] + 1e-15);
        }
    }

    #[test]
    fn plane_grid() {
        let spec = parse_spec("family = geometric\ndim = 2\ncoeffs = 1, 1/2\nratio = 1/2\n").unwrap();
        let c = explore(&spec, 10).unwrap();
        let g = c.grid.unwrap();
        assert!(g.occupied > 0);
        assert!(g.fill_ratio > 0.0 && g.fill_ratio <= 1.0);
    }

    #[test]
    fn harmonic_density_probe() {
        let h = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 1\n").unwrap();
        let w = probe_density(&h, &[-5.0, 0.0, std::f64::consts::PI, 100.0], 1e-3, 1_000_000).unwrap();
        assert!(w[0].witnessed && w[1].witnessed && w[2].witnessed);
        assert!(!w[3].witnessed);
        for x in &w[..3] {
            let signs = x.signs.as_ref().unwrap();
            assert!(verify_witness(&h, signs, &[x.target], 1e-3).unwrap().is_some());
        }
    }

    #[test]
    fn replay_witness() {
        let spec = binary();
        let w = SignWord::from_bits(0b1_0110_1101, 9);
        let t = partial_sums(&spec, &w, None).unwrap();
        let target = t.sum(9).to_vec();
        assert_eq!(verify_witness(&spec, &w, &target, 1e-300).unwrap(), Some(0.0));
    }

    #[test]
    fn density_rejects_summable() {
        let sq = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 2\n").unwrap();
        assert!(matches!(probe_density(&sq, &[0.3], 1e-3, 100), Err(Error::Precondition(_))));
    }
}
