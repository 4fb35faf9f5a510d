//! Directional mass, Lévy vectors and the (LS) condition.
//!
//! A unit vector `u` is a Lévy direction when the terms pointing into every
//! cone around `u` carry infinite norm mass. Nothing here can decide that at
//! a finite horizon, so every flag is a heuristic tied to the horizons it
//! was computed on. The constructive side is [`levy_decompose`], which
//! splits the cone terms into `alpha_n u + omega_n` with blocks of unit
//! `alpha` mass, and [`approximate_target`], which witnesses density of the
//! sign-sum set for a concrete target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::balancer::{GreedyBalancer, C_EMP_SNAPSHOT};
use crate::error::{Error, Result};
use crate::linalg::{distance, dot, norm, Norm};
use crate::sequence::SequenceSpec;
use crate::sign::{Sign, SignWord};
use crate::trace::PartialSumTrace;

/// Minimum mass gained per horizon doubling for a probe to be flagged.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 0.1;

pub const DEFAULT_PROBES: usize = 64;

/// Probe directions covering the whole sphere: `P` equally spaced angles
/// for `d = 2`, `P` seeded Gaussian points for `d >= 3`.
pub fn probe_set(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => gaussian_points(dim, count, seed),
    }
}

/// Probes modulo `e ~ -e`, each with a non-negative first coordinate.
pub fn half_probe_set(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0]],
        2 => (0..count)
            .map(|i| canonical(vec![
                (std::f64::consts::PI * i as f64 / count as f64).cos(),
                (std::f64::consts::PI * i as f64 / count as f64).sin(),
            ]))
            .collect(),
        _ => gaussian_points(dim, count, seed).into_iter().map(canonical).collect(),
    }
}

fn gaussian_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Flips `e` so that its first non-zero coordinate is positive.
fn canonical(mut e: Vec<f64>) -> Vec<f64> {
    if let Some(&first) = e.iter().find(|x| x.abs() > 1e-15) {
        if first < 0.0 {
            e.iter_mut().for_each(|x| *x = -*x);
        }
    }
    e
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::precondition("direction must be a non-zero finite vector"));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn check_dim(spec: &SequenceSpec, v: &[f64]) -> Result<()> {
    if v.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: v.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionalMassReport {
    /// `N, 2N, 4N` (numbers of terms).
    pub horizons: [u64; 3],
    pub probes: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// `masses[p][r][h]`: mass of probe `p` at radius `r` and horizon `h`.
    pub masses: Vec<Vec<[f64; 3]>>,
    pub growth_threshold: f64,
    /// Probes whose smallest-radius mass grew by at least the threshold on
    /// both doublings.
    pub candidates: Vec<usize>,
    pub zero_terms: u64,
}

/// `sum_{n} ||a_n|| chi(a_n / ||a_n|| in B(u, eps))` over the first `N`,
/// `2N` and `4N` terms, for every probe and radius.
pub fn directional_mass(
    spec: &SequenceSpec,
    horizon: u64,
    probes: &[Vec<f64>],
    radii: &[f64],
    growth_threshold: f64,
) -> Result<DirectionalMassReport> {
    spec.require_null()?;
    if horizon == 0 {
        return Err(Error::precondition("horizon must be positive"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::precondition("radii must be positive and finite"));
    }
    let probes: Vec<Vec<f64>> = probes
        .iter()
        .map(|p| {
            check_dim(spec, p)?;
            unit(p)
        })
        .collect::<Result<_>>()?;
    let horizons = [horizon, 2 * horizon, 4 * horizon];
    let start = spec.start_index();
    let mut dirs = Vec::new();
    let mut weights = Vec::new();
    let mut zero_terms = 0;
    let mut buf = vec![0.0; spec.dim()];
    for i in 0..horizons[2] {
        spec.term_into(start + i, &mut buf);
        let n = norm(&buf);
        if n == 0.0 {
            zero_terms += 1;
            continue;
        }
        dirs.push((i, buf.iter().map(|x| x / n).collect::<Vec<f64>>()));
        weights.push(n);
    }
    let masses: Vec<Vec<[f64; 3]>> = probes
        .par_iter()
        .map(|p| {
            radii
                .iter()
                .map(|&eps| {
                    let mut acc = [0.0; 3];
                    for ((i, d), w) in dirs.iter().zip(&weights) {
                        if distance(d, p) < eps {
                            for (h, a) in horizons.iter().zip(acc.iter_mut()) {
                                if *i < *h {
                                    *a += w;
                                }
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let smallest = radii
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let candidates = masses
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let m = m[smallest];
            m[1] - m[0] >= growth_threshold && m[2] - m[1] >= growth_threshold
        })
        .map(|(i, _)| i)
        .collect();
    Ok(DirectionalMassReport {
        horizons,
        probes,
        radii: radii.to_vec(),
        masses,
        growth_threshold,
        candidates,
        zero_terms,
    })
}

/// `sum |<a_n, e>|` over the first `c` terms for every cutoff `c` and
/// direction `e`; `out[c][e]`.
pub fn directional_sums(spec: &SequenceSpec, cutoffs: &[u64], directions: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    for e in directions {
        check_dim(spec, e)?;
    }
    let mut sorted = cutoffs.to_vec();
    sorted.sort_unstable();
    let last = sorted.last().copied().unwrap_or(0);
    let mut acc = vec![0.0; directions.len()];
    let mut at: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut next = sorted.iter().peekable();
    let mut buf = vec![0.0; spec.dim()];
    while next.peek() == Some(&&0) {
        at.push((0, acc.clone()));
        next.next();
    }
    for i in 0..last {
        spec.term_into(spec.start_index() + i, &mut buf);
        for (a, e) in acc.iter_mut().zip(directions) {
            *a += dot(&buf, e).abs();
        }
        while next.peek() == Some(&&(i + 1)) {
            at.push((i + 1, acc.clone()));
            next.next();
        }
    }
    Ok(cutoffs
        .iter()
        .map(|c| at.iter().find(|(k, _)| k == c).unwrap().1.clone())
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct LsReport {
    /// `N, 2N`.
    pub horizons: [u64; 2],
    pub probe_count: usize,
    /// Smallest probe mass at each horizon.
    pub min_mass: [f64; 2],
    /// Minimising probe at the larger horizon, first coordinate >= 0.
    pub argmin: Vec<f64>,
    pub growth_threshold: f64,
    /// The smallest mass grew by at least the threshold between horizons.
    pub ls_consistent: bool,
}

/// Finite-horizon lower envelope of `sum |<a_n, e>|` over `P` probes.
pub fn ls_estimate(spec: &SequenceSpec, horizon: u64, probes: usize, seed: u64) -> Result<LsReport> {
    ls_estimate_with(spec, horizon, &half_probe_set(spec.dim(), probes, seed))
}

pub fn ls_estimate_with(spec: &SequenceSpec, horizon: u64, probes: &[Vec<f64>]) -> Result<LsReport> {
    spec.require_null()?;
    if probes.is_empty() {
        return Err(Error::precondition("at least one probe direction is required"));
    }
    let probes: Vec<Vec<f64>> = probes
        .iter()
        .map(|p| {
            check_dim(spec, p)?;
            unit(p).map(canonical)
        })
        .collect::<Result<_>>()?;
    let sums = directional_sums(spec, &[horizon, 2 * horizon], &probes)?;
    let argmin_of = |row: &[f64]| {
        row.iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, m)| (i, *m))
            .unwrap()
    };
    let (_, m0) = argmin_of(&sums[0]);
    let (i1, m1) = argmin_of(&sums[1]);
    Ok(LsReport {
        horizons: [horizon, 2 * horizon],
        probe_count: probes.len(),
        min_mass: [m0, m1],
        argmin: probes[i1].clone(),
        growth_threshold: DEFAULT_GROWTH_THRESHOLD,
        ls_consistent: m1 - m0 >= DEFAULT_GROWTH_THRESHOLD,
    })
}

/// One term assigned to a Lévy subsequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyEntry {
    pub index: u64,
    pub alpha: f64,
    pub omega: Vec<f64>,
    /// Block `m >= 1` the term belongs to.
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyBlock {
    pub level: u32,
    /// Positions in [`LevyDecomposition::entries`].
    pub entries: std::ops::Range<usize>,
    pub sigma: f64,
}

/// Streaming construction of the blocks `I_1, I_2, ...`: block `m` takes
/// the next terms whose direction lies in `B(u, 2^-m)` until their
/// `alpha` mass reaches 1.
#[derive(Debug, Clone)]
pub struct LevyScanner {
    u: Vec<f64>,
    level: u32,
    radius: f64,
    sigma: f64,
    scratch: Vec<f64>,
}

impl LevyScanner {
    pub fn new(u: &[f64]) -> Result<Self> {
        let u = unit(u)?;
        let scratch = vec![0.0; u.len()];
        Ok(LevyScanner { u, level: 1, radius: 0.5, sigma: 0.0, scratch })
    }

    pub fn direction(&self) -> &[f64] {
        &self.u
    }

    /// Level of the block currently being filled.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// `alpha` mass of the unfinished block.
    pub fn pending_sigma(&self) -> f64 {
        self.sigma
    }

    /// Decomposes `a` when it belongs to the current block. Terms with
    /// `||a|| > 1` never qualify, which keeps every `sigma_m <= 2`.
    pub fn offer(&mut self, index: u64, a: &[f64]) -> Option<(LevyEntry, bool)> {
        let n = norm(a);
        if n == 0.0 || n > 1.0 {
            return None;
        }
        for ((s, x), u) in self.scratch.iter_mut().zip(a).zip(&self.u) {
            *s = x / n - u;
        }
        if norm(&self.scratch) >= self.radius {
            return None;
        }
        let alpha = dot(a, &self.u);
        let omega: Vec<f64> = a.iter().zip(&self.u).map(|(x, u)| x - alpha * u).collect();
        let entry = LevyEntry { index, alpha, omega, level: self.level };
        self.sigma += alpha;
        let closed = self.sigma >= 1.0;
        if closed {
            self.level += 1;
            self.radius = (-f64::from(self.level)).exp2();
            self.sigma = 0.0;
        }
        Some((entry, closed))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevyDecomposition {
    pub direction: Vec<f64>,
    pub horizon: u64,
    pub entries: Vec<LevyEntry>,
    pub blocks: Vec<LevyBlock>,
    /// Entries after the last completed block.
    pub incomplete: Option<LevyBlock>,
    /// `sum ||omega_n||` over completed blocks.
    pub omega_mass: f64,
}

impl LevyDecomposition {
    pub fn completed_entries(&self) -> &[LevyEntry] {
        let end = self.blocks.last().map_or(0, |b| b.entries.end);
        &self.entries[..end]
    }

    /// Largest `||a_n - (alpha_n u + omega_n)||` over all entries.
    pub fn reconstruction_error(&self, spec: &SequenceSpec) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for e in &self.entries {
            let a = spec.term(e.index)?;
            let r: Vec<f64> = a
                .iter()
                .zip(&self.direction)
                .zip(&e.omega)
                .map(|((x, u), w)| x - (e.alpha * u + w))
                .collect();
            worst = worst.max(norm(&r));
        }
        Ok(worst)
    }

    /// Blocks violating `1 <= sigma_m <= 2` or
    /// `||omega_n|| <= 2^(1-m) alpha_n`.
    pub fn block_violations(&self) -> Vec<u32> {
        self.blocks
            .iter()
            .filter(|b| {
                let bound = (1.0 - f64::from(b.level)).exp2();
                !(1.0..=2.0).contains(&b.sigma)
                    || self.entries[b.entries.clone()]
                        .iter()
                        .any(|e| norm(&e.omega) > bound * e.alpha)
            })
            .map(|b| b.level)
            .collect()
    }
}

/// Scans the first `horizon` terms for the blocks of the decomposition
/// along `u`.
pub fn levy_decompose(spec: &SequenceSpec, u: &[f64], horizon: u64) -> Result<LevyDecomposition> {
    spec.require_null()?;
    check_dim(spec, u)?;
    let mut scanner = LevyScanner::new(u)?;
    let mut entries = Vec::new();
    let mut blocks = Vec::new();
    let mut block_start = 0;
    let mut sigma = 0.0;
    let mut buf = vec![0.0; spec.dim()];
    let start = spec.start_index();
    for n in start..start + horizon {
        spec.term_into(n, &mut buf);
        if let Some((e, closed)) = scanner.offer(n, &buf) {
            sigma += e.alpha;
            let level = e.level;
            entries.push(e);
            if closed {
                blocks.push(LevyBlock { level, entries: block_start..entries.len(), sigma });
                block_start = entries.len();
                sigma = 0.0;
            }
        }
    }
    if blocks.is_empty() {
        return Err(Error::Horizon(format!(
            "insufficient mass at horizon {horizon}: no completed block along the given direction"
        )));
    }
    let incomplete = (block_start < entries.len()).then(|| LevyBlock {
        level: scanner.level(),
        entries: block_start..entries.len(),
        sigma,
    });
    let omega_mass = entries[..block_start].iter().map(|e| norm(&e.omega)).sum();
    Ok(LevyDecomposition {
        direction: scanner.direction().to_vec(),
        horizon,
        entries,
        blocks,
        incomplete,
        omega_mass,
    })
}

/// How the signs before the balancing threshold are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrefixPolicy {
    /// Every prefix sign is `+`.
    #[default]
    AllPlus,
    /// Each prefix sign minimises the distance to the target.
    Greedy,
}

impl std::str::FromStr for PrefixPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all-plus" => Ok(PrefixPolicy::AllPlus),
            "greedy" => Ok(PrefixPolicy::Greedy),
            other => Err(format!("unknown prefix policy `{other}`")),
        }
    }
}

/// Largest candidate set searched by [`nearest_signed_sum`].
pub const MITM_LIMIT: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub policy: PrefixPolicy,
    /// First index after the prefix: terms from here on are below
    /// `delta / (2K)` with `K = 2 C_emp`.
    pub prefix_end: u64,
    pub threshold: f64,
    /// Size of the subset `H` taken with `+`.
    pub subset_size: usize,
    /// `||(x - s) - sum_H a_n||`.
    pub subset_residual: f64,
    /// `||sum_{H'} eps_n a_n||` after balancing the complement.
    pub complement_norm: f64,
    pub fallback_used: bool,
    pub pairing_used: bool,
    pub depth: u64,
    pub final_error: f64,
}

/// Signs with `||x - S_N|| < delta` at the returned depth `N <= horizon`.
pub fn approximate_target(
    spec: &SequenceSpec,
    x: &[f64],
    delta: f64,
    horizon: u64,
    policy: PrefixPolicy,
) -> Result<(SignWord, PartialSumTrace, ApproxReport)> {
    spec.require_null()?;
    check_dim(spec, x)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::precondition("delta must be positive"));
    }
    let d = spec.dim();
    let start = spec.start_index();
    let k_const = 2.0 * C_EMP_SNAPSHOT;
    let threshold = delta / (2.0 * k_const);
    let terms = spec.terms(0, horizon as usize);

    if x.iter().all(|v| *v == 0.0) {
        let even = (horizon - horizon % 2) as usize;
        if even > 0 && terms[..even].chunks(2).all(|c| c[0] == c[1]) {
            let signs = SignWord::from_signs((0..even).map(|i| Sign::from_bool(i % 2 == 0)).collect());
            let trace = build_trace(&terms[..even], &signs, x)?;
            let err = trace.dist_to_target(even).unwrap();
            if err < delta {
                let report = ApproxReport {
                    policy,
                    prefix_end: start,
                    threshold,
                    subset_size: 0,
                    subset_residual: 0.0,
                    complement_norm: 0.0,
                    fallback_used: false,
                    pairing_used: true,
                    depth: even as u64,
                    final_error: err,
                };
                return Ok((signs, trace, report));
            }
        }
    }

    let prefix_end = spec
        .first_below(threshold, start, start + horizon)
        .ok_or_else(|| Error::Horizon(format!("terms stay above delta/(2K) = {threshold:e} up to the horizon")))?;
    let p = (prefix_end - start) as usize;
    let mut signs = vec![Sign::Plus; terms.len()];
    let mut s = vec![0.0; d];
    for (i, a) in terms[..p].iter().enumerate() {
        let sign = match policy {
            PrefixPolicy::AllPlus => Sign::Plus,
            PrefixPolicy::Greedy => {
                let plus: Vec<f64> = s.iter().zip(a).map(|(s, a)| s + a).collect();
                let minus: Vec<f64> = s.iter().zip(a).map(|(s, a)| s - a).collect();
                Sign::from_bool(distance(&plus, x) <= distance(&minus, x))
            }
        };
        signs[i] = sign;
        for (s, a) in s.iter_mut().zip(a) {
            *s += sign.value() * a;
        }
    }
    let mut r: Vec<f64> = x.iter().zip(&s).map(|(x, s)| x - s).collect();
    let mut subset_size = 0;
    let mut balancer = GreedyBalancer::new(d, Norm::Euclidean);
    let mut shifted = vec![0.0; d];
    for (i, a) in terms.iter().enumerate().skip(p) {
        for ((o, r), a) in shifted.iter_mut().zip(&r).zip(a) {
            *o = r - a;
        }
        if norm(&shifted) < norm(&r) {
            std::mem::swap(&mut r, &mut shifted);
            subset_size += 1;
        } else {
            signs[i] = balancer.step(a);
        }
    }
    let subset_residual = norm(&r);
    let complement_norm = norm(balancer.sum());
    let mut word = SignWord::from_signs(signs);
    let mut trace = build_trace(&terms, &word, x)?;
    let mut err = trace.dist_to_target(terms.len()).unwrap_or(f64::INFINITY);
    let mut fallback_used = false;
    if err >= delta && terms.len() > p {
        fallback_used = true;
        let lo = terms.len().saturating_sub(MITM_LIMIT).max(p);
        let mut rest = trace.last_sum();
        for (i, a) in terms.iter().enumerate().skip(lo) {
            let v = word.signs()[i].value();
            for (s, a) in rest.iter_mut().zip(a) {
                *s -= v * a;
            }
        }
        let want: Vec<f64> = x.iter().zip(&rest).map(|(x, s)| x - s).collect();
        let (tail, _) = nearest_signed_sum(&terms[lo..], &want);
        for (j, sg) in tail.signs().iter().enumerate() {
            word.set(lo + j, *sg);
        }
        trace = build_trace(&terms, &word, x)?;
        err = trace.dist_to_target(terms.len()).unwrap_or(f64::INFINITY);
    }
    if !(err < delta) {
        return Err(Error::Horizon(format!(
            "density not witnessed at horizon {horizon}: best error {err:e} >= delta {delta:e}"
        )));
    }
    let report = ApproxReport {
        policy,
        prefix_end,
        threshold,
        subset_size,
        subset_residual,
        complement_norm,
        fallback_used,
        pairing_used: false,
        depth: terms.len() as u64,
        final_error: err,
    };
    Ok((word, trace, report))
}

fn build_trace(terms: &[Vec<f64>], signs: &SignWord, x: &[f64]) -> Result<PartialSumTrace> {
    let mut t = PartialSumTrace::with_capacity(x.len(), Some(x.to_vec()), terms.len())?;
    for (a, s) in terms.iter().zip(signs.signs()) {
        t.push(*s, a);
    }
    Ok(t)
}

fn signed_sums(vectors: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]];
    for v in vectors {
        let mut next = Vec::with_capacity(sums.len() * 2);
        for s in &sums {
            next.push(s.iter().zip(v).map(|(s, v)| s + v).collect());
            next.push(s.iter().zip(v).map(|(s, v)| s - v).collect());
        }
        sums = next;
    }
    sums
}

/// Signs minimising `||target - sum eps_i v_i||` over all `2^n` choices,
/// by splitting the list in halves and pruning the second half along the
/// first coordinate.
pub fn nearest_signed_sum(vectors: &[Vec<f64>], target: &[f64]) -> (SignWord, f64) {
    assert!(vectors.len() <= MITM_LIMIT, "at most {MITM_LIMIT} vectors");
    let dim = target.len();
    let half = vectors.len() / 2;
    let left = signed_sums(&vectors[..half], dim);
    let right = signed_sums(&vectors[half..], dim);
    let mut order: Vec<usize> = (0..right.len()).collect();
    order.sort_by(|&a, &b| right[a][0].total_cmp(&right[b][0]).then(a.cmp(&b)));
    let keys: Vec<f64> = order.iter().map(|&i| right[i][0]).collect();
    let mut best = (f64::INFINITY, 0usize, 0usize);
    let mut want = vec![0.0; dim];
    for (li, l) in left.iter().enumerate() {
        for ((w, t), l) in want.iter_mut().zip(target).zip(l) {
            *w = t - l;
        }
        let pos = keys.partition_point(|&k| k < want[0]);
        let visit = |j: usize, best: &mut (f64, usize, usize)| {
            let ri = order[j];
            let dist = distance(&right[ri], &want);
            if dist < best.0 || (dist == best.0 && (li, ri) < (best.1, best.2)) {
                *best = (dist, li, ri);
            }
        };
        for j in pos..keys.len() {
            if keys[j] - want[0] > best.0 {
                break;
            }
            visit(j, &mut best);
        }
        for j in (0..pos).rev() {
            if want[0] - keys[j] > best.0 {
                break;
            }
            visit(j, &mut best);
        }
    }
    let (dist, li, ri) = best;
    let n_right = vectors.len() - half;
    let word = SignWord::from_bits(li as u64, half).concat(&SignWord::from_bits(ri as u64, n_right));
    (word, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;
    use crate::sequence::{liouville_block_end, Growth};
    use proptest::prelude::{prop_assert, proptest};

    fn harmonic_e1() -> SequenceSpec {
        parse_spec("family = power-decay\ndim = 2\ncoeffs = 1, 0\nexponents = 1\n").unwrap()
    }

    fn interleaved() -> SequenceSpec {
        parse_spec(
            "family = interleaved\nparts = 2\n\
             part.0.family = power-decay\npart.0.coeffs = 1, 0\npart.0.exponents = 1\n\
             part.1.family = power-decay\npart.1.coeffs = 0, 1\npart.1.exponents = 1\n",
        )
        .unwrap()
    }

    fn harmonic(n: u64) -> f64 {
        (1..=n).map(|k| 1.0 / k as f64).sum()
    }

    #[test]
    fn harmonic_mass_along_e1() {
        let r = directional_mass(&harmonic_e1(), 10_000, &[vec![1.0, 0.0]], &[0.01], DEFAULT_GROWTH_THRESHOLD)
            .unwrap();
        assert!((r.masses[0][0][0] - harmonic(10_000)).abs() < 1e-10);
        assert!((r.masses[0][0][0] - 9.787606).abs() < 1e-6);
        assert_eq!(r.candidates, vec![0]);
    }

    #[test]
    fn geometric_is_not_flagged() {
        let spec = parse_spec("family = geometric\ndim = 2\ncoeffs = 1, 0\nratio = 1/2\n").unwrap();
        let r = directional_mass(&spec, 1000, &[vec![1.0, 0.0]], &[0.01], DEFAULT_GROWTH_THRESHOLD).unwrap();
        assert!(r.masses[0][0][2] <= 1.0);
        assert!(r.candidates.is_empty());
    }

    #[test]
    fn interleaved_flags_positive_axes_only() {
        let probes = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let r = directional_mass(&interleaved(), 10_000, &probes, &[0.01, 0.1], DEFAULT_GROWTH_THRESHOLD).unwrap();
        assert_eq!(r.candidates, vec![0, 2]);
        // odd indices up to 10^4 carry sum 1/(2j-1)
        let odd: f64 = (0..5000).map(|j| 1.0 / (2 * j + 1) as f64).sum();
        assert!((r.masses[0][0][0] - odd).abs() < 1e-10);
    }

    #[test]
    fn zero_sequence_reports_nothing() {
        let spec = parse_spec("family = explicit\ndim = 2\nterms = 0, 0\n").unwrap();
        let r = directional_mass(&spec, 10, &probe_set(2, 8, 0), &[0.5], DEFAULT_GROWTH_THRESHOLD).unwrap();
        assert!(r.candidates.is_empty());
        assert_eq!(r.zero_terms, 40);
    }

    proptest! {
        #[test]
        fn mass_monotone(seed in 0u64..500, e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
            let spec = parse_spec(&format!(
                "family = random-directions\nseed = {seed}\nscale = 1\n"
            )).unwrap();
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let r = directional_mass(&spec, 200, &probe_set(2, 12, 0), &[lo, hi], 0.1).unwrap();
            for m in &r.masses {
                for h in 0..3 {
                    prop_assert!(m[0][h] <= m[1][h]);
                }
                for eps in m {
                    prop_assert!(eps[0] <= eps[1] && eps[1] <= eps[2]);
                }
            }
        }
    }

    #[test]
    fn decomposition_of_pure_axis() {
        let d = levy_decompose(&harmonic_e1(), &[1.0, 0.0], 1000).unwrap();
        assert_eq!(d.blocks[0].entries, 0..1);
        assert_eq!(d.entries[0].index, 1);
        assert_eq!(d.blocks[0].sigma, 1.0);
        assert!(d.entries.iter().all(|e| e.omega.iter().all(|w| *w == 0.0)));
        assert!(d.block_violations().is_empty());
    }

    #[test]
    fn decomposition_with_perturbation() {
        let spec = parse_spec(
            "family = power-decay\ndim = 2\ncoeffs = 1, 1\nexponents = 1, 2\n",
        )
        .unwrap();
        let d = levy_decompose(&spec, &[1.0, 0.0], 100_000).unwrap();
        assert!(d.blocks.len() >= 10);
        assert!(d.block_violations().is_empty());
        assert!(d.reconstruction_error(&spec).unwrap() < 1e-15);
        for e in &d.entries {
            assert!((e.omega[1] - 1.0 / (e.index as f64).powi(2)).abs() < 1e-18);
        }
        assert!(d.omega_mass < std::f64::consts::PI.powi(2) / 6.0);
        for w in d.blocks.windows(2) {
            let prev_max = d.entries[w[0].entries.end - 1].index;
            assert!(d.entries[w[1].entries.start].index > prev_max);
        }
    }

    #[test]
    fn orthogonal_direction_has_no_mass() {
        let err = levy_decompose(&harmonic_e1(), &[0.0, 1.0], 1000).unwrap_err();
        assert!(matches!(err, Error::Horizon(_)));
    }

    #[test]
    fn ls_finds_summable_diagonal() {
        let spec = parse_spec("family = power-decay\ndim = 2\ncoeffs = 1, 1\nexponents = 1\n").unwrap();
        let r = ls_estimate(&spec, 10_000, 64, 0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(distance(&r.argmin, &[s, -s]) < 1e-12);
        assert!(r.min_mass[1] < 1e-9);
        assert!(!r.ls_consistent);
    }

    #[test]
    fn ls_interleaved_grows() {
        let r = ls_estimate(&interleaved(), 10_000, 64, 0).unwrap();
        assert!(r.ls_consistent);
        // the minimum sits on an axis or between; at least (1/sqrt 2)-weighted odd harmonic
        let floor = std::f64::consts::FRAC_1_SQRT_2 * harmonic(5000) * 0.9;
        assert!(r.min_mass[0] > floor * 0.5);
        assert!(r.min_mass[1] > r.min_mass[0]);
    }

    #[test]
    fn liouville_axes_both_diverge() {
        let spec = parse_spec("family = liouville\ngrowth = square\n").unwrap();
        let ends: Vec<u64> = (1..=3).map(|k| liouville_block_end(Growth::Square, k) as u64).collect();
        assert_eq!(ends, vec![4, 36, 1060]);
        let m = directional_sums(&spec, &ends, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        for k in 0..3 {
            assert!((m[k][0] - 2.0 * (k + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(m[0][1], 2.0);
        assert_eq!(m[1][1], 10.0);
        assert_eq!(m[2][1], 138.0);
    }

    #[test]
    fn gaussian_probes_are_unit_and_seeded() {
        let a = half_probe_set(4, 20, 9);
        assert_eq!(a, half_probe_set(4, 20, 9));
        for p in &a {
            assert!((norm(p) - 1.0).abs() < 1e-12);
            assert!(p[0] >= 0.0);
        }
    }

    #[test]
    fn mitm_matches_brute_force() {
        let vs: Vec<Vec<f64>> = (1..=11).map(|i| vec![1.0 / i as f64, (i as f64).sin()]).collect();
        let target = [0.37, -0.61];
        let (w, d) = nearest_signed_sum(&vs, &target);
        let mut best = f64::INFINITY;
        for bits in 0..1u64 << vs.len() {
            let w = SignWord::from_bits(bits, vs.len());
            let mut s = [0.0; 2];
            for (v, sg) in vs.iter().zip(w.signs()) {
                s[0] += sg.value() * v[0];
                s[1] += sg.value() * v[1];
            }
            best = best.min(distance(&s, &target));
        }
        assert!((d - best).abs() < 1e-12);
        let mut s = [0.0; 2];
        for (v, sg) in vs.iter().zip(w.signs()) {
            s[0] += sg.value() * v[0];
            s[1] += sg.value() * v[1];
        }
        assert!((distance(&s, &target) - d).abs() < 1e-12);
    }

    #[test]
    fn harmonic_density_one_dimension() {
        let spec = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 1\n").unwrap();
        let (_, t, r) = approximate_target(&spec, &[1.0], 0.01, 100_000, PrefixPolicy::Greedy).unwrap();
        assert!((1.0 - t.last_sum()[0]).abs() < 0.01);
        assert_eq!(r.final_error, (1.0 - t.last_sum()[0]).abs());
    }

    #[test]
    fn all_plus_prefix_overshoots_positive_series() {
        // with positive terms the prefix sum H(N-1) exceeds 1 and no subset
        // of the tail can bring it back
        let spec = parse_spec("family = power-decay\ncoeffs = 1\nexponents = 1\n").unwrap();
        let err = approximate_target(&spec, &[1.0], 0.01, 100_000, PrefixPolicy::AllPlus).unwrap_err();
        assert!(matches!(err, Error::Horizon(_)));
    }

    #[test]
    fn all_plus_prefix_on_alternating_series() {
        let spec = parse_spec(
            "family = alternating\ninner.family = power-decay\ninner.coeffs = 1\ninner.exponents = 1\n",
        )
        .unwrap();
        let (_, t, r) = approximate_target(&spec, &[1.0], 0.01, 100_000, PrefixPolicy::AllPlus).unwrap();
        assert!((1.0 - t.last_sum()[0]).abs() < 0.01);
        assert!(r.subset_size > 0);
    }

    #[test]
    fn interleaved_density_witnessed() {
        let (_, t, _) =
            approximate_target(&interleaved(), &[1.0, -2.0], 0.05, 100_000, PrefixPolicy::Greedy).unwrap();
        assert!(t.dist_to_target(t.len()).unwrap() < 0.05);
    }

    #[test]
    fn pairing_gives_exact_zero() {
        let spec = parse_spec(
            "family = repeat\ntimes = 2\ninner.family = power-decay\ninner.coeffs = 1\ninner.exponents = 1\n",
        )
        .unwrap();
        let (w, t, r) = approximate_target(&spec, &[0.0], 1e-9, 101, PrefixPolicy::AllPlus).unwrap();
        assert!(r.pairing_used);
        assert_eq!(w.len(), 100);
        for n in (2..=100).step_by(2) {
            assert_eq!(t.sum(n)[0], 0.0);
        }
    }
}
