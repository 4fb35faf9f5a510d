//! Hitting an arbitrary target in `R^d` from `d` independent Lévy
//! directions, and the three-way index partition that combines target
//! hitting with free sign choices on a positive-density set of indices.

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::balancer::{GreedyBalancer, C_EMP_SNAPSHOT};
use crate::error::{Error, Result};
use crate::greedy1d::GreedyState;
use crate::levy::LevyScanner;
use crate::linalg::{distance, gram_determinant, norm, solve_in_basis, Norm};
use crate::sequence::SequenceSpec;
use crate::sign::{Sign, SignWord};
use crate::trace::PartialSumTrace;

pub const GRAM_TOLERANCE: f64 = 1e-9;
pub const BETA_TOLERANCE: f64 = 1e-12;

/// `K_0 = 2 C_emp`, the block-signing constant.
pub fn k0() -> f64 {
    2.0 * C_EMP_SNAPSHOT
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub m: u32,
    /// `q_{m-1}`.
    pub start: u64,
    /// `q_m`; the stage covers `[q_{m-1}, q_m)`.
    pub end: u64,
    /// Coordinates of the incoming residual `z_{m-1}` in the Lévy basis.
    pub beta: Vec<f64>,
    /// `|beta_i - sum eps alpha|` per direction at `q_m`.
    pub greedy_errors: Vec<f64>,
    pub filler_count: usize,
    pub filler_norm: f64,
    pub constant: f64,
    /// `C / 2^m`.
    pub claimed_bound: f64,
    /// Measured `||z_m||`.
    pub residual: f64,
    /// `max ||S_l - L||` over the following stage.
    pub running_max: f64,
    /// `d / 2^(m-1) + C / 2^m`.
    pub running_bound: f64,
}

impl StageRecord {
    pub fn holds(&self) -> bool {
        self.residual <= self.claimed_bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetPlan {
    pub target: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub gram_determinant: f64,
    /// Terms before this index have `||a_n|| >= 1` (or may) and take `+`.
    pub prefix_end: u64,
    pub prefix_sum: Vec<f64>,
    /// `K_i = sum ||omega||` over the `i`-th subsequence within the horizon.
    pub k_omega: Vec<f64>,
    pub k0: f64,
    /// `C` for `m = 1`, then for `m > 1`.
    pub constants: [f64; 2],
    /// Indices claimed per direction, then the filler count.
    pub assignment: Vec<usize>,
    pub stages: Vec<StageRecord>,
    pub horizon: u64,
    pub pairing: bool,
    /// Set when the horizon ran out before all stages completed.
    pub exhausted: Option<String>,
}

impl TargetPlan {
    pub fn completed_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn final_bound(&self) -> Option<f64> {
        self.stages.last().map(|s| s.claimed_bound)
    }
}

fn constants(d: usize, k_omega: &[f64]) -> [f64; 2] {
    let first = k_omega.iter().map(|k| 1.0 + k).sum::<f64>() + k0();
    [first, d as f64 + k0()]
}

/// Runs `stages` refinement stages towards `target` using the spec's
/// declared Lévy directions.
pub fn hit_target(
    spec: &SequenceSpec,
    target: &[f64],
    stages: u32,
    horizon: u64,
) -> Result<(SignWord, TargetPlan, PartialSumTrace)> {
    hit_masked(spec, target, stages, horizon, None)
}

/// Indices outside `mask` are left out of every sum; they keep sign `+`
/// in the returned word and contribute a zero term to the trace.
pub(crate) fn hit_masked(
    spec: &SequenceSpec,
    target: &[f64],
    stages: u32,
    horizon: u64,
    mask: Option<&[bool]>,
) -> Result<(SignWord, TargetPlan, PartialSumTrace)> {
    spec.require_null()?;
    let d = spec.dim();
    if target.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.len() });
    }
    let dirs = spec.levy_directions().to_vec();
    if dirs.len() != d {
        return Err(Error::precondition(format!(
            "spec declares {} Levy directions; {d} are required",
            dirs.len()
        )));
    }
    let gram = gram_determinant(&dirs);
    if gram.abs() < GRAM_TOLERANCE {
        return Err(Error::precondition(format!(
            "Levy directions are linearly dependent (Gram determinant {gram:e})"
        )));
    }
    let start = spec.start_index();
    let len = horizon as usize;
    let active = |i: usize| mask.is_none_or(|m| m[i]);
    let terms = spec.terms(0, len);
    let zero = vec![0.0; d];

    let mut base_plan = TargetPlan {
        target: target.to_vec(),
        directions: dirs.clone(),
        gram_determinant: gram,
        prefix_end: start,
        prefix_sum: zero.clone(),
        k_omega: vec![0.0; d],
        k0: k0(),
        constants: constants(d, &vec![0.0; d]),
        assignment: vec![0; d + 1],
        stages: Vec::new(),
        horizon,
        pairing: false,
        exhausted: None,
    };

    if mask.is_none() && target.iter().all(|x| *x == 0.0) {
        let even = len - len % 2;
        if even > 0 && terms[..even].chunks(2).all(|c| c[0] == c[1]) {
            let signs = SignWord::from_signs((0..even).map(|i| Sign::from_bool(i % 2 == 0)).collect());
            let trace = trace_of(&terms[..even], &signs, target, |_| true)?;
            base_plan.pairing = true;
            return Ok((signs, base_plan, trace));
        }
    }

    let prefix_end = spec
        .first_below(1.0 - f64::EPSILON, start, start + horizon)
        .ok_or_else(|| Error::Horizon("terms never drop below norm 1 within the horizon".into()))?;
    let q0 = (prefix_end - start) as usize;
    let mut signs = vec![Sign::Plus; len];
    let mut sum = zero.clone();
    for (i, a) in terms.iter().enumerate().take(q0) {
        if active(i) {
            sum.iter_mut().zip(a).for_each(|(s, a)| *s += a);
        }
    }
    let prefix_sum = sum.clone();

    // owner 0 = filler, 1..=d = Levy subsequence, u8::MAX = masked out
    let mut owner = vec![u8::MAX; len];
    let mut alpha = vec![0.0; len];
    let mut omega_norm = vec![0.0; len];
    let mut scanners = dirs.iter().map(|u| LevyScanner::new(u)).collect::<Result<Vec<_>>>()?;
    let mut assignment = vec![0usize; d + 1];
    for i in q0..len {
        if !active(i) {
            continue;
        }
        owner[i] = 0;
        for (k, sc) in scanners.iter_mut().enumerate() {
            if let Some((e, _)) = sc.offer(start + i as u64, &terms[i]) {
                owner[i] = (k + 1) as u8;
                alpha[i] = e.alpha;
                omega_norm[i] = norm(&e.omega);
                break;
            }
        }
        assignment[if owner[i] == 0 { d } else { owner[i] as usize - 1 }] += 1;
    }
    // suffix[k][i] = sum of ||omega|| over indices >= i owned by k
    let mut suffix = vec![vec![0.0; len + 1]; d];
    for (k, suf) in suffix.iter_mut().enumerate() {
        for i in (0..len).rev() {
            suf[i] = suf[i + 1] + if owner[i] as usize == k + 1 { omega_norm[i] } else { 0.0 };
        }
    }
    let k_omega: Vec<f64> = suffix.iter().map(|s| s[q0]).collect();
    let consts = constants(d, &k_omega);
    let mut plan = TargetPlan {
        prefix_end,
        prefix_sum,
        k_omega,
        constants: consts,
        assignment,
        ..base_plan
    };

    let mut q_prev = q0;
    let mut pos = q0;
    let mut running_owner: Option<usize> = None;
    for m in 1..=stages {
        let level = (-f64::from(m)).exp2();
        let c = if m == 1 { consts[0] } else { consts[1] };
        let z: Vec<f64> = target.iter().zip(&sum).map(|(x, s)| x - s).collect();
        let beta = solve_in_basis(&dirs, &z, BETA_TOLERANCE)
            .ok_or_else(|| Error::precondition("Levy basis is numerically singular"))?;
        let env_q = spec
            .first_below(level * (1.0 - f64::EPSILON), start, start + horizon)
            .map(|n| (n - start) as usize);
        let omega_q = suffix
            .iter()
            .map(|s| s.partition_point(|&t| t >= level))
            .max()
            .unwrap_or(0);
        let mut greedy: Vec<GreedyState> = beta.iter().map(|&b| GreedyState::new(b)).collect();
        let mut filler = GreedyBalancer::new(d, Norm::Euclidean);
        let mut filler_count = 0;
        let mut done = None;
        while pos < len {
            let i = pos;
            pos += 1;
            match owner[i] {
                u8::MAX => {}
                0 => {
                    signs[i] = filler.step(&terms[i]);
                    filler_count += 1;
                }
                k => signs[i] = greedy[k as usize - 1].step(alpha[i]),
            }
            if owner[i] != u8::MAX {
                let v = signs[i].value();
                sum.iter_mut().zip(&terms[i]).for_each(|(s, a)| *s += v * a);
            }
            if let Some(r) = running_owner {
                let e = distance(&sum, target);
                let rec: &mut StageRecord = &mut plan.stages[r];
                rec.running_max = rec.running_max.max(e);
            }
            let q = pos;
            let Some(env_q) = env_q else { continue };
            if q < env_q || q < omega_q {
                continue;
            }
            let errors: Vec<f64> = greedy.iter().map(GreedyState::error).collect();
            if errors.iter().any(|e| *e >= level) {
                continue;
            }
            let residual = distance(&sum, target);
            if residual <= c * level {
                done = Some((errors, residual));
                break;
            }
        }
        let Some((greedy_errors, residual)) = done else {
            plan.exhausted = Some(format!("stage {m} did not complete within horizon {horizon}"));
            break;
        };
        plan.stages.push(StageRecord {
            m,
            start: start + q_prev as u64,
            end: start + pos as u64,
            beta,
            greedy_errors,
            filler_count,
            filler_norm: norm(filler.sum()),
            constant: c,
            claimed_bound: c * level,
            residual,
            running_max: residual,
            running_bound: d as f64 * 2.0 * level + c * level,
        });
        running_owner = Some(plan.stages.len() - 1);
        q_prev = pos;
    }
    let used = q_prev;
    signs.truncate(used);
    let word = SignWord::from_signs(signs);
    let trace = trace_of(&terms[..used], &word, target, |i| owner_active(&owner, i, q0, &active))?;
    Ok((word, plan, trace))
}

fn owner_active(owner: &[u8], i: usize, q0: usize, active: &impl Fn(usize) -> bool) -> bool {
    if i < q0 {
        active(i)
    } else {
        owner[i] != u8::MAX
    }
}

fn trace_of(
    terms: &[Vec<f64>],
    signs: &SignWord,
    target: &[f64],
    include: impl Fn(usize) -> bool,
) -> Result<PartialSumTrace> {
    let mut t = PartialSumTrace::with_capacity(target.len(), Some(target.to_vec()), terms.len())?;
    let zero = vec![0.0; target.len()];
    for (i, (a, s)) in terms.iter().zip(signs.signs()).enumerate() {
        t.push(*s, if include(i) { a } else { &zero });
    }
    Ok(t)
}

/// Role of one index in a [`TriplePartition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Free,
    Filler,
    Carrier(usize),
}

/// Per-block split of `k` consecutive indices into `d` carrier/filler
/// indices and `k - d` free ones.
#[derive(Debug, Clone, Serialize)]
pub struct TriplePartition {
    pub k: usize,
    pub d: usize,
    pub start: u64,
    /// `roles[j][t]` is the role of index `start + j k + t`.
    pub roles: Vec<Vec<Role>>,
}

impl TriplePartition {
    /// Carrier slots take, per block and direction, the first unused index
    /// whose direction lies in `B(u_i, 1/2)`; a missing carrier becomes a
    /// filler at the smallest unused index.
    pub fn build(spec: &SequenceSpec, k: usize, blocks: usize) -> Result<Self> {
        let d = spec.dim();
        let dirs = spec.levy_directions();
        if dirs.len() != d {
            return Err(Error::precondition(format!(
                "spec declares {} Levy directions; {d} are required",
                dirs.len()
            )));
        }
        if k < d + 2 {
            return Err(Error::precondition(format!("block width k = {k} must be at least d + 2 = {}", d + 2)));
        }
        let start = spec.start_index();
        let mut roles = Vec::with_capacity(blocks);
        let mut unit = vec![0.0; d];
        for j in 0..blocks {
            let terms = spec.terms((j * k) as u64, k);
            let mut row = vec![Role::Free; k];
            let mut used = vec![false; k];
            for (i, u) in dirs.iter().enumerate() {
                let hit = (0..k).find(|&t| {
                    let n = norm(&terms[t]);
                    if used[t] || n == 0.0 {
                        return false;
                    }
                    unit.iter_mut().zip(&terms[t]).for_each(|(o, a)| *o = a / n);
                    distance(&unit, u) < 0.5
                });
                let (t, role) = match hit {
                    Some(t) => (t, Role::Carrier(i)),
                    None => ((0..k).find(|&t| !used[t]).unwrap(), Role::Filler),
                };
                used[t] = true;
                row[t] = role;
            }
            roles.push(row);
        }
        Ok(TriplePartition { k, d, start, roles })
    }

    pub fn blocks(&self) -> usize {
        self.roles.len()
    }

    pub fn role(&self, n: u64) -> Option<Role> {
        let i = n.checked_sub(self.start)? as usize;
        self.roles.get(i / self.k).map(|r| r[i % self.k])
    }

    /// Offsets (from `start`) of the free indices of block `j`.
    pub fn free_offsets(&self, j: usize) -> Vec<usize> {
        (0..self.k).filter(|&t| self.roles[j][t] == Role::Free).map(|t| j * self.k + t).collect()
    }

    fn indices_with(&self, pred: impl Fn(Role) -> bool) -> Vec<u64> {
        self.roles
            .iter()
            .flatten()
            .enumerate()
            .filter(|(_, r)| pred(**r))
            .map(|(i, _)| self.start + i as u64)
            .collect()
    }

    pub fn free(&self) -> Vec<u64> {
        self.indices_with(|r| r == Role::Free)
    }

    pub fn filler(&self) -> Vec<u64> {
        self.indices_with(|r| r == Role::Filler)
    }

    pub fn carrier(&self) -> Vec<u64> {
        self.indices_with(|r| matches!(r, Role::Carrier(_)))
    }

    /// Every block has `k - d` free slots and at most one carrier per
    /// direction.
    pub fn is_well_formed(&self) -> bool {
        self.roles.iter().all(|row| {
            row.len() == self.k
                && row.iter().filter(|r| **r == Role::Free).count() == self.k - self.d
                && (0..self.d).all(|i| row.iter().filter(|r| **r == Role::Carrier(i)).count() <= 1)
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionCount {
    pub k: usize,
    pub d: usize,
    pub levels: usize,
    /// Largest free-term norm `M`.
    pub max_free_norm: f64,
    /// A class survives when some member keeps every block-boundary sum of
    /// the free terms within `K_0 M`.
    pub bound: f64,
    /// `total[i] = 2^(i (k - d - 1))` classes at depth `i`.
    pub total: Vec<u64>,
    pub admissible: Vec<u64>,
    /// `(k - d - 1) / k`.
    pub exponent: f64,
}

impl PartitionCount {
    pub fn certifies(&self) -> bool {
        self.admissible.iter().zip(&self.total).all(|(a, t)| a >= t)
    }
}

/// Builds the partition on `levels` blocks and counts the admissible
/// free-coordinate classes (free words modulo a sign flip per block).
pub fn partition_for_dimension(
    spec: &SequenceSpec,
    k: usize,
    levels: usize,
) -> Result<(TriplePartition, PartitionCount)> {
    spec.require_null()?;
    if levels.saturating_mul(k) > crate::greedy1d::LAMBDA_BUDGET {
        return Err(Error::Budget(format!(
            "levels * k = {} exceeds the enumeration budget {}",
            levels * k,
            crate::greedy1d::LAMBDA_BUDGET
        )));
    }
    let part = TriplePartition::build(spec, k, levels)?;
    let d = part.d;
    let free = k - d;
    let blocks: Vec<Vec<Vec<f64>>> = (0..levels)
        .map(|j| part.free_offsets(j).into_iter().map(|o| spec.term(part.start + o as u64).unwrap()).collect())
        .collect();
    let max_free_norm = blocks.iter().flatten().map(|a| norm(a)).fold(0.0, f64::max);
    let bound = k0() * max_free_norm;
    // block sums of every canonical word (first sign +), per block
    let canon: Vec<Vec<Vec<f64>>> = blocks
        .iter()
        .map(|terms| {
            (0..1u64 << (free - 1))
                .map(|bits| {
                    let w = SignWord::from_bits(bits, free);
                    let mut s = vec![0.0; d];
                    for (a, sg) in terms.iter().zip(w.signs()) {
                        s.iter_mut().zip(a).for_each(|(s, a)| *s += sg.value() * a);
                    }
                    s
                })
                .collect()
        })
        .collect();
    let per_block = 1u64 << (free - 1);
    let mut total = Vec::with_capacity(levels + 1);
    let mut admissible = Vec::with_capacity(levels + 1);
    for depth in 0..=levels {
        let count = per_block.pow(depth as u32);
        total.push(count);
        let ok = (0..count)
            .into_par_iter()
            .filter(|&c| {
                let choice: Vec<usize> = (0..depth)
                    .map(|j| ((c / per_block.pow((depth - 1 - j) as u32)) % per_block) as usize)
                    .collect();
                flips_exist(&canon, &choice, 0, &vec![0.0; d], bound)
            })
            .count() as u64;
        admissible.push(ok);
    }
    let count = PartitionCount {
        k,
        d,
        levels,
        max_free_norm,
        bound,
        total,
        admissible,
        exponent: (k - d - 1) as f64 / k as f64,
    };
    Ok((part, count))
}

fn flips_exist(canon: &[Vec<Vec<f64>>], choice: &[usize], j: usize, s: &[f64], bound: f64) -> bool {
    if j == choice.len() {
        return true;
    }
    let b = &canon[j][choice[j]];
    [1.0, -1.0].iter().any(|sign| {
        let next: Vec<f64> = s.iter().zip(b).map(|(s, b)| s + sign * b).collect();
        norm(&next) <= bound && flips_exist(canon, choice, j + 1, &next, bound)
    })
}

/// Exact sums of the free, filler and carrier parts of `signs`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSums {
    pub free: Vec<BigRational>,
    pub filler: Vec<BigRational>,
    pub carrier: Vec<BigRational>,
}

pub fn partition_sums_exact(spec: &SequenceSpec, part: &TriplePartition, signs: &SignWord) -> Result<PartitionSums> {
    let len = signs.len().min(part.blocks() * part.k);
    let terms = spec
        .terms_exact(0, len)
        .ok_or_else(|| Error::precondition("exact sums need a family with rational terms"))?;
    let d = spec.dim();
    let mut out = PartitionSums {
        free: vec![BigRational::zero(); d],
        filler: vec![BigRational::zero(); d],
        carrier: vec![BigRational::zero(); d],
    };
    for (i, (a, s)) in terms.iter().zip(signs.signs()).enumerate() {
        let acc = match part.role(part.start + i as u64).unwrap() {
            Role::Free => &mut out.free,
            Role::Filler => &mut out.filler,
            Role::Carrier(_) => &mut out.carrier,
        };
        for (acc, a) in acc.iter_mut().zip(a) {
            if *s == Sign::Plus {
                *acc += a;
            } else {
                *acc -= a;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizedPartition {
    /// Free part `L_1` and filler part `L_2` at the horizon.
    pub free_sum: Vec<f64>,
    pub filler_sum: Vec<f64>,
    pub carrier_plan: TargetPlan,
    pub final_error: f64,
}

/// Fixes the free signs, balances the fillers and steers the carriers to
/// `L - L_1 - L_2`, with `L_1` and `L_2` taken at the horizon. Carriers
/// after the last completed stage are balanced among themselves.
pub fn realize_partition(
    spec: &SequenceSpec,
    part: &TriplePartition,
    free_signs: &SignWord,
    target: &[f64],
    stages: u32,
) -> Result<(SignWord, RealizedPartition, PartialSumTrace)> {
    let free = part.free();
    if free_signs.len() != free.len() {
        return Err(Error::precondition(format!(
            "{} free signs given; the partition has {} free indices",
            free_signs.len(),
            free.len()
        )));
    }
    let d = spec.dim();
    let horizon = (part.blocks() * part.k) as u64;
    let mut signs = vec![Sign::Plus; horizon as usize];
    let mut free_sum = vec![0.0; d];
    for (n, s) in free.iter().zip(free_signs.signs()) {
        signs[(n - part.start) as usize] = *s;
        let a = spec.term(*n)?;
        free_sum.iter_mut().zip(&a).for_each(|(f, a)| *f += s.value() * a);
    }
    let mut bal = GreedyBalancer::new(d, Norm::Euclidean);
    for n in part.filler() {
        signs[(n - part.start) as usize] = bal.step(&spec.term(n)?);
    }
    let filler_sum = bal.sum().to_vec();
    let rest: Vec<f64> = (0..d).map(|i| target[i] - free_sum[i] - filler_sum[i]).collect();
    let mask: Vec<bool> = (0..horizon).map(|i| matches!(part.role(part.start + i), Some(Role::Carrier(_)))).collect();
    let (carrier, plan, _) = hit_masked(spec, &rest, stages, horizon, Some(&mask))?;
    let mut tail = GreedyBalancer::new(d, Norm::Euclidean);
    for i in 0..horizon as usize {
        if !mask[i] {
            continue;
        }
        signs[i] = match carrier.get(i) {
            Some(s) => s,
            None => tail.step(&spec.term(part.start + i as u64)?),
        };
    }
    let word = SignWord::from_signs(signs);
    let trace = crate::trace::partial_sums(spec, &word, Some(target))?;
    let final_error = trace.dist_to_target(trace.len()).unwrap_or(f64::INFINITY);
    Ok((word, RealizedPartition { free_sum, filler_sum, carrier_plan: plan, final_error }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;
    use crate::trace::partial_sums_exact;

    fn interleaved() -> SequenceSpec {
        parse_spec(
            "family = interleaved\nparts = 2\n\
             part.0.family = power-decay\npart.0.coeffs = 1, 0\npart.0.exponents = 1\n\
             part.1.family = power-decay\npart.1.coeffs = 0, 1\npart.1.exponents = 1\n\
             levy_directions = 1, 0; 0, 1\n",
        )
        .unwrap()
    }

    #[test]
    fn interleaved_hits_target() {
        let spec = interleaved();
        let (w, plan, trace) = hit_target(&spec, &[1.0, -2.0], 8, 1_000_000).unwrap();
        assert!(plan.exhausted.is_none());
        assert_eq!(plan.stages.len(), 8);
        assert_eq!(plan.prefix_end, 2);
        for s in &plan.stages {
            assert!(s.holds(), "stage {}: {} > {}", s.m, s.residual, s.claimed_bound);
        }
        let last = plan.stages.last().unwrap();
        assert_eq!(trace.len() as u64, last.end - 1);
        assert_eq!(w.len(), trace.len());
        assert!(trace.dist_to_target(trace.len()).unwrap() <= last.claimed_bound);
        for pair in plan.stages.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
    }

    #[test]
    fn running_errors_within_logged_bound() {
        let (_, plan, _) = hit_target(&interleaved(), &[1.0, -2.0], 8, 1_000_000).unwrap();
        for s in &plan.stages[..plan.stages.len() - 1] {
            assert!(s.running_max <= s.running_bound, "stage {}", s.m);
        }
    }

    #[test]
    fn dependent_directions_rejected() {
        let spec = interleaved().with_levy_directions(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let err = hit_target(&spec, &[1.0, 0.0], 2, 1000).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn missing_directions_rejected() {
        let spec = parse_spec("family = power-decay\ndim = 2\ncoeffs = 1, 1\nexponents = 1\n").unwrap();
        assert!(matches!(hit_target(&spec, &[0.0, 0.0], 1, 100), Err(Error::Precondition(_))));
    }

    #[test]
    fn short_horizon_gives_partial_plan() {
        let (_, plan, _) = hit_target(&interleaved(), &[1.0, -2.0], 8, 100).unwrap();
        assert!(plan.exhausted.is_some());
        assert!(plan.stages.len() < 8);
        assert!(plan.stages.iter().all(StageRecord::holds));
    }

    #[test]
    fn paired_spec_cancels_exactly() {
        let spec = parse_spec(
            "family = repeat\ntimes = 2\ninner.family = interleaved\ninner.parts = 2\n\
             inner.part.0.family = power-decay\ninner.part.0.coeffs = 1/2, 0\ninner.part.0.exponents = 1\n\
             inner.part.1.family = power-decay\ninner.part.1.coeffs = 0, 1/2\ninner.part.1.exponents = 1\n\
             levy_directions = 1, 0; 0, 1\n",
        )
        .unwrap();
        let (w, plan, trace) = hit_target(&spec, &[0.0, 0.0], 4, 1001).unwrap();
        assert!(plan.pairing);
        assert_eq!(w.len(), 1000);
        for n in (2..=1000).step_by(2) {
            assert_eq!(trace.sum(n), &[0.0, 0.0]);
        }
    }

    #[test]
    fn partition_is_well_formed() {
        let spec = interleaved();
        let p = TriplePartition::build(&spec, 5, 40).unwrap();
        assert!(p.is_well_formed());
        let mut all: Vec<u64> = p.free().into_iter().chain(p.filler()).chain(p.carrier()).collect();
        all.sort_unstable();
        assert_eq!(all, (1..=200).collect::<Vec<u64>>());
        // block 0 = {1..5}: e1/1 and e2/2 carry, 3,4,5 are free
        assert_eq!(p.roles[0], vec![Role::Carrier(0), Role::Carrier(1), Role::Free, Role::Free, Role::Free]);
    }

    #[test]
    fn missing_carrier_becomes_filler() {
        // all mass along e1: no term ever points near e2
        let spec = parse_spec(
            "family = power-decay\ndim = 2\ncoeffs = 1, 0\nexponents = 1\nlevy_directions = 1, 0; 0, 1\n",
        )
        .unwrap();
        let p = TriplePartition::build(&spec, 4, 3).unwrap();
        assert!(p.is_well_formed());
        for row in &p.roles {
            assert_eq!(row[0], Role::Carrier(0));
            assert_eq!(row[1], Role::Filler);
        }
    }

    #[test]
    fn k_below_d_plus_two_rejected() {
        assert!(matches!(TriplePartition::build(&interleaved(), 3, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn partition_counts() {
        let spec = interleaved();
        let (_, c) = partition_for_dimension(&spec, 4, 1).unwrap();
        assert!(c.admissible[1] >= 2);
        let (_, c) = partition_for_dimension(&spec, 5, 2).unwrap();
        assert_eq!(c.total, vec![1, 4, 16]);
        assert!(c.admissible[2] >= 16);
        assert!(c.certifies());
        for j in 1..=4 {
            let (_, c) = partition_for_dimension(&spec, 4, j).unwrap();
            assert!(c.admissible[j] >= 1 << j);
        }
        assert!(matches!(partition_for_dimension(&spec, 5, 5), Err(Error::Budget(_))));
    }

    #[test]
    fn partition_sums_compose_exactly() {
        let spec = interleaved();
        let p = TriplePartition::build(&spec, 5, 6).unwrap();
        let w: SignWord = "+-+--+++-+-+--+-+++---+-+-+++".parse().unwrap();
        let w = w.concat(&"-".parse().unwrap());
        let parts = partition_sums_exact(&spec, &p, &w).unwrap();
        let total = partial_sums_exact(&spec, &w).unwrap();
        let last = total.last().unwrap();
        for i in 0..2 {
            assert_eq!(&parts.free[i] + &parts.filler[i] + &parts.carrier[i], last[i]);
        }
    }

    #[test]
    fn realized_partition_reaches_target() {
        let spec = interleaved();
        let p = TriplePartition::build(&spec, 5, 200_000).unwrap();
        let free: SignWord = SignWord::from_signs(
            (0..p.free().len()).map(|i| Sign::from_bool((i / 3) % 2 == 0)).collect(),
        );
        let (w, r, t) = realize_partition(&spec, &p, &free, &[1.0, -2.0], 6).unwrap();
        assert!(r.carrier_plan.exhausted.is_none(), "{:?}", r.carrier_plan.exhausted);
        let last = r.carrier_plan.stages.last().unwrap();
        assert!(last.residual <= last.claimed_bound);
        assert_eq!(w.len(), 1_000_000);
        assert!(r.final_error < 0.1, "{}", r.final_error);
        // free signs are untouched
        for (n, s) in p.free().iter().zip(free.signs()) {
            assert_eq!(w.get((n - 1) as usize), Some(*s));
        }
        assert_eq!(t.len(), 1_000_000);
    }
}
