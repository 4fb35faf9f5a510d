//! Partial-sum traces of signed series.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{self, Norm};
use crate::sequence::SequenceSpec;
use crate::sign::{Sign, SignWord};

/// Prefix sums `S_N = sum_{i<N} eps_i a_{start+i}` for `N = 1..=len`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumTrace {
    dim: usize,
    sums: Vec<f64>,
    running_max: Vec<f64>,
    target: Option<Vec<f64>>,
    norm: Norm,
}

impl PartialSumTrace {
    pub fn new(dim: usize, target: Option<Vec<f64>>) -> Result<Self> {
        if let Some(t) = &target {
            if t.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.len() });
            }
        }
        Ok(PartialSumTrace { dim, sums: Vec::new(), running_max: Vec::new(), target, norm: Norm::Euclidean })
    }

    pub fn with_capacity(dim: usize, target: Option<Vec<f64>>, cap: usize) -> Result<Self> {
        let mut t = Self::new(dim, target)?;
        t.sums.reserve(cap * dim);
        t.running_max.reserve(cap);
        Ok(t)
    }

    /// Measures running maxima in `norm` instead of the Euclidean norm.
    pub fn with_norm(mut self, norm: Norm) -> Self {
        assert!(self.is_empty(), "norm must be chosen before the first entry");
        self.norm = norm;
        self
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// Appends `S_{N+1} = S_N + eps * term`.
    pub fn push(&mut self, sign: Sign, term: &[f64]) {
        let n = self.len();
        let base = self.sums.len();
        if n == 0 {
            self.sums.extend(term.iter().map(|v| sign.value() * v));
        } else {
            for i in 0..self.dim {
                let v = self.sums[base - self.dim + i] + sign.value() * term[i];
                self.sums.push(v);
            }
        }
        let nrm = self.norm.of(&self.sums[base..]);
        let prev = self.running_max.last().copied().unwrap_or(0.0);
        self.running_max.push(prev.max(nrm));
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.running_max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.running_max.is_empty()
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    /// `S_N` for `1 <= N <= len`; `S_0` is the zero vector.
    pub fn sum(&self, n: usize) -> &[f64] {
        assert!(n >= 1 && n <= self.len(), "trace entry {n} out of range");
        &self.sums[(n - 1) * self.dim..n * self.dim]
    }

    pub fn last_sum(&self) -> Vec<f64> {
        if self.is_empty() {
            vec![0.0; self.dim]
        } else {
            self.sum(self.len()).to_vec()
        }
    }

    /// `max_{M <= N} ||S_M||`.
    pub fn running_max(&self, n: usize) -> f64 {
        self.running_max[n - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.running_max.last().copied().unwrap_or(0.0)
    }

    /// Euclidean distance `||S_N - target||`, if a target is set.
    pub fn dist_to_target(&self, n: usize) -> Option<f64> {
        self.target.as_ref().map(|t| linalg::distance(self.sum(n), t))
    }

    /// Smallest `K` such that `||S_N - target|| < delta` for every
    /// `K <= N <= len`, or `None` if the final entry misses.
    pub fn settling_index(&self, delta: f64) -> Option<usize> {
        let mut k = None;
        for n in (1..=self.len()).rev() {
            if self.dist_to_target(n)? < delta {
                k = Some(n);
            } else {
                break;
            }
        }
        k
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &[f64], Option<f64>)> + '_ {
        (1..=self.len()).map(move |n| (n, self.sum(n), self.dist_to_target(n)))
    }
}

/// Float-mode partial sums of `signs` against `spec`, starting at its
/// first index.
pub fn partial_sums(
    spec: &SequenceSpec,
    signs: &SignWord,
    target: Option<&[f64]>,
) -> Result<PartialSumTrace> {
    let mut trace = PartialSumTrace::with_capacity(spec.dim(), target.map(<[f64]>::to_vec), signs.len())?;
    let mut buf = vec![0.0; spec.dim()];
    for (i, &s) in signs.signs().iter().enumerate() {
        spec.term_into(spec.start_index() + i as u64, &mut buf);
        trace.push(s, &buf);
    }
    Ok(trace)
}

/// Exact prefix sums, for families whose terms are rational.
pub fn partial_sums_exact(spec: &SequenceSpec, signs: &SignWord) -> Result<Vec<Vec<BigRational>>> {
    let mut acc = vec![BigRational::zero(); spec.dim()];
    let mut out = Vec::with_capacity(signs.len());
    for (i, &s) in signs.signs().iter().enumerate() {
        let n = spec.start_index() + i as u64;
        let term = spec
            .term_exact(n)?
            .ok_or_else(|| Error::precondition(format!("term {n} has no exact rational value")))?;
        for (a, t) in acc.iter_mut().zip(term) {
            match s {
                Sign::Plus => *a += t,
                Sign::Minus => *a -= t,
            }
        }
        out.push(acc.clone());
    }
    Ok(out)
}
