//! Cylinder measures on sign space and Mass Distribution Principle checks.
//!
//! Two spaces are supported. On `Omega` a cylinder fixed on the first `n`
//! signs has diameter `2^-(n+1)`. On the quotient `Theta(k)`, where each
//! block of `k` signs is taken up to a global flip, a cylinder fixed on
//! `j` blocks has diameter `2^-(k(j+1))`. Both metrics are ultrametrics,
//! so every set of diameter `r` sits inside a cylinder of the same
//! diameter and checking cylinders is enough.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{pow2_neg, rational_serde};
use crate::greedy1d::{lambda_tree, LambdaParams};
use crate::sequence::SequenceSpec;
use crate::sign::{Distance, Sign, SignWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Omega,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub word: SignWord,
    #[serde(with = "rational_serde")]
    pub mass: BigRational,
}

/// Masses of the cylinders at levels `0..=depth`; level `i` fixes `i`
/// blocks of `block` signs. Atoms within a level are in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderMeasure {
    pub schema_version: String,
    pub space: Space,
    pub block: usize,
    pub rule: String,
    pub levels: Vec<Vec<Atom>>,
}

impl CylinderMeasure {
    fn new(space: Space, block: usize, rule: &str, levels: Vec<Vec<Atom>>) -> Self {
        CylinderMeasure { schema_version: "1".into(), space, block, rule: rule.into(), levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Total mass 1, and every atom's mass equals the sum over its children.
    pub fn is_conserved(&self) -> bool {
        let Some(root) = self.levels.first() else { return false };
        if root.len() != 1 || !root[0].mass.is_one() {
            return false;
        }
        self.levels.windows(2).all(|w| {
            let (parents, children) = (&w[0], &w[1]);
            let mut c = 0;
            parents.iter().all(|p| {
                let mut total = BigRational::zero();
                while c < children.len() && children[c].word.prefix(p.word.len()) == p.word {
                    total += &children[c].mass;
                    c += 1;
                }
                total == p.mass
            }) && c == children.len()
        })
    }

    /// Largest `mu(cylinder)` among cylinders fixed on `len` signs
    /// (`Omega`) or `len` blocks (`Theta`).
    fn max_mass(&self, len: usize) -> Option<BigRational> {
        match self.space {
            Space::Theta => self.levels.get(len)?.iter().map(|a| a.mass.clone()).max(),
            Space::Omega => {
                let level = len.div_ceil(self.block);
                let atoms = self.levels.get(level)?;
                let mut best = BigRational::zero();
                let mut i = 0;
                while i < atoms.len() {
                    let head = atoms[i].word.prefix(len);
                    let mut total = BigRational::zero();
                    while i < atoms.len() && atoms[i].word.prefix(len) == head {
                        total += &atoms[i].mass;
                        i += 1;
                    }
                    best = best.max(total);
                }
                Some(best)
            }
        }
    }

    /// Lengths at which cylinders are checked for `depth` levels.
    fn check_lengths(&self, depth: usize) -> usize {
        match self.space {
            Space::Omega => depth * self.block,
            Space::Theta => depth,
        }
    }

    /// `log2` of the diameter of a cylinder of the given length.
    fn log2_diam(&self, len: usize) -> f64 {
        match self.space {
            Space::Omega => -((len + 1) as f64),
            Space::Theta => -((self.block * (len + 1)) as f64),
        }
    }

    pub fn convention(&self) -> String {
        match self.space {
            Space::Omega => "omega: diam of the cylinder on n signs = 2^-(n+1)".into(),
            Space::Theta => format!("theta(k={}): diam of the cylinder on j blocks = 2^-(k(j+1))", self.block),
        }
    }
}

fn uniform_levels(words_at: impl Fn(usize) -> Vec<SignWord>, bits_per_level: usize, depth: usize) -> Vec<Vec<Atom>> {
    (0..=depth)
        .map(|i| {
            let mass = pow2_neg((i * bits_per_level) as u64);
            words_at(i).into_iter().map(|word| Atom { word, mass: mass.clone() }).collect()
        })
        .collect()
}

/// Largest number of atoms a measure may have in its deepest level.
pub const MEASURE_ATOM_LIMIT: usize = 1 << 20;

fn check_atoms(bits: usize) -> Result<()> {
    if bits > 20 {
        return Err(Error::Budget(format!(
            "measure would have 2^{bits} atoms; the limit is {MEASURE_ATOM_LIMIT}"
        )));
    }
    Ok(())
}

/// Uniform (coin-tossing) measure on `Omega` down to `depth` signs.
pub fn uniform_measure(depth: usize) -> Result<CylinderMeasure> {
    check_atoms(depth)?;
    let levels = uniform_levels(|i| (0..1u64 << i).map(|b| SignWord::from_bits(b, i)).collect(), 1, depth);
    Ok(CylinderMeasure::new(Space::Omega, 1, "uniform", levels))
}

/// The Λ measure: every node keeps its lexicographically first `2^(k-2)`
/// admissible children, so a level-`i` atom has mass `2^(-i(k-2))`.
pub fn build_lambda_measure(params: &LambdaParams, spec: &SequenceSpec, depth: usize) -> Result<CylinderMeasure> {
    let k = params.k();
    let per_node = 1usize << (k - 2);
    let tree = lambda_tree(params, spec, depth, per_node)?;
    let levels = tree
        .into_iter()
        .enumerate()
        .map(|(i, words)| {
            let mass = pow2_neg((i * (k - 2)) as u64);
            words.into_iter().map(|word| Atom { word, mass: mass.clone() }).collect()
        })
        .collect();
    Ok(CylinderMeasure::new(Space::Omega, k, "lambda-lexicographic-first", levels))
}

/// One element of `{-1,1}^k` up to a global flip, stored by its
/// representative with first sign `+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ThetaClass {
    pub k: usize,
    pub rep: SignWord,
}

impl ThetaClass {
    pub fn of(block: &SignWord) -> Self {
        let rep = if block.get(0) == Some(Sign::Minus) { block.negated() } else { block.clone() };
        ThetaClass { k: block.len(), rep }
    }
}

/// All `2^(k-1)` classes, in lexicographic order of representatives.
pub fn theta_quotient(k: usize) -> Result<Vec<ThetaClass>> {
    if k == 0 || k > 32 {
        return Err(Error::precondition(format!("block width k = {k} must be in 1..=32")));
    }
    Ok((0..1u64 << (k - 1)).map(|b| ThetaClass { k, rep: SignWord::from_bits(b, k) }).collect())
}

/// Classes of the complete `k`-blocks of `word`.
pub fn theta_project(word: &SignWord, k: usize) -> Vec<ThetaClass> {
    (0..word.len() / k).map(|j| ThetaClass::of(&word.slice(j * k..(j + 1) * k))).collect()
}

/// `2^(-k j)` for the first differing class `j` (1-based); when the
/// sequences agree, the bound `2^(-k(len+1))`.
pub fn theta_distance(x: &[ThetaClass], y: &[ThetaClass], k: usize) -> Distance {
    match x.iter().zip(y).position(|(a, b)| a != b) {
        Some(j) => Distance::Value((-((k * (j + 1)) as f64)).exp2()),
        None => Distance::Bound((-((k * (x.len().min(y.len()) + 1)) as f64)).exp2()),
    }
}

/// Uniform measure on `Theta(k)` down to `depth` blocks: every class
/// sequence of length `j` has mass `2^(-j(k-1))`.
pub fn theta_uniform_measure(k: usize, depth: usize) -> Result<CylinderMeasure> {
    if k == 0 {
        return Err(Error::precondition("block width k must be positive"));
    }
    check_atoms(depth * (k - 1))?;
    let classes = theta_quotient(k)?;
    let words_at = |j: usize| {
        let mut words = vec![SignWord::new()];
        for _ in 0..j {
            words = words.iter().flat_map(|w| classes.iter().map(move |c| w.concat(&c.rep))).collect();
        }
        words
    };
    let levels = uniform_levels(words_at, k - 1, depth);
    Ok(CylinderMeasure::new(Space::Theta, k, "theta-uniform", levels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionCertificate {
    pub schema_version: String,
    pub s: f64,
    pub c: f64,
    pub depth: usize,
    pub space: Space,
    pub convention: String,
    /// Entry `n`: `max mu / diam^s` over cylinders of length `n`.
    pub per_depth_max_ratio: Vec<f64>,
    pub first_failure: Option<usize>,
    pub verdict: Verdict,
}

/// Relative slack for the floating evaluation of `diam^s`.
pub const RATIO_TOLERANCE: f64 = 1e-12;

/// Checks `mu(U) <= c diam(U)^s` on every cylinder down to `depth` levels.
pub fn mdp_certify(measure: &CylinderMeasure, s: f64, c: f64, depth: usize) -> Result<DimensionCertificate> {
    if !(s.is_finite() && s >= 0.0 && c.is_finite() && c > 0.0) {
        return Err(Error::precondition("s must be >= 0 and c > 0"));
    }
    if depth > measure.depth() {
        return Err(Error::precondition(format!(
            "measure is complete to depth {} only; depth {depth} requested",
            measure.depth()
        )));
    }
    let lengths = measure.check_lengths(depth);
    let ratios: Vec<f64> = (0..=lengths)
        .into_par_iter()
        .map(|n| {
            let m = measure.max_mass(n).expect("level present");
            let log2m = log2_rational(&m);
            (log2m - s * measure.log2_diam(n)).exp2()
        })
        .collect();
    let first_failure = ratios.iter().position(|r| *r > c * (1.0 + RATIO_TOLERANCE));
    Ok(DimensionCertificate {
        schema_version: "1".into(),
        s,
        c,
        depth,
        space: measure.space,
        convention: measure.convention(),
        per_depth_max_ratio: ratios,
        first_failure,
        verdict: if first_failure.is_none() { Verdict::Certified } else { Verdict::NotCertified },
    })
}

/// `log2` of a positive rational; `-inf` for zero.
fn log2_rational(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = |b: &BigInt| b.bits() as i64;
    let shift = |b: &BigInt| {
        let excess = (bits(b) - 60).max(0);
        ((b >> excess as usize).to_f64().unwrap(), excess)
    };
    let (n, en) = shift(r.numer());
    let (d, ed) = shift(r.denom());
    n.log2() - d.log2() + (en - ed) as f64
}

/// Pairs of words of length `len` whose projections violate
/// `rho_theta(pi x, pi y) <= rho(x, y)`, checked over all pairs.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub k: usize,
    pub len: usize,
    pub pairs: u64,
    /// Largest `rho_theta / rho` seen.
    pub worst_ratio: f64,
    pub violations: u64,
}

pub fn theta_lipschitz_check(k: usize, len: usize) -> Result<LipschitzReport> {
    if k == 0 || len > 26 {
        return Err(Error::Budget(format!("exhaustive pair check supports k >= 1 and len <= 26, got len {len}")));
    }
    let blocks = len / k;
    let mask = (1u64 << k) - 1;
    // canonical class code of each complete block, first block in the high bits
    let project = |w: u64| -> Vec<u64> {
        (0..blocks)
            .map(|j| {
                let b = (w >> (len - (j + 1) * k)) & mask;
                if b >> (k - 1) & 1 == 1 {
                    !b & mask
                } else {
                    b
                }
            })
            .collect()
    };
    let words = 1u64 << len;
    let projected: Vec<Vec<u64>> = (0..words).into_par_iter().map(project).collect();
    let (worst, violations) = (0..words)
        .into_par_iter()
        .map(|x| {
            let mut worst: f64 = 0.0;
            let mut bad = 0u64;
            for y in x + 1..words {
                let diff = x ^ y;
                // 1-based position of the first differing sign
                let i = len - (63 - diff.leading_zeros() as usize);
                let rho = (-(i as f64)).exp2();
                let theta = match projected[x as usize].iter().zip(&projected[y as usize]).position(|(a, b)| a != b) {
                    Some(j) => (-((k * (j + 1)) as f64)).exp2(),
                    None => (-((k * (blocks + 1)) as f64)).exp2(),
                };
                worst = worst.max(theta / rho);
                bad += u64::from(theta > rho);
            }
            (worst, bad)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    Ok(LipschitzReport { k, len, pairs: words * (words - 1) / 2, worst_ratio: worst, violations })
}
