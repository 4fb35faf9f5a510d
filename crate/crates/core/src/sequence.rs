//! Finitely described null sequences in R^d.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::{pow2_neg, Real};
use crate::linalg;

/// Exponent schedule `g(k)` of the Liouville-type example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    /// `g(k) = 10^(k^2)`; only the first two blocks fit in a 64-bit index.
    Decimal,
    /// `g(k) = k^2`, small enough to walk through several blocks.
    Square,
}

impl Growth {
    pub fn exponent(self, k: u32) -> u128 {
        match self {
            Growth::Decimal => {
                let e = k.saturating_mul(k);
                10u128.checked_pow(e).unwrap_or(u128::MAX)
            }
            Growth::Square => u128::from(k) * u128::from(k),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Growth::Decimal => "decimal",
            Growth::Square => "square",
        }
    }
}

/// Whether `sum ||a_n||` is finite, as certified by the family rather
/// than by looking at finitely many terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summability {
    Summable,
    Divergent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Listed terms, one row per index; every later term is zero.
    Explicit { dim: usize, terms: Vec<Vec<Real>> },
    /// `a_{n,i} = c_i * n^(-alpha_i)`.
    PowerDecay { coeffs: Vec<Real>, exponents: Vec<Real> },
    /// `a_{n,i} = c_i * ratio^n`.
    Geometric { coeffs: Vec<Real>, ratio: Real },
    /// `(-1)^n` times the inner term.
    Alternating(Box<Family>),
    /// Round-robin: index `n` is served by part `(n - start) mod parts`,
    /// evaluated at `n` itself.
    Interleaved(Vec<Family>),
    /// Each inner term repeated `times` times in a row.
    Repeat { inner: Box<Family>, times: u64 },
    /// `a_n = ((-1)^n 2^(-g(k)), (-1)^n 2^(-k))` for `n` in `(n_{k-1}, n_k]`,
    /// `n_0 = 0`, `n_k = n_{k-1} + 2^(g(k)+1)`.
    Liouville { growth: Growth },
    /// `scale * (cos t_n, sin t_n) / ln(n + 2)` with `t_n` drawn from a
    /// counter-based stream keyed by `seed`.
    RandomDirections { seed: u64, scale: Real },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Explicit { .. } => "explicit",
            Family::PowerDecay { .. } => "power-decay",
            Family::Geometric { .. } => "geometric",
            Family::Alternating(_) => "alternating",
            Family::Interleaved(_) => "interleaved",
            Family::Repeat { .. } => "repeat",
            Family::Liouville { .. } => "liouville",
            Family::RandomDirections { .. } => "random-directions",
        }
    }

    fn dim(&self) -> Result<usize> {
        let d = match self {
            Family::Explicit { dim, terms } => {
                if let Some(row) = terms.iter().find(|r| r.len() != *dim) {
                    return Err(Error::DimensionMismatch { expected: *dim, got: row.len() });
                }
                *dim
            }
            Family::PowerDecay { coeffs, exponents } => {
                if coeffs.len() != exponents.len() {
                    return Err(Error::DimensionMismatch {
                        expected: coeffs.len(),
                        got: exponents.len(),
                    });
                }
                coeffs.len()
            }
            Family::Geometric { coeffs, .. } => coeffs.len(),
            Family::Alternating(inner) | Family::Repeat { inner, .. } => inner.dim()?,
            Family::Interleaved(parts) => {
                let first = parts
                    .first()
                    .ok_or(Error::Empty("interleaved spec without parts"))?
                    .dim()?;
                for p in &parts[1..] {
                    let d = p.dim()?;
                    if d != first {
                        return Err(Error::DimensionMismatch { expected: first, got: d });
                    }
                }
                first
            }
            Family::Liouville { .. } | Family::RandomDirections { .. } => 2,
        };
        if d == 0 {
            return Err(Error::precondition("dimension must be positive"));
        }
        Ok(d)
    }

    fn needs_positive_index(&self) -> bool {
        match self {
            Family::PowerDecay { .. } | Family::Liouville { .. } => true,
            Family::Alternating(inner) | Family::Repeat { inner, .. } => inner.needs_positive_index(),
            Family::Interleaved(parts) => parts.iter().any(Family::needs_positive_index),
            _ => false,
        }
    }

    fn is_null(&self) -> bool {
        match self {
            Family::Explicit { .. } | Family::Liouville { .. } | Family::RandomDirections { .. } => true,
            Family::PowerDecay { coeffs, exponents } => coeffs
                .iter()
                .zip(exponents)
                .all(|(c, a)| c.value() == 0.0 || a.value() > 0.0),
            Family::Geometric { coeffs, ratio } => {
                ratio.value().abs() < 1.0 || coeffs.iter().all(|c| c.value() == 0.0)
            }
            Family::Alternating(inner) | Family::Repeat { inner, .. } => inner.is_null(),
            Family::Interleaved(parts) => parts.iter().all(Family::is_null),
        }
    }

    fn summability(&self) -> Summability {
        use Summability::*;
        match self {
            Family::Explicit { .. } => Summable,
            Family::PowerDecay { coeffs, exponents } => {
                if coeffs.iter().zip(exponents).any(|(c, a)| c.value() != 0.0 && a.value() <= 1.0) {
                    Divergent
                } else {
                    Summable
                }
            }
            Family::Geometric { coeffs, ratio } => {
                if ratio.value().abs() < 1.0 || coeffs.iter().all(|c| c.value() == 0.0) {
                    Summable
                } else {
                    Divergent
                }
            }
            Family::Alternating(inner) | Family::Repeat { inner, .. } => inner.summability(),
            Family::Interleaved(parts) => {
                if parts.iter().any(|p| p.summability() == Divergent) {
                    Divergent
                } else {
                    Summable
                }
            }
            Family::Liouville { .. } => Divergent,
            Family::RandomDirections { scale, .. } => {
                if scale.value() == 0.0 {
                    Summable
                } else {
                    Divergent
                }
            }
        }
    }

    fn term_into(&self, n: u64, start: u64, out: &mut [f64]) {
        match self {
            Family::Explicit { terms, .. } => {
                let off = (n - start) as usize;
                match terms.get(off) {
                    Some(row) => out.iter_mut().zip(row).for_each(|(o, r)| *o = r.value()),
                    None => out.fill(0.0),
                }
            }
            Family::PowerDecay { coeffs, exponents } => {
                let x = n as f64;
                for ((o, c), a) in out.iter_mut().zip(coeffs).zip(exponents) {
                    *o = if c.value() == 0.0 {
                        0.0
                    } else {
                        match a.as_u32() {
                            Some(k) => c.value() / x.powi(k as i32),
                            None => c.value() * x.powf(-a.value()),
                        }
                    };
                }
            }
            Family::Geometric { coeffs, ratio } => {
                let p = geometric_power(ratio.value(), n);
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o = c.value() * p;
                }
            }
            Family::Alternating(inner) => {
                inner.term_into(n, start, out);
                if n % 2 == 1 {
                    out.iter_mut().for_each(|v| *v = -*v);
                }
            }
            Family::Interleaved(parts) => {
                let p = ((n - start) % parts.len() as u64) as usize;
                parts[p].term_into(n, start, out);
            }
            Family::Repeat { inner, times } => inner.term_into(start + (n - start) / times, start, out),
            Family::Liouville { growth } => {
                let k = liouville_block(*growth, n);
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                let g = growth.exponent(k);
                out[0] = if g > 1100 { 0.0 } else { sign * (-(g as f64)).exp2() };
                out[1] = sign * (-(k as f64)).exp2();
            }
            Family::RandomDirections { seed, scale } => {
                let t = std::f64::consts::TAU * unit_draw(*seed, n);
                let r = scale.value() / ((n + 2) as f64).ln();
                out[0] = r * t.cos();
                out[1] = r * t.sin();
            }
        }
    }

    fn term_exact(&self, n: u64, start: u64, dim: usize) -> Option<Vec<BigRational>> {
        match self {
            Family::Explicit { terms, .. } => match terms.get((n - start) as usize) {
                Some(row) => row.iter().map(|r| r.exact().cloned()).collect(),
                None => Some(vec![BigRational::zero(); dim]),
            },
            Family::PowerDecay { coeffs, exponents } => coeffs
                .iter()
                .zip(exponents)
                .map(|(c, a)| {
                    let c = c.exact()?;
                    if c.is_zero() {
                        return Some(BigRational::zero());
                    }
                    let k = a.as_u32()?;
                    let den = num_traits::pow(BigInt::from(n), k as usize);
                    Some(c / BigRational::from_integer(den))
                })
                .collect(),
            Family::Geometric { coeffs, ratio } => {
                let r = ratio.exact()?;
                let p = num_traits::pow(r.clone(), usize::try_from(n).ok()?);
                coeffs.iter().map(|c| Some(c.exact()? * &p)).collect()
            }
            Family::Alternating(inner) => {
                let mut v = inner.term_exact(n, start, dim)?;
                if n % 2 == 1 {
                    v.iter_mut().for_each(|x| *x = -x.clone());
                }
                Some(v)
            }
            Family::Interleaved(parts) => {
                let p = ((n - start) % parts.len() as u64) as usize;
                parts[p].term_exact(n, start, dim)
            }
            Family::Repeat { inner, times } => inner.term_exact(start + (n - start) / times, start, dim),
            Family::Liouville { growth } => {
                let k = liouville_block(*growth, n);
                let g = growth.exponent(k);
                if g > 1 << 20 {
                    return None;
                }
                let sign = if n.is_multiple_of(2) { BigRational::one() } else { -BigRational::one() };
                Some(vec![&sign * pow2_neg(g as u64), sign * pow2_neg(u64::from(k))])
            }
            Family::RandomDirections { scale, .. } => {
                if scale.value() == 0.0 {
                    Some(vec![BigRational::zero(); 2])
                } else {
                    None
                }
            }
        }
    }

    /// Non-increasing bound on `sup_{m >= n} ||a_m||` (Euclidean).
    fn envelope(&self, n: u64, start: u64) -> f64 {
        match self {
            Family::Explicit { terms, .. } => {
                let off = (n - start) as usize;
                terms
                    .iter()
                    .skip(off)
                    .map(|row| row.iter().map(|r| r.value() * r.value()).sum::<f64>().sqrt())
                    .fold(0.0, f64::max)
            }
            Family::PowerDecay { coeffs, .. } => {
                if !self.is_null() {
                    return f64::INFINITY;
                }
                let mut buf = vec![0.0; coeffs.len()];
                self.term_into(n, start, &mut buf);
                linalg::norm(&buf)
            }
            Family::Geometric { coeffs, ratio } => {
                let c = coeffs.iter().map(|c| c.value() * c.value()).sum::<f64>().sqrt();
                if c == 0.0 {
                    0.0
                } else if ratio.value().abs() >= 1.0 {
                    f64::INFINITY
                } else {
                    c * geometric_power(ratio.value().abs(), n)
                }
            }
            Family::Alternating(inner) => inner.envelope(n, start),
            Family::Interleaved(parts) => {
                parts.iter().map(|p| p.envelope(n, start)).fold(0.0, f64::max)
            }
            Family::Repeat { inner, times } => inner.envelope(start + (n - start) / times, start),
            Family::Liouville { .. } => {
                let mut buf = [0.0; 2];
                self.term_into(n, start, &mut buf);
                linalg::norm(&buf)
            }
            Family::RandomDirections { scale, .. } => scale.value().abs() / ((n + 2) as f64).ln(),
        }
    }

    /// Per-coordinate bound on `sum_{n >= from} |a_{n,i}|`.
    fn tail(&self, from: u64, start: u64, dim: usize) -> Option<Vec<Real>> {
        match self {
            Family::Explicit { terms, .. } => {
                let off = (from - start) as usize;
                (0..dim)
                    .map(|i| {
                        let mut acc = BigRational::zero();
                        for row in terms.iter().skip(off) {
                            acc += row[i].exact()?.abs();
                        }
                        Some(Real::from_rational(acc))
                    })
                    .collect()
            }
            Family::Geometric { coeffs, ratio } => {
                if ratio.value().abs() >= 1.0 {
                    return coeffs.iter().all(|c| c.value() == 0.0).then(|| vec![Real::int(0); dim]);
                }
                match ratio.exact() {
                    Some(r) => {
                        let r = r.abs();
                        let p = num_traits::pow(r.clone(), usize::try_from(from).ok()?);
                        let denom = BigRational::one() - r;
                        coeffs
                            .iter()
                            .map(|c| Some(Real::from_rational(c.exact()?.abs() * &p / &denom)))
                            .collect()
                    }
                    None => {
                        let r = ratio.value().abs();
                        let p = geometric_power(r, from) / (1.0 - r);
                        Some(coeffs.iter().map(|c| Real::approx(c.value().abs() * p)).collect())
                    }
                }
            }
            Family::PowerDecay { coeffs, exponents } => coeffs
                .iter()
                .zip(exponents)
                .map(|(c, a)| {
                    let c = c.value().abs();
                    if c == 0.0 {
                        return Some(Real::int(0));
                    }
                    let a = a.value();
                    if a <= 1.0 {
                        return None;
                    }
                    let t = from.max(1) as f64;
                    // f(t) + integral_t^inf f
                    Some(Real::approx(c * (t.powf(-a) + t.powf(1.0 - a) / (a - 1.0))))
                })
                .collect(),
            Family::Alternating(inner) => inner.tail(from, start, dim),
            Family::Interleaved(parts) => {
                let mut acc: Vec<Real> = vec![Real::int(0); dim];
                for p in parts {
                    let t = p.tail(from, start, dim)?;
                    for (a, b) in acc.iter_mut().zip(t) {
                        *a = a.add(&b);
                    }
                }
                Some(acc)
            }
            Family::Repeat { inner, times } => {
                let t = inner.tail(start + (from - start) / times, start, dim)?;
                let m = Real::int(i64::try_from(*times).ok()?);
                Some(t.iter().map(|x| x.mul(&m)).collect())
            }
            Family::Liouville { .. } | Family::RandomDirections { .. } => None,
        }
    }
}

impl Real {
    /// A float-only value with no exact counterpart.
    pub fn approx(value: f64) -> Self {
        Real::from_parts(value, None)
    }

    fn add(&self, other: &Real) -> Real {
        match (self.exact(), other.exact()) {
            (Some(a), Some(b)) => Real::from_rational(a + b),
            _ => Real::approx(self.value() + other.value()),
        }
    }

    fn mul(&self, other: &Real) -> Real {
        match (self.exact(), other.exact()) {
            (Some(a), Some(b)) => Real::from_rational(a * b),
            _ => Real::approx(self.value() * other.value()),
        }
    }
}

fn geometric_power(r: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => r.powi(k),
        Err(_) => 0.0,
    }
}

fn unit_draw(seed: u64, n: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(n) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Block number `k >= 1` with `n` in `(n_{k-1}, n_k]`.
pub fn liouville_block(growth: Growth, n: u64) -> u32 {
    let n = u128::from(n);
    let mut upper: u128 = 0;
    let mut k = 0u32;
    loop {
        k += 1;
        let g = growth.exponent(k);
        let len = if g >= 126 { u128::MAX } else { 1u128 << (g + 1) };
        upper = upper.saturating_add(len);
        if n <= upper {
            return k;
        }
    }
}

/// Last index `n_k` of Liouville block `k`, saturating.
pub fn liouville_block_end(growth: Growth, k: u32) -> u128 {
    (1..=k).fold(0u128, |acc, j| {
        let g = growth.exponent(j);
        let len = if g >= 126 { u128::MAX } else { 1u128 << (g + 1) };
        acc.saturating_add(len)
    })
}

/// A null sequence together with its index origin and any declared
/// Levy directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    family: Family,
    start_index: u64,
    dim: usize,
    levy_directions: Vec<Vec<f64>>,
}

impl SequenceSpec {
    pub fn new(family: Family, start_index: u64) -> Result<Self> {
        let dim = family.dim()?;
        if start_index > 1 {
            return Err(Error::precondition("start_index must be 0 or 1"));
        }
        if start_index == 0 && family.needs_positive_index() {
            return Err(Error::precondition(format!(
                "family `{}` is undefined at n = 0; use start_index = 1",
                family.name()
            )));
        }
        if let Family::Repeat { times: 0, .. } = family {
            return Err(Error::precondition("repeat count must be positive"));
        }
        Ok(SequenceSpec { family, start_index, dim, levy_directions: Vec::new() })
    }

    /// Attaches declared Levy directions; each is normalised to unit length.
    pub fn with_levy_directions(mut self, dirs: Vec<Vec<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(dirs.len());
        for u in dirs {
            if u.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: u.len() });
            }
            let len = linalg::norm(&u);
            if len == 0.0 || !len.is_finite() {
                return Err(Error::precondition("Levy direction must be a nonzero vector"));
            }
            out.push(u.iter().map(|v| v / len).collect());
        }
        self.levy_directions = out;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start_index(&self) -> u64 {
        self.start_index
    }

    pub fn levy_directions(&self) -> &[Vec<f64>] {
        &self.levy_directions
    }

    pub fn is_null(&self) -> bool {
        self.family.is_null()
    }

    pub fn require_null(&self) -> Result<()> {
        if self.is_null() {
            Ok(())
        } else {
            Err(Error::precondition(format!(
                "`{}` spec is not a null sequence as parameterised",
                self.family.name()
            )))
        }
    }

    pub fn summability(&self) -> Summability {
        self.family.summability()
    }

    fn check_index(&self, n: u64) -> Result<()> {
        if n < self.start_index {
            Err(Error::IndexBelowStart { index: n, start: self.start_index })
        } else {
            Ok(())
        }
    }

    /// The term `a_n`.
    pub fn term(&self, n: u64) -> Result<Vec<f64>> {
        self.check_index(n)?;
        let mut out = vec![0.0; self.dim];
        self.family.term_into(n, self.start_index, &mut out);
        Ok(out)
    }

    /// Writes `a_n` into `out` (length `dim`). `n` must be `>= start_index`.
    pub fn term_into(&self, n: u64, out: &mut [f64]) {
        debug_assert!(n >= self.start_index && out.len() == self.dim);
        self.family.term_into(n, self.start_index, out);
    }

    /// The term as exact rationals, when every parameter involved is
    /// rational and the family is algebraic at `n`.
    pub fn term_exact(&self, n: u64) -> Result<Option<Vec<BigRational>>> {
        self.check_index(n)?;
        Ok(self.family.term_exact(n, self.start_index, self.dim))
    }

    /// Terms `start_index + offset .. start_index + offset + count`.
    pub fn terms(&self, offset: u64, count: usize) -> Vec<Vec<f64>> {
        (0..count as u64).map(|i| self.term(self.start_index + offset + i).unwrap()).collect()
    }

    /// Exact terms for a window, or `None` if any is not rational.
    pub fn terms_exact(&self, offset: u64, count: usize) -> Option<Vec<Vec<BigRational>>> {
        (0..count as u64)
            .map(|i| self.term_exact(self.start_index + offset + i).unwrap())
            .collect()
    }

    /// Monotone non-increasing bound on `sup_{m >= n} ||a_m||`.
    pub fn envelope(&self, n: u64) -> f64 {
        self.family.envelope(n.max(self.start_index), self.start_index)
    }

    /// Smallest `n >= from` with `envelope(n) <= level`, searching up to
    /// `limit` (exclusive).
    pub fn first_below(&self, level: f64, from: u64, limit: u64) -> Option<u64> {
        if from >= limit {
            return None;
        }
        if self.envelope(from) <= level {
            return Some(from);
        }
        if self.envelope(limit - 1) > level {
            return None;
        }
        let (mut lo, mut hi) = (from, limit - 1);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.envelope(mid) <= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Per-coordinate bound on `sum_{n >= from} |a_{n,i}|`, exact where the
    /// family admits a closed form.
    pub fn tail_bound(&self, from: u64) -> Option<Vec<Real>> {
        if !self.is_null() || self.summability() == Summability::Divergent {
            return None;
        }
        self.family.tail(from.max(self.start_index), self.start_index, self.dim)
    }
}
