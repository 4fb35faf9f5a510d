//! Sign words, sign streams and the ultrametric on sign space.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A single choice from `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    // declaration order gives `Plus < Minus`, the tie-break order used
    // throughout
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn from_bool(plus: bool) -> Sign {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// A finite word over `{-1, +1}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignWord(Vec<Sign>);

impl SignWord {
    pub fn new() -> Self {
        SignWord(Vec::new())
    }

    pub fn from_signs(signs: Vec<Sign>) -> Self {
        SignWord(signs)
    }

    pub fn all_plus(len: usize) -> Self {
        SignWord(vec![Sign::Plus; len])
    }

    /// Word of length `len` whose `i`-th entry is `-1` iff bit
    /// `len - 1 - i` of `bits` is set, so counting upwards enumerates
    /// words lexicographically with `+ < -`.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        SignWord((0..len).map(|i| Sign::from_bool(bits >> (len - 1 - i) & 1 == 0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<Sign> {
        self.0.get(i).copied()
    }

    pub fn push(&mut self, s: Sign) {
        self.0.push(s);
    }

    pub fn set(&mut self, i: usize, s: Sign) {
        self.0[i] = s;
    }

    pub fn concat(&self, other: &SignWord) -> SignWord {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        SignWord(v)
    }

    pub fn extend(&mut self, other: &SignWord) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn prefix(&self, n: usize) -> SignWord {
        SignWord(self.0[..n].to_vec())
    }

    pub fn slice(&self, r: Range<usize>) -> SignWord {
        SignWord(self.0[r].to_vec())
    }

    pub fn negated(&self) -> SignWord {
        SignWord(self.0.iter().map(|s| s.flip()).collect())
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|s| s.value())
    }
}

impl fmt::Display for SignWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{}", s.symbol()))
    }
}

impl FromStr for SignWord {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '+' => Ok(Sign::Plus),
                '-' => Ok(Sign::Minus),
                other => Err(format!("invalid sign `{other}`")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SignWord)
    }
}

impl Serialize for SignWord {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignWord {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a stretch of a sign stream was chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Positions in the word, 0-based, half-open.
    pub start: usize,
    pub end: usize,
    pub origin: String,
}

/// An infinite sign sequence: a finite prefix followed by a periodic tail,
/// plus a record of how each stretch of the prefix was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignStream {
    prefix: SignWord,
    period: SignWord,
    provenance: Vec<Segment>,
}

impl SignStream {
    /// `period` must be nonempty.
    pub fn new(prefix: SignWord, period: SignWord) -> Self {
        assert!(!period.is_empty(), "sign stream period must be nonempty");
        SignStream { prefix, period, provenance: Vec::new() }
    }

    /// The word followed by `+1` forever.
    pub fn eventually_plus(prefix: SignWord) -> Self {
        SignStream::new(prefix, SignWord::all_plus(1))
    }

    pub fn prefix(&self) -> &SignWord {
        &self.prefix
    }

    pub fn provenance(&self) -> &[Segment] {
        &self.provenance
    }

    /// Appends a block to the prefix, tagging its origin.
    pub fn append_block(&mut self, block: &SignWord, origin: impl Into<String>) {
        let start = self.prefix.len();
        self.prefix.extend(block);
        self.provenance.push(Segment { start, end: self.prefix.len(), origin: origin.into() });
    }

    /// Sign at 0-based position `i`.
    pub fn at(&self, i: usize) -> Sign {
        match self.prefix.get(i) {
            Some(s) => s,
            None => self.period.0[(i - self.prefix.len()) % self.period.len()],
        }
    }

    pub fn take(&self, n: usize) -> SignWord {
        SignWord((0..n).map(|i| self.at(i)).collect())
    }
}

/// Result of comparing two sign sequences under the ultrametric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Distance {
    /// The exact distance.
    Value(f64),
    /// The inputs agree as far as they go; the true distance is at most this.
    Bound(f64),
}

impl Distance {
    pub fn upper(self) -> f64 {
        match self {
            Distance::Value(v) | Distance::Bound(v) => v,
        }
    }
}

/// `2^{-n}` where `n` (1-based) is the first disagreement of the two
/// words. Equal words of length `len` give `Bound(2^{-(len+1)})`; words of
/// different lengths are compared on their common prefix.
pub fn ultrametric_distance(x: &SignWord, y: &SignWord) -> Distance {
    let len = x.len().min(y.len());
    match (0..len).find(|&i| x.0[i] != y.0[i]) {
        Some(i) => Distance::Value(pow2_neg_f64(i + 1)),
        None => Distance::Bound(pow2_neg_f64(len + 1)),
    }
}

/// The ultrametric between two streams, exact (including 0 for equal
/// streams) because both are eventually periodic.
pub fn stream_distance(x: &SignStream, y: &SignStream) -> f64 {
    let p = x.period.len();
    let q = y.period.len();
    let horizon = x.prefix.len().max(y.prefix.len()) + num_integer::lcm(p, q);
    match (0..horizon).find(|&i| x.at(i) != y.at(i)) {
        Some(i) => pow2_neg_f64(i + 1),
        None => 0.0,
    }
}

pub(crate) fn pow2_neg_f64(n: usize) -> f64 {
    (-(n as f64)).exp2()
}
