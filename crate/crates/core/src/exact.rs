//! Exact rational scalars and the scaled-integer fast path used by the
//! enumeration routines.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// A real parameter carrying both its `f64` value and, when the textual
/// form was rational, the exact value.
#[derive(Debug, Clone, PartialEq)]
pub struct Real {
    value: f64,
    exact: Option<BigRational>,
}

impl Real {
    pub fn from_f64(value: f64) -> Self {
        Real { value, exact: BigRational::from_float(value) }
    }

    pub(crate) fn from_parts(value: f64, exact: Option<BigRational>) -> Self {
        Real { value, exact }
    }

    pub fn from_rational(r: BigRational) -> Self {
        Real { value: rational_to_f64(&r), exact: Some(r) }
    }

    pub fn int(v: i64) -> Self {
        Real::from_rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Real::from_rational(BigRational::new(num.into(), den.into()))
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    /// The value as a non-negative integer, if it is one.
    pub fn as_u32(&self) -> Option<u32> {
        let r = self.exact.as_ref()?;
        if r.is_integer() && !r.is_negative() {
            r.to_integer().to_u32()
        } else {
            None
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "{}", self.value),
        }
    }
}

impl FromStr for Real {
    type Err = String;

    /// Accepts `p/q`, plain decimals such as `-0.125` or `1e-3`, and `pi`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty number".into());
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let q: BigInt = q.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if q.is_zero() {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(Real::from_rational(BigRational::new(p, q)));
        }
        if s.eq_ignore_ascii_case("pi") {
            return Ok(Real::from_f64(std::f64::consts::PI));
        }
        parse_decimal(s)
            .map(Real::from_rational)
            .ok_or_else(|| format!("not a number: `{s}`"))
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(all);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// Correctly rounded for moderate sizes; tiny values flush to zero.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// `2^{-e}` as an exact rational.
pub fn pow2_neg(e: u64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << e)
}

/// Rational number in a serialisable `"p/q"` form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RationalText(pub String);

impl From<&BigRational> for RationalText {
    fn from(r: &BigRational) -> Self {
        if r.is_integer() {
            RationalText(r.to_integer().to_string())
        } else {
            RationalText(format!("{}/{}", r.numer(), r.denom()))
        }
    }
}

impl RationalText {
    pub fn parse(&self) -> Option<BigRational> {
        self.0.parse::<Real>().ok()?.exact().cloned()
    }
}

/// `#[serde(with = "rational_serde")]` for `BigRational` fields.
pub mod rational_serde {
    use super::RationalText;
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        RationalText::from(r).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let t = RationalText::deserialize(d)?;
        t.parse()
            .ok_or_else(|| serde::de::Error::custom(format!("`{}` is not an exact rational", t.0)))
    }
}

/// Rationals rescaled to a common denominator so that sums of up to
/// `headroom` terms stay inside `i128`.
#[derive(Debug, Clone)]
pub struct ScaledIntegers {
    pub denom: BigInt,
    pub nums: Vec<i128>,
}

impl ScaledIntegers {
    pub fn new(values: &[BigRational], headroom: u32) -> Option<Self> {
        let mut denom = BigInt::one();
        for v in values {
            denom = denom.lcm(v.denom());
        }
        let limit = BigInt::from(i128::MAX) / BigInt::from(headroom.max(1));
        let mut nums = Vec::with_capacity(values.len());
        for v in values {
            let scaled = v.numer() * (&denom / v.denom());
            if scaled.abs() > limit {
                return None;
            }
            nums.push(scaled.to_i128()?);
        }
        Some(ScaledIntegers { denom, nums })
    }

    pub fn to_rational(&self, num: i128) -> BigRational {
        BigRational::new(BigInt::from(num), self.denom.clone())
    }

    pub fn to_f64(&self, num: i128) -> f64 {
        rational_to_f64(&self.to_rational(num))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal_exactly() {
        let a: Real = "1/3".parse().unwrap();
        assert_eq!(a.exact().unwrap(), &BigRational::new(1.into(), 3.into()));
        let b: Real = "-0.125".parse().unwrap();
        assert_eq!(b.exact().unwrap(), &BigRational::new((-1).into(), 8.into()));
        let c: Real = "2.5e-2".parse().unwrap();
        assert_eq!(c.exact().unwrap(), &BigRational::new(1.into(), 40.into()));
        assert_eq!("3".parse::<Real>().unwrap().as_u32(), Some(3));
    }

    #[test]
    fn rejects_garbage() {
        assert!("".parse::<Real>().is_err());
        assert!("1/0".parse::<Real>().is_err());
        assert!("abc".parse::<Real>().is_err());
        assert!(".".parse::<Real>().is_err());
    }

    #[test]
    fn scaled_integers_share_denominator() {
        let vals = [Real::ratio(1, 2), Real::ratio(1, 3), Real::ratio(-1, 6)];
        let exact: Vec<_> = vals.iter().map(|v| v.exact().unwrap().clone()).collect();
        let s = ScaledIntegers::new(&exact, 4).unwrap();
        assert_eq!(s.denom, BigInt::from(6));
        assert_eq!(s.nums, vec![3, 2, -1]);
        assert_eq!(s.to_rational(4), BigRational::new(2.into(), 3.into()));
    }
}
