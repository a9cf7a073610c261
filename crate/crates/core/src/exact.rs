//! Exact big-integer arithmetic: binomials and dyadic rationals.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `C(n, k)` as a big integer.
pub fn big_binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Natural logarithm of a positive big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// A nonnegative rational `numerator / 2^exponent` in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DyadicRepr", into = "DyadicRepr")]
pub struct DyadicRational {
    numerator: BigUint,
    exponent: u64,
}

impl DyadicRational {
    pub fn new(numerator: impl Into<BigUint>, exponent: u64) -> Self {
        let mut numerator = numerator.into();
        let mut exponent = exponent;
        if numerator.is_zero() {
            return Self {
                numerator,
                exponent: 0,
            };
        }
        let twos = numerator.trailing_zeros().unwrap_or(0).min(exponent);
        numerator >>= twos;
        exponent -= twos;
        Self {
            numerator,
            exponent,
        }
    }

    pub fn zero() -> Self {
        Self::new(0u32, 0)
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn denominator(&self) -> BigUint {
        BigUint::one() << self.exponent
    }

    pub fn to_f64(&self) -> f64 {
        if self.numerator.is_zero() {
            return 0.0;
        }
        let bits = self.numerator.bits();
        let shift = bits.saturating_sub(64);
        let top = (&self.numerator >> shift).to_u64().unwrap_or(u64::MAX) as f64;
        let e = shift as i64 - self.exponent as i64;
        // split the power so that neither factor under- or overflows early
        let half = e / 2;
        top * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
    }

    pub fn ln(&self) -> f64 {
        ln_big(&self.numerator) - self.exponent as f64 * std::f64::consts::LN_2
    }

    /// Exact product.
    pub fn mul(&self, other: &Self) -> Self {
        Self::new(
            &self.numerator * &other.numerator,
            self.exponent + other.exponent,
        )
    }

    /// Exact sum.
    pub fn add(&self, other: &Self) -> Self {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        Self::new(a + b, e)
    }

    /// `numerator : denominator` in lowest terms of an ordinary fraction,
    /// failing unless the denominator is a power of two.
    pub fn from_fraction(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(invalid("zero denominator"));
        }
        let g = num.gcd(&den);
        let (num, den) = (num / g.max(1), den / g.max(1));
        if !den.is_power_of_two() {
            return Err(invalid(format!("{num}/{den} is not dyadic")));
        }
        Ok(Self::new(num, den.trailing_zeros() as u64))
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator())
    }
}

#[derive(Serialize, Deserialize)]
struct DyadicRepr {
    numerator: String,
    exponent: u64,
}

impl From<DyadicRational> for DyadicRepr {
    fn from(r: DyadicRational) -> Self {
        Self {
            numerator: r.numerator.to_str_radix(10),
            exponent: r.exponent,
        }
    }
}

impl TryFrom<DyadicRepr> for DyadicRational {
    type Error = crate::Error;

    fn try_from(r: DyadicRepr) -> Result<Self> {
        let n = BigUint::parse_bytes(r.numerator.as_bytes(), 10)
            .ok_or_else(|| invalid(format!("bad numerator '{}'", r.numerator)))?;
        Ok(Self::new(n, r.exponent))
    }
}
