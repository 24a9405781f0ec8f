//! Scalar abstraction: every density computation runs either in exact
//! rational arithmetic (`BigRational`) or in `f64`, behind one trait.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest denominator for which the integer spectrum kernel is used.
pub const SMALL_DEN_LIMIT: u64 = 1 << 20;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact and equality tests are meaningful.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn ratio(num: u64, den: u64) -> Self;
    fn from_usize(v: usize) -> Self {
        Self::ratio(v as u64, 1)
    }
    /// num/den with u128 parts, exact in rational mode.
    fn big_ratio(num: u128, den: u128) -> Self;
    /// The value as num/den with den ≤ `SMALL_DEN_LIMIT`, when representable.
    fn as_small_ratio(&self) -> Option<(u64, u64)>;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn big_ratio(num: u128, den: u128) -> Self {
        num as f64 / den as f64
    }
    fn as_small_ratio(&self) -> Option<(u64, u64)> {
        None
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn big_ratio(num: u128, den: u128) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn as_small_ratio(&self) -> Option<(u64, u64)> {
        if self.is_negative() {
            return None;
        }
        let num = self.numer().to_u64()?;
        let den = self.denom().to_u64()?;
        (den <= SMALL_DEN_LIMIT).then_some((num, den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Exact scalar used throughout the construction and identity tests.
pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
