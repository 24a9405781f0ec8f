//! Weighted sets f : F_p^n → [0, 1], stored densely by rank.

use crate::error::{Error, Result};
use crate::group::Space;
use crate::scalar::{Rat, Scalar};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFunction<S: Scalar> {
    space: Space,
    values: Vec<S>,
}

impl<S: Scalar> WeightedFunction<S> {
    pub fn new(space: Space, values: Vec<S>) -> Result<Self> {
        if values.len() as u64 != space.size() {
            return Err(Error::DimensionMismatch {
                got: values.len(),
                expected: space.size() as usize,
            });
        }
        for v in &values {
            let x = v.to_f64();
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::ValueOutOfRange(x));
            }
        }
        Ok(WeightedFunction { space, values })
    }

    pub fn constant(space: Space, value: S) -> Result<Self> {
        let n = space.size() as usize;
        Self::new(space, vec![value; n])
    }

    pub fn zero(space: Space) -> Self {
        let n = space.size() as usize;
        WeightedFunction {
            space,
            values: vec![S::zero(); n],
        }
    }

    /// Indicator of a set of ranks.
    pub fn indicator(space: Space, set: &[u64]) -> Result<Self> {
        let mut values = vec![S::zero(); space.size() as usize];
        for &x in set {
            space.check_rank(x)?;
            values[x as usize] = S::one();
        }
        Ok(WeightedFunction { space, values })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, rank: u64) -> &S {
        &self.values[rank as usize]
    }

    /// Mean of all values.
    pub fn density(&self) -> S {
        let mut acc = S::zero();
        for v in &self.values {
            acc = acc + v.clone();
        }
        acc / S::from_usize(self.values.len())
    }

    pub fn support(&self) -> Vec<u64> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, _)| i as u64)
            .collect()
    }

    pub fn support_size(&self) -> u64 {
        self.values.iter().filter(|v| !v.is_zero()).count() as u64
    }

    pub fn to_f64_fn(&self) -> WeightedFunction<f64> {
        WeightedFunction {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v.to_f64()).collect(),
        }
    }

    /// Values as numerators over one common denominator, when every value is
    /// a small nonnegative rational. Powers the exact integer spectrum kernel.
    pub fn common_denominator_view(&self) -> Option<(Vec<u64>, u64)> {
        let mut den = 1u64;
        let mut parts = Vec::with_capacity(self.values.len());
        for v in &self.values {
            let (num, d) = v.as_small_ratio()?;
            parts.push((num, d));
            den = lcm(den, d)?;
        }
        let nums = parts
            .into_iter()
            .map(|(num, d)| num.checked_mul(den / d))
            .collect::<Option<Vec<u64>>>()?;
        if nums.iter().any(|&x| x > crate::scalar::SMALL_DEN_LIMIT) {
            return None;
        }
        Some((nums, den))
    }
}

fn lcm(a: u64, b: u64) -> Option<u64> {
    let g = gcd(a, b);
    let l = a.checked_mul(b / g)?;
    (l <= crate::scalar::SMALL_DEN_LIMIT).then_some(l)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Random function with values k/den, k uniform in 0..=den. Exact in
/// rational mode, deterministic for a seed.
pub fn random_rational_function(space: Space, den: u64, seed: u64) -> WeightedFunction<Rat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..space.size())
        .map(|_| Rat::ratio(rng.gen_range(0..=den), den))
        .collect();
    WeightedFunction::new(space, values).unwrap()
}

/// Random sparse indicator-style function: each point nonzero with the given
/// probability, value k/den when nonzero.
pub fn random_sparse_function(
    space: Space,
    keep_prob: f64,
    den: u64,
    seed: u64,
) -> WeightedFunction<Rat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..space.size())
        .map(|_| {
            if rng.gen::<f64>() < keep_prob {
                Rat::ratio(rng.gen_range(1..=den), den)
            } else {
                Rat::ratio(0, 1)
            }
        })
        .collect();
    WeightedFunction::new(space, values).unwrap()
}

/// Random f64-valued function, uniform in [0, 1].
pub fn random_float_function(space: Space, seed: u64) -> WeightedFunction<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..space.size()).map(|_| rng.gen::<f64>()).collect();
    WeightedFunction::new(space, values).unwrap()
}

pub type WeightedF64 = WeightedFunction<f64>;
pub type WeightedRat = WeightedFunction<BigRational>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::PrimeModulus;
    use crate::scalar::rat;

    fn space(p: u32, n: usize) -> Space {
        Space::new(PrimeModulus::new(p).unwrap(), n).unwrap()
    }

    #[test]
    fn density_basics() {
        let s = space(3, 2);
        assert_eq!(WeightedRat::zero(s.clone()).density(), rat(0, 1));
        assert_eq!(
            WeightedRat::constant(s.clone(), rat(1, 1)).unwrap().density(),
            rat(1, 1)
        );
        let f = WeightedRat::indicator(s, &[0, 1, 5, 8]).unwrap();
        assert_eq!(f.density(), rat(4, 9));
    }

    #[test]
    fn rejects_out_of_range() {
        let s = space(3, 1);
        assert!(WeightedF64::new(s.clone(), vec![0.5, 1.2, 0.0]).is_err());
        assert!(WeightedRat::new(s, vec![rat(1, 2), rat(-1, 2), rat(0, 1)]).is_err());
    }

    #[test]
    fn common_denominator_view_works() {
        let s = space(3, 1);
        let f = WeightedRat::new(s, vec![rat(1, 2), rat(1, 3), rat(0, 1)]).unwrap();
        let (nums, den) = f.common_denominator_view().unwrap();
        assert_eq!(den, 6);
        assert_eq!(nums, vec![3, 2, 0]);
    }
}
