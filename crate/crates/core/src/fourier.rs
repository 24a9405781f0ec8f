//! Group Fourier transform on F_p^n with the convention
//! f̂(t) = (1/p^n)·Σ_x f(x)·ω^{t·x}, ω = exp(2πi/p).
//!
//! Computed by radix-p decimation: one pass of p-point transforms per
//! coordinate, n·p^{n+1} butterfly operations in total.

use crate::group::Space;
use crate::weighted::WeightedFunction;
use crate::scalar::Scalar;
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct FourierTable {
    space: Space,
    coeffs: Vec<Complex64>,
}

impl FourierTable {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn coeff(&self, t: u64) -> Complex64 {
        self.coeffs[t as usize]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Σ_t |f̂(t)|², which Parseval ties to E[f²].
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Number of butterfly operations a transform of this size performs.
    pub fn butterfly_count(&self) -> u64 {
        transform_butterflies(&self.space)
    }
}

pub fn transform_butterflies(space: &Space) -> u64 {
    space.dim() as u64 * space.size() * space.p() as u64
}

pub fn fourier_transform<S: Scalar>(f: &WeightedFunction<S>) -> FourierTable {
    let space = f.space().clone();
    let mut data: Vec<Complex64> = f
        .values()
        .iter()
        .map(|v| Complex64::new(v.to_f64(), 0.0))
        .collect();
    forward_passes(&space, &mut data, 1.0);
    let n = space.size() as f64;
    for c in data.iter_mut() {
        *c /= n;
    }
    FourierTable {
        space,
        coeffs: data,
    }
}

/// f(x) = Σ_t f̂(t)·ω^{−t·x}; reconstructs the original values within
/// floating-point error.
pub fn inverse_transform(table: &FourierTable) -> Vec<Complex64> {
    let mut data = table.coeffs.clone();
    forward_passes(&table.space, &mut data, -1.0);
    data
}

/// In-place decimation passes; `sign` picks ω or its conjugate.
fn forward_passes(space: &Space, data: &mut [Complex64], sign: f64) {
    let p = space.p() as usize;
    let n = space.dim();
    // p-point DFT matrix ω^{jk}
    let omega: Vec<Complex64> = (0..p)
        .map(|k| {
            let theta = sign * 2.0 * std::f64::consts::PI * k as f64 / p as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();
    for axis in 0..n {
        let stride = space.pow(axis) as usize;
        let block = stride * p;
        let size = space.size() as usize;
        // transform every length-p fiber along this axis
        let nblocks = size / block;
        let chunks: Vec<(usize, Vec<Complex64>)> = (0..nblocks)
            .into_par_iter()
            .map(|bi| {
                let base = bi * block;
                let mut out = vec![Complex64::default(); block];
                for off in 0..stride {
                    for j in 0..p {
                        let mut acc = Complex64::default();
                        for k in 0..p {
                            acc += data[base + off + k * stride] * omega[j * k % p];
                        }
                        out[off + j * stride] = acc;
                    }
                }
                (base, out)
            })
            .collect();
        for (base, out) in chunks {
            data[base..base + block].copy_from_slice(&out);
        }
    }
}

/// max_t |f̂(t) − ĝ(t)|: the closeness measure for δ-close functions.
pub fn fourier_distance(a: &FourierTable, b: &FourierTable) -> f64 {
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::PrimeModulus;
    use crate::weighted::{random_float_function, WeightedF64};

    fn space(p: u32, n: usize) -> Space {
        Space::new(PrimeModulus::new(p).unwrap(), n).unwrap()
    }

    #[test]
    fn constant_function_transform() {
        let s = space(3, 3);
        let f = WeightedF64::constant(s, 0.4).unwrap();
        let t = fourier_transform(&f);
        assert!((t.coeff(0).re - 0.4).abs() < 1e-12);
        for i in 1..27 {
            assert!(t.coeff(i).norm() < 1e-12);
        }
    }

    #[test]
    fn hyperplane_indicator_transform() {
        // f = indicator of {x : t0·x = 0}; coefficients on multiples of t0
        // have modulus 1/p, everything else vanishes.
        let s = space(3, 2);
        let t0 = s.rank_of_digits(&[1, 2]).unwrap();
        let values: Vec<f64> = (0..9)
            .map(|x| if s.dot(t0, x) == 0 { 1.0 } else { 0.0 })
            .collect();
        let f = WeightedF64::new(s.clone(), values).unwrap();
        let table = fourier_transform(&f);
        for t in 0..9u64 {
            let on_line = t == 0 || t == t0 || t == s.scale(2, t0);
            let m = table.coeff(t).norm();
            if on_line {
                assert!((m - 1.0 / 3.0).abs() < 1e-12, "t={t}");
            } else {
                assert!(m < 1e-12, "t={t}");
            }
        }
    }

    #[test]
    fn parseval_and_inverse_round_trip() {
        for seed in 0..20 {
            let f = random_float_function(space(3, 4), seed);
            let table = fourier_transform(&f);
            let e2: f64 =
                f.values().iter().map(|v| v * v).sum::<f64>() / f.space().size() as f64;
            assert!((table.energy() - e2).abs() < 1e-9);
            assert!((table.coeff(0).re - f.density()).abs() < 1e-12);
            let back = inverse_transform(&table);
            for (x, v) in f.values().iter().enumerate() {
                assert!((back[x].re - v).abs() < 1e-9);
                assert!(back[x].im.abs() < 1e-9);
            }
        }
    }
}
