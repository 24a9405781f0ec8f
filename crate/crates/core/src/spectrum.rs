//! Exact densities of 3-APs: global, per-difference, per-subspace, plus mean
//! power densities, box counts, and coloring counts.
//!
//! A 3-AP is the ordered triple (x, x+d, x+2d); it is trivial when d = 0.
//! ρ(d) = E_x[f(x)f(x+d)f(x+2d)] and Λ(f) = E_d[ρ(d)].

use crate::error::{Error, Result};
use crate::group::{AffineSubspace, Space};
use crate::scalar::{Rat, Scalar};
use crate::bitset::BitSet;
use rayon::prelude::*;

/// Fixed work unit so results do not depend on the worker count.
const PAR_CHUNK: usize = 1024;

/// Per-difference 3-AP densities ρ(d), indexed by the rank of d.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<S: Scalar> {
    space: Space,
    rho: Vec<S>,
}

impl<S: Scalar> Spectrum<S> {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn rho(&self, d: u64) -> &S {
        &self.rho[d as usize]
    }

    pub fn values(&self) -> &[S] {
        &self.rho
    }

    /// Λ(f) = E_d[ρ(d)], exactly the mean of the spectrum.
    pub fn lambda(&self) -> S {
        let mut acc = S::zero();
        for v in &self.rho {
            acc = acc + v.clone();
        }
        acc / S::from_usize(self.rho.len())
    }

    /// Minimum of ρ over nonzero d, with the first attaining rank.
    pub fn min_nonzero(&self) -> (u64, S) {
        self.extremum_nonzero(|a, b| a < b)
    }

    /// Maximum of ρ over nonzero d, with the first attaining rank.
    pub fn max_nonzero(&self) -> (u64, S) {
        self.extremum_nonzero(|a, b| a > b)
    }

    fn extremum_nonzero(&self, better: impl Fn(&S, &S) -> bool) -> (u64, S) {
        let mut best_d = 1u64;
        let mut best = self.rho[1].clone();
        for d in 2..self.rho.len() {
            if better(&self.rho[d], &best) {
                best = self.rho[d].clone();
                best_d = d as u64;
            }
        }
        (best_d, best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumAlgo {
    /// Sparse pairs when |S|² < p^n·|S|, dense loop otherwise.
    Auto,
    SparsePairs,
    DenseLoop,
}

pub fn ap3_spectrum<S: Scalar>(f: &crate::weighted::WeightedFunction<S>) -> Spectrum<S> {
    ap3_spectrum_with(f, SpectrumAlgo::Auto)
}

pub fn ap3_spectrum_with<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
    algo: SpectrumAlgo,
) -> Spectrum<S> {
    let space = f.space().clone();
    let n = space.size();
    if S::EXACT {
        if let Some((nums, den)) = f.common_denominator_view() {
            let counts = integer_counts(&space, &nums, algo);
            let scale = (den as u128).pow(3) * n as u128;
            let rho = counts
                .into_iter()
                .map(|c| S::big_ratio(c, scale))
                .collect();
            return Spectrum { space, rho };
        }
    }
    let rho = generic_counts(&space, f.values(), algo);
    Spectrum { space, rho }
}

fn pick_sparse(support_len: u64, n: u64, algo: SpectrumAlgo) -> bool {
    match algo {
        SpectrumAlgo::SparsePairs => true,
        SpectrumAlgo::DenseLoop => false,
        // sparse regime per the support-size threshold |S|² < p^n·|S|
        SpectrumAlgo::Auto => (support_len as u128).pow(2) < n as u128 * support_len as u128,
    }
}

/// Exact kernel: weights are numerators over one common denominator, so the
/// whole spectrum is u128 counting. Sparse and dense paths agree bit-exactly.
fn integer_counts(space: &Space, nums: &[u64], algo: SpectrumAlgo) -> Vec<u128> {
    let n = space.size();
    let ops = RankOps::build(space);
    let support: Vec<u64> = nums
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, _)| i as u64)
        .collect();
    if pick_sparse(support.len() as u64, n, algo) {
        let partials: Vec<Vec<u128>> = support
            .par_chunks(PAR_CHUNK)
            .map(|chunk| {
                let mut acc = vec![0u128; n as usize];
                for &x in chunk {
                    let nx = nums[x as usize] as u128;
                    for &y in &support {
                        let d = ops.sub(y, x);
                        let z = ops.add(y, d);
                        let nz = nums[z as usize];
                        if nz != 0 {
                            acc[d as usize] += nx * (nums[y as usize] * nz) as u128;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0u128; n as usize];
        for part in partials {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    } else {
        (0..n)
            .into_par_iter()
            .map(|d| {
                let mut acc = 0u128;
                for &x in &support {
                    let y = ops.add(x, d);
                    let ny = nums[y as usize];
                    if ny != 0 {
                        let z = ops.add(y, d);
                        acc += nums[x as usize] as u128 * (ny * nums[z as usize]) as u128;
                    }
                }
                acc
            })
            .collect()
    }
}

/// Fallback kernel in scalar arithmetic; identical iteration structure.
fn generic_counts<S: Scalar>(space: &Space, values: &[S], algo: SpectrumAlgo) -> Vec<S> {
    let n = space.size();
    let ops = RankOps::build(space);
    let support: Vec<u64> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, _)| i as u64)
        .collect();
    let scale = S::from_usize(n as usize);
    if pick_sparse(support.len() as u64, n, algo) {
        let partials: Vec<Vec<S>> = support
            .par_chunks(PAR_CHUNK)
            .map(|chunk| {
                let mut acc = vec![S::zero(); n as usize];
                for &x in chunk {
                    for &y in &support {
                        let d = ops.sub(y, x);
                        let z = ops.add(y, d);
                        let vz = &values[z as usize];
                        if !vz.is_zero() {
                            acc[d as usize] = acc[d as usize].clone()
                                + values[x as usize].clone()
                                    * values[y as usize].clone()
                                    * vz.clone();
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![S::zero(); n as usize];
        // merge in fixed chunk order so float results are worker-count invariant
        for part in partials {
            for (o, v) in out.iter_mut().zip(part) {
                *o = o.clone() + v;
            }
        }
        out.into_iter().map(|v| v / scale.clone()).collect()
    } else {
        (0..n)
            .into_par_iter()
            .map(|d| {
                let mut acc = S::zero();
                for &x in &support {
                    let y = ops.add(x, d);
                    let vy = &values[y as usize];
                    if !vy.is_zero() {
                        let z = ops.add(y, d);
                        acc = acc
                            + values[x as usize].clone() * vy.clone() * values[z as usize].clone();
                    }
                }
                acc / scale.clone()
            })
            .collect()
    }
}

/// Rank addition accelerated by low/high split tables when the space is
/// small enough; digitwise fallback otherwise.
pub(crate) struct RankOps {
    space: Space,
    tables: Option<SplitTables>,
}

struct SplitTables {
    pl: u64,
    ph: u64,
    lo: Vec<u32>,
    hi: Vec<u32>,
    neg: Vec<u32>,
}

const TABLE_ENTRY_LIMIT: u64 = 1 << 23;

impl RankOps {
    pub fn build(space: &Space) -> RankOps {
        let n = space.dim();
        let half = (n + 1) / 2;
        let pl = space.pow(half);
        let ph = space.pow(n - half);
        let tables = if pl * pl + ph * ph <= TABLE_ENTRY_LIMIT && space.size() <= u32::MAX as u64 {
            let lo_space = Space::with_cap(space.modulus(), half, u64::MAX >> 1).unwrap();
            let hi_space = Space::with_cap(space.modulus(), n - half, u64::MAX >> 1).unwrap();
            let lo = (0..pl * pl)
                .map(|i| lo_space.add(i / pl, i % pl) as u32)
                .collect();
            let hi = (0..ph * ph)
                .map(|i| (hi_space.add(i / ph, i % ph) * pl) as u32)
                .collect();
            let neg = (0..space.size()).map(|x| space.neg(x) as u32).collect();
            Some(SplitTables {
                pl,
                ph,
                lo,
                hi,
                neg,
            })
        } else {
            None
        };
        RankOps {
            space: space.clone(),
            tables,
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        match &self.tables {
            Some(t) => {
                let (al, ah) = (a % t.pl, a / t.pl);
                let (bl, bh) = (b % t.pl, b / t.pl);
                t.lo[(al * t.pl + bl) as usize] as u64 + t.hi[(ah * t.ph + bh) as usize] as u64
            }
            None => self.space.add(a, b),
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        match &self.tables {
            Some(t) => self.add(a, t.neg[b as usize] as u64),
            None => self.space.sub(a, b),
        }
    }
}

/// Λ(f) = E_d[ρ(d)]; equals the mean of the full spectrum by definition.
pub fn lambda_total<S: Scalar>(f: &crate::weighted::WeightedFunction<S>) -> S {
    ap3_spectrum(f).lambda()
}

/// Λ(H) and λ(H): 3-AP density of f inside the affine subspace H, over all
/// triples and over distinct-element triples respectively.
///
/// The two are tied by the exact identity
/// λ(H)·|H|(|H|−1) = Λ(H)·|H|² − |H|·E_{x∈H}[f³].
pub fn lambda_affine<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
    h: &AffineSubspace,
) -> Result<(S, S)> {
    let size = h.len();
    if size < 2 {
        return Err(Error::DegenerateSubspace);
    }
    let members = h.points();
    let (big, small) = lambda_sums(f, &members);
    let m = S::ratio(size, 1);
    Ok((
        big / (m.clone() * m.clone()),
        small / (m.clone() * (m - S::one())),
    ))
}

/// Raw sums Σ_{x,y∈H} f(x)f(y)f(2y−x) and the same restricted to x ≠ y.
fn lambda_sums<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
    members: &[u64],
) -> (S, S) {
    let space = f.space();
    let mut big = S::zero();
    let mut diag = S::zero();
    for &x in members {
        let fx = f.value(x);
        if !fx.is_zero() {
            diag = diag + fx.clone() * fx.clone() * fx.clone();
        }
        for &y in members {
            let fy = f.value(y);
            if fx.is_zero() || fy.is_zero() {
                continue;
            }
            let z = space.ap_third(x, y);
            let fz = f.value(z);
            if !fz.is_zero() {
                big = big + fx.clone() * fy.clone() * fz.clone();
            }
        }
    }
    let small = big.clone() - diag;
    (big, small)
}

/// Per-coset densities for the translates of a linear subspace.
#[derive(Debug, Clone)]
pub struct CosetStats<S: Scalar> {
    /// Minimal rank in the coset; the canonical key.
    pub rep: u64,
    pub alpha: S,
    pub big_lambda: S,
    pub small_lambda: Option<S>,
}

#[derive(Debug, Clone)]
pub struct SubspaceProfile<S: Scalar> {
    pub subspace: AffineSubspace,
    pub cosets: Vec<CosetStats<S>>,
    /// Global density α; equals E over cosets of α(H+g) exactly.
    pub alpha: S,
    /// Mean cube density b(H) = E_g[α(H+g)³].
    pub b: S,
}

impl<S: Scalar> SubspaceProfile<S> {
    /// E_j[λ(H_j)]: the density of 3-APs with nonzero common difference in H.
    pub fn mean_small_lambda(&self) -> Option<S> {
        let mut acc = S::zero();
        for c in &self.cosets {
            acc = acc + c.small_lambda.clone()?;
        }
        Some(acc / S::from_usize(self.cosets.len()))
    }

    pub fn mean_big_lambda(&self) -> S {
        let mut acc = S::zero();
        for c in &self.cosets {
            acc = acc + c.big_lambda.clone();
        }
        acc / S::from_usize(self.cosets.len())
    }
}

/// Assigns every point its coset index under the subspace's annihilator.
/// Returns (index per point, members per coset ordered by minimal rank).
pub(crate) fn coset_partition(h: &AffineSubspace) -> (Vec<u32>, Vec<Vec<u64>>) {
    let space = &h.space;
    let ann = h.annihilator();
    let codim = ann.nrows();
    let p = space.p() as u64;
    let ann_ranks: Vec<u64> = (0..codim)
        .map(|i| space.rank_of_digits(&ann.rows[i]).unwrap())
        .collect();
    let n_cosets = space.pow(codim);
    let mut key_to_index = vec![u32::MAX; n_cosets as usize];
    let mut index_of = vec![0u32; space.size() as usize];
    let mut members: Vec<Vec<u64>> = Vec::with_capacity(n_cosets as usize);
    for x in space.points() {
        let mut key = 0u64;
        for (i, &u) in ann_ranks.iter().enumerate() {
            key += space.dot(u, x) as u64 * p.pow(i as u32);
        }
        let idx = if key_to_index[key as usize] == u32::MAX {
            // first point of the coset in rank order: the minimal member
            let idx = members.len() as u32;
            key_to_index[key as usize] = idx;
            members.push(Vec::with_capacity(h.len() as usize));
            idx
        } else {
            key_to_index[key as usize]
        };
        index_of[x as usize] = idx;
        members[idx as usize].push(x);
    }
    (index_of, members)
}

/// Densities of f across all translates of the linear subspace H.
pub fn subspace_profile<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
    h: &AffineSubspace,
) -> SubspaceProfile<S> {
    assert_eq!(h.offset, 0, "subspace_profile expects a linear subspace");
    let (_, members) = coset_partition(h);
    let size = h.len();
    let m = S::ratio(size, 1);
    let cosets: Vec<CosetStats<S>> = members
        .par_iter()
        .map(|pts| {
            let mut sum = S::zero();
            for &x in pts.iter() {
                sum = sum + f.value(x).clone();
            }
            let alpha = sum / m.clone();
            let (big_sum, small_sum) = lambda_sums(f, pts);
            let big_lambda = big_sum / (m.clone() * m.clone());
            let small_lambda = if size >= 2 {
                Some(small_sum / (m.clone() * (m.clone() - S::one())))
            } else {
                None
            };
            CosetStats {
                rep: pts[0],
                alpha,
                big_lambda,
                small_lambda,
            }
        })
        .collect();
    let k = S::from_usize(cosets.len());
    let mut alpha = S::zero();
    let mut b = S::zero();
    for c in &cosets {
        alpha = alpha + c.alpha.clone();
        b = b + c.alpha.clone() * c.alpha.clone() * c.alpha.clone();
    }
    SubspaceProfile {
        subspace: h.clone(),
        cosets,
        alpha: alpha / k.clone(),
        b: b / k,
    }
}

/// Mean cube density b(H) alone.
pub fn mean_cube_density<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
    h: &AffineSubspace,
) -> S {
    mean_power_density(f, h, 3)
}

/// b_k(H) = E_g[α(H+g)^k].
pub fn mean_power_density<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
    h: &AffineSubspace,
    k: u32,
) -> S {
    assert!(k >= 1);
    assert_eq!(h.offset, 0, "mean_power_density expects a linear subspace");
    let (index_of, members) = coset_partition(h);
    let m = S::ratio(h.len(), 1);
    let mut sums = vec![S::zero(); members.len()];
    for x in f.space().points() {
        let v = f.value(x);
        if !v.is_zero() {
            let i = index_of[x as usize] as usize;
            sums[i] = sums[i].clone() + v.clone();
        }
    }
    let mut acc = S::zero();
    for s in sums.iter() {
        let alpha = s.clone() / m.clone();
        let mut pw = S::one();
        for _ in 0..k {
            pw = pw * alpha.clone();
        }
        acc = acc + pw;
    }
    acc / S::from_usize(members.len())
}

/// A 3-box of dimension r: {a0 + Σ i_j·d_j : i_j ∈ {0,1,2}}.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDensity {
    /// True iff all 3^r offset sums Σ i_j·d_j are distinct.
    pub proper: bool,
    /// Number of a0 whose whole box lies in the set.
    pub count: u64,
    pub density: Rat,
}

pub fn box_density(space: &Space, set: &[u64], diffs: &[u64]) -> Result<BoxDensity> {
    assert!(!diffs.is_empty());
    for &d in diffs {
        space.check_rank(d)?;
    }
    let r = diffs.len();
    let mut offsets = Vec::with_capacity(3usize.pow(r as u32));
    let mut idx = vec![0u8; r];
    loop {
        let mut s = 0u64;
        for (j, &i) in idx.iter().enumerate() {
            s = space.add(s, space.scale(i as u32, diffs[j]));
        }
        offsets.push(s);
        let mut j = 0;
        loop {
            if j == r {
                let mut sorted = offsets.clone();
                sorted.sort_unstable();
                sorted.dedup();
                let proper = sorted.len() == offsets.len();
                let in_set = BitSet::from_members(space.size(), set);
                let count = space
                    .points()
                    .filter(|&a0| offsets.iter().all(|&o| in_set.contains(space.add(a0, o))))
                    .count() as u64;
                return Ok(BoxDensity {
                    proper,
                    count,
                    density: Rat::ratio(count, space.size()),
                });
            }
            idx[j] += 1;
            if idx[j] < 3 {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// An r-coloring of the group.
#[derive(Debug, Clone)]
pub struct Coloring {
    space: Space,
    colors: Vec<u32>,
    r: u32,
}

impl Coloring {
    pub fn new(space: Space, colors: Vec<u32>, r: u32) -> Result<Self> {
        if colors.len() as u64 != space.size() {
            return Err(Error::DimensionMismatch {
                got: colors.len(),
                expected: space.size() as usize,
            });
        }
        assert!(r >= 1);
        for &c in &colors {
            assert!(c < r, "color {c} out of range for r = {r}");
        }
        Ok(Coloring { space, colors, r })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn color(&self, x: u64) -> u32 {
        self.colors[x as usize]
    }

    pub fn class_size(&self, c: u32) -> u64 {
        self.colors.iter().filter(|&&x| x == c).count() as u64
    }
}

#[derive(Debug, Clone)]
pub struct MonoApReport {
    /// Ordered pairs (x, d), d ≠ 0, with x, x+d, x+2d monochromatic.
    pub ordered_total: u64,
    /// Progressions counted up to reversing the difference (ordered / 2);
    /// the convention under which the two-coloring closed form holds.
    pub unordered_total: u64,
    pub per_color_ordered: Vec<u64>,
    /// Monochromatic ordered count per difference rank.
    pub per_diff_ordered: Vec<u64>,
}

/// Counts monochromatic nontrivial 3-APs of a coloring.
pub fn mono_ap_count(c: &Coloring) -> MonoApReport {
    let space = &c.space;
    let n = space.size();
    let ops = RankOps::build(space);
    let mut per_color = vec![0u64; c.r as usize];
    let per_diff: Vec<u64> = (1..n)
        .into_par_iter()
        .map(|d| {
            let mut cnt = 0u64;
            for x in 0..n {
                let col = c.colors[x as usize];
                let y = ops.add(x, d);
                if c.colors[y as usize] == col {
                    let z = ops.add(y, d);
                    if c.colors[z as usize] == col {
                        cnt += 1;
                    }
                }
            }
            cnt
        })
        .collect();
    // per-color pass, sequential (cheap relative to the d-scan)
    for d in 1..n {
        for x in 0..n {
            let col = c.colors[x as usize];
            let y = ops.add(x, d);
            if c.colors[y as usize] == col {
                let z = ops.add(y, d);
                if c.colors[z as usize] == col {
                    per_color[col as usize] += 1;
                }
            }
        }
    }
    let ordered_total: u64 = per_diff.iter().sum();
    debug_assert_eq!(ordered_total % 2, 0);
    let mut per_diff_full = vec![0u64; n as usize];
    per_diff_full[1..].copy_from_slice(&per_diff);
    MonoApReport {
        ordered_total,
        unordered_total: ordered_total / 2,
        per_color_ordered: per_color,
        per_diff_ordered: per_diff_full,
    }
}

/// The closed-form monochromatic progression count for a two-coloring of an
/// odd-order group: M = N²/2 − (3/2)|R|(N−|R|) − N/2.
pub fn two_coloring_closed_form(n_order: u64, size_r: u64) -> Result<u64> {
    if n_order % 2 == 0 {
        return Err(Error::EvenOrder(n_order));
    }
    assert!(size_r <= n_order);
    let n = n_order as i128;
    let r = size_r as i128;
    let m2 = n * (n - 1) - 3 * r * (n - r);
    debug_assert!(m2 >= 0 && m2 % 2 == 0);
    Ok((m2 / 2) as u64)
}

/// Lower bounds on per-difference and total 3-AP density for dense sets:
/// min_{d≠0} ρ(d) ≥ 1−3γ and Λ(f) ≥ 1−3γ+2γ², γ = 1−α.
#[derive(Debug, Clone)]
pub struct DenseRegimeReport<S: Scalar> {
    pub alpha: S,
    pub gamma: S,
    pub min_rho_nonzero: S,
    pub argmin_d: u64,
    pub lambda: S,
    pub min_bound: S,
    pub lambda_bound: S,
    pub min_slack: S,
    pub lambda_slack: S,
    pub ok: bool,
}

pub fn dense_regime_check<S: Scalar>(
    f: &crate::weighted::WeightedFunction<S>,
) -> DenseRegimeReport<S> {
    let spec = ap3_spectrum(f);
    let alpha = f.density();
    let gamma = S::one() - alpha.clone();
    let (argmin_d, min_rho) = spec.min_nonzero();
    let lambda = spec.lambda();
    let three = S::from_usize(3);
    let two = S::from_usize(2);
    let min_bound = S::one() - three.clone() * gamma.clone();
    let lambda_bound =
        S::one() - three * gamma.clone() + two * gamma.clone() * gamma.clone();
    let min_slack = min_rho.clone() - min_bound.clone();
    let lambda_slack = lambda.clone() - lambda_bound.clone();
    let ok = if S::EXACT {
        min_slack >= S::zero() && lambda_slack >= S::zero()
    } else {
        min_slack.to_f64() >= -1e-12 && lambda_slack.to_f64() >= -1e-12
    };
    DenseRegimeReport {
        alpha,
        gamma,
        min_rho_nonzero: min_rho,
        argmin_d,
        lambda,
        min_bound,
        lambda_bound,
        min_slack,
        lambda_slack,
        ok,
    }
}
