//! Arithmetic and linear algebra over F_p and enumeration of points,
//! subspaces, cosets, and hyperplanes of F_p^n.
//!
//! Points are handled in two forms: as digit vectors (`Vec<u32>`, one residue
//! per coordinate) and as mixed-radix ranks (`u64`). The radix is
//! little-endian: digit 0 is the first coordinate and the least significant
//! position, so rank = Σ digits[i]·p^i. Splitting a rank with `% p^k` /
//! `/ p^k` therefore splits the point into its first k and remaining
//! coordinates, which the level construction relies on.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default cap on p^n for dense-array layouts.
pub const DEFAULT_SPACE_CAP: u64 = 1 << 24;

/// A validated odd prime in [3, 2^16].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeModulus(u32);

impl PrimeModulus {
    pub fn new(p: u32) -> Result<Self> {
        if p < 3 || p > 1 << 16 || p % 2 == 0 || !is_prime(p as u64) {
            return Err(Error::InvalidPrime(p as u64));
        }
        Ok(PrimeModulus(p))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Multiplicative inverse of a nonzero residue.
    pub fn inv(self, a: u32) -> u32 {
        debug_assert!(a % self.0 != 0);
        pow_mod(a as u64, self.0 as u64 - 2, self.0 as u64) as u32
    }
}

/// Deterministic trial division; p ≤ 2^16 keeps this instant.
fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// The ambient group F_p^n with rank/digit codecs and pointwise arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    p: PrimeModulus,
    n: usize,
    /// pows[i] = p^i, with pows[n] = p^n.
    pows: Vec<u64>,
}

impl Space {
    pub fn new(p: PrimeModulus, n: usize) -> Result<Self> {
        Self::with_cap(p, n, DEFAULT_SPACE_CAP)
    }

    pub fn with_cap(p: PrimeModulus, n: usize, cap: u64) -> Result<Self> {
        let mut pows = Vec::with_capacity(n + 1);
        let mut acc: u128 = 1;
        pows.push(1u64);
        for _ in 0..n {
            acc *= p.get() as u128;
            if acc > cap as u128 {
                return Err(Error::CapExceeded { size: acc, cap });
            }
            pows.push(acc as u64);
        }
        Ok(Space { p, n, pows })
    }

    pub fn p(&self) -> u32 {
        self.p.get()
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// p^n, the number of points.
    pub fn size(&self) -> u64 {
        self.pows[self.n]
    }

    pub fn pow(&self, i: usize) -> u64 {
        self.pows[i]
    }

    pub fn rank_of_digits(&self, digits: &[u32]) -> Result<u64> {
        if digits.len() != self.n {
            return Err(Error::DimensionMismatch {
                got: digits.len(),
                expected: self.n,
            });
        }
        let mut rank = 0u64;
        for (i, &d) in digits.iter().enumerate() {
            if d >= self.p() {
                return Err(Error::DigitOutOfRange {
                    digit: d as u64,
                    p: self.p(),
                });
            }
            rank += d as u64 * self.pows[i];
        }
        Ok(rank)
    }

    pub fn digits_of_rank(&self, rank: u64) -> Vec<u32> {
        debug_assert!(rank < self.size());
        let p = self.p() as u64;
        let mut r = rank;
        (0..self.n)
            .map(|_| {
                let d = (r % p) as u32;
                r /= p;
                d
            })
            .collect()
    }

    pub fn check_rank(&self, rank: u64) -> Result<u64> {
        if rank < self.size() {
            Ok(rank)
        } else {
            Err(Error::RankOutOfRange {
                rank,
                size: self.size(),
            })
        }
    }

    /// Digitwise sum of two ranks.
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let p = self.p() as u64;
        let (mut a, mut b) = (a, b);
        let mut out = 0u64;
        for i in 0..self.n {
            let s = (a % p + b % p) % p;
            out += s * self.pows[i];
            a /= p;
            b /= p;
        }
        out
    }

    pub fn neg(&self, a: u64) -> u64 {
        let p = self.p() as u64;
        let mut a = a;
        let mut out = 0u64;
        for i in 0..self.n {
            let d = a % p;
            if d != 0 {
                out += (p - d) * self.pows[i];
            }
            a /= p;
        }
        out
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    pub fn scale(&self, c: u32, a: u64) -> u64 {
        let p = self.p() as u64;
        let c = c as u64 % p;
        let mut a = a;
        let mut out = 0u64;
        for i in 0..self.n {
            out += (a % p * c) % p * self.pows[i];
            a /= p;
        }
        out
    }

    /// The third point 2y − x of the 3-AP (x, y, 2y − x).
    pub fn ap_third(&self, x: u64, y: u64) -> u64 {
        self.sub(self.scale(2, y), x)
    }

    /// Dot product of two ranks, as a residue.
    pub fn dot(&self, a: u64, b: u64) -> u32 {
        let p = self.p() as u64;
        let (mut a, mut b) = (a, b);
        let mut acc = 0u64;
        for _ in 0..self.n {
            acc += a % p * (b % p);
            a /= p;
            b /= p;
        }
        (acc % p) as u32
    }

    pub fn points(&self) -> impl Iterator<Item = u64> {
        0..self.size()
    }
}

/// A matrix over F_p, rows stored as digit vectors of a common ambient width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixGF {
    pub p: PrimeModulus,
    pub ncols: usize,
    pub rows: Vec<Vec<u32>>,
}

impl MatrixGF {
    pub fn new(p: PrimeModulus, ncols: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        for row in &rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    got: row.len(),
                    expected: ncols,
                });
            }
            for &d in row {
                if d >= p.get() {
                    return Err(Error::DigitOutOfRange {
                        digit: d as u64,
                        p: p.get(),
                    });
                }
            }
        }
        Ok(MatrixGF { p, ncols, rows })
    }

    pub fn empty(p: PrimeModulus, ncols: usize) -> Self {
        MatrixGF {
            p,
            ncols,
            rows: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Reduced row echelon form together with its rank. Zero rows are dropped,
    /// so the result is a canonical basis of the row space.
    pub fn row_reduce(&self) -> (usize, MatrixGF) {
        let p = self.p.get() as u64;
        let mut rows: Vec<Vec<u32>> = self.rows.clone();
        let mut pivot_row = 0;
        for col in 0..self.ncols {
            let Some(r) = (pivot_row..rows.len()).find(|&r| rows[r][col] != 0) else {
                continue;
            };
            rows.swap(pivot_row, r);
            let inv = self.p.inv(rows[pivot_row][col]) as u64;
            for x in rows[pivot_row].iter_mut() {
                *x = (*x as u64 * inv % p) as u32;
            }
            for r in 0..rows.len() {
                if r != pivot_row && rows[r][col] != 0 {
                    let c = rows[r][col] as u64;
                    for j in 0..self.ncols {
                        let v = rows[r][j] as u64 + (p - c % p) * rows[pivot_row][j] as u64;
                        rows[r][j] = (v % p) as u32;
                    }
                }
            }
            pivot_row += 1;
            if pivot_row == rows.len() {
                break;
            }
        }
        rows.truncate(pivot_row);
        (
            pivot_row,
            MatrixGF {
                p: self.p,
                ncols: self.ncols,
                rows,
            },
        )
    }

    pub fn rank(&self) -> usize {
        self.row_reduce().0
    }

    /// Extends an independent set of rows to a full basis of F_p^n,
    /// deterministically: standard basis vectors are tried in index order.
    pub fn complete_basis(&self) -> Result<MatrixGF> {
        let (rank, mut ech) = self.row_reduce();
        if rank != self.nrows() {
            return Err(Error::DependentRows);
        }
        let mut out = self.clone();
        for i in 0..self.ncols {
            if out.rows.len() == self.ncols {
                break;
            }
            let mut e = vec![0u32; self.ncols];
            e[i] = 1;
            ech.rows.push(e.clone());
            let (r2, ech2) = ech.row_reduce();
            if r2 > ech.rows.len() - 1 {
                out.rows.push(e);
                ech = ech2;
            } else {
                ech.rows.pop();
            }
        }
        Ok(out)
    }

    /// A basis for {x : Ax = 0}.
    pub fn nullspace(&self) -> MatrixGF {
        let p = self.p.get() as u64;
        let (_, ech) = self.row_reduce();
        let mut pivot_cols = Vec::new();
        for row in &ech.rows {
            let col = row.iter().position(|&d| d != 0).unwrap();
            pivot_cols.push(col);
        }
        let mut basis = Vec::new();
        for free in 0..self.ncols {
            if pivot_cols.contains(&free) {
                continue;
            }
            let mut v = vec![0u32; self.ncols];
            v[free] = 1;
            // back-substitute: pivot variable = −(row · v restricted to free part)
            for (r, &pc) in pivot_cols.iter().enumerate() {
                let coeff = ech.rows[r][free] as u64;
                if coeff != 0 {
                    v[pc] = ((p - coeff) % p) as u32;
                }
            }
            basis.push(v);
        }
        MatrixGF {
            p: self.p,
            ncols: self.ncols,
            rows: basis,
        }
    }

    pub fn row_rank_in_space(&self, space: &Space, row: usize) -> u64 {
        space.rank_of_digits(&self.rows[row]).unwrap()
    }

    /// Membership of `v` in the row space.
    pub fn spans(&self, v: &[u32]) -> bool {
        let mut m = self.clone();
        m.rows.push(v.to_vec());
        m.rank() == self.rank()
    }
}

/// An affine subspace: independent basis rows plus an offset point, all as
/// ranks of a shared `Space`. Two values denote the same coset iff their
/// canonical forms agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSubspace {
    pub space: Space,
    pub basis: MatrixGF,
    pub offset: u64,
}

impl AffineSubspace {
    pub fn new(space: Space, basis: MatrixGF, offset: u64) -> Result<Self> {
        space.check_rank(offset)?;
        if basis.rank() != basis.nrows() {
            return Err(Error::DependentRows);
        }
        Ok(AffineSubspace {
            space,
            basis,
            offset,
        })
    }

    pub fn full(space: Space) -> Self {
        let p = space.modulus();
        let n = space.dim();
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![0u32; n];
                r[i] = 1;
                r
            })
            .collect();
        AffineSubspace {
            space,
            basis: MatrixGF { p, ncols: n, rows },
            offset: 0,
        }
    }

    pub fn linear(space: Space, basis: MatrixGF) -> Result<Self> {
        Self::new(space, basis, 0)
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn codim(&self) -> usize {
        self.space.dim() - self.dim()
    }

    pub fn len(&self) -> u64 {
        self.space.pow(self.dim())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every point of the coset: offset + Σ c_i·basis_i over all coefficient
    /// tuples, exactly p^k distinct ranks.
    pub fn points(&self) -> Vec<u64> {
        let k = self.dim();
        let p = self.space.p();
        let basis_ranks: Vec<u64> = (0..k)
            .map(|i| self.basis.row_rank_in_space(&self.space, i))
            .collect();
        let mut out = Vec::with_capacity(self.len() as usize);
        // Gray-style odometer over coefficient tuples.
        let mut coeffs = vec![0u32; k];
        let mut cur = self.offset;
        out.push(cur);
        'outer: loop {
            for i in 0..k {
                coeffs[i] += 1;
                if coeffs[i] < p {
                    cur = self.space.add(cur, basis_ranks[i]);
                    out.push(cur);
                    continue 'outer;
                }
                // wrap digit i: subtract (p−1)·b_i
                coeffs[i] = 0;
                cur = self.space.sub(cur, self.space.scale(p - 1, basis_ranks[i]));
            }
            break;
        }
        out
    }

    /// Canonical form: reduced-echelon basis, offset replaced by the minimal
    /// rank in the coset.
    pub fn canonical(&self) -> AffineSubspace {
        let (_, ech) = self.basis.row_reduce();
        let mut min = u64::MAX;
        for x in self.points() {
            min = min.min(x);
        }
        AffineSubspace {
            space: self.space.clone(),
            basis: ech,
            offset: min,
        }
    }

    pub fn same_coset(&self, other: &AffineSubspace) -> bool {
        self.canonical() == other.canonical()
    }

    /// Annihilator rows U with x ∈ span(basis) ⟺ Ux = 0.
    pub fn annihilator(&self) -> MatrixGF {
        self.basis.nullspace()
    }

    pub fn contains(&self, x: u64) -> bool {
        let d = self.space.sub(x, self.offset);
        let digits = self.space.digits_of_rank(d);
        self.basis.spans(&digits)
    }
}

/// Canonical hyperplane handles: the normal has its first nonzero digit
/// equal to 1, and each normal carries p offsets. Yields exactly
/// p·(p^n − 1)/(p − 1) pairwise-distinct codimension-one affine subspaces.
pub fn hyperplanes(space: &Space) -> impl Iterator<Item = (u64, u32)> + '_ {
    let p = space.p();
    (1..space.size())
        .filter(move |&normal| {
            let digits = space.digits_of_rank(normal);
            digits.iter().find(|&&d| d != 0) == Some(&1)
        })
        .flat_map(move |normal| (0..p).map(move |c| (normal, c)))
}

/// Builds the affine subspace {x : normal·x = c}.
pub fn hyperplane_subspace(space: &Space, normal: u64, c: u32) -> AffineSubspace {
    let digits = space.digits_of_rank(normal);
    let basis = MatrixGF {
        p: space.modulus(),
        ncols: space.dim(),
        rows: vec![digits.clone()],
    }
    .nullspace();
    let j = digits.iter().position(|&d| d != 0).unwrap();
    let mut off = vec![0u32; space.dim()];
    off[j] = (c as u64 * space.modulus().inv(digits[j]) as u64 % space.p() as u64) as u32;
    let offset = space.rank_of_digits(&off).unwrap();
    AffineSubspace::new(space.clone(), basis, offset).unwrap()
}

/// k rows sampled uniformly from F_p^n, resampled as a whole tuple until the
/// rank is k. Deterministic for a given seed.
pub fn random_independent_tuple(
    space: &Space,
    k: usize,
    seed: u64,
) -> Result<(MatrixGF, u32)> {
    if k > space.dim() {
        return Err(Error::TooManyRows { k, n: space.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let rows: Vec<Vec<u32>> = (0..k)
            .map(|_| {
                let rank = rng.gen_range(0..space.size());
                space.digits_of_rank(rank)
            })
            .collect();
        let m = MatrixGF {
            p: space.modulus(),
            ncols: space.dim(),
            rows,
        };
        if m.rank() == k {
            return Ok((m, attempts));
        }
    }
}

/// All c-dimensional subspaces of F_p^k, each as the canonical reduced
/// echelon basis. Used both to enumerate annihilators and subspaces.
pub fn subspaces_of_dim(p: PrimeModulus, k: usize, c: usize) -> Vec<MatrixGF> {
    let mut out = Vec::new();
    for_each_subspace_of_dim(p, k, c, |m| out.push(m.clone()));
    out
}

/// Streaming version of [`subspaces_of_dim`] for large enumerations.
pub fn for_each_subspace_of_dim(
    p: PrimeModulus,
    k: usize,
    c: usize,
    mut visit: impl FnMut(&MatrixGF),
) {
    if c > k {
        return;
    }
    if c == 0 {
        visit(&MatrixGF::empty(p, k));
        return;
    }
    let mut pivots = (0..c).collect::<Vec<usize>>();
    loop {
        emit_echelon_fill(p, k, &pivots, &mut visit);
        // next pivot combination in lexicographic order
        let mut i = c;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if pivots[i] + (c - i) <= k - 1 {
                pivots[i] += 1;
                for j in i + 1..c {
                    pivots[j] = pivots[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn emit_echelon_fill(
    p: PrimeModulus,
    k: usize,
    pivots: &[usize],
    visit: &mut impl FnMut(&MatrixGF),
) {
    let c = pivots.len();
    // free cells: row i, columns > pivots[i] that are not pivot columns
    let mut free_cells = Vec::new();
    for (i, &pc) in pivots.iter().enumerate() {
        for col in pc + 1..k {
            if !pivots.contains(&col) {
                free_cells.push((i, col));
            }
        }
    }
    let pv = p.get();
    let total = (pv as u128).pow(free_cells.len() as u32);
    let mut assignment = vec![0u32; free_cells.len()];
    let mut counter: u128 = 0;
    loop {
        let mut rows = vec![vec![0u32; k]; c];
        for (i, &pc) in pivots.iter().enumerate() {
            rows[i][pc] = 1;
        }
        for (idx, &(i, col)) in free_cells.iter().enumerate() {
            rows[i][col] = assignment[idx];
        }
        visit(&MatrixGF { p, ncols: k, rows });
        counter += 1;
        if counter == total {
            break;
        }
        for a in assignment.iter_mut() {
            *a += 1;
            if *a < pv {
                break;
            }
            *a = 0;
        }
    }
}

/// Solves B·u = t for one functional u, where B's rows are a basis of a
/// subspace and t prescribes the dot products with each basis row. Used to
/// lift a functional on local coordinates to ambient coordinates.
pub fn lift_functional(basis: &MatrixGF, t: &[u32]) -> Vec<u32> {
    let p = basis.p.get() as u64;
    let k = basis.nrows();
    let n = basis.ncols;
    debug_assert_eq!(t.len(), k);
    // augmented system rows: [basis | t]
    let mut rows: Vec<Vec<u32>> = basis
        .rows
        .iter()
        .zip(t)
        .map(|(r, &ti)| {
            let mut row = r.clone();
            row.push(ti);
            row
        })
        .collect();
    // gaussian elimination on the n unknowns
    let mut pivot_cols = Vec::new();
    let mut pr = 0;
    for col in 0..n {
        let Some(r) = (pr..k).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(pr, r);
        let inv = basis.p.inv(rows[pr][col]) as u64;
        for x in rows[pr].iter_mut() {
            *x = (*x as u64 * inv % p) as u32;
        }
        for r in 0..k {
            if r != pr && rows[r][col] != 0 {
                let c = rows[r][col] as u64;
                for j in 0..=n {
                    let v = rows[r][j] as u64 + (p - c) * rows[pr][j] as u64;
                    rows[r][j] = (v % p) as u32;
                }
            }
        }
        pivot_cols.push(col);
        pr += 1;
        if pr == k {
            break;
        }
    }
    let mut u = vec![0u32; n];
    for (r, &pc) in pivot_cols.iter().enumerate() {
        u[pc] = rows[r][n];
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(p: u32, n: usize) -> Space {
        Space::new(PrimeModulus::new(p).unwrap(), n).unwrap()
    }

    #[test]
    fn prime_validation() {
        assert!(PrimeModulus::new(3).is_ok());
        assert!(PrimeModulus::new(2).is_err());
        assert!(PrimeModulus::new(9).is_err());
        assert!(PrimeModulus::new(65537).is_err());
        assert!(PrimeModulus::new(19).is_ok());
    }

    #[test]
    fn codec_examples() {
        let s = space(3, 2);
        assert_eq!(s.rank_of_digits(&[0, 0]).unwrap(), 0);
        assert_eq!(s.rank_of_digits(&[2, 1]).unwrap(), 5);
        let s = space(5, 3);
        assert_eq!(s.digits_of_rank(124), vec![4, 4, 4]);
        assert!(s.rank_of_digits(&[5, 0, 0]).is_err());
    }

    #[test]
    fn dot_examples() {
        let s = space(3, 2);
        assert_eq!(s.dot(0, 0), 0);
        let u = s.rank_of_digits(&[1, 2]).unwrap();
        let v = s.rank_of_digits(&[2, 2]).unwrap();
        assert_eq!(s.dot(u, v), 0);
        let s = space(19, 2);
        let u = s.rank_of_digits(&[1, 1]).unwrap();
        let v = s.rank_of_digits(&[18, 1]).unwrap();
        assert_eq!(s.dot(u, v), 0);
    }

    #[test]
    fn row_reduce_examples() {
        let p = PrimeModulus::new(3).unwrap();
        let zero = MatrixGF::new(p, 3, vec![vec![0, 0, 0]]).unwrap();
        assert_eq!(zero.rank(), 0);
        let id = MatrixGF::new(
            p,
            4,
            (0..4)
                .map(|i| {
                    let mut r = vec![0u32; 4];
                    r[i] = 1;
                    r
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(id.rank(), 4);
        let m = MatrixGF::new(p, 3, vec![vec![1, 1, 0], vec![2, 2, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn complete_basis_examples() {
        let p = PrimeModulus::new(3).unwrap();
        let empty = MatrixGF::empty(p, 2);
        let full = empty.complete_basis().unwrap();
        assert_eq!(full.rows, vec![vec![1, 0], vec![0, 1]]);

        let m = MatrixGF::new(p, 2, vec![vec![0, 1]]).unwrap();
        let full = m.complete_basis().unwrap();
        assert_eq!(full.rows, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(full.rank(), 2);

        let dep = MatrixGF::new(p, 2, vec![vec![1, 1], vec![2, 2]]).unwrap();
        assert!(dep.complete_basis().is_err());
    }

    #[test]
    fn affine_enumeration() {
        let s = space(3, 2);
        let point = AffineSubspace::new(s.clone(), MatrixGF::empty(s.modulus(), 2), 7).unwrap();
        assert_eq!(point.points(), vec![7]);

        let full = AffineSubspace::full(s.clone());
        let mut pts = full.points();
        pts.sort_unstable();
        assert_eq!(pts, (0..9).collect::<Vec<u64>>());

        // hyperplane x_0 = 0 in F_3^2
        let basis = MatrixGF::new(s.modulus(), 2, vec![vec![0, 1]]).unwrap();
        let h = AffineSubspace::linear(s.clone(), basis).unwrap();
        let mut pts = h.points();
        pts.sort_unstable();
        assert_eq!(pts, vec![0, 3, 6]);
    }

    #[test]
    fn hyperplane_counts() {
        let s = space(3, 1);
        assert_eq!(hyperplanes(&s).count(), 3);
        let s = space(3, 2);
        assert_eq!(hyperplanes(&s).count(), 12);
        let s = space(5, 2);
        let all: Vec<_> = hyperplanes(&s).collect();
        assert_eq!(all.len(), 30);
        // pairwise distinct as point sets
        let mut sets: Vec<Vec<u64>> = all
            .iter()
            .map(|&(normal, c)| {
                let mut pts = hyperplane_subspace(&s, normal, c).points();
                pts.sort_unstable();
                pts
            })
            .collect();
        sets.sort();
        sets.dedup();
        assert_eq!(sets.len(), 30);
    }

    #[test]
    fn random_tuples_have_full_rank() {
        let s = space(3, 3);
        for seed in 0..20 {
            let (m, _) = random_independent_tuple(&s, 3, seed).unwrap();
            assert_eq!(m.rank(), 3);
        }
        let (m, _) = random_independent_tuple(&s, 0, 11).unwrap();
        assert_eq!(m.nrows(), 0);
        assert!(random_independent_tuple(&s, 4, 0).is_err());
    }

    #[test]
    fn subspace_enumeration_counts() {
        let p = PrimeModulus::new(3).unwrap();
        // gaussian binomials [5 choose 1]_3 = 121, [5 choose 2]_3 = 1210
        assert_eq!(subspaces_of_dim(p, 5, 1).len(), 121);
        assert_eq!(subspaces_of_dim(p, 5, 2).len(), 1210);
        for m in subspaces_of_dim(p, 4, 2) {
            assert_eq!(m.rank(), 2);
        }
    }

    #[test]
    fn nullspace_annihilates() {
        let p = PrimeModulus::new(3).unwrap();
        let m = MatrixGF::new(p, 4, vec![vec![1, 2, 0, 1], vec![0, 1, 1, 1]]).unwrap();
        let ns = m.nullspace();
        assert_eq!(ns.nrows(), 2);
        for row in &ns.rows {
            for mrow in &m.rows {
                let dot: u32 = row
                    .iter()
                    .zip(mrow)
                    .map(|(&a, &b)| a * b)
                    .sum::<u32>()
                    % 3;
                assert_eq!(dot, 0);
            }
        }
    }

    #[test]
    fn lift_functional_matches_prescription() {
        let p = PrimeModulus::new(3).unwrap();
        let basis = MatrixGF::new(p, 4, vec![vec![1, 0, 2, 0], vec![0, 1, 1, 2]]).unwrap();
        let t = vec![2u32, 1u32];
        let u = lift_functional(&basis, &t);
        for (row, &ti) in basis.rows.iter().zip(&t) {
            let dot: u32 = row.iter().zip(&u).map(|(&a, &b)| a * b).sum::<u32>() % 3;
            assert_eq!(dot, ti);
        }
    }

    #[test]
    fn coset_canonicalization() {
        let s = space(3, 2);
        let b1 = MatrixGF::new(s.modulus(), 2, vec![vec![1, 1]]).unwrap();
        let b2 = MatrixGF::new(s.modulus(), 2, vec![vec![2, 2]]).unwrap();
        let h1 = AffineSubspace::new(s.clone(), b1, s.rank_of_digits(&[1, 0]).unwrap()).unwrap();
        // offset differs by a row-space element
        let h2 = AffineSubspace::new(s.clone(), b2, s.rank_of_digits(&[2, 1]).unwrap()).unwrap();
        assert!(h1.same_coset(&h2));
    }

    proptest! {
        #[test]
        fn codec_round_trips(rank in 0u64..3u64.pow(9)) {
            let s = space(3, 9);
            let digits = s.digits_of_rank(rank);
            prop_assert_eq!(s.rank_of_digits(&digits).unwrap(), rank);
        }

        #[test]
        fn add_matches_digitwise(a in 0u64..15625, b in 0u64..15625) {
            let s = space(5, 6);
            let sum = s.add(a, b);
            let da = s.digits_of_rank(a);
            let db = s.digits_of_rank(b);
            let expected: Vec<u32> = da.iter().zip(&db).map(|(&x, &y)| (x + y) % 5).collect();
            prop_assert_eq!(s.digits_of_rank(sum), expected);
        }
    }
}
