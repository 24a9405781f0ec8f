//! Construction and verification of 3-AP-free sets, the exhaustive oracle
//! for their maximum size, and bound calculators.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::group::{PrimeModulus, Space};
use crate::io;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapsetMethod {
    AlonSphere,
    Exhaustive,
    Imported,
}

impl CapsetMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CapsetMethod::AlonSphere => "alon-sphere",
            CapsetMethod::Exhaustive => "exhaustive",
            CapsetMethod::Imported => "imported",
        }
    }
}

/// A 3-AP-free subset of F_p^n together with how it was obtained.
#[derive(Debug, Clone)]
pub struct CapsetCertificate {
    pub space: Space,
    /// Sorted ranks.
    pub elements: Vec<u64>,
    pub method: CapsetMethod,
    /// Sphere level c for the sphere construction.
    pub sphere_level: Option<u64>,
    pub verified: bool,
    /// False when an exhaustive search ran out of budget.
    pub optimal: bool,
}

impl CapsetCertificate {
    pub fn len(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Sphere slicing: among points with digits in {0..(p−1)/2}, bucket by the
/// true integer sum of squared digits and keep the largest bucket (smallest
/// level on ties). The winner is 3-AP-free and has size at least
/// ((p+1)/2)^n / (1 + n((p−1)/2)²).
pub fn sphere_capset(p: PrimeModulus, n: usize) -> Result<CapsetCertificate> {
    let space = Space::new(p, n)?;
    let half = (p.get() - 1) / 2;
    let max_level = n as u64 * (half as u64) * (half as u64);
    let mut buckets: Vec<Vec<u64>> = vec![Vec::new(); max_level as usize + 1];
    // odometer over {0..half}^n
    let mut digits = vec![0u32; n];
    loop {
        let c: u64 = digits.iter().map(|&d| (d as u64) * (d as u64)).sum();
        buckets[c as usize].push(space.rank_of_digits(&digits)?);
        let mut i = 0;
        loop {
            if i == n {
                let (level, best) = buckets
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
                    .unwrap();
                let mut elements = best.clone();
                elements.sort_unstable();
                let verified = verify_ap_free(&space, &elements);
                return Ok(CapsetCertificate {
                    space,
                    elements,
                    method: CapsetMethod::AlonSphere,
                    sphere_level: Some(level as u64),
                    verified,
                    optimal: false,
                });
            }
            digits[i] += 1;
            if digits[i] <= half {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// The guaranteed size of the sphere construction, as an integer via the
/// pigeonhole count ⌈((p+1)/2)^n / (1 + n((p−1)/2)²)⌉. Only meaningful while
/// ((p+1)/2)^n fits; use [`sphere_bound_log2`] beyond.
pub fn sphere_bound_ceil(p: u32, n: u32) -> Option<u64> {
    let half_up = (p as u128 + 1) / 2;
    let total = half_up.checked_pow(n)?;
    let buckets = 1 + n as u128 * (((p as u128) - 1) / 2).pow(2);
    Some(((total + buckets - 1) / buckets) as u64)
}

pub fn sphere_bound_log2(p: f64, n: f64) -> f64 {
    n * ((p + 1.0) / 2.0).log2() - (1.0 + n * ((p - 1.0) / 2.0).powi(2)).log2()
}

/// True iff no (x, d), d ≠ 0, has x, x+d, x+2d all in the set. O(|A|²) over
/// ordered pairs (x, y), testing 2y − x for membership.
pub fn verify_ap_free(space: &Space, set: &[u64]) -> bool {
    let members = BitSet::from_members(space.size(), set);
    set.par_iter().all(|&x| {
        set.iter().all(|&y| {
            if x == y {
                return true;
            }
            !members.contains(space.ap_third(x, y))
        })
    })
}

/// Reference oracle used in tests: cubic loop over ordered triples.
pub fn verify_ap_free_bruteforce(space: &Space, set: &[u64]) -> bool {
    for &x in set {
        for &y in set {
            if x == y {
                continue;
            }
            let z = space.ap_third(x, y);
            if z != x && z != y && set.contains(&z) {
                return false;
            }
        }
    }
    true
}

/// Maximum 3-AP-free set by branch and bound. Candidates are scanned in rank
/// order; a translate of any maximum set contains 0, so 0 is fixed in. The
/// node bound is current size + remaining candidates.
pub fn max_capset_exhaustive(
    p: PrimeModulus,
    n: usize,
    node_budget: u64,
) -> Result<CapsetCertificate> {
    let space = Space::new(p, n)?;
    let size = space.size();
    if size > 100 {
        return Err(Error::BudgetExceeded {
            estimate: size as u128,
            budget: 100,
        });
    }
    let inv2 = p.inv(2);
    let mut state = Search {
        space: &space,
        inv2,
        blocked: vec![0u32; size as usize],
        current: vec![0],
        best: vec![0],
        nodes: 0,
        budget: node_budget,
        exhausted: false,
    };
    state.block_completions_of(0, true);
    state.recurse(1);
    state.block_completions_of(0, false);
    let exhausted = state.exhausted;
    let mut elements = state.best;
    elements.sort_unstable();
    let verified = verify_ap_free(&space, &elements);
    debug_assert!(verified);
    Ok(CapsetCertificate {
        space,
        elements,
        method: CapsetMethod::Exhaustive,
        sphere_level: None,
        verified,
        optimal: !exhausted,
    })
}

struct Search<'a> {
    space: &'a Space,
    inv2: u32,
    /// blocked[c] > 0 when adding c would complete a 3-AP with current pairs.
    blocked: Vec<u32>,
    current: Vec<u64>,
    best: Vec<u64>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn recurse(&mut self, from: u64) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if self.current.len() > self.best.len() {
            self.best = self.current.clone();
        }
        let remaining = (from..self.space.size())
            .filter(|&c| self.blocked[c as usize] == 0)
            .count();
        if self.current.len() + remaining <= self.best.len() {
            return;
        }
        for c in from..self.space.size() {
            if self.exhausted {
                return;
            }
            if self.blocked[c as usize] != 0 {
                continue;
            }
            self.current.push(c);
            self.block_completions_of(c, true);
            self.recurse(c + 1);
            self.block_completions_of(c, false);
            self.current.pop();
        }
    }

    /// For the new element c and every existing a, the three points that
    /// would complete a 3-AP with {a, c}: 2c−a, 2a−c, and (a+c)/2.
    fn block_completions_of(&mut self, c: u64, on: bool) {
        let s = self.space;
        let last = self.current.len() - 1;
        for i in 0..last + 1 {
            let a = self.current[i];
            if a == c {
                continue;
            }
            for z in [
                s.sub(s.scale(2, c), a),
                s.sub(s.scale(2, a), c),
                s.scale(self.inv2, s.add(a, c)),
            ] {
                if on {
                    self.blocked[z as usize] += 1;
                } else {
                    self.blocked[z as usize] -= 1;
                }
            }
        }
    }
}

/// Cap-set bound evaluations in the log domain.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub p: u32,
    pub n: u64,
    /// Sphere-construction guarantee, log2 of the set size.
    pub sphere_log2: f64,
    /// log2 of ⌈((p+1)/2)^n / (1+n((p−1)/2)²)⌉ when it fits in integers.
    pub sphere_ceil: Option<u64>,
    /// r(p,n) ≥ p^{.782 n}: only proved for p ≥ 19 and n ≥ 10^6.
    pub dense_exponent_in_range: bool,
    pub dense_exponent_log2: Option<f64>,
    /// r(p,n) ≥ ((p+1)/2.0001)^{n−2} under the same range restriction.
    pub near_half_log2: Option<f64>,
    pub multidim: Option<MultidimBounds>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultidimBounds {
    pub d: u32,
    /// N^{1−(d+1)3^{−d}} lower bound: the exponent and log2 value.
    pub lower_exponent: f64,
    pub lower_log2: f64,
    /// N^{1−C^{−d}} upper bound with configurable C.
    pub c: f64,
    pub upper_exponent: f64,
    pub upper_log2: f64,
}

pub const DEFAULT_REMOVAL_EXPONENT: f64 = 13.901;

pub fn bound_calculators(p: u32, n: u64, d: Option<u32>, c: f64) -> BoundReport {
    let log2_n_points = n as f64 * (p as f64).log2();
    let in_range = p >= 19 && n >= 1_000_000;
    let multidim = d.map(|d| {
        let lower_exponent = 1.0 - (d as f64 + 1.0) * 3f64.powi(-(d as i32));
        let upper_exponent = 1.0 - c.powi(-(d as i32));
        MultidimBounds {
            d,
            lower_exponent,
            lower_log2: lower_exponent * log2_n_points,
            c,
            upper_exponent,
            upper_log2: upper_exponent * log2_n_points,
        }
    });
    BoundReport {
        p,
        n,
        sphere_log2: sphere_bound_log2(p as f64, n as f64),
        sphere_ceil: u32::try_from(n).ok().and_then(|n| sphere_bound_ceil(p, n)),
        dense_exponent_in_range: in_range,
        dense_exponent_log2: in_range.then(|| 0.782 * n as f64 * (p as f64).log2()),
        near_half_log2: in_range.then(|| (n as f64 - 2.0) * ((p as f64 + 1.0) / 2.0001).log2()),
        multidim,
    }
}

/// log_p |A_{p,r}|, sourced per the dense-array budget: exhaustive for
/// p^r ≤ 100, the constructed sphere set while p^r fits the cap, and the
/// pigeonhole formula beyond that.
pub fn capset_size_logp(p: PrimeModulus, r: u64) -> f64 {
    let pf = p.get() as f64;
    if let Ok(r_usize) = usize::try_from(r) {
        if (p.get() as u128).checked_pow(r as u32) <= Some(100) {
            if let Ok(cert) = max_capset_exhaustive(p, r_usize, 10_000_000) {
                if cert.optimal {
                    return (cert.len() as f64).log2() / pf.log2();
                }
            }
        }
        if (p.get() as u128).pow(r as u32) <= crate::group::DEFAULT_SPACE_CAP as u128 {
            if let Ok(cert) = cached_capset(p, r_usize, CapsetMethod::AlonSphere) {
                return (cert.len() as f64).log2() / pf.log2();
            }
        }
    }
    sphere_bound_log2(pf, r as f64) / pf.log2()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CertificateSidecar {
    pub method: String,
    pub c: Option<u64>,
    pub size: u64,
    pub verified: bool,
    pub optimal: bool,
}

/// Computes a capset, memoized under $APSLAB_CACHE keyed by (p, r, method).
pub fn cached_capset(p: PrimeModulus, r: usize, method: CapsetMethod) -> Result<CapsetCertificate> {
    let cache_dir = std::env::var_os("APSLAB_CACHE").map(PathBuf::from);
    let stem = cache_dir
        .as_ref()
        .map(|d| d.join(format!("capset_{}_p{}_r{}", method.tag(), p.get(), r)));
    if let Some(stem) = &stem {
        let apset = stem.with_extension("apset");
        let sidecar = stem.with_extension("json");
        if apset.exists() && sidecar.exists() {
            let set = io::read_apset(std::fs::File::open(&apset)?)?;
            let meta: CertificateSidecar =
                serde_json::from_reader(std::fs::File::open(&sidecar)?).map_err(|e| {
                    Error::Parse {
                        line: 0,
                        msg: e.to_string(),
                    }
                })?;
            if verify_ap_free(&set.space, &set.members) {
                let mut elements = set.members;
                elements.sort_unstable();
                return Ok(CapsetCertificate {
                    space: set.space,
                    elements,
                    method,
                    sphere_level: meta.c,
                    verified: true,
                    optimal: meta.optimal,
                });
            }
        }
    }
    let cert = match method {
        CapsetMethod::AlonSphere => sphere_capset(p, r)?,
        CapsetMethod::Exhaustive => max_capset_exhaustive(p, r, 200_000_000)?,
        CapsetMethod::Imported => {
            return Err(Error::Parse {
                line: 0,
                msg: "imported capsets must be read from a file".into(),
            })
        }
    };
    if let Some(stem) = &stem {
        std::fs::create_dir_all(stem.parent().unwrap())?;
        let mut out = Vec::new();
        io::write_apset(&mut out, &cert.space, &cert.elements)?;
        std::fs::write(stem.with_extension("apset"), out)?;
        let sidecar = CertificateSidecar {
            method: method.tag().into(),
            c: cert.sphere_level,
            size: cert.len(),
            verified: cert.verified,
            optimal: cert.optimal,
        };
        std::fs::write(
            stem.with_extension("json"),
            serde_json::to_vec_pretty(&sidecar).unwrap(),
        )?;
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prime(p: u32) -> PrimeModulus {
        PrimeModulus::new(p).unwrap()
    }

    #[test]
    fn sphere_small_cases() {
        let cert = sphere_capset(prime(3), 1).unwrap();
        // buckets c=0 and c=1 tie at size 1; smallest level wins
        assert_eq!(cert.sphere_level, Some(0));
        assert_eq!(cert.elements, vec![0]);
        assert!(cert.verified);

        let cert = sphere_capset(prime(3), 2).unwrap();
        assert_eq!(cert.len(), 2);
        assert_eq!(cert.sphere_level, Some(1));
        assert!(cert.len() >= sphere_bound_ceil(3, 2).unwrap());
    }

    #[test]
    fn sphere_is_ap_free_and_meets_bound() {
        for p in [3u32, 5, 7] {
            for n in 1..=4usize {
                if (p as u64).pow(n as u32) > 100_000 {
                    continue;
                }
                let cert = sphere_capset(prime(p), n).unwrap();
                assert!(cert.verified, "p={p} n={n}");
                assert!(cert.len() >= sphere_bound_ceil(p, n as u32).unwrap());
            }
        }
    }

    #[test]
    fn ap_free_checks() {
        let space = Space::new(prime(3), 2).unwrap();
        assert!(verify_ap_free(&space, &[]));
        // full line 0,1,2
        assert!(!verify_ap_free(&space, &[0, 1, 2]));
        assert!(verify_ap_free(&space, &[0, 1, 3, 4]));
    }

    #[test]
    fn ap_free_matches_bruteforce_on_random_sets() {
        let space = Space::new(prime(3), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let set: Vec<u64> = (0..space.size())
                .filter(|_| rng.gen::<f64>() < 0.15)
                .collect();
            assert_eq!(
                verify_ap_free(&space, &set),
                verify_ap_free_bruteforce(&space, &set)
            );
        }
    }

    #[test]
    fn exhaustive_known_values() {
        let cert = max_capset_exhaustive(prime(3), 1, 1 << 20).unwrap();
        assert_eq!(cert.len(), 2);
        assert!(cert.optimal);
        let cert = max_capset_exhaustive(prime(3), 2, 1 << 22).unwrap();
        assert_eq!(cert.len(), 4);
        let cert = max_capset_exhaustive(prime(5), 1, 1 << 20).unwrap();
        assert_eq!(cert.len(), 2);
        // independent oracle: scan every subset of Z_7 for the true maximum
        let space = Space::new(prime(7), 1).unwrap();
        let mut true_max = 0;
        for mask in 0u32..(1 << 7) {
            let set: Vec<u64> = (0..7).filter(|&i| mask >> i & 1 == 1).collect();
            if verify_ap_free_bruteforce(&space, &set) {
                true_max = true_max.max(set.len());
            }
        }
        let cert = max_capset_exhaustive(prime(7), 1, 1 << 20).unwrap();
        assert_eq!(cert.len(), true_max as u64);
        assert_eq!(cert.len(), 3);
        // exhaustive is at least as large as the sphere construction
        for (p, n) in [(3u32, 2usize), (5, 2), (3, 3)] {
            let ex = max_capset_exhaustive(prime(p), n, 1 << 26).unwrap();
            let sp = sphere_capset(prime(p), n).unwrap();
            assert!(ex.len() >= sp.len(), "p={p} n={n}");
        }
    }

    #[test]
    fn exhaustive_respects_cap() {
        assert!(max_capset_exhaustive(prime(3), 5, 1000).is_err());
    }

    #[test]
    fn bound_report_values() {
        let rep = bound_calculators(3, 8, Some(1), DEFAULT_REMOVAL_EXPONENT);
        let md = rep.multidim.unwrap();
        assert!((md.lower_exponent - 1.0 / 3.0).abs() < 1e-12);
        assert!(!rep.dense_exponent_in_range);
        assert!(rep.dense_exponent_log2.is_none());

        let rep = bound_calculators(19, 1_000_000, None, DEFAULT_REMOVAL_EXPONENT);
        assert!(rep.dense_exponent_in_range);
        let expected = 0.782 * 1e6 * 19f64.log2();
        assert!((rep.dense_exponent_log2.unwrap() - expected).abs() < 1e-6);
    }
}
