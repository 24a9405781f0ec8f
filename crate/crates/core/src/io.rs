//! File formats: APSET v1 (text sets), APWF v1 (binary weighted functions),
//! APDT v1 (binary direction tables).
//!
//! APSET v1: line 1 is `p n`; each further line is either a decimal rank or
//! n comma-separated digits; `#` starts a comment. Duplicates are rejected.
//!
//! APWF v1: magic `APWF`, u32 p, u32 n, u8 mode (0 = f64 little-endian,
//! 1 = rational as u64 numerator / u64 denominator pairs), then p^n entries.
//!
//! APDT v1: magic `APDT`, u32 level, u64 seed, u32 p, u32 n_prev, u32 m,
//! u32 r, then for each x in rank order, r vectors of m u16 digits.

use crate::error::{Error, Result};
use crate::group::{PrimeModulus, Space};
use crate::scalar::{Rat, Scalar};
use crate::weighted::WeightedFunction;
use num_traits::ToPrimitive;
use std::io::{BufRead, BufReader, Read, Write};

pub struct SetFile {
    pub space: Space,
    pub members: Vec<u64>,
}

pub fn read_apset<R: Read>(reader: R) -> Result<SetFile> {
    let mut lines = BufReader::new(reader).lines();
    let header = loop {
        let Some(line) = lines.next() else {
            return Err(Error::Parse {
                line: 0,
                msg: "missing header line `p n`".into(),
            });
        };
        let line = line?;
        let stripped = strip_comment(&line);
        if !stripped.is_empty() {
            break stripped.to_string();
        }
    };
    let mut parts = header.split_whitespace();
    let p: u32 = parse_field(parts.next(), 1, "p")?;
    let n: usize = parse_field(parts.next(), 1, "n")?;
    if parts.next().is_some() {
        return Err(Error::Parse {
            line: 1,
            msg: "header must be exactly `p n`".into(),
        });
    }
    let space = Space::new(PrimeModulus::new(p)?, n)?;
    let mut members = Vec::new();
    let mut seen = crate::bitset::BitSet::new(space.size());
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        let body = strip_comment(&line);
        if body.is_empty() {
            continue;
        }
        let rank = if body.contains(',') {
            let digits = body
                .split(',')
                .map(|t| {
                    t.trim().parse::<u32>().map_err(|e| Error::Parse {
                        line: lineno,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            space.rank_of_digits(&digits)?
        } else {
            let rank = body.parse::<u64>().map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            space.check_rank(rank)?
        };
        if seen.contains(rank) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate element {rank}"),
            });
        }
        seen.insert(rank);
        members.push(rank);
    }
    Ok(SetFile { space, members })
}

pub fn write_apset<W: Write>(mut w: W, space: &Space, members: &[u64]) -> Result<()> {
    writeln!(w, "{} {}", space.p(), space.dim())?;
    for &m in members {
        writeln!(w, "{m}")?;
    }
    Ok(())
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("missing {name}"),
        })?
        .parse()
        .map_err(|e: T::Err| Error::Parse {
            line,
            msg: format!("{name}: {e}"),
        })
}

const APWF_MAGIC: &[u8; 4] = b"APWF";

pub fn write_apwf_f64<W: Write>(mut w: W, f: &WeightedFunction<f64>) -> Result<()> {
    write_apwf_header(&mut w, f.space(), 0)?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_apwf_rational<W: Write>(mut w: W, f: &WeightedFunction<Rat>) -> Result<()> {
    write_apwf_header(&mut w, f.space(), 1)?;
    for v in f.values() {
        let num = v.numer().to_u64().ok_or(Error::RationalOverflow)?;
        let den = v.denom().to_u64().ok_or(Error::RationalOverflow)?;
        w.write_all(&num.to_le_bytes())?;
        w.write_all(&den.to_le_bytes())?;
    }
    Ok(())
}

fn write_apwf_header<W: Write>(w: &mut W, space: &Space, mode: u8) -> Result<()> {
    w.write_all(APWF_MAGIC)?;
    w.write_all(&(space.p()).to_le_bytes())?;
    w.write_all(&(space.dim() as u32).to_le_bytes())?;
    w.write_all(&[mode])?;
    Ok(())
}

pub enum ApwfFile {
    Float(WeightedFunction<f64>),
    Rational(WeightedFunction<Rat>),
}

pub fn read_apwf<R: Read>(mut r: R) -> Result<ApwfFile> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != APWF_MAGIC {
        return Err(Error::BadMagic {
            expected: "APWF".into(),
            got: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let p = read_u32(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    let mut mode = [0u8; 1];
    r.read_exact(&mut mode)?;
    let space = Space::new(PrimeModulus::new(p)?, n)?;
    let count = space.size() as usize;
    match mode[0] {
        0 => {
            let mut values = Vec::with_capacity(count);
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                values.push(f64::from_le_bytes(buf));
            }
            Ok(ApwfFile::Float(WeightedFunction::new(space, values)?))
        }
        1 => {
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                let num = read_u64(&mut r)?;
                let den = read_u64(&mut r)?;
                values.push(Rat::ratio(num, den));
            }
            Ok(ApwfFile::Rational(WeightedFunction::new(space, values)?))
        }
        m => Err(Error::Parse {
            line: 0,
            msg: format!("unknown APWF mode {m}"),
        }),
    }
}

const APDT_MAGIC: &[u8; 4] = b"APDT";

pub struct ApdtFile {
    pub level: u32,
    pub seed: u64,
    pub p: u32,
    pub n_prev: u32,
    pub m: u32,
    pub r: u32,
    /// vectors[x][j] = digits of v_j(x), length m each.
    pub vectors: Vec<Vec<Vec<u16>>>,
}

pub fn write_apdt<W: Write>(mut w: W, file: &ApdtFile) -> Result<()> {
    w.write_all(APDT_MAGIC)?;
    w.write_all(&file.level.to_le_bytes())?;
    w.write_all(&file.seed.to_le_bytes())?;
    for v in [file.p, file.n_prev, file.m, file.r] {
        w.write_all(&v.to_le_bytes())?;
    }
    for per_x in &file.vectors {
        for vec in per_x {
            for &d in vec {
                w.write_all(&d.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_apdt<R: Read>(mut r: R) -> Result<ApdtFile> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != APDT_MAGIC {
        return Err(Error::BadMagic {
            expected: "APDT".into(),
            got: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let level = read_u32(&mut r)?;
    let seed = read_u64(&mut r)?;
    let p = read_u32(&mut r)?;
    let n_prev = read_u32(&mut r)?;
    let m = read_u32(&mut r)?;
    let rr = read_u32(&mut r)?;
    let n_points = (p as u128).pow(n_prev);
    if n_points > crate::group::DEFAULT_SPACE_CAP as u128 {
        return Err(Error::CapExceeded {
            size: n_points,
            cap: crate::group::DEFAULT_SPACE_CAP,
        });
    }
    let mut vectors = Vec::with_capacity(n_points as usize);
    let mut buf = [0u8; 2];
    for _ in 0..n_points {
        let mut per_x = Vec::with_capacity(rr as usize);
        for _ in 0..rr {
            let mut v = Vec::with_capacity(m as usize);
            for _ in 0..m {
                r.read_exact(&mut buf)?;
                v.push(u16::from_le_bytes(buf));
            }
            per_x.push(v);
        }
        vectors.push(per_x);
    }
    Ok(ApdtFile {
        level,
        seed,
        p,
        n_prev,
        m,
        r: rr,
        vectors,
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// FNV-1a digest, used to fingerprint level functions in provenance records.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn digest_function<S: Scalar>(f: &WeightedFunction<S>) -> u64 {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&f.space().p().to_le_bytes());
    bytes.extend_from_slice(&(f.space().dim() as u32).to_le_bytes());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_f64().to_le_bytes());
    }
    fnv64(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn apset_round_trip_and_rejects() {
        let text = "# a capset\n3 2\n0\n1,1\n8 # corner\n";
        let set = read_apset(text.as_bytes()).unwrap();
        assert_eq!(set.space.p(), 3);
        assert_eq!(set.members, vec![0, 4, 8]);

        let dup = "3 2\n5\n2,1\n";
        assert!(matches!(
            read_apset(dup.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));

        let mut out = Vec::new();
        write_apset(&mut out, &set.space, &set.members).unwrap();
        let again = read_apset(&out[..]).unwrap();
        assert_eq!(again.members, set.members);
    }

    #[test]
    fn apwf_round_trip_rational() {
        let space = Space::new(PrimeModulus::new(3).unwrap(), 2).unwrap();
        let f = WeightedFunction::<Rat>::new(
            space,
            (0..9).map(|i| rat(i % 3, 4)).collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_apwf_rational(&mut buf, &f).unwrap();
        match read_apwf(&buf[..]).unwrap() {
            ApwfFile::Rational(g) => assert_eq!(g, f),
            _ => panic!("wrong mode"),
        }
    }

    #[test]
    fn apwf_round_trip_float() {
        let space = Space::new(PrimeModulus::new(5).unwrap(), 1).unwrap();
        let f = WeightedFunction::<f64>::new(space, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_apwf_f64(&mut buf, &f).unwrap();
        match read_apwf(&buf[..]).unwrap() {
            ApwfFile::Float(g) => assert_eq!(g.values(), f.values()),
            _ => panic!("wrong mode"),
        }
    }

    #[test]
    fn apdt_round_trip() {
        let file = ApdtFile {
            level: 2,
            seed: 99,
            p: 3,
            n_prev: 1,
            m: 4,
            r: 2,
            vectors: (0..3)
                .map(|x| {
                    (0..2)
                        .map(|j| (0..4).map(|i| ((x + j + i) % 3) as u16).collect())
                        .collect()
                })
                .collect(),
        };
        let mut buf = Vec::new();
        write_apdt(&mut buf, &file).unwrap();
        let back = read_apdt(&buf[..]).unwrap();
        assert_eq!(back.level, 2);
        assert_eq!(back.seed, 99);
        assert_eq!(back.vectors, file.vectors);
    }
}
