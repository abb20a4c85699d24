//! Multidimensional Bloom filter fingerprints of sliced path conditions.
//!
//! A fingerprint is a 16 × 64 bit matrix. Row 0 (the header) records
//! abstract clause shapes; for each header column a clause selects, one bit
//! in rows 1..=15 below it records the concrete clause. Two path conditions
//! differing only in literals therefore share their header bits.

use std::cmp::Ordering;
use std::fmt::{self, Write};

use serde::{Serialize, Serializer};
use siphasher::sip128::SipHasher13;

use crate::symcore::{AbstractClause, PathCondition};

pub const ROWS: usize = 16;
pub const COLS: usize = 64;
pub const HASHES: u64 = 3;
const BODY_ROWS: u64 = (ROWS - 1) as u64;

/// Default hash keys. Fingerprints are reproducible across runs and
/// platforms as long as these stay fixed.
pub const DEFAULT_HASH_SEED: (u64, u64) = (0x7061_7468_7365_6c31, 0x6d62_665f_6b65_7973);

/// Three indexed hashes `h_i = g1 + i * g2` from one 128-bit SipHash.
/// `g2` is forced odd so the three header columns are always distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HashFamily {
    pub k0: u64,
    pub k1: u64,
}

impl Default for HashFamily {
    fn default() -> Self {
        HashFamily::with_seed(DEFAULT_HASH_SEED.0, DEFAULT_HASH_SEED.1)
    }
}

impl HashFamily {
    pub fn with_seed(k0: u64, k1: u64) -> HashFamily {
        HashFamily { k0, k1 }
    }

    fn bases(&self, s: &str) -> (u64, u64) {
        let (g1, g2) = SipHasher13::new_with_keys(self.k0, self.k1)
            .hash(s.as_bytes())
            .as_u64();
        (g1, g2 | 1)
    }

    /// All three indexed hash values of `s`.
    pub fn hashes(&self, s: &str) -> [u64; HASHES as usize] {
        let (g1, g2) = self.bases(s);
        [0u64, 1, 2].map(|i| g1.wrapping_add(i.wrapping_mul(g2)))
    }

    /// The `(row, column)` positions an insert of this pair sets, header
    /// positions first.
    pub fn positions(&self, abstract_clause: &str, concrete: &str) -> [(usize, usize); 6] {
        let cols = self.hashes(abstract_clause).map(|h| (h % COLS as u64) as usize);
        let rows = self.hashes(concrete).map(|h| 1 + (h % BODY_ROWS) as usize);
        [
            (0, cols[0]),
            (0, cols[1]),
            (0, cols[2]),
            (rows[0], cols[0]),
            (rows[1], cols[1]),
            (rows[2], cols[2]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fingerprint {
    rows: [u64; ROWS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    DefinitelyAbsent,
    PossiblyPresent,
}

impl Fingerprint {
    pub fn new() -> Fingerprint {
        Fingerprint::default()
    }

    pub fn from_rows(rows: [u64; ROWS]) -> Fingerprint {
        Fingerprint { rows }
    }

    pub fn rows(&self) -> &[u64; ROWS] {
        &self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row] >> col & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize) {
        self.rows[row] |= 1 << col;
    }

    pub fn count_ones(&self) -> u32 {
        self.rows.iter().map(|r| r.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| *r == 0)
    }

    pub fn insert(&mut self, family: &HashFamily, abstract_clause: &AbstractClause, concrete: &str) {
        for (r, c) in family.positions(abstract_clause.as_str(), concrete) {
            self.set(r, c);
        }
    }

    pub fn query(&self, family: &HashFamily, abstract_clause: &AbstractClause, concrete: &str) -> Membership {
        if family
            .positions(abstract_clause.as_str(), concrete)
            .iter()
            .all(|&(r, c)| self.get(r, c))
        {
            Membership::PossiblyPresent
        } else {
            Membership::DefinitelyAbsent
        }
    }

    /// Every body bit sits under a set header bit.
    pub fn header_covers_body(&self) -> bool {
        let header = self.rows[0];
        self.rows[1..].iter().all(|r| r & !header == 0)
    }

    /// 16 lines of 64 `0`/`1` characters, header first, column 0 leftmost.
    pub fn debug_dump(&self) -> String {
        let mut out = String::with_capacity(ROWS * (COLS + 1));
        for row in 0..ROWS {
            for col in 0..COLS {
                out.push(if self.get(row, col) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// The 1024 bits as 256 hex digits, row 0 first.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(ROWS * 16);
        for r in &self.rows {
            write!(out, "{r:016x}").expect("string write");
        }
        out
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

pub fn fingerprint_of(pc: &PathCondition, family: &HashFamily) -> Fingerprint {
    let mut fp = Fingerprint::new();
    for c in pc.clauses() {
        fp.insert(family, &c.abstract_of(), &c.canonical());
    }
    fp
}

/// An exact non-negative fraction, kept reduced.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    /// Panics when `den` is zero.
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact mean of a non-empty list.
    pub fn mean(values: &[Ratio]) -> Ratio {
        assert!(!values.is_empty(), "mean of nothing");
        let mut acc = Ratio::ZERO;
        for v in values {
            let den = lcm(acc.den, v.den);
            acc = Ratio::new(acc.num * (den / acc.den) + v.num * (den / v.den), den);
        }
        Ratio::new(acc.num, acc.den * values.len() as u64)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// `a11 / (a11 + a10 + a01)` over the flattened bits; two empty
/// fingerprints are identical.
pub fn jaccard(f1: &Fingerprint, f2: &Fingerprint) -> Ratio {
    let (mut both, mut either) = (0u64, 0u64);
    for (a, b) in f1.rows.iter().zip(&f2.rows) {
        both += (a & b).count_ones() as u64;
        either += (a | b).count_ones() as u64;
    }
    if either == 0 {
        Ratio::ONE
    } else {
        Ratio::new(both, either)
    }
}
