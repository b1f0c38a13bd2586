//! GF(2)-linear two-universal hash families and the induced maps on cq-states.
//!
//! Inputs are `a`-bit strings stored in a `u64`, bit `j` being `x_j`
//! (LSB-first); outputs are `b`-bit strings in the same convention. A hash is
//! `f(x) = T x` for a `b × a` matrix `T` over GF(2).
//!
//! A Toeplitz matrix is fixed by its `a + b − 1` diagonals:
//! `T[i][j] = t[i − j + a − 1]`. Its hex form packs `t_0, t_1, …` LSB-first
//! into bytes, written low byte first.

use crate::rng::Rng;
use crate::states::{CqState, State};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest family enumerated exactly, as a power of two.
pub const MAX_EXACT_LOG2: u32 = 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HashError {
    #[error("family of size 2^{0} exceeds the exact-enumeration limit 2^22")]
    FamilyTooLarge(u32),
    #[error("alphabet of size {got} is not {{0,1}}^{a}")]
    AlphabetMismatch { got: usize, a: u32 },
    #[error("invalid hash shape: {0}")]
    Shape(String),
    #[error("bad hex encoding: {0}")]
    Hex(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashKind {
    Toeplitz,
    AllLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    pub a: u32,
    pub b: u32,
    pub kind: HashKind,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    Exact,
    Sample { n: usize },
}

/// A Toeplitz hash, stored by its diagonals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToeplitzHash {
    a: u32,
    b: u32,
    diagonals: u64,
}

/// An arbitrary GF(2)-linear hash, stored by its row masks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearHash {
    a: u32,
    b: u32,
    rows: Vec<u64>,
}

/// A concrete member of a hash family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConcreteHash {
    Toeplitz(ToeplitzHash),
    Linear(LinearHash),
}

fn shape_ok(a: u32, b: u32) -> Result<(), HashError> {
    if a == 0 || b > a || a > 63 {
        return Err(HashError::Shape(format!("need 0 ≤ b ≤ a ≤ 63, a ≥ 1, got a={a}, b={b}")));
    }
    Ok(())
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn bytes_to_hex(v: u64, nbits: u32) -> String {
    let nbytes = nbits.div_ceil(8) as usize;
    hex::encode(&v.to_le_bytes()[..nbytes])
}

fn hex_to_u64(s: &str, nbits: u32) -> Result<u64, HashError> {
    let bytes = hex::decode(s).map_err(|e| HashError::Hex(e.to_string()))?;
    if bytes.len() != nbits.div_ceil(8) as usize {
        return Err(HashError::Hex(format!("expected {} bytes", nbits.div_ceil(8))));
    }
    let mut buf = [0u8; 8];
    buf[..bytes.len()].copy_from_slice(&bytes);
    let v = u64::from_le_bytes(buf);
    if v & !mask(nbits) != 0 {
        return Err(HashError::Hex("bits beyond the declared length are set".into()));
    }
    Ok(v)
}

impl ToeplitzHash {
    pub fn new(a: u32, b: u32, diagonals: u64) -> Result<Self, HashError> {
        shape_ok(a, b)?;
        if diagonals & !mask(a + b - 1) != 0 {
            return Err(HashError::Shape("diagonal bits beyond a + b − 1".into()));
        }
        Ok(ToeplitzHash { a, b, diagonals })
    }

    pub fn diagonals(&self) -> u64 {
        self.diagonals
    }

    /// Row `i` of T as a bit mask over input positions.
    pub fn row(&self, i: u32) -> u64 {
        // T[i][j] = t[i − j + a − 1]; j runs 0..a, so t index runs i+a−1 down to i.
        let window = (self.diagonals >> i) & mask(self.a);
        window.reverse_bits() >> (64 - self.a)
    }

    pub fn eval(&self, x: u64) -> u64 {
        (0..self.b).fold(0, |acc, i| acc | ((((self.row(i) & x).count_ones() & 1) as u64) << i))
    }

    pub fn to_hex(&self) -> String {
        bytes_to_hex(self.diagonals, self.a + self.b - 1)
    }

    pub fn from_hex(a: u32, b: u32, s: &str) -> Result<Self, HashError> {
        shape_ok(a, b)?;
        ToeplitzHash::new(a, b, hex_to_u64(s, a + b - 1)?)
    }
}

impl LinearHash {
    pub fn new(a: u32, b: u32, rows: Vec<u64>) -> Result<Self, HashError> {
        shape_ok(a, b)?;
        if rows.len() != b as usize || rows.iter().any(|r| r & !mask(a) != 0) {
            return Err(HashError::Shape("row masks do not fit b × a".into()));
        }
        Ok(LinearHash { a, b, rows })
    }

    pub fn eval(&self, x: u64) -> u64 {
        self.rows.iter().enumerate().fold(0, |acc, (i, r)| acc | ((((r & x).count_ones() & 1) as u64) << i))
    }

    /// Rows concatenated (row 0 in the lowest `a` bits), hex as for Toeplitz.
    pub fn to_hex(&self) -> String {
        let nbits = self.a * self.b;
        let nbytes = nbits.div_ceil(8) as usize;
        let mut bytes = vec![0u8; nbytes];
        for (i, r) in self.rows.iter().enumerate() {
            for j in 0..self.a {
                if r >> j & 1 == 1 {
                    let k = i as u32 * self.a + j;
                    bytes[(k / 8) as usize] |= 1 << (k % 8);
                }
            }
        }
        hex::encode(bytes)
    }

    pub fn from_hex(a: u32, b: u32, s: &str) -> Result<Self, HashError> {
        shape_ok(a, b)?;
        let bytes = hex::decode(s).map_err(|e| HashError::Hex(e.to_string()))?;
        if bytes.len() != (a * b).div_ceil(8) as usize {
            return Err(HashError::Hex("wrong length".into()));
        }
        let bit = |k: u32| bytes[(k / 8) as usize] >> (k % 8) & 1 == 1;
        let rows = (0..b).map(|i| (0..a).fold(0u64, |acc, j| acc | ((bit(i * a + j) as u64) << j))).collect();
        LinearHash::new(a, b, rows)
    }
}

impl ConcreteHash {
    pub fn eval(&self, x: u64) -> u64 {
        match self {
            ConcreteHash::Toeplitz(t) => t.eval(x),
            ConcreteHash::Linear(l) => l.eval(x),
        }
    }

    pub fn domain_bits(&self) -> u32 {
        match self {
            ConcreteHash::Toeplitz(t) => t.a,
            ConcreteHash::Linear(l) => l.a,
        }
    }

    pub fn range_bits(&self) -> u32 {
        match self {
            ConcreteHash::Toeplitz(t) => t.b,
            ConcreteHash::Linear(l) => l.b,
        }
    }

    pub fn kind(&self) -> HashKind {
        match self {
            ConcreteHash::Toeplitz(_) => HashKind::Toeplitz,
            ConcreteHash::Linear(_) => HashKind::AllLinear,
        }
    }

    pub fn to_hex(&self) -> String {
        match self {
            ConcreteHash::Toeplitz(t) => t.to_hex(),
            ConcreteHash::Linear(l) => l.to_hex(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HashRepr {
    kind: HashKind,
    a: u32,
    b: u32,
    hex: String,
}

impl Serialize for ConcreteHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        HashRepr { kind: self.kind(), a: self.domain_bits(), b: self.range_bits(), hex: self.to_hex() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConcreteHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = HashRepr::deserialize(d)?;
        match r.kind {
            HashKind::Toeplitz => ToeplitzHash::from_hex(r.a, r.b, &r.hex).map(ConcreteHash::Toeplitz),
            HashKind::AllLinear => LinearHash::from_hex(r.a, r.b, &r.hex).map(ConcreteHash::Linear),
        }
        .map_err(serde::de::Error::custom)
    }
}

impl HashFamily {
    pub fn toeplitz(a: u32, b: u32) -> Self {
        HashFamily { a, b, kind: HashKind::Toeplitz, seed: 0 }
    }

    pub fn all_linear(a: u32, b: u32) -> Self {
        HashFamily { a, b, kind: HashKind::AllLinear, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// log2 of the number of family members.
    pub fn size_log2(&self) -> u32 {
        match self.kind {
            HashKind::Toeplitz => self.a + self.b - 1,
            HashKind::AllLinear => self.a * self.b,
        }
    }

    pub fn is_enumerable(&self) -> bool {
        self.size_log2() <= MAX_EXACT_LOG2
    }

    /// Member number `k`; the index bits are the Toeplitz diagonals, or the
    /// row masks concatenated with row 0 lowest.
    pub fn member(&self, k: u64) -> ConcreteHash {
        match self.kind {
            HashKind::Toeplitz => ConcreteHash::Toeplitz(ToeplitzHash { a: self.a, b: self.b, diagonals: k }),
            HashKind::AllLinear => ConcreteHash::Linear(LinearHash {
                a: self.a,
                b: self.b,
                rows: (0..self.b).map(|i| (k >> (i * self.a)) & mask(self.a)).collect(),
            }),
        }
    }

    /// Every member once, in index order. Lazy.
    pub fn enumerate(&self) -> Result<impl Iterator<Item = ConcreteHash> + '_, HashError> {
        shape_ok(self.a, self.b)?;
        if !self.is_enumerable() {
            return Err(HashError::FamilyTooLarge(self.size_log2()));
        }
        Ok((0..(1u64 << self.size_log2())).map(move |k| self.member(k)))
    }

    /// `n` independent uniform draws, deterministic in `seed`.
    pub fn sample(&self, n: usize) -> Result<Vec<ConcreteHash>, HashError> {
        shape_ok(self.a, self.b)?;
        let mut rng = Rng::new(self.seed);
        let bits = self.size_log2();
        Ok((0..n)
            .map(|_| match self.kind {
                HashKind::Toeplitz => self.member(rng.next_u64() & mask(bits)),
                HashKind::AllLinear => ConcreteHash::Linear(LinearHash {
                    a: self.a,
                    b: self.b,
                    rows: (0..self.b).map(|_| rng.next_u64() & mask(self.a)).collect(),
                }),
            })
            .collect())
    }

    pub fn members(&self, mode: Mode) -> Result<Vec<ConcreteHash>, HashError> {
        match mode {
            Mode::Exact => Ok(self.enumerate()?.collect()),
            Mode::Sample { n } => self.sample(n),
        }
    }

    /// Exact collision counts: the maximum over pairs `x ≠ y` of
    /// `#{f : f(x) = f(y)}`, with the family size. Two-universality holds
    /// iff `max · 2^b ≤ size`.
    pub fn max_collisions(&self) -> Result<(u64, u64), HashError> {
        let size = 1u64 << self.size_log2();
        let n = 1u64 << self.a;
        let members: Vec<ConcreteHash> = self.enumerate()?.collect();
        let mut worst = 0;
        for x in 0..n {
            for y in (x + 1)..n {
                let c = members.iter().filter(|f| f.eval(x) == f.eval(y)).count() as u64;
                worst = worst.max(c);
            }
        }
        Ok((worst, size))
    }
}

/// `(T_f ω)[k] = Σ_{f(x) = k} ω[x]` with the alphabet position read as `x`.
pub fn apply_tf(f: &ConcreteHash, omega: &CqState) -> Result<CqState, HashError> {
    let a = f.domain_bits();
    if omega.len() != 1usize << a {
        return Err(HashError::AlphabetMismatch { got: omega.len(), a });
    }
    let nk = 1usize << f.range_bits();
    let b = omega.b_algebra().clone();
    let mut parts: Vec<State> = (0..nk).map(|_| State::zero(&b)).collect();
    for (x, part) in omega.parts().iter().enumerate() {
        let k = f.eval(x as u64) as usize;
        parts[k] = parts[k].add(part).expect("parts share the B algebra");
    }
    Ok(CqState::indexed(parts).expect("hashed parts form a cq-state"))
}
