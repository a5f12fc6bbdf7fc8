use std::fmt;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};

/// A finite 0/1 word. Names both the cylinder `⟨s⟩` and the dyadic interval
/// `[k/2^n, (k+1)/2^n)` with `n = |s|` and `k` the binary value of `s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// The word of length `level` whose binary value is `index`.
    pub fn from_index(level: u32, index: u64) -> Self {
        assert!(level <= 63, "dyadic level above 63 is not addressable by index");
        assert!(level == 63 || index < (1u64 << level), "index out of range for level");
        let bits = (0..level).map(|i| (index >> (level - 1 - i)) & 1 == 1).collect();
        Self { bits }
    }

    pub fn level(&self) -> u32 {
        self.bits.len() as u32
    }

    /// Binary value, `k = s(n) + 2 s(n-1) + ... + 2^(n-1) s(1)`.
    pub fn index(&self) -> u64 {
        assert!(self.bits.len() <= 64, "dyadic level above 64 has no u64 index");
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.bits.len() <= other.bits.len() && other.bits[..self.bits.len()] == self.bits[..]
    }

    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn child(&self, bit: bool) -> BitString {
        let mut b = self.bits.clone();
        b.push(bit);
        Self { bits: b }
    }

    pub fn extend(&self, tail: &[bool]) -> BitString {
        let mut b = self.bits.clone();
        b.extend_from_slice(tail);
        Self { bits: b }
    }

    pub fn parent(&self) -> Option<BitString> {
        if self.bits.is_empty() {
            None
        } else {
            Some(Self { bits: self.bits[..self.bits.len() - 1].to_vec() })
        }
    }

    /// Left endpoint of the dyadic interval.
    pub fn start(&self) -> Rational {
        let k = self.bits.iter().fold(num_bigint::BigInt::from(0), |acc, &b| (acc << 1) + b as u8);
        Rational::from_integer(k) * pow2(-(self.level() as i64))
    }

    pub fn end(&self) -> Rational {
        self.start() + self.measure()
    }

    /// `2^-|s|`.
    pub fn measure(&self) -> Rational {
        pow2(-(self.level() as i64))
    }

    /// Bits at odd positions (1st, 3rd, ...) and at even positions.
    pub fn deinterleave(&self) -> (BitString, BitString) {
        let x = self.bits.iter().step_by(2).copied().collect();
        let y = self.bits.iter().skip(1).step_by(2).copied().collect();
        (Self { bits: x }, Self { bits: y })
    }

    /// `(x(1), y(1), x(2), y(2), ...)`; requires `|x| - |y| ∈ {0, 1}`.
    pub fn interleave(x: &BitString, y: &BitString) -> Option<BitString> {
        let (a, b) = (x.bits.len(), y.bits.len());
        if a != b && a != b + 1 {
            return None;
        }
        let mut bits = Vec::with_capacity(a + b);
        for i in 0..a {
            bits.push(x.bits[i]);
            if i < b {
                bits.push(y.bits[i]);
            }
        }
        Some(Self { bits })
    }

    /// All words of the given length, in lexicographic order.
    pub fn all_of_level(level: u32) -> impl Iterator<Item = BitString> {
        (0..(1u64 << level)).map(move |j| BitString::from_index(level, j))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad bit string {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `[block + j/2^k, block + (j+1)/2^k)`. `block` is 0 on the unit interval.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    pub block: u64,
    pub cell: BitString,
}

impl DyadicInterval {
    pub fn new(k: u32, j: u64) -> Self {
        Self { block: 0, cell: BitString::from_index(k, j) }
    }

    pub fn in_block(block: u64, cell: BitString) -> Self {
        Self { block, cell }
    }

    pub fn level(&self) -> u32 {
        self.cell.level()
    }

    pub fn index(&self) -> u64 {
        self.cell.index()
    }

    pub fn start(&self) -> Rational {
        rational::int(self.block as i64) + self.cell.start()
    }

    pub fn end(&self) -> Rational {
        self.start() + self.cell.measure()
    }

    pub fn measure(&self) -> Rational {
        self.cell.measure()
    }

    pub fn contains(&self, other: &DyadicInterval) -> bool {
        self.block == other.block && self.cell.is_prefix_of(&other.cell)
    }

    pub fn disjoint(&self, other: &DyadicInterval) -> bool {
        self.block != other.block || !self.cell.comparable(&other.cell)
    }

    pub fn is_unit(&self) -> bool {
        self.measure().is_one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_measure() {
        let s: BitString = "101".parse().unwrap();
        assert_eq!(s.index(), 5);
        assert_eq!(BitString::from_index(3, 5), s);
        assert_eq!(s.start(), rational::rat(5, 8));
        assert_eq!(s.measure(), rational::rat(1, 8));
    }

    #[test]
    fn interleave_examples() {
        let x: BitString = "10".parse().unwrap();
        let y: BitString = "01".parse().unwrap();
        let z = BitString::interleave(&x, &y).unwrap();
        assert_eq!(z.to_string(), "1001");
        assert_eq!(z.deinterleave(), (x, y));
        let e = BitString::empty();
        assert_eq!(BitString::interleave(&e, &e).unwrap(), e);
        assert!(BitString::interleave(&e, &"1".parse().unwrap()).is_none());
    }
}
