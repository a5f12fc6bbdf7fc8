use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::rational::{self, Rational};

/// A closed rational interval `[lo, hi]` known to contain some target value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    lo: Rational,
    hi: Rational,
}

impl Enclosure {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "enclosure with lo > hi");
        Self { lo, hi }
    }

    pub fn exact(v: Rational) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Self::exact(Rational::zero())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rational {
        (&self.lo + &self.hi) / rational::int(2)
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains_enclosure(&self, other: &Enclosure) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Enclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Intersection of two enclosures of the same value.
    pub fn intersect(&self, other: &Enclosure) -> Enclosure {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        assert!(lo <= hi, "disjoint enclosures of one value");
        Enclosure { lo, hi }
    }

    pub fn add(&self, other: &Enclosure) -> Enclosure {
        Enclosure { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    pub fn add_rational(&self, r: &Rational) -> Enclosure {
        Enclosure { lo: &self.lo + r, hi: &self.hi + r }
    }

    pub fn scale(&self, r: &Rational) -> Enclosure {
        if r.is_negative() {
            Enclosure { lo: &self.hi * r, hi: &self.lo * r }
        } else {
            Enclosure { lo: &self.lo * r, hi: &self.hi * r }
        }
    }

    /// Product of two enclosures with non-negative bounds.
    pub fn mul_nonneg(&self, other: &Enclosure) -> Enclosure {
        debug_assert!(!self.lo.is_negative() && !other.lo.is_negative());
        Enclosure { lo: &self.lo * &other.lo, hi: &self.hi * &other.hi }
    }

    /// Reciprocal of a strictly positive enclosure.
    pub fn recip(&self) -> Enclosure {
        assert!(self.lo.is_positive());
        Enclosure { lo: self.hi.recip(), hi: self.lo.recip() }
    }

    /// Outward rounding onto the dyadic grid `2^-bits`.
    pub fn round_out(&self, bits: u32) -> Enclosure {
        Enclosure {
            lo: rational::round_down(&self.lo, bits),
            hi: rational::round_up(&self.hi, bits),
        }
    }

    /// Enclosure of `v^(1/p)` for non-negative `v` in `self`.
    pub fn root(&self, p: &Rational, bits: u32) -> Enclosure {
        use super::posreal::ExactPosReal;
        let inv = p.recip();
        let lo = if self.lo.is_positive() {
            ExactPosReal::from_rational(self.lo.clone()).pow(&inv).enclose(bits).lo().clone()
        } else {
            Rational::zero()
        };
        let hi = if self.hi.is_positive() {
            ExactPosReal::from_rational(self.hi.clone()).pow(&inv).enclose(bits).hi().clone()
        } else {
            Rational::zero()
        };
        Enclosure { lo, hi }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains_one(&self) -> bool {
        self.contains(&Rational::one())
    }
}

#[derive(Serialize, Deserialize)]
struct EnclosureRepr {
    lo: String,
    hi: String,
}

impl Serialize for Enclosure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        EnclosureRepr { lo: rational::render(&self.lo), hi: rational::render(&self.hi) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Enclosure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = EnclosureRepr::deserialize(d)?;
        let lo = rational::parse(&r.lo).map_err(serde::de::Error::custom)?;
        let hi = rational::parse(&r.hi).map_err(serde::de::Error::custom)?;
        if lo > hi {
            return Err(serde::de::Error::custom("enclosure lo > hi"));
        }
        Ok(Enclosure { lo, hi })
    }
}
