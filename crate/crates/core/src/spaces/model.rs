use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cell::{BitString, DyadicInterval};
use super::setexpr::SetExpr;
use crate::error::{Error, Result};

/// The concrete measure spaces the constructions run on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SpaceModel {
    /// `[0,1)` with Lebesgue measure.
    UnitInterval,
    /// `[0,∞)` with Lebesgue measure.
    HalfLine,
    /// `{0,1}^ℕ` with the coin-tossing measure.
    CantorSpace,
    /// `ℕ` with counting measure (discrete, not atomless).
    CountingN,
    Product(Box<SpaceModel>, Box<SpaceModel>),
}

/// Index into a model's countable π-base.
pub type BaseIndex = u64;

impl SpaceModel {
    pub fn product(l: SpaceModel, r: SpaceModel) -> Self {
        SpaceModel::Product(Box::new(l), Box::new(r))
    }

    pub fn is_atomless(&self) -> bool {
        match self {
            SpaceModel::CountingN => false,
            SpaceModel::Product(l, r) => l.is_atomless() && r.is_atomless(),
            _ => true,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SpaceModel::UnitInterval | SpaceModel::CantorSpace => true,
            SpaceModel::HalfLine | SpaceModel::CountingN => false,
            SpaceModel::Product(l, r) => l.is_finite() && r.is_finite(),
        }
    }

    /// The `n`-th π-base element under the fixed enumeration.
    ///
    /// Unit interval and Cantor space: level-major, left to right, `n = 2^k - 1 + j`.
    /// Every nonvoid open set contains a dyadic interval (cylinder), so these form a π-base.
    /// Half line: `n = pair(b, i)` for the `i`-th unit-interval element shifted into `[b, b+1)`.
    /// Counting measure: singletons. Products: rectangles over `n = pair(a, b)`.
    pub fn enumerate_base(&self, n: BaseIndex) -> SetExpr {
        match self {
            SpaceModel::UnitInterval => SetExpr::Dyadic(DyadicInterval::in_block(0, cell_of(n))),
            SpaceModel::CantorSpace => SetExpr::Cylinder(cell_of(n)),
            SpaceModel::HalfLine => {
                let (b, i) = unpair(n);
                SetExpr::Dyadic(DyadicInterval::in_block(b, cell_of(i)))
            }
            SpaceModel::CountingN => SetExpr::IndexSet(vec![n]),
            SpaceModel::Product(l, r) => {
                let (a, b) = unpair(n);
                SetExpr::Rectangle(Box::new(l.enumerate_base(a)), Box::new(r.enumerate_base(b)))
            }
        }
    }

    /// Inverse of [`Self::enumerate_base`] on π-base elements.
    pub fn base_index(&self, s: &SetExpr) -> Option<BaseIndex> {
        match (self, s) {
            (SpaceModel::UnitInterval, SetExpr::Dyadic(d)) if d.block == 0 => Some(index_of(&d.cell)),
            (SpaceModel::CantorSpace, SetExpr::Cylinder(c)) => Some(index_of(c)),
            (SpaceModel::HalfLine, SetExpr::Dyadic(d)) => Some(pair(d.block, index_of(&d.cell))),
            (SpaceModel::CountingN, SetExpr::IndexSet(v)) if v.len() == 1 => Some(v[0]),
            (SpaceModel::Product(l, r), SetExpr::Rectangle(a, b)) => {
                Some(pair(l.base_index(a)?, r.base_index(b)?))
            }
            _ => None,
        }
    }

    /// The whole space as a set expression, when it is a single π-base element.
    pub fn whole(&self) -> Option<SetExpr> {
        match self {
            SpaceModel::UnitInterval | SpaceModel::CantorSpace => Some(self.enumerate_base(0)),
            SpaceModel::Product(l, r) => Some(SetExpr::Rectangle(Box::new(l.whole()?), Box::new(r.whole()?))),
            _ => None,
        }
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

/// Level-major index of a dyadic cell: `2^k - 1 + j`.
pub fn index_of(c: &BitString) -> u64 {
    (1u64 << c.level()) - 1 + c.index()
}

/// The dyadic cell with level-major index `n`.
pub fn cell_of(n: u64) -> BitString {
    let k = 63 - (n + 1).leading_zeros();
    BitString::from_index(k, n + 1 - (1u64 << k))
}

/// Cantor pairing `(a+b)(a+b+1)/2 + b`.
pub fn pair(a: u64, b: u64) -> u64 {
    let s = a + b;
    s * (s + 1) / 2 + b
}

pub fn unpair(n: u64) -> (u64, u64) {
    let w = (((8 * n as u128 + 1) as f64).sqrt() as u64).saturating_sub(1) / 2;
    // correct floating point drift
    let mut w = w;
    while (w + 1) * (w + 2) / 2 <= n {
        w += 1;
    }
    while w * (w + 1) / 2 > n {
        w -= 1;
    }
    let t = w * (w + 1) / 2;
    let b = n - t;
    (w - b, b)
}

impl fmt::Display for SpaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceModel::UnitInterval => write!(f, "unit-interval"),
            SpaceModel::HalfLine => write!(f, "half-line"),
            SpaceModel::CantorSpace => write!(f, "cantor"),
            SpaceModel::CountingN => write!(f, "counting"),
            SpaceModel::Product(l, r) => write!(f, "product({l},{r})"),
        }
    }
}

impl FromStr for SpaceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit-interval" => Ok(SpaceModel::UnitInterval),
            "half-line" => Ok(SpaceModel::HalfLine),
            "cantor" => Ok(SpaceModel::CantorSpace),
            "counting" => Ok(SpaceModel::CountingN),
            _ => {
                let inner = s
                    .strip_prefix("product(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Parse(format!("unknown space {s:?}")))?;
                // split at the top-level comma
                let mut depth = 0;
                for (i, c) in inner.char_indices() {
                    match c {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        ',' if depth == 0 => {
                            return Ok(SpaceModel::product(inner[..i].parse()?, inner[i + 1..].parse()?));
                        }
                        _ => {}
                    }
                }
                Err(Error::Parse(format!("bad product space {s:?}")))
            }
        }
    }
}

impl Serialize for SpaceModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SpaceModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;

    #[test]
    fn enumeration_examples() {
        let u = SpaceModel::UnitInterval;
        let e0 = u.enumerate_base(0);
        assert_eq!(e0, SetExpr::Dyadic(DyadicInterval::new(0, 0)));
        match u.enumerate_base(4) {
            SetExpr::Dyadic(d) => {
                assert_eq!((d.start(), d.end()), (rat(1, 4), rat(1, 2)));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(SpaceModel::CantorSpace.enumerate_base(2), SetExpr::Cylinder("1".parse().unwrap()));
        assert_eq!(SpaceModel::CantorSpace.enumerate_base(1), SetExpr::Cylinder("0".parse().unwrap()));
    }

    #[test]
    fn pairing_is_bijective() {
        for n in 0..5000 {
            let (a, b) = unpair(n);
            assert_eq!(pair(a, b), n);
        }
        let big = 1u64 << 40;
        assert_eq!(pair(unpair(big).0, unpair(big).1), big);
    }

    #[test]
    fn base_enumeration_covers_each_level_once() {
        let u = SpaceModel::UnitInterval;
        let depth = 6;
        let mut seen = std::collections::BTreeSet::new();
        for k in 0..=depth {
            for c in BitString::all_of_level(k) {
                let s = SetExpr::Dyadic(DyadicInterval::in_block(0, c));
                let n = u.base_index(&s).unwrap();
                assert!(n <= (1 << (depth + 1)) - 2);
                assert_eq!(u.enumerate_base(n), s);
                assert!(seen.insert(n));
            }
        }
    }

    #[test]
    fn space_tags_roundtrip() {
        for s in [
            SpaceModel::UnitInterval,
            SpaceModel::product(SpaceModel::CantorSpace, SpaceModel::product(SpaceModel::HalfLine, SpaceModel::CountingN)),
        ] {
            assert_eq!(s.to_string().parse::<SpaceModel>().unwrap(), s);
        }
    }
}
