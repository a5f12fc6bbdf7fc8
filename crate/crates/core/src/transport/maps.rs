use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{BitString, DyadicInterval, SetExpr, SpaceModel};

/// Measure-preserving relabelings between the dyadic models.
///
/// `F` sends the unit interval to Cantor space (a dyadic interval `[k/2^n, (k+1)/2^n)`
/// becomes the cylinder of the `n`-bit word of `k`), `L` is its inverse; `G`
/// interleaves `⟨x⟩×⟨y⟩` into `⟨x(1) y(1) x(2) y(2) …⟩`, `Ginv` splits; `T` applies
/// `F` to the second factor of a product and `Tinv` undoes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapTag {
    F,
    L,
    G,
    Ginv,
    T,
    Tinv,
}

impl MapTag {
    pub fn inverse(self) -> MapTag {
        match self {
            MapTag::F => MapTag::L,
            MapTag::L => MapTag::F,
            MapTag::G => MapTag::Ginv,
            MapTag::Ginv => MapTag::G,
            MapTag::T => MapTag::Tinv,
            MapTag::Tinv => MapTag::T,
        }
    }

    pub fn domain(self) -> SpaceModel {
        use SpaceModel::*;
        match self {
            MapTag::F => UnitInterval,
            MapTag::L => CantorSpace,
            MapTag::G => SpaceModel::product(CantorSpace, CantorSpace),
            MapTag::Ginv => CantorSpace,
            MapTag::T => SpaceModel::product(CantorSpace, UnitInterval),
            MapTag::Tinv => SpaceModel::product(CantorSpace, CantorSpace),
        }
    }

    pub fn codomain(self) -> SpaceModel {
        self.inverse().domain()
    }
}

impl fmt::Display for MapTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MapTag::F => "F",
            MapTag::L => "L",
            MapTag::G => "G",
            MapTag::Ginv => "Ginv",
            MapTag::T => "T",
            MapTag::Tinv => "Tinv",
        };
        f.write_str(s)
    }
}

impl FromStr for MapTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "F" => MapTag::F,
            "L" => MapTag::L,
            "G" => MapTag::G,
            "Ginv" | "G-1" => MapTag::Ginv,
            "T" => MapTag::T,
            "Tinv" | "T-1" => MapTag::Tinv,
            _ => return Err(Error::Parse(format!("unknown map {s:?}"))),
        })
    }
}

/// Appends `tag` to a chain ending in `space`, cancelling an adjacent inverse.
pub fn push_map(chain: &mut Vec<MapTag>, space: &SpaceModel, tag: MapTag) -> Result<SpaceModel> {
    if tag.domain() != *space {
        return Err(Error::ModelMismatch(format!("map {tag} expects {}, witness lives on {space}", tag.domain())));
    }
    if chain.last() == Some(&tag.inverse()) {
        chain.pop();
    } else {
        chain.push(tag);
    }
    Ok(tag.codomain())
}

fn unsupported(tag: MapTag, s: &SetExpr) -> Error {
    Error::UnsupportedLeaf(format!("map {tag} cannot relabel {}", s.to_json()))
}

/// Splits `⟨a⟩×⟨b⟩` until the stems have equal-or-adjacent lengths, then
/// interleaves each piece.
fn interleave_rect(a: &BitString, b: &BitString, out: &mut Vec<SetExpr>) {
    let (la, lb) = (a.level(), b.level());
    if la < lb {
        for bit in [false, true] {
            interleave_rect(&a.child(bit), b, out);
        }
    } else if la > lb + 1 {
        for bit in [false, true] {
            interleave_rect(a, &b.child(bit), out);
        }
    } else {
        out.push(SetExpr::Cylinder(BitString::interleave(a, b).expect("lengths balanced")));
    }
}

fn single_or_union(mut v: Vec<SetExpr>) -> SetExpr {
    if v.len() == 1 {
        v.pop().unwrap()
    } else {
        SetExpr::Union(v)
    }
}

/// Image of a descriptor under `tag`, leaf by leaf; masses are preserved exactly.
///
/// Carrier leaves are ledger references and keep their identity: the map
/// relabels the space they live in, recorded on the witness chain.
pub fn map_set(tag: MapTag, s: &SetExpr) -> Result<SetExpr> {
    use SetExpr::*;
    Ok(match (tag, s) {
        (_, Union(xs)) => Union(xs.iter().map(|x| map_set(tag, x)).collect::<Result<_>>()?),
        (_, Carrier(c)) => Carrier(c.clone()),
        (MapTag::F, Dyadic(d)) if d.block == 0 => Cylinder(d.cell.clone()),
        (MapTag::L, Cylinder(c)) => Dyadic(DyadicInterval::in_block(0, c.clone())),
        (MapTag::G, Rectangle(a, b)) => match (a.as_ref(), b.as_ref()) {
            (Cylinder(x), Cylinder(y)) => {
                let mut out = vec![];
                interleave_rect(x, y, &mut out);
                single_or_union(out)
            }
            _ => return Err(unsupported(tag, s)),
        },
        (MapTag::Ginv, Cylinder(c)) => {
            let (x, y) = c.deinterleave();
            Rectangle(Box::new(Cylinder(x)), Box::new(Cylinder(y)))
        }
        (MapTag::T, Rectangle(a, b)) => Rectangle(a.clone(), Box::new(map_set(MapTag::F, b)?)),
        (MapTag::Tinv, Rectangle(a, b)) => Rectangle(a.clone(), Box::new(map_set(MapTag::L, b)?)),
        _ => return Err(unsupported(tag, s)),
    })
}

/// A π-base element of the domain of `tag` whose image lies inside `u`.
fn preimage_cell(tag: MapTag, u: &SetExpr) -> Result<SetExpr> {
    let mut pre = map_set(tag.inverse(), u)?;
    while let SetExpr::Union(mut xs) = pre {
        if xs.is_empty() {
            return Err(unsupported(tag, u));
        }
        pre = xs.swap_remove(0);
    }
    Ok(pre)
}

/// A native π-base element whose image under `chain` lies inside `u`.
pub fn pull_back_cell(chain: &[MapTag], u: &SetExpr) -> Result<SetExpr> {
    let mut cur = u.clone();
    for &tag in chain.iter().rev() {
        cur = preimage_cell(tag, &cur)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyl(s: &str) -> SetExpr {
        SetExpr::Cylinder(s.parse().unwrap())
    }

    #[test]
    fn binary_relabeling() {
        let d = SetExpr::Dyadic(DyadicInterval::new(3, 5));
        assert_eq!(map_set(MapTag::F, &d).unwrap(), cyl("101"));
        assert_eq!(map_set(MapTag::L, &cyl("101")).unwrap(), d);
        assert!(matches!(map_set(MapTag::F, &cyl("1")), Err(Error::UnsupportedLeaf(_))));
    }

    #[test]
    fn interleaving() {
        let r = SetExpr::Rectangle(Box::new(cyl("10")), Box::new(cyl("01")));
        assert_eq!(map_set(MapTag::G, &r).unwrap(), cyl("1001"));
        let whole = SetExpr::Rectangle(Box::new(cyl("")), Box::new(cyl("")));
        assert_eq!(map_set(MapTag::G, &whole).unwrap(), cyl(""));
        // unbalanced stems are padded by splitting
        let r = SetExpr::Rectangle(Box::new(cyl("")), Box::new(cyl("11")));
        let img = map_set(MapTag::G, &r).unwrap();
        assert_eq!(img.measure(), r.measure());
        assert!(matches!(img, SetExpr::Union(ref v) if v.len() == 4));
    }

    #[test]
    fn pull_back_through_chain() {
        // chain F then Ginv: a rectangle in Cantor² pulls back to a unit-interval cell
        let u = SetExpr::Rectangle(Box::new(cyl("1")), Box::new(cyl("")));
        let c = pull_back_cell(&[MapTag::F, MapTag::Ginv], &u).unwrap();
        assert_eq!(c, SetExpr::Dyadic(DyadicInterval::new(1, 1)));
    }
}
