use num_traits::Zero;
use serde_json::{json, Map, Value};

use super::cell::{BitString, DyadicInterval};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};

/// A piece of a ledger allocation.
///
/// The allocation owns a nowhere-dense body inside the dyadic cell `host`; the
/// body is split in the measure algebra along `path` (child `i` of a node gets
/// a fixed share of the node). Two references into one allocation
/// are disjoint iff neither path is a prefix of the other. References into
/// different allocations of one ledger are always disjoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CarrierRef {
    pub ledger: u64,
    pub alloc: u32,
    pub host: DyadicInterval,
    pub path: Vec<u32>,
    pub mass: Rational,
}

impl CarrierRef {
    pub fn child(&self, i: u32, share: &Rational) -> CarrierRef {
        let mut path = self.path.clone();
        path.push(i);
        CarrierRef {
            ledger: self.ledger,
            alloc: self.alloc,
            host: self.host.clone(),
            path,
            mass: &self.mass * share,
        }
    }

    fn path_prefix_of(&self, other: &CarrierRef) -> bool {
        self.path.len() <= other.path.len() && other.path[..self.path.len()] == self.path[..]
    }

    fn same_alloc(&self, other: &CarrierRef) -> bool {
        self.ledger == other.ledger && self.alloc == other.alloc
    }
}

/// A contiguous run of a block stream.
///
/// Stream `s` enumerates the units `pair(s, t)`, `t = 0, 1, ...`: points on the
/// counting model, and the bulk carrier (mass `unit`) of the block
/// `[pair(s,t), pair(s,t) + 1/2)` on the half line.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Run {
    pub ledger: u64,
    pub stream: u64,
    pub start: u64,
    pub len: u64,
    pub unit: Rational,
}

impl Run {
    fn disjoint(&self, other: &Run) -> Option<bool> {
        if self.ledger != other.ledger {
            return None;
        }
        Some(
            self.stream != other.stream
                || self.start + self.len <= other.start
                || other.start + other.len <= self.start,
        )
    }

    pub fn units(&self) -> impl Iterator<Item = u64> + '_ {
        (self.start..self.start + self.len).map(|t| super::model::pair(self.stream, t))
    }
}

/// Symbolic measurable set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SetExpr {
    Dyadic(DyadicInterval),
    Cylinder(BitString),
    Carrier(CarrierRef),
    Run(Run),
    Rectangle(Box<SetExpr>, Box<SetExpr>),
    /// Finite set of naturals (counting model).
    IndexSet(Vec<u64>),
    /// Union asserted to be disjoint.
    Union(Vec<SetExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flavor {
    Line,
    Cantor,
    Counting,
    Product,
    Any,
}

impl SetExpr {
    fn flavor(&self) -> Flavor {
        match self {
            SetExpr::Dyadic(_) | SetExpr::Carrier(_) => Flavor::Line,
            SetExpr::Cylinder(_) => Flavor::Cantor,
            SetExpr::IndexSet(_) => Flavor::Counting,
            SetExpr::Rectangle(..) => Flavor::Product,
            SetExpr::Run(_) | SetExpr::Union(_) => Flavor::Any,
        }
    }

    /// Exact measure. Carrier pieces have exact dyadic masses by construction.
    pub fn measure(&self) -> Rational {
        match self {
            SetExpr::Dyadic(d) => d.measure(),
            SetExpr::Cylinder(c) => c.measure(),
            SetExpr::Carrier(c) => c.mass.clone(),
            SetExpr::Run(r) => &r.unit * rational::int(r.len as i64),
            SetExpr::Rectangle(a, b) => a.measure() * b.measure(),
            SetExpr::IndexSet(v) => rational::int(v.len() as i64),
            SetExpr::Union(ch) => ch.iter().fold(Rational::zero(), |acc, c| acc + c.measure()),
        }
    }

    /// `outer ⊇ inner`.
    ///
    /// Exact on pairs of leaves of one kind. For unions it is conservative:
    /// an inner union is contained when every child is, an outer union contains
    /// whatever one of its children contains.
    pub fn contains(&self, inner: &SetExpr) -> Result<bool> {
        let (fo, fi) = (self.flavor(), inner.flavor());
        if fo != fi && fo != Flavor::Any && fi != Flavor::Any {
            return Err(Error::IncomparableModels);
        }
        Ok(match (self, inner) {
            (_, SetExpr::Union(ch)) => {
                for c in ch {
                    if !self.contains(c)? {
                        return Ok(false);
                    }
                }
                true
            }
            (SetExpr::Union(ch), _) => {
                for c in ch {
                    if c.contains(inner)? {
                        return Ok(true);
                    }
                }
                false
            }
            (SetExpr::Dyadic(a), SetExpr::Dyadic(b)) => a.contains(b),
            (SetExpr::Dyadic(a), SetExpr::Carrier(c)) => a.contains(&c.host),
            (SetExpr::Carrier(a), SetExpr::Carrier(b)) => a.same_alloc(b) && a.path_prefix_of(b),
            (SetExpr::Carrier(_), SetExpr::Dyadic(_)) => false,
            (SetExpr::Cylinder(a), SetExpr::Cylinder(b)) => a.is_prefix_of(b),
            (SetExpr::IndexSet(a), SetExpr::IndexSet(b)) => b.iter().all(|x| a.contains(x)),
            (SetExpr::IndexSet(a), SetExpr::Run(r)) => r.units().all(|x| a.contains(&x)),
            (SetExpr::Run(a), SetExpr::Run(b)) => {
                a.ledger == b.ledger
                    && a.stream == b.stream
                    && a.start <= b.start
                    && b.start + b.len <= a.start + a.len
            }
            (SetExpr::Dyadic(d), SetExpr::Run(r)) => {
                // bulk of block b lives in [b, b + 1/2)
                r.units().all(|b| d.block == b && d.cell.bits().first().is_none_or(|x| !x) && d.level() <= 1)
            }
            (SetExpr::Rectangle(a1, b1), SetExpr::Rectangle(a2, b2)) => a1.contains(a2)? && b1.contains(b2)?,
            _ => false,
        })
    }

    /// `Some(true)` when disjointness follows from the descriptors (or ledger
    /// facts), `Some(false)` when the sets provably meet, `None` when undecided.
    pub fn disjoint(&self, other: &SetExpr) -> Option<bool> {
        match (self, other) {
            (SetExpr::Union(ch), o) | (o, SetExpr::Union(ch)) => {
                let mut all = true;
                for c in ch {
                    match c.disjoint(o) {
                        Some(true) => {}
                        Some(false) => return Some(false),
                        None => all = false,
                    }
                }
                if all {
                    Some(true)
                } else {
                    None
                }
            }
            (SetExpr::Dyadic(a), SetExpr::Dyadic(b)) => Some(a.disjoint(b)),
            (SetExpr::Cylinder(a), SetExpr::Cylinder(b)) => Some(!a.comparable(b)),
            (SetExpr::Carrier(a), SetExpr::Carrier(b)) => {
                if a.ledger != b.ledger {
                    if a.host.disjoint(&b.host) {
                        Some(true)
                    } else {
                        None
                    }
                } else if a.alloc != b.alloc {
                    Some(true)
                } else {
                    Some(!(a.path_prefix_of(b) || b.path_prefix_of(a)))
                }
            }
            (SetExpr::Carrier(c), SetExpr::Dyadic(d)) | (SetExpr::Dyadic(d), SetExpr::Carrier(c)) => {
                if c.host.disjoint(d) {
                    Some(true)
                } else if d.contains(&c.host) {
                    Some(false)
                } else {
                    None
                }
            }
            (SetExpr::Run(a), SetExpr::Run(b)) => a.disjoint(b),
            // bulk allocations are never handed out as carriers
            (SetExpr::Run(r), SetExpr::Carrier(c)) | (SetExpr::Carrier(c), SetExpr::Run(r)) => {
                if r.ledger == c.ledger {
                    Some(true)
                } else {
                    None
                }
            }
            (SetExpr::IndexSet(a), SetExpr::IndexSet(b)) => Some(!a.iter().any(|x| b.contains(x))),
            (SetExpr::IndexSet(a), SetExpr::Run(r)) | (SetExpr::Run(r), SetExpr::IndexSet(a)) => {
                Some(!r.units().any(|x| a.contains(&x)))
            }
            (SetExpr::Rectangle(a1, b1), SetExpr::Rectangle(a2, b2)) => {
                match (a1.disjoint(a2), b1.disjoint(b2)) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let (ty, params, children): (&str, Value, Vec<Value>) = match self {
            SetExpr::Dyadic(d) => {
                let mut m = Map::new();
                m.insert("k".into(), json!(d.level()));
                m.insert("j".into(), json!(d.index()));
                if d.block != 0 {
                    m.insert("block".into(), json!(d.block));
                }
                ("dyadic", Value::Object(m), vec![])
            }
            SetExpr::Cylinder(c) => ("cylinder", json!({ "stem": c.to_string() }), vec![]),
            SetExpr::Carrier(c) => (
                "carrier",
                json!({
                    "ledger": format!("{:016x}", c.ledger),
                    "alloc": c.alloc,
                    "host": SetExpr::Dyadic(c.host.clone()).to_json(),
                    "path": c.path,
                    "mass": rational::render(&c.mass),
                }),
                vec![],
            ),
            SetExpr::Run(r) => (
                "run",
                json!({
                    "ledger": format!("{:016x}", r.ledger),
                    "stream": r.stream,
                    "start": r.start,
                    "len": r.len,
                    "unit": rational::render(&r.unit),
                }),
                vec![],
            ),
            SetExpr::Rectangle(a, b) => ("rectangle", json!({}), vec![a.to_json(), b.to_json()]),
            SetExpr::IndexSet(v) => ("index-set", json!({ "points": v }), vec![]),
            SetExpr::Union(ch) => ("union", json!({}), ch.iter().map(|c| c.to_json()).collect()),
        };
        json!({ "type": ty, "params": params, "children": children })
    }

    pub fn from_json(v: &Value) -> Result<SetExpr> {
        let bad = |what: &str| Error::Schema(format!("set expression: {what}"));
        let ty = v.get("type").and_then(Value::as_str).ok_or_else(|| bad("missing type"))?;
        let params = v.get("params").ok_or_else(|| bad("missing params"))?;
        let children: Vec<SetExpr> = match v.get("children") {
            Some(Value::Array(a)) => a.iter().map(SetExpr::from_json).collect::<Result<_>>()?,
            None => vec![],
            _ => return Err(bad("children must be an array")),
        };
        let u64_of = |k: &str| params.get(k).and_then(Value::as_u64).ok_or_else(|| bad(k));
        let str_of = |k: &str| params.get(k).and_then(Value::as_str).ok_or_else(|| bad(k));
        let hex_of = |k: &str| -> Result<u64> {
            u64::from_str_radix(str_of(k)?, 16).map_err(|_| bad(k))
        };
        Ok(match ty {
            "dyadic" => {
                let k = u64_of("k")? as u32;
                if k > 63 {
                    return Err(bad("level too deep"));
                }
                let j = u64_of("j")?;
                if k < 63 && j >= 1u64 << k {
                    return Err(bad("index out of range"));
                }
                let block = params.get("block").and_then(Value::as_u64).unwrap_or(0);
                SetExpr::Dyadic(DyadicInterval::in_block(block, BitString::from_index(k, j)))
            }
            "cylinder" => SetExpr::Cylinder(str_of("stem")?.parse()?),
            "carrier" => {
                let host = match SetExpr::from_json(params.get("host").ok_or_else(|| bad("host"))?)? {
                    SetExpr::Dyadic(d) => d,
                    _ => return Err(bad("carrier host must be dyadic")),
                };
                let path = params
                    .get("path")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("path"))?
                    .iter()
                    .map(|x| x.as_u64().map(|x| x as u32).ok_or_else(|| bad("path entry")))
                    .collect::<Result<_>>()?;
                SetExpr::Carrier(CarrierRef {
                    ledger: hex_of("ledger")?,
                    alloc: u64_of("alloc")? as u32,
                    host,
                    path,
                    mass: rational::parse(str_of("mass")?)?,
                })
            }
            "run" => SetExpr::Run(Run {
                ledger: hex_of("ledger")?,
                stream: u64_of("stream")?,
                start: u64_of("start")?,
                len: u64_of("len")?,
                unit: rational::parse(str_of("unit")?)?,
            }),
            "rectangle" => {
                let mut it = children.into_iter();
                match (it.next(), it.next(), it.next()) {
                    (Some(a), Some(b), None) => SetExpr::Rectangle(Box::new(a), Box::new(b)),
                    _ => return Err(bad("rectangle needs two children")),
                }
            }
            "index-set" => SetExpr::IndexSet(
                params
                    .get("points")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("points"))?
                    .iter()
                    .map(|x| x.as_u64().ok_or_else(|| bad("point")))
                    .collect::<Result<_>>()?,
            ),
            "union" => SetExpr::Union(children),
            other => return Err(bad(&format!("unknown type {other:?}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;

    fn dy(k: u32, j: u64) -> SetExpr {
        SetExpr::Dyadic(DyadicInterval::new(k, j))
    }

    fn cyl(s: &str) -> SetExpr {
        SetExpr::Cylinder(s.parse().unwrap())
    }

    #[test]
    fn measures() {
        assert_eq!(dy(3, 5).measure(), rat(1, 8));
        assert_eq!(cyl("101").measure(), rat(1, 8));
        let r = SetExpr::Rectangle(Box::new(cyl("10")), Box::new(cyl("01")));
        assert_eq!(r.measure(), rat(1, 16));
    }

    #[test]
    fn containment() {
        assert!(dy(2, 1).contains(&dy(3, 2)).unwrap());
        assert!(cyl("10").contains(&cyl("101")).unwrap());
        assert!(!dy(1, 1).contains(&dy(1, 0)).unwrap());
        assert!(matches!(dy(0, 0).contains(&cyl("")), Err(Error::IncomparableModels)));
    }

    #[test]
    fn carrier_paths() {
        let c = CarrierRef { ledger: 7, alloc: 0, host: DyadicInterval::new(2, 0), path: vec![], mass: rat(1, 8) };
        let a = SetExpr::Carrier(c.child(1, &rat(1, 2)));
        let b = SetExpr::Carrier(c.child(2, &rat(1, 4)));
        assert_eq!(a.disjoint(&b), Some(true));
        assert_eq!(SetExpr::Carrier(c.clone()).disjoint(&a), Some(false));
        assert!(dy(1, 0).contains(&a).unwrap());
        assert_eq!(a.measure(), rat(1, 16));
    }

    #[test]
    fn json_roundtrip() {
        let c = CarrierRef { ledger: 0xabc, alloc: 3, host: DyadicInterval::in_block(4, "01".parse().unwrap()), path: vec![2, 5], mass: rat(1, 64) };
        let e = SetExpr::Union(vec![
            SetExpr::Carrier(c),
            SetExpr::Rectangle(Box::new(cyl("1")), Box::new(cyl(""))),
            SetExpr::IndexSet(vec![1, 4]),
            SetExpr::Run(Run { ledger: 1, stream: 2, start: 3, len: 4, unit: rat(1, 4) }),
            dy(3, 5),
        ]);
        let v = e.to_json();
        assert_eq!(v["children"][4]["params"], json!({"k": 3, "j": 5}));
        assert_eq!(SetExpr::from_json(&v).unwrap(), e);
    }
}
