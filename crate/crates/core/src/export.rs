//! Piecewise-constant truncations for plotting.
//!
//! Carriers are pieces of nowhere-dense bodies, so no finite union of
//! intervals realizes them exactly. Each allocation is drawn inside a finite
//! stage of its fat Cantor body: its pieces are laid out left to right by exact
//! measure. The stage is chosen deep enough to clear every other host of the
//! witness that lies inside the allocation's host, so rows of different
//! allocations do not overlap.

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::{One, Signed, Zero};

use crate::constructions::{CarrierLedger, FatCantor};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};
use crate::exactnum::Enclosure;
use crate::series::{factorial_share, Coefficient, Group, GroupShape, Witness};
use crate::spaces::{DyadicInterval, SetExpr, SpaceModel};

/// Deepest fat Cantor stage drawn (`2^(t-1)` intervals per body).
pub const MAX_STAGE: u32 = 10;
/// Doubling pieces hold `2^m` units; only `m <= DOUBLING_CAP` are drawn.
pub const DOUBLING_CAP: u64 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ExportRow {
    pub start: Rational,
    pub end: Rational,
    pub value_exact: String,
    pub value_approx: f64,
}

/// Rows plus whether the stage cap may have let rows of nested hosts overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct Export {
    pub rows: Vec<ExportRow>,
    pub capped: bool,
}

#[derive(Clone, Debug)]
struct Value {
    exact: String,
    approx: f64,
}

/// Layout of one body: stage intervals with cumulative measure.
struct Body {
    pieces: Vec<DyadicInterval>,
    cumulative: Vec<Rational>,
}

impl Body {
    fn new(host: &DyadicInterval, stage: u32) -> Self {
        let pieces = FatCantor::new(DyadicInterval::in_block(0, host.cell.clone()), rational::rat(1, 2))
            .pieces_absolute(stage)
            .into_iter()
            .map(|p| DyadicInterval::in_block(host.block, p.cell))
            .collect::<Vec<_>>();
        let mut acc = Rational::zero();
        let mut cumulative = vec![acc.clone()];
        for p in &pieces {
            acc += p.measure();
            cumulative.push(acc.clone());
        }
        Self { pieces, cumulative }
    }

    /// Intervals covering the measure range `[x, y)` of the body, left to right.
    fn segment(&self, x: &Rational, y: &Rational) -> Vec<(Rational, Rational)> {
        let mut out = vec![];
        let first = self.cumulative.partition_point(|c| c <= x).saturating_sub(1);
        for i in first..self.pieces.len() {
            let (c0, c1) = (&self.cumulative[i], &self.cumulative[i + 1]);
            if c0 >= y {
                break;
            }
            let lo = if x > c0 { x.clone() } else { c0.clone() };
            let hi = if y < c1 { y.clone() } else { c1.clone() };
            if lo < hi {
                let s = self.pieces[i].start();
                out.push((&s + (&lo - c0), &s + (&hi - c0)));
            }
        }
        out
    }
}

fn stage_for(host: &DyadicInterval, hosts: &[DyadicInterval]) -> (u32, bool) {
    // a host nested in a gap of stage s sits at relative level >= 2s
    let need = hosts
        .iter()
        .filter(|h| *h != host && host.contains(h))
        .map(|h| (h.level() - host.level()) / 2)
        .max()
        .unwrap_or(1)
        .max(1);
    (need.min(MAX_STAGE), need > MAX_STAGE)
}

fn group_value(w: &Witness, g: &Group, k: u64, m: u64) -> Result<Option<Value>> {
    let strand = g.strand(k);
    let weight = g.strand_weight(k, &w.p);
    let (mono, sign) = match &strand.coeff {
        Coefficient::Geometric { .. } => match strand.abs_coeff(m) {
            Some(c) => (weight.mul(&c), false),
            None => return Ok(None),
        },
        Coefficient::Values(_) => match strand.signed_value(m) {
            Some(v) if !v.is_zero() => (weight.mul_rational(&v.abs()), v.is_negative()),
            _ => return Ok(None),
        },
    };
    let sgn = if sign { "-" } else { "" };
    let mut approx = mono.to_f64();
    let exact = if g.normalized {
        let n = w.strand_norm(g, k)?.round_out(40);
        approx /= rational::to_f64(&n.mid());
        format!("{sgn}{mono} / [{}, {}]", rational::render(n.lo()), rational::render(n.hi()))
    } else {
        format!("{sgn}{mono}")
    };
    Ok(Some(Value { exact, approx: if sign { -approx } else { approx } }))
}

/// Fraction `[a, b)` of the allocation taken by piece `m` of strand `k`.
fn fraction(g: &Group, k: u64, m: u64) -> (Rational, Rational) {
    match &g.shape {
        GroupShape::Factorial { .. } => {
            let a = (1..m).fold(Rational::zero(), |acc, i| acc + factorial_share(i));
            (a.clone(), a + factorial_share(m))
        }
        _ => {
            let off_k = Rational::one() - pow2(-(k as i64) + 1);
            let len_k = pow2(-(k as i64));
            let a = off_k + &len_k * (Rational::one() - pow2(-(m as i64) + 1));
            (a.clone(), a + len_k * pow2(-(m as i64)))
        }
    }
}

/// Rows of the truncation at `depth`: groups `n <= depth`, strands and pieces
/// up to `depth` (doubling pieces up to [`DOUBLING_CAP`]), plus the simple part.
pub fn export_rows(w: &Witness, depth: u64) -> Result<Export> {
    if !w.chain.is_empty() || w.tensor.is_some() {
        return Err(Error::ModelMismatch("export draws native one-dimensional witnesses".into()));
    }
    let counting = match w.space {
        SpaceModel::UnitInterval | SpaceModel::HalfLine | SpaceModel::CantorSpace => false,
        SpaceModel::CountingN => true,
        _ => return Err(Error::ModelMismatch(format!("cannot draw {}", w.space))),
    };
    let groups: Vec<&Group> = w
        .groups
        .iter()
        .filter(|g| g.id <= depth || matches!(g.shape, GroupShape::Doubling { .. }))
        .collect();
    // every host that can nest inside another
    let mut hosts: Vec<DyadicInterval> = vec![];
    for g in &groups {
        match &g.shape {
            GroupShape::Halving { carrier, .. } | GroupShape::Factorial { carrier, .. } => {
                if !carrier.path.is_empty() {
                    return Err(Error::ModelMismatch("export expects whole allocations per group".into()));
                }
                hosts.push(carrier.host.clone());
            }
            GroupShape::Doubling { .. } => {}
        }
    }
    // pieces to draw, then one body per host
    struct Draw {
        value: Value,
        host: Option<DyadicInterval>,
        range: (Rational, Rational),
        point: Option<u64>,
    }
    let mut draws: Vec<Draw> = vec![];
    for g in &groups {
        let kmax = g.strand_count().unwrap_or(depth).min(depth);
        let doubling = matches!(g.shape, GroupShape::Doubling { .. });
        let mmax = if doubling { depth.min(DOUBLING_CAP) } else { depth };
        for k in 1..=kmax {
            let strand = g.strand(k);
            for m in 1..=mmax {
                let Some(value) = group_value(w, g, k, m)? else { continue };
                match (&g.shape, strand.piece(m)) {
                    (GroupShape::Doubling { .. }, SetExpr::Run(run)) => {
                        for u in run.units() {
                            draws.push(Draw {
                                value: value.clone(),
                                host: (!counting).then(|| CarrierLedger::bulk_host(u)),
                                range: (Rational::zero(), run.unit.clone()),
                                point: Some(u),
                            });
                        }
                    }
                    (GroupShape::Halving { carrier, .. } | GroupShape::Factorial { carrier, .. }, _) => {
                        let (fa, fb) = fraction(g, k, m);
                        draws.push(Draw {
                            value,
                            host: Some(carrier.host.clone()),
                            range: (&fa * &carrier.mass, &fb * &carrier.mass),
                            point: None,
                        });
                    }
                    _ => unreachable!("doubling groups hold runs"),
                }
            }
        }
    }
    let mut capped = false;
    let mut bodies: BTreeMap<DyadicInterval, Body> = BTreeMap::new();
    for h in draws.iter().filter_map(|d| d.host.as_ref()) {
        if !bodies.contains_key(h) {
            let (t, c) = stage_for(h, &hosts);
            capped |= c;
            bodies.insert(h.clone(), Body::new(h, t));
        }
    }
    let mut rows: Vec<ExportRow> = vec![];
    for d in draws {
        let segs = match (&d.host, d.point) {
            (Some(h), _) => bodies[h].segment(&d.range.0, &d.range.1),
            (None, Some(u)) => vec![(rational::int(u as i64), rational::int(u as i64 + 1))],
            (None, None) => unreachable!("every draw has a host or a point"),
        };
        for (a, b) in segs {
            rows.push(ExportRow { start: a, end: b, value_exact: d.value.exact.clone(), value_approx: d.value.approx });
        }
    }
    rows.sort_by(|a, b| a.start.cmp(&b.start));
    for (c, set) in &w.simple {
        let cell = match set {
            SetExpr::Dyadic(d) => d.clone(),
            SetExpr::Cylinder(c) => DyadicInterval::in_block(0, c.clone()),
            other => return Err(Error::UnsupportedLeaf(format!("simple set {}", other.to_json()))),
        };
        rows = overlay(rows, &cell.start(), &cell.end(), c);
    }
    Ok(Export { rows, capped })
}

/// Adds the constant `c` on `[s, e)`, splitting rows at the boundaries.
fn overlay(rows: Vec<ExportRow>, s: &Rational, e: &Rational, c: &Rational) -> Vec<ExportRow> {
    let cs = rational::render(c);
    let ca = rational::to_f64(c);
    let mut out = vec![];
    let mut cursor = s.clone();
    for r in rows {
        if &r.end <= s || &r.start >= e {
            out.push(r);
            continue;
        }
        if &r.start < s {
            out.push(ExportRow { end: s.clone(), ..r.clone() });
        }
        let a = if &r.start > s { r.start.clone() } else { s.clone() };
        let b = if &r.end < e { r.end.clone() } else { e.clone() };
        if cursor < a {
            out.push(ExportRow { start: cursor.clone(), end: a.clone(), value_exact: cs.clone(), value_approx: ca });
        }
        out.push(ExportRow {
            start: a,
            end: b.clone(),
            value_exact: format!("{} + {cs}", r.value_exact),
            value_approx: r.value_approx + ca,
        });
        if &r.end > e {
            out.push(ExportRow { start: e.clone(), ..r });
        }
        cursor = b;
    }
    if &cursor < e {
        out.push(ExportRow { start: cursor, end: e.clone(), value_exact: cs, value_approx: ca });
    }
    out.sort_by(|a, b| a.start.cmp(&b.start));
    out
}

/// `Σ |value|^p · mass` over the strand pieces exported at `depth`.
pub fn truncated_p_mass(w: &Witness, depth: u64) -> Result<Enclosure> {
    let mut acc = Enclosure::zero();
    for g in w.groups.iter().filter(|g| g.id <= depth || matches!(g.shape, GroupShape::Doubling { .. })) {
        let kmax = g.strand_count().unwrap_or(depth).min(depth);
        let mmax = if matches!(g.shape, GroupShape::Doubling { .. }) { depth.min(DOUBLING_CAP) } else { depth };
        for k in 1..=kmax {
            let t = w.strand_terms(g, k, &w.p)?;
            let mut s = Enclosure::zero();
            for m in 1..=mmax {
                if let Some(x) = t.family.exact_term(m) {
                    s = s.add(&x.enclose(96));
                }
            }
            acc = acc.add(&s.mul_nonneg(&t.scale));
        }
    }
    Ok(acc)
}

pub fn write_csv<W: Write>(rows: &[ExportRow], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record(["interval_start", "interval_end", "value_exact", "value_approx"]).map_err(map)?;
    for r in rows {
        wr.write_record([
            rational::render(&r.start),
            rational::render(&r.end),
            r.value_exact.clone(),
            format!("{:e}", r.value_approx),
        ])
        .map_err(map)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{algebra_generator_eval, build_basic_family, build_dense_generators, build_gb, DensePair, FamilyMode};
    use crate::exactnum::rational::rat;

    fn disjoint(rows: &[ExportRow]) -> bool {
        rows.windows(2).all(|w| w[0].end <= w[1].start)
    }

    #[test]
    fn rows_are_disjoint_and_carry_exact_mass() {
        let ws = build_basic_family(SpaceModel::UnitInterval, rat(1, 1), 2, FamilyMode::Sp, None, 6).unwrap();
        for w in &ws {
            let e = export_rows(w, 6).unwrap();
            assert!(!e.capped);
            assert!(disjoint(&e.rows));
            assert!(e.rows.iter().all(|r| r.start < r.end && r.value_approx > 0.0));
        }
        let mut prev = Rational::zero();
        for d in 1..=6 {
            let m = truncated_p_mass(&ws[0], d).unwrap();
            assert!(*m.lo() >= prev && *m.hi() <= rational::int(1));
            prev = m.lo().clone();
        }
    }

    #[test]
    fn simple_part_and_signed_values() {
        let half = SetExpr::Dyadic(DyadicInterval::new(1, 0));
        let g = build_dense_generators(
            SpaceModel::UnitInterval,
            rat(1, 1),
            &[DensePair { set: half, n: 4, seed: "0".parse().unwrap() }],
            4,
        )
        .unwrap();
        let e = export_rows(&g[0], 4).unwrap();
        assert!(disjoint(&e.rows));
        let covered: Rational = e.rows.iter().filter(|r| r.end <= rat(1, 2)).map(|r| &r.end - &r.start).sum();
        assert_eq!(covered, rat(1, 2));
        let a = algebra_generator_eval(SpaceModel::UnitInterval, rat(1, 1), &[2, 3], &"x0 - x1".parse().unwrap(), 3)
            .unwrap();
        let e = export_rows(&a, 3).unwrap();
        assert!(e.rows.iter().any(|r| r.value_approx < 0.0 && r.value_exact.starts_with('-')));
        let gb = build_gb(SpaceModel::CountingN, rat(2, 1), None).unwrap();
        let e = export_rows(&gb, 3).unwrap();
        assert!(disjoint(&e.rows) && !e.rows.is_empty());
    }
}
