use std::collections::BTreeMap;
use std::sync::Mutex;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::strand::{ExpPoly, IndexFilter, MassFamily, RSequence, Strand, StrandId};
use crate::certify::{series_verdict, Verdict};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};
use crate::exactnum::{default_goal, enclose_sum, Enclosure, ExactPosReal};
use crate::spaces::{pair, BaseIndex, CarrierRef, SetExpr, SpaceModel};
use crate::transport::MapTag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    Sp,
    NotBelowP,
    SpPrime,
    DenseGen,
    AlgebraElement,
    Simple,
    Tensor,
}

/// How a group lays out its strands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupShape {
    /// Strands `k >= 1` of exponent `r_k` on the children `k` (share `2^-k`) of one carrier.
    Halving { carrier: CarrierRef, rseq: RSequence, filter: IndexFilter },
    /// Strands `k >= 1` of exponent `r_k` on the streams `pair(stream_base, k)`.
    Doubling { ledger: u64, stream_base: u64, unit: Rational, rseq: RSequence },
    /// One factorial strand with exact values.
    Factorial { carrier: CarrierRef, values: ExpPoly },
}

/// Strands sharing an exact outer weight.
///
/// A normalized group stands for `weight · Σ_k 2^(-k/p) · s_k / ‖s_k‖_p`, whose
/// p-th power of norm is exactly `weight^p` (strands are disjoint). A plain
/// group stands for `weight · Σ_k s_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub id: u64,
    /// π-base element the group was built to reside in.
    pub base: Option<BaseIndex>,
    pub weight: ExactPosReal,
    pub normalized: bool,
    pub shape: GroupShape,
}

impl Group {
    pub fn strand(&self, k: u64) -> Strand {
        let id = StrandId { group: self.id, k };
        match &self.shape {
            GroupShape::Halving { carrier, rseq, filter } => {
                Strand::halving(id, carrier.child(k as u32, &pow2(-(k as i64))), rseq.r(k), filter.clone())
            }
            GroupShape::Doubling { ledger, stream_base, unit, rseq } => {
                Strand::doubling(id, *ledger, pair(*stream_base, k), unit.clone(), rseq.r(k))
            }
            GroupShape::Factorial { carrier, values } => {
                assert_eq!(k, 1, "factorial groups hold one strand");
                Strand::factorial(id, carrier.clone(), values.clone())
            }
        }
    }

    pub fn strand_count(&self) -> Option<u64> {
        match self.shape {
            GroupShape::Factorial { .. } => Some(1),
            _ => None,
        }
    }

    pub fn rseq(&self) -> Option<&RSequence> {
        match &self.shape {
            GroupShape::Halving { rseq, .. } | GroupShape::Doubling { rseq, .. } => Some(rseq),
            GroupShape::Factorial { .. } => None,
        }
    }

    /// Exact outer factor of strand `k` (before division by its norm).
    pub fn strand_weight(&self, k: u64, p: &Rational) -> ExactPosReal {
        if self.normalized {
            self.weight.mul(&ExactPosReal::power_of(rational::rat(1, 2), rational::int(k as i64) / p))
        } else {
            self.weight.clone()
        }
    }

    /// Region holding every strand of the group.
    pub fn region(&self) -> SetExpr {
        match &self.shape {
            GroupShape::Halving { carrier, .. } | GroupShape::Factorial { carrier, .. } => {
                SetExpr::Carrier(carrier.clone())
            }
            GroupShape::Doubling { .. } => SetExpr::Union(vec![]),
        }
    }

    /// Disjointness of two groups, from ledger facts.
    pub fn disjoint(&self, other: &Group) -> Option<bool> {
        match (&self.shape, &other.shape) {
            (GroupShape::Doubling { ledger: a, stream_base: s, .. }, GroupShape::Doubling { ledger: b, stream_base: t, .. }) => {
                if a == b {
                    Some(s != t)
                } else {
                    None
                }
            }
            (GroupShape::Doubling { ledger, .. }, x) | (x, GroupShape::Doubling { ledger, .. }) => match x {
                GroupShape::Halving { carrier, .. } | GroupShape::Factorial { carrier, .. } => {
                    if carrier.ledger == *ledger {
                        Some(true)
                    } else {
                        None
                    }
                }
                GroupShape::Doubling { .. } => unreachable!(),
            },
            _ => self.region().disjoint(&other.region()),
        }
    }
}

/// A function as a countable disjoint sum of weighted indicator strands.
#[derive(Debug)]
pub struct Witness {
    pub space: SpaceModel,
    pub p: Rational,
    pub kind: WitnessKind,
    /// The generative seed; regeneration from it is deterministic.
    pub params: Value,
    pub horizon: u64,
    /// Groups materialized up to the horizon.
    pub groups: Vec<Group>,
    /// The construction places a group in every π-base element, beyond the horizon too.
    pub uniform: bool,
    /// Exact p-mass carried by groups beyond the horizon (enclosure).
    pub tail_p: Enclosure,
    /// Simple part `Σ c_i χ_{S_i}`.
    pub simple: Vec<(Rational, SetExpr)>,
    /// Rademacher coefficients for tensor witnesses.
    pub tensor: Option<Vec<Rational>>,
    /// Transport chain from the native space to `space`.
    pub chain: Vec<MapTag>,
    pub native_space: SpaceModel,
    pub norm: Enclosure,
    norms: Mutex<BTreeMap<StrandId, Enclosure>>,
}

impl Clone for Witness {
    fn clone(&self) -> Self {
        Self {
            space: self.space.clone(),
            p: self.p.clone(),
            kind: self.kind,
            params: self.params.clone(),
            horizon: self.horizon,
            groups: self.groups.clone(),
            uniform: self.uniform,
            tail_p: self.tail_p.clone(),
            simple: self.simple.clone(),
            tensor: self.tensor.clone(),
            chain: self.chain.clone(),
            native_space: self.native_space.clone(),
            norm: self.norm.clone(),
            norms: Mutex::new(self.norms.lock().unwrap().clone()),
        }
    }
}

/// One strand's `Σ |c|^q μ` family together with its positive outer scale.
#[derive(Clone, Debug)]
pub struct StrandTerms {
    pub id: StrandId,
    pub base: Option<BaseIndex>,
    /// Enclosure of the positive factor multiplying every term.
    pub scale: Enclosure,
    pub family: MassFamily,
    pub strand: Strand,
}

/// Description of one group for [`assemble_witness`].
pub struct Assembly {
    pub space: SpaceModel,
    pub p: Rational,
    pub kind: WitnessKind,
    pub params: Value,
    pub horizon: u64,
    pub groups: Vec<Group>,
    pub uniform: bool,
    pub tail_p: Enclosure,
}

/// Strands of each group checked for p-convergence at assembly.
const CHECKED_STRANDS: u64 = 3;

/// Validates disjointness and p-convergence, and computes the norm enclosure.
pub fn assemble_witness(a: Assembly) -> Result<Witness> {
    for (i, g) in a.groups.iter().enumerate() {
        for h in &a.groups[i + 1..] {
            if g.disjoint(h) != Some(true) {
                return Err(Error::DisjointnessViolation(format!("groups {} and {}", g.id, h.id)));
            }
        }
    }
    let w = Witness {
        native_space: a.space.clone(),
        space: a.space,
        p: a.p,
        kind: a.kind,
        params: a.params,
        horizon: a.horizon,
        groups: a.groups,
        uniform: a.uniform,
        tail_p: a.tail_p,
        simple: vec![],
        tensor: None,
        chain: vec![],
        norm: Enclosure::zero(),
        norms: Mutex::new(BTreeMap::new()),
    };
    for g in &w.groups {
        let n = g.strand_count().unwrap_or(CHECKED_STRANDS);
        for k in 1..=n {
            let s = g.strand(k);
            let fam = s.mass_family(&w.p);
            match series_verdict(&fam) {
                Ok(Verdict::Converges { .. }) => {}
                _ => return Err(Error::DivergentAtP(format!("{}/{}", g.id, k))),
            }
        }
    }
    let mass = w.group_p_mass_total()?;
    let norm = mass.root(&w.p, 64);
    Ok(Witness { norm, ..w })
}

impl Witness {
    /// An empty witness (the zero function) on `space`.
    pub fn zero(space: SpaceModel, p: Rational, kind: WitnessKind, params: Value) -> Witness {
        Witness {
            native_space: space.clone(),
            space,
            p,
            kind,
            params,
            horizon: 0,
            groups: vec![],
            uniform: false,
            tail_p: Enclosure::zero(),
            simple: vec![],
            tensor: None,
            chain: vec![],
            norm: Enclosure::zero(),
            norms: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.groups.is_empty() && self.simple.iter().all(|(c, _)| c.is_zero()) && !self.uniform
    }

    pub fn group(&self, id: u64) -> Option<&Group> {
        self.groups.iter().find(|g| g.id == id)
    }

    /// Enclosure of `‖s_k‖_p` for a strand.
    pub fn strand_norm(&self, g: &Group, k: u64) -> Result<Enclosure> {
        let id = StrandId { group: g.id, k };
        if let Some(e) = self.norms.lock().unwrap().get(&id) {
            return Ok(e.clone());
        }
        let goal = default_goal() * rational::rat(1, 16);
        let s = enclose_sum(&g.strand(k).mass_family(&self.p), &goal)?;
        let e = s.root(&self.p, 64);
        self.norms.lock().unwrap().insert(id, e.clone());
        Ok(e)
    }

    /// p-mass of one group: exactly `weight^p` when normalized.
    pub fn group_p_mass(&self, g: &Group) -> Result<Enclosure> {
        let wp = g.weight.pow(&self.p);
        if g.normalized {
            return Ok(wp.enclose(96));
        }
        let mut acc = Enclosure::zero();
        let n = g.strand_count().ok_or_else(|| Error::UnclassifiableFamily("unnormalized infinite group".into()))?;
        for k in 1..=n {
            let s = enclose_sum(&g.strand(k).mass_family(&self.p), &(default_goal() * rational::rat(1, 16)))?;
            acc = acc.add(&s);
        }
        Ok(acc.mul_nonneg(&wp.enclose(96)))
    }

    fn group_p_mass_total(&self) -> Result<Enclosure> {
        let parts = crate::par::map_slice(&self.groups, |g| self.group_p_mass(g));
        let mut acc = self.tail_p.clone();
        for p in parts {
            acc = acc.add(&p?);
        }
        Ok(acc)
    }

    /// Terms of `Σ |f|^q` restricted to strand `k` of group `g`, with outer scale.
    pub fn strand_terms(&self, g: &Group, k: u64, q: &Rational) -> Result<StrandTerms> {
        let strand = g.strand(k);
        let w = g.strand_weight(k, &self.p).pow(q).enclose(96);
        let scale = if g.normalized {
            let n = self.strand_norm(g, k)?;
            let nq = n.root(&q.recip(), 64);
            w.mul_nonneg(&nq.recip())
        } else {
            w
        };
        Ok(StrandTerms { id: strand.id, base: g.base, scale, family: strand.mass_family(q), strand })
    }

    /// Strand families in scope: every group, or only the groups whose whole
    /// region lies in the native cell `scope`. Each group contributes strands
    /// `1..=k_q`, with `k_q` the strand selected for `q` (at least 1).
    pub fn q_mass_series(&self, q: &Rational, scope: Option<&SetExpr>) -> Result<Vec<StrandTerms>> {
        let mut out = vec![];
        for g in self.groups_within(scope)? {
            let kmax = match (g.strand_count(), g.rseq()) {
                (Some(n), _) => n,
                (None, Some(r)) => r.first_strictly_past(q).unwrap_or(1),
                (None, None) => 1,
            };
            for k in 1..=kmax {
                out.push(self.strand_terms(g, k, q)?);
            }
        }
        Ok(out)
    }

    /// Groups whose region is contained in the native set `scope` (all when `None`).
    pub fn groups_within(&self, scope: Option<&SetExpr>) -> Result<Vec<&Group>> {
        let mut out = vec![];
        for g in &self.groups {
            let inside = match scope {
                None => true,
                Some(u) => !matches!(g.shape, GroupShape::Doubling { .. }) && u.contains(&g.region())?,
            };
            if inside {
                out.push(g);
            }
        }
        Ok(out)
    }

    /// Native π-base element `U_n` of the witness's own model.
    pub fn native_base(&self, n: BaseIndex) -> SetExpr {
        self.native_space.enumerate_base(n)
    }

    /// Group ids resident in `U_n` (native enumeration).
    pub fn layout(&self, n: BaseIndex) -> Result<Vec<u64>> {
        let u = self.native_base(n);
        Ok(self.groups_within(Some(&u))?.into_iter().map(|g| g.id).collect())
    }

    /// The part of the witness carried inside `U_n`: whole-carrier containment
    /// only, so partial-overlap groups are dropped (flagged in `params`).
    pub fn restrict(&self, n: BaseIndex) -> Result<Witness> {
        let u = self.native_base(n);
        let groups: Vec<Group> = self.groups_within(Some(&u))?.into_iter().cloned().collect();
        let dropped = self.groups.len() - groups.len();
        let mut simple = vec![];
        for (c, s) in &self.simple {
            if u.contains(s).unwrap_or(false) {
                simple.push((c.clone(), s.clone()));
            }
        }
        let mut params = self.params.clone();
        if let Value::Object(m) = &mut params {
            m.insert("restricted_to".into(), serde_json::json!(n));
            m.insert("partial_overlap_dropped".into(), serde_json::json!(dropped));
        }
        Ok(Witness {
            space: self.space.clone(),
            p: self.p.clone(),
            kind: self.kind,
            params,
            horizon: self.horizon,
            groups,
            uniform: false,
            tail_p: Enclosure::zero(),
            simple,
            tensor: self.tensor.clone(),
            chain: self.chain.clone(),
            native_space: self.native_space.clone(),
            norm: self.norm.clone(),
            norms: Mutex::new(self.norms.lock().unwrap().clone()),
        })
    }

    pub fn p_one(&self) -> bool {
        self.p.is_one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;
    use crate::spaces::DyadicInterval;

    fn carrier(mass: Rational) -> CarrierRef {
        CarrierRef { ledger: 3, alloc: 0, host: DyadicInterval::new(0, 0), path: vec![], mass }
    }

    fn plain_group(values: Vec<(Rational, Rational)>) -> Group {
        Group {
            id: 0,
            base: Some(0),
            weight: ExactPosReal::one(),
            normalized: false,
            shape: GroupShape::Factorial { carrier: carrier(rat(1, 2)), values: ExpPoly { terms: values } },
        }
    }

    fn asm(groups: Vec<Group>, p: Rational) -> Assembly {
        Assembly {
            space: SpaceModel::UnitInterval,
            p,
            kind: WitnessKind::Sp,
            params: serde_json::json!({}),
            horizon: 0,
            groups,
            uniform: false,
            tail_p: Enclosure::zero(),
        }
    }

    #[test]
    fn normalized_group_norm_is_exact() {
        let g = Group {
            id: 0,
            base: Some(0),
            weight: ExactPosReal::one(),
            normalized: true,
            shape: GroupShape::Halving {
                carrier: carrier(rat(1, 2)),
                rseq: RSequence::default_for(rat(1, 1), true),
                filter: IndexFilter::all(),
            },
        };
        let w = assemble_witness(asm(vec![g], rat(1, 1))).unwrap();
        assert!(w.norm.contains_one() && w.norm.is_point());
    }

    #[test]
    fn ha_strand_norm_encloses_oracle() {
        // p = 1, r = 2, mass 2^-m: Σ m^-1/2 2^-m/2
        let g = Group {
            id: 0,
            base: Some(0),
            weight: ExactPosReal::one(),
            normalized: true,
            shape: GroupShape::Halving {
                carrier: carrier(rat(2, 1)),
                rseq: RSequence::default_for(rat(1, 1), true),
                filter: IndexFilter::all(),
            },
        };
        let w = assemble_witness(asm(vec![g.clone()], rat(1, 1))).unwrap();
        let n = w.strand_norm(&g, 1).unwrap();
        assert!(n.width() <= pow2(-20));
        let oracle: f64 = (1..200).map(|m: i32| (m as f64).powf(-0.5) * 2f64.powf(-(m as f64) / 2.0)).sum();
        assert!((rational::to_f64(&n.mid()) - oracle).abs() < 1e-6);
    }

    #[test]
    fn single_unit_strand() {
        // coeff ≡ 1 on masses 2^-(e_j+1)... here: values 1 with the factorial layout
        let w = assemble_witness(asm(vec![plain_group(vec![(rat(1, 1), rat(1, 1))])], rat(1, 1))).unwrap();
        // Σ_j 2^-(e_j+1) · 1/2
        let exact: f64 = (1..40u64)
            .map(|j| 0.5 * 2f64.powi(-(crate::constructions::log2_factorial_ceil(j) as i32) - 1))
            .sum();
        assert!((rational::to_f64(&w.norm.mid()) - exact).abs() < 1e-6);
    }

    #[test]
    fn divergent_strand_is_rejected() {
        // doubling masses with r > p: terms grow
        let g = Group {
            id: 0,
            base: None,
            weight: ExactPosReal::one(),
            normalized: true,
            shape: GroupShape::Doubling {
                ledger: 1,
                stream_base: 0,
                unit: rat(1, 4),
                rseq: RSequence::default_for(rat(1, 1), true),
            },
        };
        assert!(matches!(assemble_witness(asm(vec![g], rat(1, 1))), Err(Error::DivergentAtP(_))));
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let a = plain_group(vec![(rat(1, 1), rat(2, 1))]);
        let mut b = a.clone();
        b.id = 1;
        assert!(matches!(assemble_witness(asm(vec![a, b], rat(1, 1))), Err(Error::DisjointnessViolation(_))));
    }
}
