use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::algebra::{evaluate, Freeness, PolynomialExpr};
use super::almost::{check_distinct, AlmostDisjointIndex};
use super::ledger::CarrierLedger;
use crate::certify::{series_verdict, Verdict};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};
use crate::exactnum::{Enclosure, ExactPosReal};
use crate::series::{
    assemble_witness, Assembly, ExpPoly, Group, GroupShape, IndexFilter, MassFamily, RSequence, Witness, WitnessKind,
};
use crate::spaces::{BitString, SetExpr, SpaceModel};

/// Stable 64-bit identifier of a generative seed (canonical JSON, SHA-256).
pub fn seed_id(seed: &Value) -> u64 {
    let h = Sha256::digest(seed.to_string().as_bytes());
    u64::from_be_bytes(h[..8].try_into().unwrap())
}

/// Id of the `g_D` group in `S'_p` members; base-index groups use their index.
pub const BULK_GROUP: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyMode {
    Sp,
    SpPrime,
}

impl FamilyMode {
    fn tag(self) -> &'static str {
        match self {
            FamilyMode::Sp => "sp",
            FamilyMode::SpPrime => "sp-prime",
        }
    }
}

fn p_json(p: &Rational) -> Value {
    json!(rational::render(p))
}

/// `2^(-(n+1)/p)`: the p-th powers sum to one over all base indices.
fn base_weight(n: u64, p: &Rational) -> ExactPosReal {
    ExactPosReal::power_of(rational::rat(1, 2), rational::int(n as i64 + 1) / p)
}

/// Carrier budget `2^-(n+2)` for base index `n` (`< 2^-n`).
fn base_cap(n: u64) -> Rational {
    pow2(-(n as i64) - 2)
}

/// The basic family `f_m = Σ_n 2^(-(n+1)/p) h_{N_{n,m}}`, `m < count`, each
/// `h` a normalized group of decreasing-exponent strands on carrier `N_{n,m} ⊂ U_n`.
///
/// In `S'_p` mode (half line only) member `m` becomes `2^(-1/p)(f_m + g_{D_m})`
/// with `g_{D_m}` a normalized increasing-exponent group on its own block streams;
/// both parts have p-mass one, so every member has norm one.
pub fn build_basic_family(
    space: SpaceModel,
    p: Rational,
    count: u64,
    mode: FamilyMode,
    rseq: Option<RSequence>,
    horizon: u64,
) -> Result<Vec<Witness>> {
    if !p.is_positive() {
        return Err(Error::Parse("p must be positive".into()));
    }
    if mode == FamilyMode::SpPrime && space != SpaceModel::HalfLine {
        return Err(Error::ModelMismatch(format!("S'_p members need an infinite-measure model, got {space}")));
    }
    let rseq = rseq.unwrap_or_else(|| RSequence::default_for(p.clone(), true));
    if !rseq.up || rseq.p != p {
        return Err(Error::InvalidRSequence("h-type strands need exponents decreasing to p".into()));
    }
    rseq.validate()?;
    let family_seed = json!({
        "recipe": "basic", "mode": mode.tag(), "count": count, "rseq": rseq.to_json(),
        "space": space.tag(), "p": p_json(&p),
    });
    let mut ledger = CarrierLedger::new(space.clone(), seed_id(&family_seed))?;
    let mut members: Vec<Vec<Group>> = vec![vec![]; count as usize];
    let scale = match mode {
        FamilyMode::Sp => ExactPosReal::one(),
        FamilyMode::SpPrime => ExactPosReal::power_of(rational::rat(1, 2), p.recip()),
    };
    // canonical allocation order: base index first, member second
    for n in 0..=horizon {
        for groups in members.iter_mut() {
            let carrier = ledger.allocate_within(n, &base_cap(n));
            groups.push(Group {
                id: n,
                base: Some(n),
                weight: base_weight(n, &p).mul(&scale),
                normalized: true,
                shape: GroupShape::Halving { carrier, rseq: rseq.clone(), filter: IndexFilter::all() },
            });
        }
    }
    let kind = match mode {
        FamilyMode::Sp => WitnessKind::Sp,
        FamilyMode::SpPrime => WitnessKind::SpPrime,
    };
    let mut out = vec![];
    for (m, mut groups) in members.into_iter().enumerate() {
        let mut tail = ExactPosReal::from_rational(pow2(-(horizon as i64) - 1));
        if mode == FamilyMode::SpPrime {
            groups.push(Group {
                id: BULK_GROUP,
                base: None,
                weight: scale.clone(),
                normalized: true,
                shape: GroupShape::Doubling {
                    ledger: ledger.id(),
                    stream_base: m as u64,
                    unit: rational::rat(1, 4),
                    rseq: RSequence::default_for(p.clone(), false),
                },
            });
            tail = tail.mul_rational(&rational::rat(1, 2));
        }
        let params = json!({
            "recipe": "basic", "mode": mode.tag(), "count": count, "member": m, "rseq": rseq.to_json(),
        });
        out.push(assemble_witness(Assembly {
            space: space.clone(),
            p: p.clone(),
            kind,
            params,
            horizon,
            groups,
            uniform: true,
            tail_p: tail.enclose(128),
        })?);
    }
    Ok(out)
}

/// A norm-one `S_p` witness: one `h`-group resident in every π-base element.
pub fn build_ha(space: SpaceModel, p: Rational, rseq: Option<RSequence>, horizon: u64) -> Result<Witness> {
    Ok(build_basic_family(space, p, 1, FamilyMode::Sp, rseq, horizon)?.remove(0))
}

/// A norm-one `g_B` on the half line (bulk block streams) or on the counting
/// measure (runs of points): in `L^p`, outside every `L^q` with `q < p`.
pub fn build_gb(space: SpaceModel, p: Rational, rseq: Option<RSequence>) -> Result<Witness> {
    let unit = match space {
        SpaceModel::HalfLine => rational::rat(1, 4),
        SpaceModel::CountingN => Rational::one(),
        ref other => return Err(Error::ModelMismatch(format!("g_B needs an infinite-measure model, got {other}"))),
    };
    let rseq = rseq.unwrap_or_else(|| RSequence::default_for(p.clone(), false));
    if rseq.up || rseq.p != p {
        return Err(Error::InvalidRSequence("g-type strands need exponents increasing to p".into()));
    }
    rseq.validate()?;
    let seed = json!({"recipe": "gb", "rseq": rseq.to_json(), "space": space.tag(), "p": p_json(&p)});
    let group = Group {
        id: 0,
        base: None,
        weight: ExactPosReal::one(),
        normalized: true,
        shape: GroupShape::Doubling { ledger: seed_id(&seed), stream_base: 0, unit, rseq: rseq.clone() },
    };
    assemble_witness(Assembly {
        space,
        p,
        kind: WitnessKind::NotBelowP,
        params: json!({"recipe": "gb", "rseq": rseq.to_json()}),
        horizon: 0,
        groups: vec![group],
        uniform: false,
        tail_p: Enclosure::zero(),
    })
}

/// `(B_β, n, α)`: approximated set, reciprocal scale, almost-disjoint seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensePair {
    pub set: SetExpr,
    pub n: u64,
    pub seed: BitString,
}

fn check_cell_in(space: &SpaceModel, s: &SetExpr) -> Result<()> {
    let ok = matches!(
        (space, s),
        (SpaceModel::UnitInterval, SetExpr::Dyadic(_))
            | (SpaceModel::HalfLine, SetExpr::Dyadic(_))
            | (SpaceModel::CantorSpace, SetExpr::Cylinder(_))
    );
    if let (SpaceModel::UnitInterval, SetExpr::Dyadic(d)) = (space, s) {
        if d.block != 0 {
            return Err(Error::ModelMismatch(format!("{} lies outside [0,1)", s.to_json())));
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Error::ModelMismatch(format!("set {} is not a cell of {space}", s.to_json())))
    }
}

/// `g^{β,n} = χ_{B_β} + f^α / n`, where `f^α` keeps only inner indices in `A_α`.
///
/// All generators over one space and exponent share the carriers `N_n` (one per
/// base index); they differ only in their index sets, which are almost disjoint.
/// The witness norm is that of the strand part, exactly `1/n`.
pub fn build_dense_generators(
    space: SpaceModel,
    p: Rational,
    pairs: &[DensePair],
    horizon: u64,
) -> Result<Vec<Witness>> {
    let seeds: Vec<AlmostDisjointIndex> =
        pairs.iter().map(|d| AlmostDisjointIndex::new(d.seed.clone())).collect::<Result<_>>()?;
    check_distinct(&seeds)?;
    let rseq = RSequence::default_for(p.clone(), true);
    let seed = json!({"recipe": "dense", "rseq": rseq.to_json(), "space": space.tag(), "p": p_json(&p)});
    let mut ledger = CarrierLedger::new(space.clone(), seed_id(&seed))?;
    let carriers: Vec<_> = (0..=horizon).map(|n| ledger.allocate_within(n, &base_cap(n))).collect();
    let mut out = vec![];
    for (pair, idx) in pairs.iter().zip(seeds) {
        check_cell_in(&space, &pair.set)?;
        if pair.n == 0 {
            return Err(Error::Parse("n must be positive".into()));
        }
        let inv_n = rational::rat(1, pair.n as i64);
        let groups = carriers
            .iter()
            .enumerate()
            .map(|(n, c)| Group {
                id: n as u64,
                base: Some(n as u64),
                weight: base_weight(n as u64, &p).mul_rational(&inv_n),
                normalized: true,
                shape: GroupShape::Halving {
                    carrier: c.clone(),
                    rseq: rseq.clone(),
                    filter: IndexFilter { set: Some(idx.clone()), after: 0 },
                },
            })
            .collect();
        let tail = ExactPosReal::from_rational(pow2(-(horizon as i64) - 1))
            .mul(&ExactPosReal::from_rational(inv_n.clone()).pow(&p));
        let params = json!({
            "recipe": "dense", "set": pair.set.to_json(), "n": pair.n, "seed": pair.seed.to_string(),
        });
        let mut w = assemble_witness(Assembly {
            space: space.clone(),
            p: p.clone(),
            kind: WitnessKind::DenseGen,
            params,
            horizon,
            groups,
            uniform: true,
            tail_p: tail.enclose(128),
        })?;
        w.simple = vec![(Rational::one(), pair.set.clone())];
        out.push(w);
    }
    Ok(out)
}

/// `P(g_{θ_1}, …, g_{θ_n}) = Σ_j w_j χ_{B_j}` with `g_θ = Σ_j θ^j χ_{B_j}` and
/// `B_j = ⋃_n N_{n,j}`, `μ(N_{n,j}) = μ(N_n)·2^-(⌈log₂ j!⌉+1) <= 1/(j!·2^n)`.
///
/// The carriers `N_n` depend only on the space, so all algebra elements share them.
pub fn algebra_generator_eval(
    space: SpaceModel,
    p: Rational,
    gens: &[u64],
    poly: &PolynomialExpr,
    horizon: u64,
) -> Result<Witness> {
    let params = json!({"recipe": "algebra", "gens": gens, "poly": poly.to_string()});
    let values = match evaluate(gens, poly)? {
        Freeness::ZeroPolynomial => return Ok(Witness::zero(space, p, WitnessKind::AlgebraElement, params)),
        Freeness::NonzeroWitness { values, .. } => values,
    };
    let seed = json!({"recipe": "algebra", "space": space.tag()});
    let mut ledger = CarrierLedger::new(space.clone(), seed_id(&seed))?;
    let groups = (0..=horizon)
        .map(|n| Group {
            id: n,
            base: Some(n),
            weight: ExactPosReal::one(),
            normalized: false,
            shape: GroupShape::Factorial { carrier: ledger.allocate_within(n, &base_cap(n)), values: values.clone() },
        })
        .collect();
    // groups beyond the horizon carry total mass < 2^-(H+2)
    let unit = MassFamily::Factorial { values: values.clone(), q: p.clone(), b: Rational::one() };
    let per_unit = match series_verdict(&unit)? {
        Verdict::Converges { bound: Some(b), .. } => b,
        _ => {
            return Err(Error::GoalUnreachable(format!(
                "p-mass of {poly} at p = {} too large to enclose",
                rational::render(&p)
            )))
        }
    };
    let tail = Enclosure::new(Rational::zero(), per_unit.hi() * pow2(-(horizon as i64) - 2));
    assemble_witness(Assembly {
        space,
        p,
        kind: WitnessKind::AlgebraElement,
        params,
        horizon,
        groups,
        uniform: true,
        tail_p: tail,
    })
}

/// `Σ c_i χ_{S_i}` over pairwise disjoint cells.
pub fn build_simple(space: SpaceModel, p: Rational, terms: Vec<(Rational, SetExpr)>) -> Result<Witness> {
    for (i, (_, a)) in terms.iter().enumerate() {
        check_cell_in(&space, a)?;
        for (_, b) in &terms[..i] {
            if a.disjoint(b) != Some(true) {
                return Err(Error::DisjointnessViolation(format!("{} meets {}", a.to_json(), b.to_json())));
            }
        }
    }
    let mass = terms.iter().fold(Enclosure::zero(), |acc, (c, s)| {
        if c.is_zero() {
            acc
        } else {
            acc.add(&ExactPosReal::from_rational(c.abs()).pow(&p).mul_rational(&s.measure()).enclose(128))
        }
    });
    let params = json!({
        "recipe": "simple",
        "terms": terms.iter().map(|(c, s)| json!({"c": rational::render(c), "set": s.to_json()})).collect::<Vec<_>>(),
    });
    let mut w = Witness::zero(space, p.clone(), WitnessKind::Simple, params);
    w.norm = mass.root(&p, 64);
    w.simple = terms;
    Ok(w)
}

fn field<'a>(params: &'a Value, key: &str) -> Result<&'a Value> {
    params.get(key).ok_or_else(|| Error::Schema(format!("params.{key} missing")))
}

fn u64_field(params: &Value, key: &str) -> Result<u64> {
    field(params, key)?.as_u64().ok_or_else(|| Error::Schema(format!("params.{key} must be an integer")))
}

fn str_field<'a>(params: &'a Value, key: &str) -> Result<&'a str> {
    field(params, key)?.as_str().ok_or_else(|| Error::Schema(format!("params.{key} must be a string")))
}

/// Regenerates a native witness from its seed.
pub fn rebuild(space: &SpaceModel, p: &Rational, params: &Value, horizon: u64) -> Result<Witness> {
    let space = space.clone();
    let p = p.clone();
    match str_field(params, "recipe")? {
        "basic" => {
            let mode = match str_field(params, "mode")? {
                "sp" => FamilyMode::Sp,
                "sp-prime" => FamilyMode::SpPrime,
                m => return Err(Error::Schema(format!("unknown mode {m}"))),
            };
            let rseq = RSequence::from_json(p.clone(), field(params, "rseq")?)?;
            let count = u64_field(params, "count")?;
            let member = u64_field(params, "member")?;
            if member >= count {
                return Err(Error::Schema("member out of range".into()));
            }
            Ok(build_basic_family(space, p, count, mode, Some(rseq), horizon)?.swap_remove(member as usize))
        }
        "gb" => {
            let rseq = RSequence::from_json(p.clone(), field(params, "rseq")?)?;
            build_gb(space, p, Some(rseq))
        }
        "dense" => {
            let pair = DensePair {
                set: SetExpr::from_json(field(params, "set")?)?,
                n: u64_field(params, "n")?,
                seed: str_field(params, "seed")?.parse()?,
            };
            Ok(build_dense_generators(space, p, &[pair], horizon)?.remove(0))
        }
        "algebra" => {
            let gens = field(params, "gens")?
                .as_array()
                .ok_or_else(|| Error::Schema("params.gens must be an array".into()))?
                .iter()
                .map(|g| g.as_u64().ok_or_else(|| Error::Schema("generators are integers".into())))
                .collect::<Result<Vec<_>>>()?;
            let poly: PolynomialExpr = str_field(params, "poly")?.parse()?;
            algebra_generator_eval(space, p, &gens, &poly, horizon)
        }
        "simple" => {
            let terms = field(params, "terms")?
                .as_array()
                .ok_or_else(|| Error::Schema("params.terms must be an array".into()))?
                .iter()
                .map(|t| Ok((rational::parse(str_field(t, "c")?)?, SetExpr::from_json(field(t, "set")?)?)))
                .collect::<Result<Vec<_>>>()?;
            build_simple(space, p, terms)
        }
        other => Err(Error::Schema(format!("unknown recipe {other}"))),
    }
}

/// Exact values `w_j` of an algebra element, for export.
pub fn algebra_values(w: &Witness) -> Option<&ExpPoly> {
    w.groups.iter().find_map(|g| match &g.shape {
        GroupShape::Factorial { values, .. } => Some(values),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;
    use crate::spaces::DyadicInterval;

    #[test]
    fn ha_has_unit_norm_and_resident_groups() {
        let w = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 6).unwrap();
        assert!(w.norm.contains_one() && w.norm.is_point());
        for n in 0..=6 {
            assert!(w.layout(n).unwrap().contains(&n), "U_{n}");
        }
        assert_eq!(w.restrict(0).unwrap().groups.len(), 7);
    }

    #[test]
    fn basic_family_is_disjoint_and_deterministic() {
        let a = build_basic_family(SpaceModel::UnitInterval, rat(1, 1), 2, FamilyMode::Sp, None, 5).unwrap();
        for g in &a[0].groups {
            for h in &a[1].groups {
                assert_eq!(g.disjoint(h), Some(true));
            }
        }
        let b = rebuild(&SpaceModel::UnitInterval, &rat(1, 1), &a[1].params, 5).unwrap();
        assert_eq!(a[1].groups, b.groups);
    }

    #[test]
    fn sp_prime_needs_half_line() {
        assert!(matches!(
            build_basic_family(SpaceModel::UnitInterval, rat(1, 1), 1, FamilyMode::SpPrime, None, 2),
            Err(Error::ModelMismatch(_))
        ));
        let w = build_basic_family(SpaceModel::HalfLine, rat(1, 1), 2, FamilyMode::SpPrime, None, 3).unwrap();
        assert!(w[0].norm.contains_one());
        assert!(w[0].group(BULK_GROUP).is_some());
    }

    #[test]
    fn gb_models() {
        let w = build_gb(SpaceModel::HalfLine, rat(2, 1), None).unwrap();
        assert!(w.norm.contains_one());
        assert!(build_gb(SpaceModel::CountingN, rat(2, 1), None).is_ok());
        assert!(matches!(build_gb(SpaceModel::UnitInterval, rat(2, 1), None), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn dense_generator_norm_is_one_over_n() {
        let pairs = vec![
            DensePair { set: SetExpr::Dyadic(DyadicInterval::new(1, 0)), n: 4, seed: "01".parse().unwrap() },
            DensePair { set: SetExpr::Dyadic(DyadicInterval::new(1, 1)), n: 3, seed: "1".parse().unwrap() },
        ];
        let w = build_dense_generators(SpaceModel::UnitInterval, rat(1, 1), &pairs, 4).unwrap();
        assert!(w[0].norm.contains(&rat(1, 4)) && w[0].norm.width() <= pow2(-18));
        assert!(w[1].norm.contains(&rat(1, 3)));
        let dup = vec![pairs[0].clone(), pairs[0].clone()];
        assert!(matches!(
            build_dense_generators(SpaceModel::UnitInterval, rat(1, 1), &dup, 2),
            Err(Error::SeedCollision(_))
        ));
    }

    #[test]
    fn algebra_element_and_zero() {
        let p: PolynomialExpr = "x0*x1".parse().unwrap();
        let w = algebra_generator_eval(SpaceModel::UnitInterval, rat(1, 1), &[2, 3], &p, 3).unwrap();
        assert_eq!(algebra_values(&w).unwrap().value(2), rat(36, 1));
        let z: PolynomialExpr = "x0 - x0".parse().unwrap();
        assert!(algebra_generator_eval(SpaceModel::UnitInterval, rat(1, 1), &[2, 3], &z, 3).unwrap().is_zero());
    }

    #[test]
    fn simple_witness_norm() {
        let w = build_simple(
            SpaceModel::UnitInterval,
            rat(2, 1),
            vec![(rat(3, 1), SetExpr::Dyadic(DyadicInterval::new(1, 0))), (rat(-1, 1), SetExpr::Dyadic(DyadicInterval::new(1, 1)))],
        )
        .unwrap();
        // (9/2 + 1/2)^(1/2)
        let n = rational::to_f64(&w.norm.mid());
        assert!((n - 5f64.sqrt()).abs() < 1e-9);
    }
}
