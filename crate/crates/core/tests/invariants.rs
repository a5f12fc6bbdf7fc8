//! Property tests for the structural invariants of each layer.

use std::cmp::Ordering;
use std::sync::OnceLock;

use num_traits::Signed;
use proptest::prelude::*;

use pathology_forge::certify::{isometry_check, verify_threshold};
use pathology_forge::constructions::{build_basic_family, build_ha, evaluate, CarrierLedger, FamilyMode, PolynomialExpr};
use pathology_forge::exactnum::rational::{self, pow2, rat, Rational};
use pathology_forge::exactnum::{enclose_sum, ExactPosReal, GeometricTerms};
use pathology_forge::spaces::{BitString, DyadicInterval, SetExpr, SpaceModel};
use pathology_forge::series::Witness;
use pathology_forge::transport::{fubini_check, map_set, rademacher_norm, tensor_embed, MapTag};

fn ha() -> &'static Witness {
    static W: OnceLock<Witness> = OnceLock::new();
    W.get_or_init(|| build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 6).unwrap())
}

fn family(p: u32) -> &'static [Witness] {
    static F: OnceLock<[Vec<Witness>; 2]> = OnceLock::new();
    let fams = F.get_or_init(|| {
        [1, 2].map(|p| build_basic_family(SpaceModel::UnitInterval, rat(p, 1), 3, FamilyMode::Sp, None, 8).unwrap())
    });
    &fams[(p - 1) as usize]
}

fn pos_rat() -> impl Strategy<Value = Rational> {
    (1i64..40, 1i64..40).prop_map(|(n, d)| rat(n, d))
}

fn small_rat() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

fn monomial() -> impl Strategy<Value = ExactPosReal> {
    (pos_rat(), 2i64..12, small_rat()).prop_map(|(s, b, e)| ExactPosReal::power_of(rational::int(b), e).mul_rational(&s))
}

fn bitstring(max: u32) -> impl Strategy<Value = BitString> {
    proptest::collection::vec(any::<bool>(), 0..=max as usize).prop_map(BitString::from_bits)
}

proptest! {
    #[test]
    fn pow_preserves_order(x in monomial(), y in monomial(), e in (1i64..9, 1i64..5).prop_map(|(n, d)| rat(n, d))) {
        prop_assert_eq!(x.compare(&y), x.pow(&e).compare(&y.pow(&e)));
        prop_assert_eq!(x.compare(&y), y.compare(&x).reverse());
    }

    #[test]
    fn compare_agrees_with_directed_rounding(x in monomial(), r in pos_rat()) {
        let e = x.enclose(256);
        let exact = x.compare_rational(&r);
        if *e.lo() > r {
            prop_assert_eq!(exact, Ordering::Greater);
        } else if *e.hi() < r {
            prop_assert_eq!(exact, Ordering::Less);
        }
    }

    #[test]
    fn measure_is_additive_on_disjoint_cells(k in 1u32..9, picks in proptest::collection::btree_set(0u64..256, 1..20)) {
        let js: Vec<u64> = picks.into_iter().filter(|j| *j < 1 << k).collect();
        prop_assume!(!js.is_empty());
        let u = SetExpr::Union(js.iter().map(|&j| SetExpr::Dyadic(DyadicInterval::new(k, j))).collect());
        prop_assert_eq!(u.measure(), rat(js.len() as i64, 1) * pow2(-(k as i64)));
    }

    #[test]
    fn containment_is_a_partial_order(a in bitstring(8), b in bitstring(8), c in bitstring(8)) {
        let cy = |s: &BitString| SetExpr::Cylinder(s.clone());
        let (x, y, z) = (cy(&a), cy(&b), cy(&c));
        prop_assert!(x.contains(&x).unwrap());
        if x.contains(&y).unwrap() && y.contains(&x).unwrap() {
            prop_assert_eq!(&a, &b);
        }
        if x.contains(&y).unwrap() && y.contains(&z).unwrap() {
            prop_assert!(x.contains(&z).unwrap());
        }
    }

    #[test]
    fn transport_preserves_measure_and_roundtrips(s in bitstring(12)) {
        let d = SetExpr::Dyadic(DyadicInterval::in_block(0, s.clone()));
        let f = map_set(MapTag::F, &d).unwrap();
        prop_assert_eq!(f.measure(), d.measure());
        prop_assert_eq!(map_set(MapTag::L, &f).unwrap(), d);
        let cy = SetExpr::Cylinder(s.clone());
        let g = map_set(MapTag::Ginv, &cy).unwrap();
        prop_assert_eq!(g.measure(), cy.measure());
        prop_assert_eq!(map_set(MapTag::G, &g).unwrap(), cy);
    }

    #[test]
    fn interleave_inverts_deinterleave(s in bitstring(10)) {
        let (x, y) = s.deinterleave();
        prop_assert_eq!(BitString::interleave(&x, &y), Some(s));
    }

    #[test]
    fn rademacher_l2_identity(a in proptest::collection::vec(small_rat(), 1..=12)) {
        let sum_sq = a.iter().fold(rat(0, 1), |acc, x| acc + x * x);
        let n = rademacher_norm(&a, &rat(2, 1)).unwrap();
        prop_assert_eq!(n.p_mass.as_rational(), Some(sum_sq));
    }
}

proptest! {
    // exact scans up to j = 200
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn algebra_threshold_holds(rows in proptest::collection::btree_map(
        proptest::collection::vec(0u32..=2, 3),
        (1i64..=5, any::<bool>()),
        1..=3,
    )) {
        let monomials: Vec<(Rational, Vec<u32>)> = rows
            .into_iter()
            .filter(|(r, _)| r.iter().sum::<u32>() > 0)
            .map(|(r, (b, neg))| (rational::int(if neg { -b } else { b }), r))
            .collect();
        prop_assume!(!monomials.is_empty());
        let poly = PolynomialExpr::new(3, monomials).unwrap();
        let f = evaluate(&[2, 3, 5], &poly).unwrap();
        prop_assert!(verify_threshold(&f, 200));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_nests(c in pos_rat(), a in small_rat(), num in 1i64..8, coarse in 4i64..12, extra in 1i64..10) {
        let src = GeometricTerms {
            constant: ExactPosReal::from_rational(c),
            poly_exponent: a,
            ratio: ExactPosReal::from_rational(rat(num, 8)),
        };
        let loose = enclose_sum(&src, &pow2(-coarse)).unwrap();
        let tight = enclose_sum(&src, &pow2(-coarse - extra)).unwrap();
        prop_assert!(loose.contains_enclosure(&tight));
        prop_assert!(tight.width() <= pow2(-coarse - extra));
    }

    #[test]
    fn ledger_stays_disjoint_and_covered(bases in proptest::collection::vec(0u64..63, 1..24)) {
        let mut ledger = CarrierLedger::new(SpaceModel::UnitInterval, 7).unwrap();
        for n in bases {
            let level = 63 - (n + 1).leading_zeros() as i64;
            ledger.allocate_within(n, &pow2(-level - 3));
            prop_assert!(ledger.check_invariants(8, 1).is_ok());
        }
    }

    #[test]
    fn disjoint_supports_add_p_masses(coeffs in proptest::collection::vec(small_rat(), 3), p in 1u32..=2) {
        let r = isometry_check(family(p), &coeffs, &rat(p as i64, 1), &pow2(-16)).unwrap();
        prop_assert!(r.ok);
    }

    #[test]
    fn exponent_change_keeps_the_closed_form(qn in 1i64..24, qd in 1i64..6) {
        let w = ha();
        let q = rat(qn, qd);
        for g in &w.groups {
            for k in 1..=3 {
                let at_p = w.strand_terms(g, k, &w.p).unwrap();
                let at_q = w.strand_terms(g, k, &q).unwrap();
                prop_assert!(at_p.family.same_shape(&at_q.family));
            }
        }
    }

    #[test]
    fn restriction_stays_inside_the_base_element(n in 0u64..15) {
        let w = ha();
        let u = w.native_base(n);
        let r = w.restrict(n).unwrap();
        for g in &r.groups {
            prop_assert!(w.group(g.id).is_some());
            prop_assert!(u.contains(&g.region()).unwrap());
        }
    }

    #[test]
    fn tensor_fubini(a in proptest::collection::vec(small_rat().prop_filter("nonzero", |x| x.is_positive() || x.is_negative()), 1..=4)) {
        let f = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 4).unwrap();
        let t = tensor_embed(&f, &a).unwrap();
        prop_assert!(fubini_check(&t, 3, 3, 12).unwrap());
    }
}
