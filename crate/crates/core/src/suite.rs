//! The acceptance suite: eight end-to-end checks, shared by the `suite`
//! command and the `acceptance` test target.
//!
//! Random inputs come from a fixed ChaCha seed, so every run checks the same
//! instances.

use std::time::{Duration, Instant};

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{
    dense_combination_certify, freeness_check, isometry_check, lp_report, not_lq_report, nowhere_report, predicted_index,
    replay, series_verdict, verify_threshold, Certificate, PredictedIndex, Report, Target, Verdict,
};
use crate::constructions::{
    algebra_generator_eval, build_basic_family, build_dense_generators, build_gb, build_ha, DensePair, FamilyMode,
    Freeness, PolynomialExpr,
};
use crate::error::Result;
use crate::exactnum::rational::{self, pow2, rat, Rational};
use crate::series::{MassFamily, Witness};
use crate::spaces::{BitString, DyadicInterval, SetExpr, SpaceModel};
use crate::transport::{apply_map, fubini_check, map_set, rademacher_norm, tensor_embed, MapTag};

/// Per-criterion time budget.
pub const TIME_LIMIT: Duration = Duration::from_secs(60);
/// Isometry tolerance.
pub fn isometry_tol() -> Rational {
    pow2(-16)
}
const SEED: u64 = 0x05ee_d0ff_096e;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

/// Verdicts gathered for the replay criterion.
#[derive(Default)]
pub struct Collected {
    pub reports: Vec<Report>,
    pub verdicts: Vec<(Verdict, MassFamily)>,
}

impl Collected {
    fn report(&mut self, r: &Report) {
        self.reports.push(r.clone());
    }
}

struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failures: vec![], notes: vec![] }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn try_run(&mut self, what: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.failures.push(format!("{what}: {e}"));
        }
    }
}

fn finish(id: u32, name: &'static str, start: Instant, c: Checks) -> Outcome {
    let elapsed = start.elapsed();
    let mut passed = c.failures.is_empty();
    let mut detail = if passed { c.notes.join("; ") } else { c.failures.join("; ") };
    if elapsed > TIME_LIMIT {
        passed = false;
        detail = format!("over the {}s budget; {detail}", TIME_LIMIT.as_secs());
    }
    Outcome { id, name, passed, detail, elapsed }
}

fn q_grid() -> Vec<Rational> {
    vec![rat(5, 4), rat(3, 2), rat(2, 1), rat(3, 1)]
}

/// The criterion-1 witness: `h_A` on the unit interval, `p = 1`, horizon 30.
pub fn criterion_one_witness() -> Result<Witness> {
    build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 30)
}

/// Independent floating-point oracle: partial sums of `scale · c m^(-a) ρ^m`
/// up to `m` exceed `bound`.
fn oracle_partial_sum_exceeds(fam: &MassFamily, scale: f64, upto: u64, bound: f64) -> bool {
    let MassFamily::Geometric { c, a, rho, filter } = fam else { return false };
    let (lc, la, lr) = (c.ln_f64(), rational::to_f64(a), rho.ln_f64());
    let mut sum = 0.0f64;
    for m in 1..=upto {
        if filter.admits(m) {
            sum += scale * (lc - la * (m as f64).ln() + lr * m as f64).exp();
        }
    }
    sum > bound
}

/// Nowhere-q report for `w` plus the oracle cross-check on every verdict.
fn nowhere_with_oracle(c: &mut Checks, col: &mut Collected, w: &Witness, q: &Rational, depth: u64) -> Result<Report> {
    let r = nowhere_report(w, &Target::Lq(q.clone()), depth)?;
    c.check(r.granted && r.uniform, format!("NowhereLq({}) not granted", rational::render(q)));
    c.check(r.verdicts.len() as u64 == depth + 1, format!("{} verdicts for depth {depth}", r.verdicts.len()));
    for v in &r.verdicts {
        let ev = v.evidence.as_ref().expect("fresh reports carry evidence");
        let g = w.group(v.strand.group).expect("verdict strands belong to the witness");
        let terms = w.strand_terms(g, v.strand.k, q)?;
        let scale_lo = terms.scale.lo().clone();
        let bound = rational::int(100);
        match predicted_index(&ev.verdict, &scale_lo, &bound) {
            Some(PredictedIndex::Term(m)) => {
                let s = rational::to_f64(&terms.scale.mid());
                c.check(
                    oracle_partial_sum_exceeds(&terms.family, s, m, 100.0),
                    format!("oracle: partial sum at predicted index {m} (U_{}) stays below 100", v.n),
                );
            }
            Some(PredictedIndex::PowerOfFour(k)) => {
                c.check(k < 40, format!("harmonic index 4^{k} too large for the oracle"));
                let s = rational::to_f64(&terms.scale.mid());
                c.check(
                    oracle_partial_sum_exceeds(&terms.family, s, 1u64 << (2 * k.min(12)), 100.0) || k > 12,
                    format!("oracle: harmonic partial sum at 4^{k} stays below 100"),
                );
            }
            None => c.check(false, format!("no predicted index for {}", v.cert.type_name())),
        }
    }
    col.report(&r);
    Ok(r)
}

pub fn criterion_1(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    c.try_run("h_A", |c| {
        let w = criterion_one_witness()?;
        let lp = lp_report(&w)?;
        c.check(lp.granted, "p-verdict not granted");
        c.check(lp.verdicts.iter().all(|v| v.cert.type_name() == "RatioTest"), "p-verdicts are not all RatioTest");
        col.report(&lp);
        for q in q_grid() {
            nowhere_with_oracle(c, col, &w, &q, 30)?;
        }
        c.note(format!("{} p-verdicts; 4 × 31 base-element divergence verdicts checked against the oracle", lp.verdicts.len()));
        Ok(())
    });
    finish(1, "h_A: L^p and nowhere L^q", start, c)
}

pub fn criterion_2(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    c.try_run("g_B half line", |c| {
        let w = build_gb(SpaceModel::HalfLine, rat(2, 1), None)?;
        let lp = lp_report(&w)?;
        c.check(lp.granted, "half line: p-verdict not granted");
        col.report(&lp);
        for q in [rat(1, 2), rat(1, 1), rat(3, 2)] {
            let r = not_lq_report(&w, &q)?;
            c.check(r.granted, format!("half line: q = {} does not diverge", rational::render(&q)));
            col.report(&r);
        }
        Ok(())
    });
    c.try_run("g_B counting", |c| {
        let w = build_gb(SpaceModel::CountingN, rat(2, 1), None)?;
        let lp = lp_report(&w)?;
        let bounded = lp.verdicts.iter().all(|v| {
            matches!(v.evidence.as_ref().map(|e| &e.verdict), Some(Verdict::Converges { bound: Some(_), .. }))
        });
        c.check(lp.granted && bounded, "counting: sequence not certified in ℓ_2 with a bound");
        col.report(&lp);
        for q in [rat(1, 2), rat(1, 1)] {
            let r = not_lq_report(&w, &q)?;
            c.check(r.granted, format!("counting: q = {} does not diverge", rational::render(&q)));
            col.report(&r);
        }
        c.note("one g_B group; the horizon does not apply");
        Ok(())
    });
    finish(2, "g_B: L^p but no L^q, q < p", start, c)
}

fn random_rational(rng: &mut ChaCha8Rng, nonzero: bool) -> Rational {
    loop {
        let n: i64 = rng.gen_range(-9..=9);
        let d: i64 = rng.gen_range(1..=7);
        if !nonzero || n != 0 {
            return rat(n, d);
        }
    }
}

pub fn criterion_3(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    c.try_run("S_p family", |c| {
        let ws = build_basic_family(SpaceModel::UnitInterval, rat(1, 1), 8, FamilyMode::Sp, None, 30)?;
        for i in 0..ws.len() {
            for j in 0..i {
                let disjoint =
                    ws[i].groups.iter().all(|a| ws[j].groups.iter().all(|b| a.disjoint(b) == Some(true)));
                c.check(disjoint, format!("members {j} and {i} are not ledger-disjoint"));
            }
        }
        for _ in 0..20 {
            let coeffs: Vec<Rational> = (0..8).map(|_| random_rational(&mut rng, false)).collect();
            let r = isometry_check(&ws, &coeffs, &rat(1, 1), &isometry_tol())?;
            c.check(r.ok, format!("isometry fails for {coeffs:?}"));
        }
        for (i, w) in ws.iter().enumerate() {
            let lp = lp_report(w)?;
            c.check(lp.granted, format!("member {i}: p-verdict"));
            col.report(&lp);
            for q in q_grid() {
                let r = nowhere_report(w, &Target::Lq(q.clone()), 30)?;
                c.check(r.granted, format!("member {i}: NowhereLq({})", rational::render(&q)));
                col.report(&r);
            }
        }
        c.note("8 members, 20 coefficient vectors");
        Ok(())
    });
    c.try_run("S'_p family", |c| {
        let ws = build_basic_family(SpaceModel::HalfLine, rat(1, 1), 4, FamilyMode::SpPrime, None, 12)?;
        for (i, w) in ws.iter().enumerate() {
            for q in [rat(1, 2), rat(2, 1)] {
                let r = not_lq_report(w, &q)?;
                c.check(r.granted, format!("S'_p member {i}: q = {}", rational::render(&q)));
                col.report(&r);
            }
        }
        Ok(())
    });
    finish(3, "basic families: isometry and S'_p", start, c)
}

fn cell(k: u32, j: u64) -> SetExpr {
    SetExpr::Dyadic(DyadicInterval::new(k, j))
}

pub fn criterion_4(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    c.try_run("dense", |c| {
        let triples = [
            (cell(1, 0), 2u64, "0"),
            (cell(2, 1), 3, "1"),
            (cell(1, 1), 4, "010"),
            (cell(2, 3), 5, "011"),
            (cell(3, 2), 7, "11"),
        ];
        let pairs: Vec<DensePair> = triples
            .iter()
            .map(|(s, n, seed)| Ok(DensePair { set: s.clone(), n: *n, seed: seed.parse::<BitString>()? }))
            .collect::<Result<_>>()?;
        let gs = build_dense_generators(SpaceModel::UnitInterval, rat(1, 1), &pairs, 10)?;
        for (g, (_, n, _)) in gs.iter().zip(&triples) {
            let inv = rat(1, *n as i64);
            c.check(g.norm.width() <= pow2(-18), format!("n = {n}: enclosure wider than 2^-18"));
            c.check(g.norm.contains(&inv), format!("n = {n}: enclosure misses 1/n"));
        }
        // combination 0 pairs the seeds sharing their first three blocks
        let mut combos: Vec<Vec<(Rational, usize)>> = vec![vec![(rat(1, 1), 2), (rat(-1, 1), 3)]];
        while combos.len() < 10 {
            let size = rng.gen_range(1..=5);
            let mut idx: Vec<usize> = (0..5).collect();
            for i in 0..5 {
                let j = rng.gen_range(i..5);
                idx.swap(i, j);
            }
            let combo: Vec<(Rational, usize)> =
                idx[..size].iter().map(|&i| (random_rational(&mut rng, false), i)).collect();
            if combo.iter().any(|(b, _)| !b.is_zero()) {
                combos.push(combo);
            }
        }
        let mut seeds_used = std::collections::BTreeSet::new();
        for combo in &combos {
            let terms: Vec<(Rational, Witness)> = combo.iter().map(|(b, i)| (b.clone(), gs[*i].clone())).collect();
            seeds_used.extend(combo.iter().filter(|(b, _)| !b.is_zero()).map(|(_, i)| *i));
            let r = dense_combination_certify(&terms, 10, &[rat(3, 2), rat(2, 1)])?;
            c.check(r.granted, format!("combination {combo:?} not granted: {:?}", r.notes));
            col.report(&r);
        }
        c.check(seeds_used.len() >= 3, "fewer than three seeds exercised");
        c.note(format!("{} combinations over {} seeds", combos.len(), seeds_used.len()));
        Ok(())
    });
    finish(4, "dense-lineability generators", start, c)
}

fn random_polynomial(rng: &mut ChaCha8Rng) -> PolynomialExpr {
    loop {
        let count = rng.gen_range(1..=3);
        let mut monomials: Vec<(Rational, Vec<u32>)> = vec![];
        while monomials.len() < count {
            let mut row = vec![0u32; 3];
            let degree = rng.gen_range(1..=3);
            for _ in 0..degree {
                row[rng.gen_range(0..3)] += 1;
            }
            if monomials.iter().any(|(_, r)| *r == row) {
                continue;
            }
            let b: i64 = rng.gen_range(1..=5) * if rng.gen_bool(0.5) { 1 } else { -1 };
            monomials.push((rational::int(b), row));
        }
        if let Ok(p) = PolynomialExpr::new(3, monomials) {
            return p;
        }
    }
}

pub fn criterion_5(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let gens = [2u64, 3, 5];
    c.try_run("algebra", |c| {
        for _ in 0..10 {
            let poly = random_polynomial(&mut rng);
            let f = freeness_check(&gens, &poly)?;
            let Freeness::NonzeroWitness { j0, .. } = &f else {
                c.check(false, format!("{poly}: reported as the zero polynomial"));
                continue;
            };
            c.check(verify_threshold(&f, 200), format!("{poly}: threshold scan fails"));
            let w = algebra_generator_eval(SpaceModel::UnitInterval, rat(1, 1), &gens, &poly, 10)?;
            for p in [rat(1, 1), rat(2, 1), rat(7, 1)] {
                for g in &w.groups {
                    let fam = g.strand(1).mass_family(&p);
                    let v = series_verdict(&fam)?;
                    let ok = matches!(&v, Verdict::Converges { cert: Certificate::FactorialRatio { .. }, .. });
                    c.check(ok, format!("{poly}, p = {}: not a FactorialRatio convergence", rational::render(&p)));
                    col.verdicts.push((v, fam));
                }
            }
            let r = nowhere_report(&w, &Target::Linf, 10)?;
            c.check(r.granted, format!("{poly}: NowhereLinf not granted"));
            let j0_ok = r.verdicts.iter().all(|v| matches!(&v.cert, Certificate::UnboundedValues { j0: j, .. } if j == j0));
            c.check(j0_ok, format!("{poly}: certificate threshold differs from the exact scan"));
            col.report(&r);
        }
        let zero: PolynomialExpr = "x0*x1 - x1*x0".parse()?;
        c.check(freeness_check(&gens, &zero)? == Freeness::ZeroPolynomial, "zero polynomial not recognized");
        let zw = algebra_generator_eval(SpaceModel::UnitInterval, rat(1, 1), &gens, &zero, 10)?;
        c.check(zw.is_zero(), "zero polynomial does not give the zero witness");
        c.note("10 polynomials in generators 2, 3, 5; p ∈ {1, 2, 7}");
        Ok(())
    });
    finish(5, "free algebra generators", start, c)
}

pub fn criterion_6(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    c.try_run("measure preservation", |c| {
        let mut count = 0usize;
        for k in 0..=12u32 {
            for s in BitString::all_of_level(k) {
                let d = SetExpr::Dyadic(DyadicInterval::in_block(0, s.clone()));
                let cy = SetExpr::Cylinder(s.clone());
                let fd = map_set(MapTag::F, &d)?;
                c.check(fd.measure() == d.measure() && map_set(MapTag::L, &fd)? == d, format!("F/L at {s}"));
                let gi = map_set(MapTag::Ginv, &cy)?;
                c.check(gi.measure() == cy.measure() && map_set(MapTag::G, &gi)? == cy, format!("G⁻¹/G at {s}"));
                count += 2;
            }
        }
        // exhaustive up to total level 10, eight seeded rectangles per shape beyond
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
        for a in 0..=12u32 {
            for b in 0..=(12 - a) {
                let rects: Vec<(BitString, BitString)> = if a + b <= 10 {
                    BitString::all_of_level(a)
                        .flat_map(|x| BitString::all_of_level(b).map(move |y| (x.clone(), y)))
                        .collect()
                } else {
                    (0..8)
                        .map(|_| {
                            let x = BitString::from_index(a, rng.gen_range(0..1u64 << a));
                            (x, BitString::from_index(b, rng.gen_range(0..1u64 << b)))
                        })
                        .collect()
                };
                for (x, y) in rects {
                    let r = SetExpr::Rectangle(Box::new(SetExpr::Cylinder(x.clone())), Box::new(SetExpr::Cylinder(y.clone())));
                    let g = map_set(MapTag::G, &r)?;
                    let pieces = match &g {
                        SetExpr::Union(xs) => xs.clone(),
                        other => vec![other.clone()],
                    };
                    // equal-length cylinders that are pairwise distinct are pairwise disjoint
                    let level = match &pieces[0] {
                        SetExpr::Cylinder(s) => s.level(),
                        _ => u32::MAX,
                    };
                    let same_level = pieces.iter().all(|p| matches!(p, SetExpr::Cylinder(s) if s.level() == level));
                    let distinct = pieces.iter().collect::<std::collections::HashSet<_>>().len() == pieces.len();
                    let mut back_inside = true;
                    for p in &pieces {
                        let back = map_set(MapTag::Ginv, p)?;
                        back_inside &= r.contains(&back)? && map_set(MapTag::G, &back)? == *p;
                    }
                    c.check(
                        g.measure() == r.measure() && same_level && distinct && back_inside,
                        format!("G on {x} × {y}"),
                    );
                    count += 1;
                }
            }
        }
        c.note(format!("{count} exact descriptor checks"));
        Ok(())
    });
    c.try_run("certificate transport", |c| {
        let w = criterion_one_witness()?;
        let mut t = w.clone();
        for tag in [MapTag::F, MapTag::Ginv, MapTag::G] {
            t = apply_map(tag, &t)?;
        }
        c.check(t.space == SpaceModel::CantorSpace, "chain does not end on Cantor space");
        for q in q_grid() {
            for g in w.groups.iter().take(6) {
                for k in 1..=6 {
                    let a = series_verdict(&w.strand_terms(g, k, &q)?.family)?;
                    let b = series_verdict(&t.strand_terms(t.group(g.id).expect("groups carry over"), k, &q)?.family)?;
                    c.check(a == b, format!("strand ({}, {k}) certificate changed", g.id));
                    col.verdicts.push((b, t.strand_terms(t.group(g.id).expect("groups carry over"), k, &q)?.family));
                }
            }
            let r = nowhere_report(&t, &Target::Lq(q.clone()), 30)?;
            c.check(r.granted, format!("transported NowhereLq({}) not granted", rational::render(&q)));
            for v in &r.verdicts {
                let g = w.group(v.strand.group).expect("groups carry over");
                let native = series_verdict(&w.strand_terms(g, v.strand.k, &q)?.family)?;
                c.check(native.cert() == &v.cert, format!("U_{}: certificate not verbatim", v.n));
            }
            col.report(&r);
        }
        Ok(())
    });
    finish(6, "transport: F, G⁻¹, G", start, c)
}

pub fn criterion_7(col: &mut Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    c.try_run("Rademacher", |c| {
        for _ in 0..50 {
            let k = rng.gen_range(1..=12);
            let a: Vec<Rational> = (0..k).map(|_| random_rational(&mut rng, false)).collect();
            let sum_sq = a.iter().fold(Rational::zero(), |acc, x| acc + x * x);
            let n = rademacher_norm(&a, &rat(2, 1))?;
            c.check(n.p_mass.as_rational() == Some(sum_sq.clone()), format!("‖Σ a r‖₂² ≠ Σ a² for {a:?}"));
        }
        let l1 = rademacher_norm(&[rat(3, 1), rat(4, 1)], &rat(1, 1))?;
        c.check(
            l1.exact.as_ref().and_then(|x| x.as_rational().cloned()) == Some(rational::int(4)),
            "‖3r₁ + 4r₂‖₁ ≠ 4",
        );
        Ok(())
    });
    c.try_run("tensor", |c| {
        let f = criterion_one_witness()?;
        let t = tensor_embed(&f, &[rat(3, 5), rat(4, 5)])?;
        c.check(fubini_check(&t, 4, 3, 24)?, "truncated Fubini identity fails");
        let r = nowhere_report(&t, &Target::Lq(rat(2, 1)), 10)?;
        c.check(r.granted, "NowhereLq(2) on the product not granted");
        c.check(r.verdicts.iter().all(|v| v.factor.is_some()), "verdict without a Rademacher factor");
        col.report(&r);
        c.note("50 coefficient vectors; product witness with coefficients 3/5, 4/5");
        Ok(())
    });
    finish(7, "Rademacher sums and tensor embedding", start, c)
}

/// `ln |r|` from the leading bits of numerator and denominator.
fn ln_abs(r: &Rational) -> f64 {
    let ln_big = |n: &num_bigint::BigInt| {
        let bits = n.bits();
        let shift = bits.saturating_sub(60);
        let top: num_bigint::BigInt = n.magnitude().clone().into();
        let top = rational::to_f64(&Rational::from_integer(top >> shift));
        top.ln() + shift as f64 * std::f64::consts::LN_2
    };
    ln_big(r.numer()) - ln_big(r.denom())
}

/// Floating-point oracle for convergent families: the first 400 terms,
/// evaluated in log space from the closed form, never sum past the certified
/// upper bound.
fn oracle_stays_below(fam: &MassFamily, hi: &Rational) -> bool {
    let h = rational::to_f64(hi);
    if !h.is_finite() {
        return true;
    }
    let ln2 = std::f64::consts::LN_2;
    let mut sum = 0.0f64;
    match fam {
        MassFamily::Geometric { c, a, rho, filter } => {
            let (lc, la, lr) = (c.ln_f64(), rational::to_f64(a), rho.ln_f64());
            for m in (1..=400u64).filter(|&m| filter.admits(m)) {
                sum += (lc - la * (m as f64).ln() + lr * m as f64).exp();
            }
        }
        MassFamily::Factorial { values, q, b } => {
            let (qf, lb) = (rational::to_f64(q), rational::to_f64(b).ln());
            // ln|Σ β θ^m| = m ln θ₁ + ln|Σ β (θ/θ₁)^m| with θ₁ the largest base
            let mut terms: Vec<(f64, f64)> =
                values.terms.iter().map(|(b, t)| (rational::to_f64(b), ln_abs(t))).collect();
            terms.sort_by(|x, y| y.1.total_cmp(&x.1));
            let lt1 = terms.first().map_or(0.0, |t| t.1);
            let mut log2_fact = 0.0f64;
            for m in 1..=400u64 {
                log2_fact += (m as f64).log2();
                let rest: f64 = terms.iter().map(|(b, lt)| b * ((lt - lt1) * m as f64).exp()).sum();
                if rest == 0.0 {
                    continue;
                }
                let ln_v = m as f64 * lt1 + rest.abs().ln();
                // share 2^-(⌈log₂ m!⌉ + 1); m! is a power of two only for m ≤ 2
                let share = -((log2_fact - 1e-9).ceil() + 1.0) * ln2;
                sum += (qf * ln_v + lb + share).exp();
            }
        }
    }
    sum <= h * (1.0 + 1e-9)
}

/// Replays every collected verdict; runs two identical CLI invocations per
/// verb and compares bytes.
pub fn criterion_8(col: &Collected) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut n = 0usize;
    for r in &col.reports {
        c.check(r.replay_all(), format!("{} ({}) fails replay", r.claim, &r.witness_hash[..12]));
        n += r.verdicts.len();
    }
    let mut bounded = 0usize;
    let mut seen = std::collections::HashSet::new();
    let mut oracle = |fam: &MassFamily, hi: &Rational| !seen.insert(format!("{fam:?}|{hi}")) || oracle_stays_below(fam, hi);
    for (v, fam) in &col.verdicts {
        c.check(replay(v, fam), format!("verdict {} fails replay", v.cert().type_name()));
        if let Verdict::Converges { bound: Some(b), .. } = v {
            c.check(oracle(fam, b.hi()), format!("{}: partial sums exceed the bound", v.cert().type_name()));
            bounded += 1;
        }
    }
    for ev in col.reports.iter().flat_map(|r| &r.verdicts).filter_map(|v| v.evidence.as_ref()) {
        if let (Verdict::Converges { bound: Some(b), .. }, Some(fam)) = (&ev.verdict, &ev.family) {
            c.check(oracle(fam, b.hi()), format!("{}: partial sums exceed the bound", ev.verdict.cert().type_name()));
            bounded += 1;
        }
    }
    c.check(n + col.verdicts.len() > 0, "nothing to replay");
    c.try_run("cli determinism", |c| {
        let dir = std::env::temp_dir().join(format!("pathology-forge-suite-{}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let path = |s: &str| dir.join(s).to_string_lossy().into_owned();
        let runs: Vec<Vec<String>> = vec![
            vec!["build", "--space", "unit-interval", "--p", "1", "--kind", "sp-basic", "--count", "2", "--horizon", "8", "--out", "{}/w.json"],
            vec!["certify", "{}/w.json", "--claim", "nowhere-lq", "--q", "2", "--depth", "8", "--out", "{}/c.json"],
            vec!["export", "{}/w.json", "--depth", "6", "--out", "{}/e.csv"],
            vec!["transport", "{}/w.json", "--map", "F", "--out", "{}/t.json"],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        let mut first: Vec<Vec<u8>> = vec![];
        for round in 0..2 {
            for (i, args) in runs.iter().enumerate() {
                let argv: Vec<String> = std::iter::once("pathology-forge".to_string())
                    .chain(args.iter().map(|a| a.replace("{}", &dir.to_string_lossy())))
                    .collect();
                let (mut out, mut err) = (vec![], vec![]);
                let code = crate::cli::run(argv, &mut out, &mut err);
                c.check(code == 0, format!("`{}` exited {code}: {}", args[0], String::from_utf8_lossy(&err)));
                let file = args.last().expect("every run writes a file").replace("{}/", "");
                let bytes = std::fs::read(path(&file))?;
                if round == 0 {
                    first.push(bytes);
                } else {
                    c.check(first[i] == bytes, format!("`{}` output differs between runs", args[0]));
                }
            }
        }
        std::fs::remove_dir_all(&dir)?;
        Ok(())
    });
    c.note(format!(
        "{} report verdicts and {} series verdicts replayed; {bounded} bounds checked against partial sums",
        n,
        col.verdicts.len()
    ));
    finish(8, "replay and determinism", start, c)
}

pub fn run_all() -> Vec<Outcome> {
    let mut col = Collected::default();
    let mut out = vec![
        criterion_1(&mut col),
        criterion_2(&mut col),
        criterion_3(&mut col),
        criterion_4(&mut col),
        criterion_5(&mut col),
        criterion_6(&mut col),
        criterion_7(&mut col),
    ];
    out.push(criterion_8(&col));
    out
}

/// Runs criterion `id` alone. Criterion 8 still needs the other seven to
/// collect verdicts, so it runs them silently first.
pub fn run_only(id: u32) -> Result<Vec<Outcome>> {
    let mut col = Collected::default();
    let o = match id {
        1 => criterion_1(&mut col),
        2 => criterion_2(&mut col),
        3 => criterion_3(&mut col),
        4 => criterion_4(&mut col),
        5 => criterion_5(&mut col),
        6 => criterion_6(&mut col),
        7 => criterion_7(&mut col),
        8 => return Ok(run_all().pop().into_iter().collect()),
        _ => return Err(crate::Error::Parse(format!("no criterion {id}; expected 1 to 8"))),
    };
    Ok(vec![o])
}

pub fn line(o: &Outcome) -> String {
    format!(
        "{} criterion {}: {} [{:.1}s] {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.elapsed.as_secs_f64(),
        o.detail
    )
}

pub fn table(results: &[Outcome]) -> String {
    results.iter().map(line).collect::<Vec<_>>().join("\n")
}
