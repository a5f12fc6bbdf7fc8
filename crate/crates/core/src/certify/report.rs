use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::verdict::{replay, series_verdict, Certificate, LowerBound, Verdict};
use crate::constructions::{check_distinct, dominance_threshold, evaluate, AlmostDisjointIndex, Freeness, PolynomialExpr};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::exactnum::{Enclosure, ExactPosReal};
use crate::io::{sha256_hex, witness_hash};
use crate::series::{Coefficient, GroupShape, MassFamily, Strand, StrandId, Witness, WitnessKind};
use crate::transport::resident;

/// Reduction recorded in every nowhere-type report.
pub const POINTWISE_REDUCTION: &str = "every nonvoid open set contains a base element U_n; \
     divergence on each U_n therefore gives divergence on every nonvoid open set";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Lq(Rational),
    Linf,
}

impl Target {
    pub fn claim(&self) -> String {
        match self {
            Target::Lq(q) => format!("NowhereLq({})", rational::render(q)),
            Target::Linf => "NowhereLinf".into(),
        }
    }
}

/// What a verdict was derived from; kept in memory for replay, not serialized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub verdict: Verdict,
    pub family: Option<MassFamily>,
    pub strand: Strand,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexVerdict {
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    pub strand: StrandId,
    pub verdict: String,
    #[serde(flatten)]
    pub cert: Certificate,
    /// Tensor witnesses: the level cell of the second factor and the Rademacher value on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<Value>,
    #[serde(skip)]
    pub evidence: Option<Evidence>,
}

impl IndexVerdict {
    fn new(n: u64, q: Option<&Rational>, ev: Evidence, factor: Option<Value>) -> Self {
        Self {
            n,
            q: q.map(rational::render),
            strand: ev.strand.id,
            verdict: if ev.verdict.diverges() { "diverges" } else { "converges" }.into(),
            cert: ev.verdict.cert().clone(),
            factor,
            evidence: Some(ev),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub witness_hash: String,
    pub claim: String,
    pub depth: u64,
    /// A construction rule covers every index beyond `depth`.
    pub uniform: bool,
    pub granted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<String>,
    pub verdicts: Vec<IndexVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Wall-clock time; kept out of the JSON so output stays byte-identical.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Report {
    fn new(witness_hash: String, claim: String, depth: u64) -> Self {
        Self {
            witness_hash,
            claim,
            depth,
            uniform: false,
            granted: false,
            reduction: None,
            verdicts: vec![],
            notes: vec![],
            elapsed: Duration::ZERO,
        }
    }

    /// Replays every verdict against the evidence it was derived from.
    pub fn replay_all(&self) -> bool {
        self.verdicts.iter().all(|v| match &v.evidence {
            None => false,
            Some(ev) => match (&ev.verdict, &ev.family) {
                (Verdict::Diverges { cert: c @ Certificate::UnboundedValues { .. } }, _) => replay_unbounded(c, &ev.strand),
                (verdict, Some(fam)) => replay(verdict, fam),
                (_, None) => false,
            },
        })
    }
}

/// Checks an unboundedness certificate against the strand's coefficients.
pub fn replay_unbounded(cert: &Certificate, strand: &Strand) -> bool {
    let Certificate::UnboundedValues { lower, j0 } = cert else { return false };
    match (lower, &strand.coeff) {
        (LowerBound::Geometric { a, alpha, kappa }, Coefficient::Geometric { a: sa, alpha: sal, kappa: sk }) => {
            a == sa && alpha == sal && kappa == sk && *kappa.enclose(96).lo() > Rational::one()
        }
        (LowerBound::Dominant { beta1, theta1 }, Coefficient::Values(v)) => {
            let Some((b, t)) = v.terms.first() else { return false };
            if b != beta1 || t != theta1 || *theta1 <= Rational::one() || *j0 == 0 {
                return false;
            }
            let half = beta1.abs() / rational::int(2);
            (*j0..*j0 + 32).all(|j| v.value(j).abs() > &half * rational::powi(theta1, &j.into()))
        }
        _ => false,
    }
}

fn unbounded_verdict(strand: &Strand) -> Option<Verdict> {
    if !strand.is_unbounded() {
        return None;
    }
    let cert = match &strand.coeff {
        Coefficient::Geometric { a, alpha, kappa } => Certificate::UnboundedValues {
            lower: LowerBound::Geometric { a: a.clone(), alpha: alpha.clone(), kappa: kappa.clone() },
            j0: strand.filter.after + 1,
        },
        Coefficient::Values(v) => {
            let (beta1, theta1) = v.terms.first()?.clone();
            Certificate::UnboundedValues { lower: LowerBound::Dominant { beta1, theta1 }, j0: dominance_threshold(&v.terms) }
        }
    };
    Some(Verdict::Diverges { cert })
}

/// A divergence verdict for `target` from one group, if the group provides one.
fn group_divergence(w: &Witness, gid: u64, target: &Target) -> Result<Option<Evidence>> {
    let g = w.group(gid).ok_or(Error::MissingResident(gid))?;
    let k = match (target, g.strand_count(), g.rseq()) {
        (_, Some(_), _) => 1,
        (Target::Linf, _, _) => 1,
        (Target::Lq(q), None, Some(r)) => match r.first_strictly_past(q) {
            Some(k) => k,
            None => return Ok(None),
        },
        (Target::Lq(_), None, None) => return Ok(None),
    };
    match target {
        Target::Linf => {
            let strand = g.strand(k);
            Ok(unbounded_verdict(&strand).map(|verdict| Evidence { verdict, family: None, strand }))
        }
        Target::Lq(q) => {
            let terms = w.strand_terms(g, k, q)?;
            let verdict = series_verdict(&terms.family)?;
            Ok(verdict.diverges().then_some(Evidence { verdict, family: Some(terms.family), strand: terms.strand }))
        }
    }
}

fn index_verdict(w: &Witness, n: u64, target: &Target) -> Result<Option<IndexVerdict>> {
    let res = resident(w, n)?;
    let factor = res.factor.as_ref().map(|f| {
        json!({"cell": crate::spaces::SetExpr::Dyadic(f.cell.clone()).to_json(), "value": rational::render(&f.value)})
    });
    for gid in res.groups {
        if let Some(ev) = group_divergence(w, gid, target)? {
            let q = match target {
                Target::Lq(q) => Some(q),
                Target::Linf => None,
            };
            return Ok(Some(IndexVerdict::new(n, q, ev, factor)));
        }
    }
    Ok(None)
}

/// Divergence of `w` restricted to every base element `U_n`, `n <= depth`,
/// from strands resident in `U_n`.
///
/// A witness with no strands is simple, hence bounded and q-integrable on
/// every base element: the claim is denied. A uniform construction that fails
/// to place a resident strand is a bug and surfaces as `MissingResident`.
pub fn nowhere_report(w: &Witness, target: &Target, depth: u64) -> Result<Report> {
    let start = Instant::now();
    let mut report = Report::new(witness_hash(w), target.claim(), depth);
    report.reduction = Some(POINTWISE_REDUCTION.into());
    if w.groups.is_empty() {
        report.notes.push("no strands: the witness is simple, hence bounded on a base element".into());
        report.elapsed = start.elapsed();
        return Ok(report);
    }
    let found = crate::par::map_range(0, depth + 1, |n| index_verdict(w, n, target));
    let mut missing = vec![];
    for (n, v) in found.into_iter().enumerate() {
        match v? {
            Some(v) => report.verdicts.push(v),
            None => missing.push(n as u64),
        }
    }
    report.uniform = w.uniform;
    if let Some(&n) = missing.first() {
        if w.uniform && matches!(target, Target::Lq(q) if *q > w.p) && w.tensor.is_none() {
            return Err(Error::MissingResident(n));
        }
        report.notes.push(format!("no divergent resident strand in {} of {} base elements (first: U_{n})", missing.len(), depth + 1));
    }
    if !w.uniform {
        report.notes.push("no construction rule covers indices beyond the depth".into());
    }
    report.granted = missing.is_empty() && w.uniform;
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Strands of each group checked by [`lp_report`].
const LP_STRANDS: u64 = 3;

/// `w ∈ L^p`: a convergence verdict for the first strands of every
/// materialized group, and a finite tail mass for everything beyond.
pub fn lp_report(w: &Witness) -> Result<Report> {
    let start = Instant::now();
    let mut report = Report::new(witness_hash(w), format!("InLp({})", rational::render(&w.p)), w.horizon);
    let jobs: Vec<(u64, u64)> = w
        .groups
        .iter()
        .flat_map(|g| (1..=g.strand_count().unwrap_or(LP_STRANDS)).map(move |k| (g.id, k)))
        .collect();
    let out = crate::par::map_slice(&jobs, |&(gid, k)| -> Result<IndexVerdict> {
        let g = w.group(gid).expect("job ids come from the witness");
        let terms = w.strand_terms(g, k, &w.p)?;
        let verdict = series_verdict(&terms.family)?;
        let ev = Evidence { verdict, family: Some(terms.family), strand: terms.strand };
        Ok(IndexVerdict::new(g.base.unwrap_or(gid), None, ev, None))
    });
    for v in out {
        report.verdicts.push(v?);
    }
    let all_converge = report.verdicts.iter().all(|v| v.verdict == "converges");
    let finite_norm = w.norm.hi().is_positive() || w.is_zero();
    report.uniform = true;
    report.notes.push(format!(
        "norm in [{}, {}]; p-mass beyond the horizon at most {}",
        rational::render(w.norm.lo()),
        rational::render(w.norm.hi()),
        rational::render(w.tail_p.hi())
    ));
    if !w.simple.is_empty() {
        report.notes.push(format!("simple part of {} cells of finite measure", w.simple.len()));
    }
    report.granted = all_converge && (finite_norm || w.simple.is_empty());
    report.elapsed = start.elapsed();
    Ok(report)
}

/// `w ∉ L^q` globally: a divergent strand anywhere in the witness.
pub fn not_lq_report(w: &Witness, q: &Rational) -> Result<Report> {
    let start = Instant::now();
    let mut report = Report::new(witness_hash(w), format!("NotInLq({})", rational::render(q)), w.horizon);
    for t in w.q_mass_series(q, None)? {
        let verdict = series_verdict(&t.family)?;
        if verdict.diverges() {
            let ev = Evidence { verdict, family: Some(t.family), strand: t.strand };
            report.verdicts.push(IndexVerdict::new(t.base.unwrap_or(t.id.group), Some(q), ev, None));
            break;
        }
    }
    report.uniform = true;
    report.granted = !report.verdicts.is_empty();
    report.elapsed = start.elapsed();
    Ok(report)
}

/// `w ∈ S_p`-type claim: [`lp_report`] together with a nowhere report for every `q` in `qs`.
pub fn sp_report(w: &Witness, qs: &[Rational], depth: u64) -> Result<Report> {
    let start = Instant::now();
    let lp = lp_report(w)?;
    let mut report = Report::new(lp.witness_hash.clone(), format!("InSp({})", rational::render(&w.p)), depth);
    report.reduction = Some(POINTWISE_REDUCTION.into());
    report.granted = lp.granted;
    report.uniform = lp.uniform;
    report.notes = lp.notes;
    report.verdicts = lp.verdicts;
    for q in qs {
        let r = nowhere_report(w, &Target::Lq(q.clone()), depth)?;
        report.granted &= r.granted;
        report.uniform &= r.uniform;
        report.notes.extend(r.notes.into_iter().map(|n| format!("q = {}: {n}", rational::render(q))));
        report.verdicts.extend(r.verdicts);
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Outcome of [`isometry_check`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IsometryCheck {
    /// Enclosure of `‖Σ c_m f_m‖_p^p`.
    pub p_mass: Enclosure,
    /// Enclosure of `Σ |c_m|^p`.
    pub target: Enclosure,
    #[serde(with = "super::verdict::ratstr")]
    pub tol: Rational,
    pub ok: bool,
}

fn pow_enclosure(e: &Enclosure, p: &Rational) -> Enclosure {
    let end = |x: &Rational, lo: bool| {
        if x.is_zero() {
            return Rational::zero();
        }
        let enc = ExactPosReal::from_rational(x.clone()).pow(p).enclose(96);
        if lo {
            enc.lo().clone()
        } else {
            enc.hi().clone()
        }
    };
    Enclosure::new(end(e.lo(), true), end(e.hi(), false))
}

/// `‖Σ c_m f_m‖_p^p = Σ |c_m|^p ‖f_m‖_p^p` for members with disjoint supports,
/// checked against `Σ |c_m|^p` with relative tolerance `tol`.
pub fn isometry_check(family: &[Witness], coeffs: &[Rational], p: &Rational, tol: &Rational) -> Result<IsometryCheck> {
    if family.len() != coeffs.len() {
        return Err(Error::Parse(format!("{} members but {} coefficients", family.len(), coeffs.len())));
    }
    for i in 0..family.len() {
        for j in 0..i {
            let disjoint = family[i].groups.iter().all(|a| family[j].groups.iter().all(|b| a.disjoint(b) == Some(true)))
                && family[i].simple.is_empty()
                && family[j].simple.is_empty();
            if !disjoint {
                return Err(Error::OverlapDetected(j, i));
            }
        }
    }
    let mut p_mass = Enclosure::zero();
    let mut target = Enclosure::zero();
    for (w, c) in family.iter().zip(coeffs) {
        if c.is_zero() {
            continue;
        }
        let cp = ExactPosReal::from_rational(c.abs()).pow(p).enclose(96);
        target = target.add(&cp);
        p_mass = p_mass.add(&cp.mul_nonneg(&pow_enclosure(&w.norm, p)));
    }
    let band = Enclosure::new(
        target.lo() * (Rational::one() - tol),
        target.hi() * (Rational::one() + tol),
    );
    let ok = p_mass.intersects(&band);
    Ok(IsometryCheck { p_mass, target, tol: tol.clone(), ok })
}

/// Zero polynomial, or the exact dominance threshold of its evaluation.
pub fn freeness_check(gens: &[u64], poly: &PolynomialExpr) -> Result<Freeness> {
    evaluate(gens, poly)
}

/// Exact scan: `|w_j| > ½|β₁|θ₁^j` for `j0 <= j <= upto`.
pub fn verify_threshold(f: &Freeness, upto: u64) -> bool {
    match f {
        Freeness::ZeroPolynomial => true,
        Freeness::NonzeroWitness { values, j0 } => {
            let (b1, t1) = &values.terms[0];
            let half = b1.abs() / rational::int(2);
            (*j0..=upto).all(|j| values.value(j).abs() > &half * rational::powi(t1, &j.into()))
                && (*j0 == 1 || {
                    // minimality: the defining strict inequality fails just below j0
                    let j = j0 - 1;
                    let rest = values.terms[1..]
                        .iter()
                        .fold(Rational::zero(), |acc, (b, t)| acc + b.abs() * rational::powi(t, &j.into()));
                    rest >= &half * rational::powi(t1, &j.into())
                })
        }
    }
}

fn seed_of(w: &Witness) -> Result<(u64, AlmostDisjointIndex)> {
    match w.groups.first().map(|g| &g.shape) {
        Some(GroupShape::Halving { carrier, filter, .. }) if w.kind == WitnessKind::DenseGen => {
            let set = filter.set.clone().ok_or_else(|| Error::ModelMismatch("generator without index set".into()))?;
            Ok((carrier.ledger, set))
        }
        _ => Err(Error::ModelMismatch("dense combinations take dense generators".into())),
    }
}

/// `Σ b_i g^{β_i, n_i} ∈ S_p`: every generator is in `L^p`, and past the cut
/// `N` where the index sets separate, the first generator with `b_i ≠ 0` keeps
/// a divergent strand in every base element for each `q` in `qs`.
pub fn dense_combination_certify(combo: &[(Rational, Witness)], depth: u64, qs: &[Rational]) -> Result<Report> {
    let start = Instant::now();
    let live: Vec<&(Rational, Witness)> = combo.iter().filter(|(b, _)| !b.is_zero()).collect();
    let Some((_, lead)) = live.first() else { return Err(Error::AllZero) };
    let p = lead.p.clone();
    let mut seeds = vec![];
    let mut ledger = None;
    for (_, w) in combo {
        let (l, s) = seed_of(w)?;
        if w.p != p || *ledger.get_or_insert(l) != l {
            return Err(Error::ModelMismatch("generators built over different carriers".into()));
        }
        seeds.push(s);
    }
    check_distinct(&seeds)?;
    let live_seeds: Vec<AlmostDisjointIndex> = live.iter().map(|(_, w)| seed_of(w).map(|s| s.1)).collect::<Result<_>>()?;
    let mut cut = 0u64;
    for i in 0..live_seeds.len() {
        for j in 0..i {
            cut = cut.max(live_seeds[i].intersection_cut(&live_seeds[j]));
        }
    }
    let hashes: Vec<Value> =
        combo.iter().map(|(b, w)| json!({"coeff": rational::render(b), "hash": witness_hash(w)})).collect();
    let mut report = Report::new(
        sha256_hex(Value::Array(hashes).to_string().as_bytes()),
        format!("InSp({})", rational::render(&p)),
        depth,
    );
    report.reduction = Some(POINTWISE_REDUCTION.into());
    report.notes.push(format!("index sets of the live generators are pairwise disjoint past N = {cut}"));
    report.notes.push(
        "on a resident piece past N only the leading generator is nonzero; the simple part is bounded there, \
         so the divergence of the leading strand carries over"
            .into(),
    );
    let mut p_ok = true;
    for (_, w) in &live {
        let r = lp_report(w)?;
        p_ok &= r.granted;
    }
    report.notes.push(format!("p-membership of every live generator: {}", if p_ok { "certified" } else { "failed" }));

    let mut missing = 0usize;
    for q in qs {
        if *q <= p {
            return Err(Error::Parse(format!("q = {} must exceed p", rational::render(q))));
        }
        let found = crate::par::map_range(0, depth + 1, |n| -> Result<Option<IndexVerdict>> {
            for gid in resident(lead, n)?.groups {
                let g = lead.group(gid).expect("resident ids come from the witness");
                let Some(k) = g.rseq().and_then(|r| r.first_strictly_past(q)) else { continue };
                let mut terms = lead.strand_terms(g, k, q)?;
                if let MassFamily::Geometric { filter, .. } = &mut terms.family {
                    filter.after = cut;
                }
                let verdict = series_verdict(&terms.family)?;
                if verdict.diverges() {
                    let ev = Evidence { verdict, family: Some(terms.family), strand: terms.strand };
                    return Ok(Some(IndexVerdict::new(n, Some(q), ev, None)));
                }
            }
            Ok(None)
        });
        for v in found {
            match v? {
                Some(v) => report.verdicts.push(v),
                None => missing += 1,
            }
        }
    }
    report.uniform = live.iter().all(|(_, w)| w.uniform);
    report.granted = p_ok && missing == 0 && report.uniform;
    if missing > 0 {
        report.notes.push(format!("{missing} base elements without a divergent strand"));
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{
        algebra_generator_eval, build_basic_family, build_dense_generators, build_gb, build_ha, build_simple, DensePair,
        FamilyMode,
    };
    use crate::exactnum::rational::{pow2, rat};
    use crate::spaces::{DyadicInterval, SetExpr, SpaceModel};

    #[test]
    fn ha_is_nowhere_l2() {
        let w = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 8).unwrap();
        let r = nowhere_report(&w, &Target::Lq(rat(2, 1)), 8).unwrap();
        assert!(r.granted && r.uniform);
        assert_eq!(r.verdicts.len(), 9);
        assert!(r.replay_all());
        let p = lp_report(&w).unwrap();
        assert!(p.granted && p.replay_all());
        assert!(p.verdicts.iter().all(|v| v.cert.type_name() == "RatioTest"));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["verdicts"][0]["type"], "GeometricGrowth");
        assert!(json.get("elapsed").is_none());
    }

    #[test]
    fn simple_witness_is_denied() {
        let s = build_simple(SpaceModel::UnitInterval, rat(1, 1), vec![(rat(2, 1), SetExpr::Dyadic(DyadicInterval::new(1, 0)))])
            .unwrap();
        let r = nowhere_report(&s, &Target::Lq(rat(2, 1)), 4).unwrap();
        assert!(!r.granted);
    }

    #[test]
    fn gb_misses_lower_exponents() {
        let w = build_gb(SpaceModel::HalfLine, rat(2, 1), None).unwrap();
        assert!(lp_report(&w).unwrap().granted);
        for q in [rat(1, 2), rat(1, 1), rat(3, 2)] {
            let r = not_lq_report(&w, &q).unwrap();
            assert!(r.granted && r.replay_all(), "q = {q}");
        }
    }

    #[test]
    fn algebra_is_nowhere_bounded() {
        let w = algebra_generator_eval(SpaceModel::UnitInterval, rat(1, 1), &[2, 3], &"x0*x1".parse().unwrap(), 10).unwrap();
        let r = nowhere_report(&w, &Target::Linf, 10).unwrap();
        assert!(r.granted && r.replay_all());
        assert!(matches!(r.verdicts[0].cert, Certificate::UnboundedValues { j0: 1, .. }));
        assert!(lp_report(&w).unwrap().granted);
    }

    #[test]
    fn isometry() {
        let ws = build_basic_family(SpaceModel::UnitInterval, rat(1, 1), 2, FamilyMode::Sp, None, 6).unwrap();
        let c = isometry_check(&ws, &[rat(1, 1), rat(1, 1)], &rat(1, 1), &pow2(-16)).unwrap();
        assert!(c.ok && c.p_mass.contains(&rat(2, 1)));
        let dup = vec![ws[0].clone(), ws[0].clone()];
        assert!(matches!(isometry_check(&dup, &[rat(1, 1), rat(1, 1)], &rat(1, 1), &pow2(-16)), Err(Error::OverlapDetected(0, 1))));
    }

    #[test]
    fn freeness() {
        let f = freeness_check(&[2, 3], &"x1 - x0".parse().unwrap()).unwrap();
        assert!(matches!(f, Freeness::NonzeroWitness { j0: 2, .. }) && verify_threshold(&f, 200));
    }

    #[test]
    fn dense_combinations() {
        let half = SetExpr::Dyadic(DyadicInterval::new(1, 0));
        let pairs = vec![
            DensePair { set: half.clone(), n: 4, seed: "0".parse().unwrap() },
            DensePair { set: half, n: 3, seed: "1".parse().unwrap() },
        ];
        let gs = build_dense_generators(SpaceModel::UnitInterval, rat(1, 1), &pairs, 6).unwrap();
        let combo = vec![(rat(1, 1), gs[0].clone()), (rat(-1, 1), gs[1].clone())];
        let r = dense_combination_certify(&combo, 6, &[rat(2, 1)]).unwrap();
        assert!(r.granted && r.replay_all(), "{:?}", r.notes);
        let zero = vec![(rat(0, 1), gs[0].clone())];
        assert!(matches!(dense_combination_certify(&zero, 6, &[rat(2, 1)]), Err(Error::AllZero)));
    }
}
