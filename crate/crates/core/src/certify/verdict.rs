use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::constructions::{block_sum_exact, AlmostDisjointIndex};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::exactnum::{default_goal, enclose_sum, Enclosure, ExactPosReal};
use crate::series::{IndexFilter, MassFamily};

pub(crate) mod ratstr {
    use crate::exactnum::rational::{self, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational::render(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        rational::parse(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Almost-disjoint index set a harmonic comparison runs over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub seed: String,
    pub after: u64,
}

/// Lower bound on `|values|` used by [`Certificate::UnboundedValues`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum LowerBound {
    /// `|c_m| = A m^(-α) κ^m` with `κ > 1`.
    Geometric {
        a: ExactPosReal,
        #[serde(with = "ratstr")]
        alpha: Rational,
        kappa: ExactPosReal,
    },
    /// `|w_j| > ½ |β₁| θ₁^j` for `j >= j0`, `θ₁ > 1`.
    Dominant {
        #[serde(with = "ratstr")]
        beta1: Rational,
        #[serde(with = "ratstr")]
        theta1: Rational,
    },
}

/// Exact finite data from which a verdict can be re-derived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params")]
pub enum Certificate {
    /// Consecutive-term ratio at most `ρ·((m+1)/m)^max(-a,0) < 1` from `from_index` on.
    RatioTest {
        rho: ExactPosReal,
        #[serde(with = "ratstr")]
        poly: Rational,
        from_index: u64,
    },
    /// Terms `c m^(-a) ρ^m` with `ρ > 1` tend to infinity.
    GeometricGrowth {
        rho: ExactPosReal,
        constant: ExactPosReal,
        #[serde(with = "ratstr")]
        poly: Rational,
    },
    /// `Σ C m^(-e)`, convergent iff `e > 1`.
    PSeries {
        #[serde(with = "ratstr")]
        exponent: Rational,
        constant: ExactPosReal,
        converges: bool,
    },
    /// Terms `>= C/m` (over an almost-disjoint index set when `blocks` is given,
    /// whose blocks `[4^k, 4^(k+1))` each carry `Σ 1/m >= 1`).
    HarmonicComparison {
        constant: ExactPosReal,
        #[serde(with = "ratstr")]
        exponent: Rational,
        blocks: Option<BlockSpec>,
    },
    /// Terms at most `S^q θ^(qj) 2^-(e_j+1) b`, consecutive ratio `<= θ^q 2/(j+1) < 1` from `from_index`.
    FactorialRatio {
        #[serde(with = "ratstr")]
        theta: Rational,
        #[serde(with = "ratstr")]
        growth: Rational,
        #[serde(with = "ratstr")]
        q: Rational,
        from_index: u64,
        /// Exact upper bound on `log₂` of the sum.
        #[serde(with = "ratstr")]
        log2_bound: Rational,
    },
    /// Values on positive-measure pieces exceed every bound.
    UnboundedValues { lower: LowerBound, j0: u64 },
}

impl Certificate {
    pub fn type_name(&self) -> &'static str {
        match self {
            Certificate::RatioTest { .. } => "RatioTest",
            Certificate::GeometricGrowth { .. } => "GeometricGrowth",
            Certificate::PSeries { .. } => "PSeries",
            Certificate::HarmonicComparison { .. } => "HarmonicComparison",
            Certificate::FactorialRatio { .. } => "FactorialRatio",
            Certificate::UnboundedValues { .. } => "UnboundedValues",
        }
    }

    pub fn is_divergence(&self) -> bool {
        match self {
            Certificate::GeometricGrowth { .. }
            | Certificate::HarmonicComparison { .. }
            | Certificate::UnboundedValues { .. } => true,
            Certificate::PSeries { converges, .. } => !converges,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    /// `bound` encloses the sum when it is small enough to materialize; the
    /// certificate always carries the exact finite argument.
    Converges { bound: Option<Enclosure>, cert: Certificate },
    Diverges { cert: Certificate },
}

impl Verdict {
    pub fn cert(&self) -> &Certificate {
        match self {
            Verdict::Converges { cert, .. } | Verdict::Diverges { cert } => cert,
        }
    }

    pub fn diverges(&self) -> bool {
        matches!(self, Verdict::Diverges { .. })
    }
}

fn one() -> ExactPosReal {
    ExactPosReal::one()
}

/// `ρ·((m+1)/m)^g < 1` with `g = max(-a, 0)`: the first such `m`.
fn ratio_start(rho: &ExactPosReal, a: &Rational) -> Option<u64> {
    if !a.is_negative() {
        return Some(1);
    }
    let g = -a.clone();
    // ((m+1)/m)^g ρ decreases in m toward ρ < 1; bisect on a doubling bracket
    let ok = |m: u64| {
        ExactPosReal::from_rational(rational::rat(m as i64 + 1, m as i64))
            .pow(&g)
            .mul(rho)
            .compare(&one())
            .is_lt()
    };
    let mut hi = 1u64;
    while !ok(hi) {
        hi = hi.checked_mul(2)?;
        if hi > 1 << 40 {
            return None;
        }
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Some(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `c m^(-a) ρ^m >= c/m` for every `m >= 1`: holds when `a <= 1`, or when
/// `ρ >= 2^(a-1)` (then `ρ^m >= 2^(m(a-1)) >= m^(a-1)`).
fn dominates_harmonic(a: &Rational, rho: &ExactPosReal) -> bool {
    if *a <= Rational::one() {
        return rho.compare(&one()) != Ordering::Less;
    }
    rho.compare(&ExactPosReal::power_of(rational::int(2), a - Rational::one())) != Ordering::Less
}

/// Factorial families whose ratio threshold lies beyond this index are not summed.
const MAX_SUMMED_THRESHOLD: u64 = 1024;

fn bound_of(fam: &MassFamily) -> Result<Option<Enclosure>> {
    let r = match enclose_sum(fam, &default_goal()) {
        Ok(e) => Ok(e),
        Err(Error::GoalUnreachable(_)) => enclose_sum(fam, &rational::pow2(40)),
        Err(e) => Err(e),
    };
    r.map(Some)
}

/// Decides convergence of a closed-form mass family.
pub fn series_verdict(fam: &MassFamily) -> Result<Verdict> {
    match fam {
        MassFamily::Geometric { c, a, rho, filter } => {
            let ord = rho.compare(&one());
            if ord == Ordering::Less {
                let from_index = ratio_start(rho, a)
                    .ok_or_else(|| Error::UnclassifiableFamily("ratio never drops below 1".into()))?;
                let cert = Certificate::RatioTest { rho: rho.clone(), poly: a.clone(), from_index };
                return Ok(Verdict::Converges { bound: bound_of(fam)?, cert });
            }
            if let Some(set) = &filter.set {
                if dominates_harmonic(a, rho) {
                    let cert = Certificate::HarmonicComparison {
                        constant: c.clone(),
                        exponent: Rational::one(),
                        blocks: Some(BlockSpec { seed: set.seed.to_string(), after: filter.after }),
                    };
                    return Ok(Verdict::Diverges { cert });
                }
                return Err(Error::UnclassifiableFamily("filtered family below the harmonic bound".into()));
            }
            match ord {
                Ordering::Greater => Ok(Verdict::Diverges {
                    cert: Certificate::GeometricGrowth { rho: rho.clone(), constant: c.clone(), poly: a.clone() },
                }),
                _ if *a > Rational::one() => {
                    let cert = Certificate::PSeries { exponent: a.clone(), constant: c.clone(), converges: true };
                    Ok(Verdict::Converges { bound: bound_of(fam)?, cert })
                }
                _ => Ok(Verdict::Diverges {
                    cert: Certificate::HarmonicComparison { constant: c.clone(), exponent: a.clone(), blocks: None },
                }),
            }
        }
        MassFamily::Factorial { values, q, .. } => {
            let (s, theta) = values.growth_bound();
            let MassFamily::Factorial { values, b, .. } = fam else { unreachable!() };
            let from_index = MassFamily::factorial_ratio_start(&theta, q);
            let log2_bound = MassFamily::factorial_log2_bound(values, q, b);
            let bound = if from_index <= MAX_SUMMED_THRESHOLD {
                // relative goal: 20 bits below the a-priori magnitude
                let rel = rational::pow2(rational::floor_int(&log2_bound).try_into().unwrap_or(i64::MAX / 2) - 20);
                let goal = if rel > default_goal() { rel } else { default_goal() };
                Some(enclose_sum(fam, &goal)?)
            } else {
                None
            };
            let cert = Certificate::FactorialRatio { theta, growth: s, q: q.clone(), from_index, log2_bound };
            Ok(Verdict::Converges { bound, cert })
        }
    }
}

/// Independent re-derivation of a verdict from its certificate and the family.
///
/// Works with outward-rounded enclosures only; it never calls the exact
/// comparison used by [`series_verdict`].
pub fn replay(v: &Verdict, fam: &MassFamily) -> bool {
    let bits = 96;
    let above_one = |x: &ExactPosReal| *x.enclose(bits).lo() > Rational::one();
    let below_one = |x: &ExactPosReal| *x.enclose(bits).hi() < Rational::one();
    let is_one = |x: &ExactPosReal| x.is_one();
    let ok = match (v, fam) {
        (Verdict::Converges { cert: Certificate::RatioTest { rho, poly, from_index }, .. }, MassFamily::Geometric { a, rho: r, .. }) => {
            let g = if poly.is_negative() { -poly.clone() } else { Rational::zero() };
            let m = *from_index as i64;
            rho == r
                && poly == a
                && below_one(&ExactPosReal::from_rational(rational::rat(m + 1, m)).pow(&g).mul(rho))
        }
        (Verdict::Converges { cert: Certificate::PSeries { exponent, converges: true, .. }, .. }, MassFamily::Geometric { a, rho, filter, .. }) => {
            is_one(rho) && exponent == a && *a > Rational::one() && filter.set.is_none()
        }
        (Verdict::Diverges { cert: Certificate::GeometricGrowth { rho, constant, poly } }, MassFamily::Geometric { c, a, rho: r, filter }) => {
            rho == r && constant == c && poly == a && filter.set.is_none() && above_one(rho)
        }
        (Verdict::Diverges { cert: Certificate::HarmonicComparison { constant, exponent, blocks } }, MassFamily::Geometric { c, a, rho, filter }) => {
            constant == c
                && match blocks {
                    None => filter.set.is_none() && is_one(rho) && exponent == a && *a <= Rational::one(),
                    Some(b) => replay_blocks(b, a, rho, filter),
                }
        }
        (Verdict::Converges { cert: Certificate::FactorialRatio { theta, growth, q, from_index, log2_bound }, .. }, MassFamily::Factorial { values, q: fq, b }) => {
            let (s, t) = values.growth_bound();
            let j = Rational::from_integer((*from_index as u128 + 1).into());
            s == *growth
                && t == *theta
                && q == fq
                && *log2_bound >= MassFamily::factorial_log2_bound(values, q, b)
                && below_one(&ExactPosReal::from_rational(theta.clone()).pow(q).mul_rational(&(rational::int(2) / j)))
        }
        _ => false,
    };
    if !ok {
        return false;
    }
    // convergent bounds must contain the truncated sums
    if let Verdict::Converges { bound: Some(bound), .. } = v {
        let mut s = Enclosure::zero();
        for m in 1..=32 {
            if let Some(t) = fam.exact_term(m) {
                s = s.add(&t.enclose(bits));
            }
        }
        return s.lo() <= bound.hi();
    }
    true
}

fn replay_blocks(b: &BlockSpec, a: &Rational, rho: &ExactPosReal, filter: &IndexFilter) -> bool {
    let Some(set) = &filter.set else { return false };
    if set.seed.to_string() != b.seed || filter.after != b.after {
        return false;
    }
    // term >= c/m
    let dom = if *a <= Rational::one() {
        *rho.enclose(96).lo() >= Rational::one() || rho.is_one()
    } else {
        let two = ExactPosReal::power_of(rational::int(2), a - Rational::one());
        rho.enclose(96).lo() >= two.enclose(96).hi() || *rho == two
    };
    // the halving argument covers every block; spot-check the first ones exactly
    let blocks_ok = (0..4).all(|k| block_sum_exact(k) >= Rational::one());
    // infinitely many blocks of A_α lie beyond any cut: one per branch level
    let idx = AlmostDisjointIndex { seed: set.seed.clone() };
    let beyond = (0..5u32).map(|l| idx.block_at_level(l)).collect::<Vec<_>>();
    dom && blocks_ok && beyond.windows(2).all(|w| w[0] < w[1])
}

/// Index past which partial sums of `scale · family` exceed `bound`, when the
/// certificate makes it finitely computable.
///
/// `GeometricGrowth`: a single term already exceeds the bound. `HarmonicComparison`
/// without blocks: `Σ_{m<=4^k} C/m >= C(1+k)`, reported as `4^k`.
pub fn predicted_index(v: &Verdict, scale_lo: &Rational, bound: &Rational) -> Option<PredictedIndex> {
    match v.cert() {
        Certificate::GeometricGrowth { rho, constant, poly } => {
            let lam = ExactPosReal::from_rational(scale_lo.clone()).mul(constant);
            let ln_b = rational::to_f64(bound).ln();
            let (lc, lr) = (lam.ln_f64(), rho.ln_f64());
            let pa = rational::to_f64(poly);
            let f = |m: f64| lc - pa * m.ln() + m * lr;
            let mut m = 1u64;
            while f(m as f64) <= ln_b + 1e-9 {
                m = m.checked_mul(2)?;
            }
            let mut lo = m / 2;
            while m - lo > 1 {
                let mid = lo + (m - lo) / 2;
                if f(mid as f64) > ln_b + 1e-9 {
                    m = mid;
                } else {
                    lo = mid;
                }
            }
            // make the single-term claim exact
            loop {
                let t = lam
                    .mul(&ExactPosReal::from_rational(rational::int(m as i64)).pow(&-poly.clone()))
                    .mul(&rho.pow(&rational::int(m as i64)));
                if t.compare_rational(bound).is_gt() {
                    return Some(PredictedIndex::Term(m));
                }
                m += 1;
            }
        }
        Certificate::HarmonicComparison { constant, blocks: None, .. } => {
            let c = ExactPosReal::from_rational(scale_lo.clone()).mul(constant).enclose(64).lo().clone();
            if !c.is_positive() {
                return None;
            }
            let k = rational::ceil_int(&(bound / c));
            let k: u64 = k.try_into().ok()?;
            Some(PredictedIndex::PowerOfFour(k))
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictedIndex {
    /// The term at this index alone exceeds the bound.
    Term(u64),
    /// The partial sum up to `4^k` exceeds the bound.
    PowerOfFour(u64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::{pow2, rat};

    fn geo(c: ExactPosReal, a: Rational, rho: ExactPosReal) -> MassFamily {
        MassFamily::Geometric { c, a, rho, filter: IndexFilter::all() }
    }

    #[test]
    fn harmonic_diverges() {
        let f = geo(one(), rat(1, 1), one());
        let v = series_verdict(&f).unwrap();
        assert!(matches!(v, Verdict::Diverges { cert: Certificate::HarmonicComparison { .. } }));
        assert!(replay(&v, &f));
        assert_eq!(predicted_index(&v, &rat(1, 1), &rat(10, 1)), Some(PredictedIndex::PowerOfFour(10)));
    }

    #[test]
    fn ratio_test_example() {
        let f = geo(one(), rat(1, 2), ExactPosReal::power_of(rat(1, 2), rat(1, 2)));
        let v = series_verdict(&f).unwrap();
        match &v {
            Verdict::Converges { cert: Certificate::RatioTest { rho, .. }, bound: Some(bound) } => {
                assert_eq!(*rho, ExactPosReal::power_of(rat(1, 2), rat(1, 2)));
                assert!(bound.width() <= pow2(-20));
            }
            other => panic!("{other:?}"),
        }
        assert!(replay(&v, &f));
    }

    #[test]
    fn geometric_growth_example() {
        // m^(-2/3) 2^(m/3)
        let f = geo(one(), rat(2, 3), ExactPosReal::power_of(rat(2, 1), rat(1, 3)));
        let v = series_verdict(&f).unwrap();
        assert!(matches!(v, Verdict::Diverges { cert: Certificate::GeometricGrowth { .. } }));
        assert!(replay(&v, &f));
        let Some(PredictedIndex::Term(m)) = predicted_index(&v, &rat(1, 1), &rat(100, 1)) else { panic!() };
        let t = (m as f64).powf(-2.0 / 3.0) * 2f64.powf(m as f64 / 3.0);
        assert!(t > 100.0);
        let prev = ((m - 1) as f64).powf(-2.0 / 3.0) * 2f64.powf((m - 1) as f64 / 3.0);
        assert!(prev <= 100.0 + 1e-9);
    }

    #[test]
    fn ratio_start_with_polynomial_growth() {
        // m^2 (1/2)^m: ratio ((m+1)/m)^2/2 < 1 from m = 3
        let f = geo(one(), rat(-2, 1), ExactPosReal::from_rational(rat(1, 2)));
        let v = series_verdict(&f).unwrap();
        match &v {
            Verdict::Converges { cert: Certificate::RatioTest { from_index, .. }, .. } => assert_eq!(*from_index, 3),
            other => panic!("{other:?}"),
        }
        assert!(replay(&v, &f));
    }

    #[test]
    fn tampered_certificates_fail_replay() {
        let f = geo(one(), rat(1, 2), ExactPosReal::power_of(rat(1, 2), rat(1, 2)));
        let v = series_verdict(&f).unwrap();
        let g = geo(one(), rat(1, 2), ExactPosReal::power_of(rat(1, 2), rat(1, 3)));
        assert!(!replay(&v, &g));
        let fake = Verdict::Diverges { cert: Certificate::GeometricGrowth { rho: one(), constant: one(), poly: rat(0, 1) } };
        assert!(!replay(&fake, &geo(one(), rat(0, 1), one())));
    }

    #[test]
    fn factorial_threshold_is_closed_form() {
        use crate::series::ExpPoly;
        // θ = 125, q = 7: j0 = floor(2·125^7)
        let t = rat(125, 1);
        let j0 = MassFamily::factorial_ratio_start(&t, &rat(7, 1));
        assert_eq!(j0 as u128, 2 * 125u128.pow(7));
        assert_eq!(MassFamily::factorial_ratio_start(&rat(6, 1), &rat(1, 1)), 12);
        let f = MassFamily::Factorial { values: ExpPoly { terms: vec![(rat(1, 1), t)] }, q: rat(7, 1), b: rat(1, 4) };
        let v = series_verdict(&f).unwrap();
        assert!(matches!(v, Verdict::Converges { bound: None, .. }));
        assert!(replay(&v, &f));
    }

    #[test]
    fn certificate_json_shape() {
        let c = Certificate::PSeries { exponent: rat(3, 2), constant: one(), converges: true };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["type"], "PSeries");
        assert_eq!(v["params"]["exponent"], "3/2");
        let back: Certificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
