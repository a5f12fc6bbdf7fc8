use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::constructions::{log2_factorial_ceil, AlmostDisjointIndex};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};
use crate::exactnum::{geometric_tail, Enclosure, ExactPosReal, TermSource};
use crate::spaces::{pair, CarrierRef, Run, SetExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrandKind {
    GeometricP,
    FactorialDyadic,
}

/// Exponents `r_k`, `k >= 1`: an explicit prefix followed by the default rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RSequence {
    pub p: Rational,
    pub up: bool,
    pub prefix: Vec<Rational>,
}

impl RSequence {
    /// `r_k = p + 1/k` (decreasing to `p`) when `up`, else `r_k = p - p/(2k)`.
    pub fn default_for(p: Rational, up: bool) -> Self {
        Self { p, up, prefix: vec![] }
    }

    pub fn with_prefix(p: Rational, up: bool, prefix: Vec<Rational>) -> Result<Self> {
        let s = Self { p, up, prefix };
        s.validate()?;
        Ok(s)
    }

    fn rule(&self, k: u64) -> Rational {
        let k = rational::int(k as i64);
        if self.up {
            &self.p + k.recip()
        } else {
            &self.p - &self.p / (k * rational::int(2))
        }
    }

    pub fn r(&self, k: u64) -> Rational {
        assert!(k >= 1);
        match self.prefix.get(k as usize - 1) {
            Some(r) => r.clone(),
            None => self.rule(k),
        }
    }

    /// Strict monotonicity toward `p`, on the correct side of `p`, across the
    /// prefix and into the default rule.
    pub fn validate(&self) -> Result<()> {
        let n = self.prefix.len() as u64 + 1;
        for k in 1..=n {
            let (a, b) = (self.r(k), self.r(k + 1));
            let ok = if self.up {
                a > b && b > self.p
            } else {
                a < b && b < self.p && a.is_positive()
            };
            if !ok {
                return Err(Error::InvalidRSequence(format!(
                    "r_{k} = {}, r_{} = {} for p = {}",
                    rational::render(&a),
                    k + 1,
                    rational::render(&b),
                    rational::render(&self.p)
                )));
            }
        }
        Ok(())
    }

    /// First `k` with `r_k` strictly beyond `q` (below `q` when decreasing to
    /// `p < q`, above when increasing to `p > q`).
    pub fn first_strictly_past(&self, q: &Rational) -> Option<u64> {
        if self.up && *q <= self.p || !self.up && *q >= self.p {
            return None;
        }
        (1..).find(|&k| if self.up { self.r(k) < *q } else { self.r(k) > *q })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rule": if self.up { "p+1/k" } else { "p-p/(2k)" },
            "prefix": self.prefix.iter().map(rational::render).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(p: Rational, v: &serde_json::Value) -> Result<Self> {
        let up = match v.get("rule").and_then(|r| r.as_str()) {
            Some("p+1/k") => true,
            Some("p-p/(2k)") => false,
            other => return Err(Error::Schema(format!("unknown r-sequence rule {other:?}"))),
        };
        let prefix = match v.get("prefix") {
            None => vec![],
            Some(serde_json::Value::Array(xs)) => xs
                .iter()
                .map(|x| x.as_str().ok_or_else(|| Error::Schema("r-sequence prefix entries are strings".into())))
                .map(|s| s.and_then(rational::parse))
                .collect::<Result<_>>()?,
            Some(_) => return Err(Error::Schema("r-sequence prefix must be an array".into())),
        };
        Self::with_prefix(p, up, prefix)
    }
}

/// Inner-index filter: `m ∈ A_α` and `m > after`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IndexFilter {
    pub set: Option<AlmostDisjointIndex>,
    pub after: u64,
}

impl IndexFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn is_all(&self) -> bool {
        self.set.is_none() && self.after == 0
    }

    pub fn admits(&self, m: u64) -> bool {
        m > self.after && self.set.as_ref().is_none_or(|s| s.contains(m))
    }
}

/// Signed exponential polynomial `j ↦ Σ β_i θ_i^j` with rational `β_i`, `θ_i > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpPoly {
    pub terms: Vec<(Rational, Rational)>,
}

impl ExpPoly {
    pub fn value(&self, j: u64) -> Rational {
        let e = num_bigint::BigInt::from(j);
        self.terms.iter().fold(Rational::zero(), |acc, (b, t)| acc + b * rational::powi(t, &e))
    }

    /// `Σ|β_i|` and the largest `θ_i`: `|value(j)| <= S·θ_max^j`.
    pub fn growth_bound(&self) -> (Rational, Rational) {
        let s = self.terms.iter().fold(Rational::zero(), |acc, (b, _)| acc + b.abs());
        let t = self.terms.iter().map(|(_, t)| t.clone()).max().unwrap_or_else(Rational::one);
        (s, t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Coefficient {
    /// `A · m^(-α) · κ^m`.
    Geometric { a: ExactPosReal, alpha: Rational, kappa: ExactPosReal },
    /// Exact signed values `w_j`.
    Values(ExpPoly),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrandCarrier {
    /// Piece `m` is the child `m` of `carrier`, share `2^-m`.
    Halving(CarrierRef),
    /// Piece `m` is the run `t ∈ [2^m - 2, 2^(m+1) - 2)` of `stream`.
    Doubling { ledger: u64, stream: u64, unit: Rational },
    /// Piece `j` is the child `j` of `carrier`, share `2^-(e_j + 1)`.
    Factorial(CarrierRef),
}

/// Identifies a strand inside a witness: member group and strand slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrandId {
    pub group: u64,
    pub k: u64,
}

/// A closed-form series `Σ_m coeff(m) · χ_{piece(m)}` with `μ(piece(m)) = mass(m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strand {
    pub id: StrandId,
    pub kind: StrandKind,
    pub r: Option<Rational>,
    pub coeff: Coefficient,
    /// `B`: `mass(m) = B·2^-m`, `B·2^m`, or `B·2^-(e_m+1)`.
    pub b: Rational,
    pub carrier: StrandCarrier,
    pub filter: IndexFilter,
}

impl Strand {
    /// The `h`-type strand of exponent `r` on a halving carrier: `a_m^r μ_m = 1/m`.
    pub fn halving(id: StrandId, carrier: CarrierRef, r: Rational, filter: IndexFilter) -> Self {
        let b = carrier.mass.clone();
        let inv = r.recip();
        let a = ExactPosReal::from_rational(b.clone()).pow(&-inv.clone());
        let kappa = ExactPosReal::power_of(rational::int(2), inv.clone());
        Self {
            id,
            kind: StrandKind::GeometricP,
            r: Some(r),
            coeff: Coefficient::Geometric { a, alpha: inv, kappa },
            b,
            carrier: StrandCarrier::Halving(carrier),
            filter,
        }
    }

    /// The `g`-type strand of exponent `r` on a doubling stream: `b_m^r μ_m = 1/m`.
    pub fn doubling(id: StrandId, ledger: u64, stream: u64, unit: Rational, r: Rational) -> Self {
        let inv = r.recip();
        let a = ExactPosReal::from_rational(unit.clone()).pow(&-inv.clone());
        let kappa = ExactPosReal::power_of(rational::rat(1, 2), inv.clone());
        Self {
            id,
            kind: StrandKind::GeometricP,
            r: Some(r),
            coeff: Coefficient::Geometric { a, alpha: inv, kappa },
            b: unit.clone(),
            carrier: StrandCarrier::Doubling { ledger, stream, unit },
            filter: IndexFilter::all(),
        }
    }

    /// Values `w_j` on factorial pieces of `carrier`.
    pub fn factorial(id: StrandId, carrier: CarrierRef, values: ExpPoly) -> Self {
        Self {
            id,
            kind: StrandKind::FactorialDyadic,
            r: None,
            coeff: Coefficient::Values(values),
            b: carrier.mass.clone(),
            carrier: StrandCarrier::Factorial(carrier),
            filter: IndexFilter::all(),
        }
    }

    pub fn gamma(&self) -> Option<Rational> {
        match self.carrier {
            StrandCarrier::Halving(_) => Some(rational::rat(1, 2)),
            StrandCarrier::Doubling { .. } => Some(rational::int(2)),
            StrandCarrier::Factorial(_) => None,
        }
    }

    pub fn mass(&self, m: u64) -> Rational {
        match &self.carrier {
            StrandCarrier::Halving(_) => &self.b * pow2(-(m as i64)),
            StrandCarrier::Doubling { .. } => &self.b * pow2(m as i64),
            StrandCarrier::Factorial(_) => &self.b * factorial_share(m),
        }
    }

    /// `|coeff(m)|` as an exact monomial; `None` where the coefficient vanishes.
    pub fn abs_coeff(&self, m: u64) -> Option<ExactPosReal> {
        if !self.filter.admits(m) {
            return None;
        }
        match &self.coeff {
            Coefficient::Geometric { a, alpha, kappa } => Some(
                a.mul(&ExactPosReal::from_rational(rational::int(m as i64)).pow(&-alpha.clone()))
                    .mul(&kappa.pow(&rational::int(m as i64))),
            ),
            Coefficient::Values(v) => {
                let x = v.value(m);
                if x.is_zero() {
                    None
                } else {
                    Some(ExactPosReal::from_rational(x.abs()))
                }
            }
        }
    }

    /// Signed exact coefficient when rational (factorial strands).
    pub fn signed_value(&self, m: u64) -> Option<Rational> {
        match &self.coeff {
            Coefficient::Values(v) if self.filter.admits(m) => Some(v.value(m)),
            Coefficient::Values(_) => Some(Rational::zero()),
            Coefficient::Geometric { .. } => None,
        }
    }

    pub fn piece(&self, m: u64) -> SetExpr {
        match &self.carrier {
            StrandCarrier::Halving(c) => SetExpr::Carrier(c.child(m as u32, &pow2(-(m as i64)))),
            StrandCarrier::Factorial(c) => SetExpr::Carrier(c.child(m as u32, &factorial_share(m))),
            StrandCarrier::Doubling { ledger, stream, unit } => SetExpr::Run(Run {
                ledger: *ledger,
                stream: *stream,
                start: (1u64 << m) - 2,
                len: 1u64 << m,
                unit: unit.clone(),
            }),
        }
    }

    /// The region carrying the whole strand (all pieces, filtered or not).
    pub fn region(&self) -> SetExpr {
        match &self.carrier {
            StrandCarrier::Halving(c) | StrandCarrier::Factorial(c) => SetExpr::Carrier(c.clone()),
            StrandCarrier::Doubling { ledger, stream, unit } => SetExpr::Run(Run {
                ledger: *ledger,
                stream: *stream,
                start: 0,
                len: u64::MAX,
                unit: unit.clone(),
            }),
        }
    }

    /// The unit `pair(stream, t)` (point or block) at stream position `t`.
    pub fn stream_unit(stream: u64, t: u64) -> u64 {
        pair(stream, t)
    }

    /// `Σ_m |coeff(m)|^q · mass(m)` as a closed-form family.
    pub fn mass_family(&self, q: &Rational) -> MassFamily {
        match &self.coeff {
            Coefficient::Geometric { a, alpha, kappa } => {
                let gamma = ExactPosReal::from_rational(self.gamma().expect("geometric strands have γ"));
                MassFamily::Geometric {
                    c: a.pow(q).mul_rational(&self.b),
                    a: alpha * q,
                    rho: kappa.pow(q).mul(&gamma),
                    filter: self.filter.clone(),
                }
            }
            Coefficient::Values(v) => MassFamily::Factorial { values: v.clone(), q: q.clone(), b: self.b.clone() },
        }
    }

    pub fn is_unbounded(&self) -> bool {
        match &self.coeff {
            Coefficient::Geometric { kappa, .. } => kappa.compare(&ExactPosReal::one()).is_gt(),
            Coefficient::Values(v) => v.growth_bound().1 > Rational::one(),
        }
    }
}

/// `2^-(e_j + 1)` with `e_j = ⌈log₂ j!⌉`.
pub fn factorial_share(j: u64) -> Rational {
    pow2(-log2_factorial_ceil(j) - 1)
}

/// Closed-form mass series of one strand at one exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MassFamily {
    /// `c · m^(-a) · ρ^m` over the filtered indices.
    Geometric { c: ExactPosReal, a: Rational, rho: ExactPosReal, filter: IndexFilter },
    /// `|w_j|^q · b · 2^-(e_j+1)`.
    Factorial { values: ExpPoly, q: Rational, b: Rational },
}

impl MassFamily {
    pub fn exact_term(&self, m: u64) -> Option<ExactPosReal> {
        match self {
            MassFamily::Geometric { c, a, rho, filter } => {
                if !filter.admits(m) {
                    return None;
                }
                Some(
                    c.mul(&ExactPosReal::from_rational(rational::int(m as i64)).pow(&-a.clone()))
                        .mul(&rho.pow(&rational::int(m as i64))),
                )
            }
            MassFamily::Factorial { values, q, b } => {
                let v = values.value(m);
                if v.is_zero() {
                    return None;
                }
                Some(ExactPosReal::from_rational(v.abs()).pow(q).mul_rational(&(b * factorial_share(m))))
            }
        }
    }

    /// Structural closure: the family at exponent `q` of a family at exponent 1
    /// is again of the same shape.
    pub fn same_shape(&self, other: &MassFamily) -> bool {
        matches!(
            (self, other),
            (MassFamily::Geometric { .. }, MassFamily::Geometric { .. })
                | (MassFamily::Factorial { .. }, MassFamily::Factorial { .. })
        )
    }

    /// First index from which the bound `S^q θ^(qj) b 2^-(e_j+1)` of a factorial
    /// family has consecutive ratio `θ^q·2/(j+1) < 1`.
    ///
    /// Panics when the threshold does not fit in `u64`.
    pub fn factorial_ratio_start(theta: &Rational, q: &Rational) -> u64 {
        let tq = ExactPosReal::from_rational(theta.clone()).pow(q).mul_rational(&rational::int(2));
        // start just below floor(2θ^q) and settle exactly
        let lo = rational::floor_int(tq.enclose(64).lo());
        let mut j: u64 = u64::try_from(lo).expect("factorial threshold beyond u64").saturating_sub(2).max(1);
        while !tq.compare_rational(&Rational::from_integer((j as u128 + 1).into())).is_lt() {
            j += 1;
        }
        j
    }

    /// Exact upper bound on `log₂` of the sum of a factorial family:
    /// `Σ_j S^q θ^(qj) b 2^-(e_j+1) <= (b S^q / 2)·e^(θ^q)`, with `log₂ e < 3/2`.
    pub fn factorial_log2_bound(values: &ExpPoly, q: &Rational, b: &Rational) -> Rational {
        let (s, theta) = values.growth_bound();
        if s.is_zero() {
            return Rational::zero();
        }
        let tq = ExactPosReal::from_rational(theta).pow(q).enclose(64).hi().clone();
        let log_up = |x: &Rational| rational::int(rational::floor_log2(x) + 1);
        q * log_up(&s) + log_up(b) - Rational::one() + tq * rational::rat(3, 2)
    }
}

impl TermSource for MassFamily {
    fn term(&self, idx: u64, bits: u32) -> Enclosure {
        match self.exact_term(idx) {
            Some(t) => t.enclose(bits),
            None => Enclosure::zero(),
        }
    }

    fn tail_bound(&self, cut: u64) -> Option<Rational> {
        match self {
            MassFamily::Geometric { c, a, rho, .. } => geometric_tail(c, a, rho, cut),
            MassFamily::Factorial { values, q, b } => {
                let (s, theta) = values.growth_bound();
                if s.is_zero() {
                    return Some(Rational::zero());
                }
                let j0 = MassFamily::factorial_ratio_start(&theta, q);
                let j = cut + 1;
                if j < j0 {
                    return None;
                }
                // U_j = S^q θ^(qj) b 2^-(e_j+1), U_{i+1}/U_i <= θ^q 2/(i+1) <= σ for i >= j
                let tq = ExactPosReal::from_rational(theta.clone()).pow(q);
                let sigma = tq.mul_rational(&rational::rat(2, j as i64 + 1)).enclose(64).hi().clone();
                if sigma >= Rational::one() {
                    return None;
                }
                let first = ExactPosReal::from_rational(s)
                    .pow(q)
                    .mul(&tq.pow(&rational::int(j as i64)))
                    .mul_rational(&(b * factorial_share(j)));
                Some(first.enclose(64).hi().clone() / (Rational::one() - sigma))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::enclose_sum;
    use crate::exactnum::rational::rat;
    use crate::spaces::DyadicInterval;

    fn carrier(mass: Rational) -> CarrierRef {
        CarrierRef { ledger: 1, alloc: 0, host: DyadicInterval::new(0, 0), path: vec![], mass }
    }

    fn ha_strand(r: Rational) -> Strand {
        Strand::halving(StrandId { group: 0, k: 1 }, carrier(Rational::one()), r, IndexFilter::all())
    }

    #[test]
    fn ha_defining_relation() {
        // p = 1, r = 2, mass 2^-m: q = 2 gives 1/m
        let s = ha_strand(rat(2, 1));
        for m in 1..20 {
            assert_eq!(s.mass(m), pow2(-(m as i64)));
            let t = s.mass_family(&rat(2, 1)).exact_term(m).unwrap();
            assert_eq!(t, ExactPosReal::from_rational(rat(1, m as i64)));
        }
    }

    #[test]
    fn ha_p_mass_closed_form_matches_brute_force() {
        let s = ha_strand(rat(2, 1));
        let fam = s.mass_family(&rat(1, 1));
        for m in 1..=50u64 {
            let brute = s.abs_coeff(m).unwrap().pow(&rat(1, 1)).mul_rational(&s.mass(m));
            let closed = ExactPosReal::from_rational(rat(1, m as i64))
                .pow(&rat(1, 2))
                .mul(&ExactPosReal::power_of(rat(1, 2), rat(m as i64, 2)));
            assert_eq!(fam.exact_term(m).unwrap(), brute);
            assert_eq!(brute, closed);
        }
    }

    #[test]
    fn gb_relation_with_custom_mass() {
        // p = 2, r = 1, mass 2^(m-10): q = 1 gives 1/m
        let s = Strand::doubling(StrandId { group: 0, k: 1 }, 1, 0, pow2(-10), rat(1, 1));
        for m in 1..30 {
            assert_eq!(s.mass(m), pow2(m as i64 - 10));
            assert_eq!(s.mass_family(&rat(1, 1)).exact_term(m).unwrap(), ExactPosReal::from_rational(rat(1, m as i64)));
        }
    }

    #[test]
    fn r_sequences() {
        let up = RSequence::default_for(rat(1, 1), true);
        assert_eq!(up.r(1), rat(2, 1));
        assert_eq!(up.r(2), rat(3, 2));
        assert_eq!(up.first_strictly_past(&rat(5, 4)), Some(5));
        let down = RSequence::default_for(rat(2, 1), false);
        assert_eq!(down.r(1), rat(1, 1));
        assert_eq!(down.r(2), rat(3, 2));
        assert_eq!(down.first_strictly_past(&rat(1, 2)), Some(1));
        assert!(RSequence::with_prefix(rat(1, 1), true, vec![rat(3, 2), rat(2, 1)]).is_err());
        assert!(RSequence::with_prefix(rat(1, 1), true, vec![rat(3, 1)]).is_ok());
    }

    #[test]
    fn factorial_family_converges() {
        let v = ExpPoly { terms: vec![(rat(1, 1), rat(6, 1))] };
        let fam = MassFamily::Factorial { values: v, q: rat(1, 1), b: rat(1, 1) };
        let e = enclose_sum(&fam, &pow2(-20)).unwrap();
        assert!(e.width() <= pow2(-20));
        // oracle: Σ 6^j 2^-(e_j+1)
        let mut s = 0.0f64;
        for j in 1..60u64 {
            s += 6f64.powi(j as i32) * 2f64.powi(-(log2_factorial_ceil(j) as i32) - 1);
        }
        assert!((rational::to_f64(&e.mid()) - s).abs() < 1e-6 * s);
    }
}
