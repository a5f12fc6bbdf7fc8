//! Certified sums: enclosures of infinite positive series, and exact formal sums
//! of monomials.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::enclosure::Enclosure;
use super::posreal::ExactPosReal;
use super::rational::{self, pow2, Rational};
use crate::error::{Error, Result};

/// A series of non-negative terms indexed from `first_index()`, with an exact
/// upper bound on every tail.
pub trait TermSource: Sync {
    fn first_index(&self) -> u64 {
        1
    }

    /// Index of the last term for finite sources.
    fn last_index(&self) -> Option<u64> {
        None
    }

    /// Enclosure of the term at `idx` (zero for indices excluded by a filter).
    fn term(&self, idx: u64, bits: u32) -> Enclosure;

    /// Exact upper bound on `Σ_{i > cut} term(i)`, or `None` when no bound can be certified.
    fn tail_bound(&self, cut: u64) -> Option<Rational>;
}

const MAX_LEVEL: u32 = 12;

fn level_cut(first: u64, level: u32) -> u64 {
    first + (16u64 << level) - 1
}

fn level_bits(level: u32) -> u32 {
    48 + 4 * level
}

/// Partial sum on the grid of `level`, plus the tail bound.
fn level_enclosure<S: TermSource + ?Sized>(src: &S, level: u32) -> Result<Enclosure> {
    let first = src.first_index();
    let mut cut = level_cut(first, level);
    if let Some(last) = src.last_index() {
        cut = cut.min(last);
    }
    let tail = match src.last_index() {
        Some(last) if last <= cut => Rational::zero(),
        _ => src.tail_bound(cut).ok_or(Error::NoTailBound)?,
    };
    let bits = level_bits(level);
    let grid = bits + 16;
    let terms: Vec<Enclosure> =
        crate::par::map_range(first, cut + 1, |i| src.term(i, bits).round_out(grid));
    let mut acc = Enclosure::zero();
    for t in &terms {
        acc = acc.add(t);
    }
    Ok(Enclosure::new(acc.lo().clone(), acc.hi() + tail))
}

/// Encloses the full sum to width `<= goal`.
///
/// The result for goal `g` is the intersection of a fixed ladder of level
/// enclosures up to the first level meeting `g`, so tighter goals always nest
/// inside looser ones.
pub fn enclose_sum<S: TermSource + ?Sized>(src: &S, goal: &Rational) -> Result<Enclosure> {
    let mut acc: Option<Enclosure> = None;
    for level in 0..=MAX_LEVEL {
        // a cut before the tail estimate kicks in: go deeper
        let e = match level_enclosure(src, level) {
            Err(Error::NoTailBound) if level < MAX_LEVEL => continue,
            r => r?,
        };
        let next = match acc {
            Some(a) => a.intersect(&e),
            None => e,
        };
        if next.width() <= *goal {
            return Ok(next);
        }
        if src.last_index().is_some_and(|l| l <= level_cut(src.first_index(), level)) {
            // all terms summed; only rounding width remains
            return Ok(next);
        }
        acc = Some(next);
    }
    Err(Error::GoalUnreachable(rational::render(goal)))
}

/// Closed-form source `C * m^(-a) * rho^m`, `m >= 1`, with an explicit geometric tail.
///
/// Only meant for `rho < 1` or `rho = 1, a > 1`; other shapes report no tail bound.
#[derive(Clone, Debug)]
pub struct GeometricTerms {
    pub constant: ExactPosReal,
    pub poly_exponent: Rational,
    pub ratio: ExactPosReal,
}

impl GeometricTerms {
    pub fn exact_term(&self, m: u64) -> ExactPosReal {
        let mm = rational::int(m as i64);
        self.constant
            .mul(&ExactPosReal::from_rational(mm).pow(&-self.poly_exponent.clone()))
            .mul(&self.ratio.pow(&rational::int(m as i64)))
    }
}

impl TermSource for GeometricTerms {
    fn term(&self, idx: u64, bits: u32) -> Enclosure {
        self.exact_term(idx).enclose(bits)
    }

    fn tail_bound(&self, cut: u64) -> Option<Rational> {
        geometric_tail(&self.constant, &self.poly_exponent, &self.ratio, cut)
    }
}

/// Upper bound on `Σ_{m > cut} C m^(-a) rho^m`.
pub fn geometric_tail(
    constant: &ExactPosReal,
    a: &Rational,
    ratio: &ExactPosReal,
    cut: u64,
) -> Option<Rational> {
    let one = ExactPosReal::one();
    match ratio.compare(&one) {
        std::cmp::Ordering::Less => {
            let n1 = rational::int(cut as i64 + 1);
            // consecutive-term ratio bound for m >= cut+1
            let sigma = if a.is_negative() {
                let growth = ExactPosReal::from_rational(
                    rational::int(cut as i64 + 2) / n1.clone(),
                )
                .pow(&-a.clone());
                ratio.mul(&growth)
            } else {
                ratio.clone()
            };
            if sigma.compare(&one) != std::cmp::Ordering::Less {
                return None;
            }
            let first = constant
                .mul(&ExactPosReal::from_rational(n1).pow(&-a.clone()))
                .mul(&ratio.pow(&rational::int(cut as i64 + 1)));
            let first_hi = first.enclose(64).hi().clone();
            let sigma_hi = sigma.enclose(64).hi().clone();
            if sigma_hi >= Rational::one() {
                return None;
            }
            Some(first_hi / (Rational::one() - sigma_hi))
        }
        std::cmp::Ordering::Equal if *a > Rational::one() => {
            // Σ_{m>N} m^-a <= ∫_N^∞ x^-a dx = N^(1-a)/(a-1), for N >= 1
            let n = rational::int(cut.max(1) as i64);
            let v = constant
                .mul(&ExactPosReal::from_rational(n).pow(&(Rational::one() - a)))
                .mul_rational(&(a - Rational::one()).recip());
            Some(v.enclose(64).hi().clone())
        }
        _ => None,
    }
}

/// An exact finite sum of monomials, in canonical form: one entry per distinct
/// irrational factor list, carrying a rational coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MonomialSum {
    terms: BTreeMap<String, (Vec<(Rational, Rational)>, Rational)>,
}

impl MonomialSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_monomial(x: &ExactPosReal) -> Self {
        let mut s = Self::zero();
        s.add_monomial(x, &Rational::one());
        s
    }

    fn key(factors: &[(Rational, Rational)]) -> String {
        factors
            .iter()
            .map(|(b, e)| format!("{}^{}", rational::render(b), rational::render(e)))
            .collect::<Vec<_>>()
            .join("*")
    }

    /// Adds `coeff * x`.
    pub fn add_monomial(&mut self, x: &ExactPosReal, coeff: &Rational) {
        let key = Self::key(x.factors());
        let add = x.scale() * coeff;
        let entry = self
            .terms
            .entry(key.clone())
            .or_insert_with(|| (x.factors().to_vec(), Rational::zero()));
        entry.1 += add;
        if entry.1.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&mut self, other: &MonomialSum) {
        for (f, c) in other.terms.values() {
            let x = monomial_from_parts(f);
            self.add_monomial(&x, c);
        }
    }

    pub fn mul(&self, other: &MonomialSum) -> MonomialSum {
        let mut out = MonomialSum::zero();
        for (f1, c1) in self.terms.values() {
            for (f2, c2) in other.terms.values() {
                let x = monomial_from_parts(f1).mul(&monomial_from_parts(f2));
                out.add_monomial(&x, &(c1 * c2));
            }
        }
        out
    }

    pub fn scale_rational(&self, r: &Rational) -> MonomialSum {
        let mut out = MonomialSum::zero();
        for (f, c) in self.terms.values() {
            out.add_monomial(&monomial_from_parts(f), &(c * r));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value as a rational when every surviving term is rational.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (f, c) = self.terms.values().next().unwrap();
                f.is_empty().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// The value as a single monomial, when it has that shape.
    pub fn as_monomial(&self) -> Option<ExactPosReal> {
        if self.terms.len() != 1 {
            return None;
        }
        let (f, c) = self.terms.values().next().unwrap();
        c.is_positive().then(|| monomial_from_parts(f).mul_rational(c))
    }

    pub fn enclose(&self, bits: u32) -> Enclosure {
        let mut acc = Enclosure::zero();
        for (f, c) in self.terms.values() {
            let e = monomial_from_parts(f).enclose(bits).scale(c);
            acc = acc.add(&e);
        }
        acc.round_out(bits + 8)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

fn monomial_from_parts(f: &[(Rational, Rational)]) -> ExactPosReal {
    f.iter().fold(ExactPosReal::one(), |acc, (b, e)| {
        acc.mul(&ExactPosReal::power_of(b.clone(), e.clone()))
    })
}

impl fmt::Display for MonomialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .values()
            .map(|(fs, c)| {
                let mut s = rational::render(c);
                for (b, e) in fs {
                    s.push_str(&format!(" * {}^({})", rational::render(b), rational::render(e)));
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Environment variable overriding [`default_goal`].
pub const PRECISION_ENV: &str = "PATHOLOGY_FORGE_PRECISION";

/// Parses a power-of-two goal written as `2^-k` or as a rational such as `1/1024`.
pub fn parse_goal(s: &str) -> Result<Rational> {
    let s = s.trim();
    let r = match s.strip_prefix("2^") {
        Some(e) => pow2(e.trim_matches(|c| c == '(' || c == ')').parse::<i64>().map_err(|e| Error::Parse(format!("goal exponent: {e}")))?),
        None => rational::parse(s)?,
    };
    if !r.is_positive() || !rational::is_power_of_two(&r) {
        return Err(Error::Parse(format!("goal {s:?} is not a positive power of two")));
    }
    Ok(r)
}

/// Default enclosure goal: `2^-20` unless [`PRECISION_ENV`] holds a valid goal.
pub fn default_goal() -> Rational {
    static GOAL: std::sync::OnceLock<Rational> = std::sync::OnceLock::new();
    GOAL.get_or_init(|| {
        std::env::var(PRECISION_ENV).ok().and_then(|s| parse_goal(&s).ok()).unwrap_or_else(|| pow2(-20))
    })
    .clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::{int, rat};

    struct Single;
    impl TermSource for Single {
        fn last_index(&self) -> Option<u64> {
            Some(1)
        }
        fn term(&self, _: u64, _: u32) -> Enclosure {
            Enclosure::exact(rat(3, 4))
        }
        fn tail_bound(&self, _: u64) -> Option<Rational> {
            Some(Rational::zero())
        }
    }

    struct Harmonic;
    impl TermSource for Harmonic {
        fn term(&self, idx: u64, _: u32) -> Enclosure {
            Enclosure::exact(rat(1, idx as i64))
        }
        fn tail_bound(&self, _: u64) -> Option<Rational> {
            None
        }
    }

    fn half_sqrt_series() -> GeometricTerms {
        GeometricTerms {
            constant: ExactPosReal::one(),
            poly_exponent: rat(1, 2),
            ratio: ExactPosReal::power_of(rat(1, 2), rat(1, 2)),
        }
    }

    /// Independent oracle: f64 partial sum to N plus the stated geometric tail.
    fn oracle() -> (f64, f64) {
        let n = 200u64;
        let mut s = 0.0;
        for m in 1..=n {
            s += (m as f64).powf(-0.5) * 2f64.powf(-(m as f64) / 2.0);
        }
        let tail = 2f64.powf(-(n as f64) / 2.0) / (1.0 - 2f64.powf(-0.5));
        (s - 1e-12, s + tail + 1e-12)
    }

    #[test]
    fn encloses_geometric_series() {
        let goal = pow2(-10);
        let e = enclose_sum(&half_sqrt_series(), &goal).unwrap();
        assert!(e.width() <= goal);
        let (lo, hi) = oracle();
        assert!(rational::to_f64(e.lo()) <= hi && rational::to_f64(e.hi()) >= lo);
        // frozen: 1.62087... (f64 oracle summed to m = 400)
        assert!((rational::to_f64(&e.mid()) - 1.620_87).abs() < 2e-3);
    }

    #[test]
    fn single_term_and_harmonic() {
        let e = enclose_sum(&Single, &pow2(-10)).unwrap();
        assert_eq!(e, Enclosure::exact(rat(3, 4)));
        assert!(matches!(enclose_sum(&Harmonic, &pow2(-10)), Err(Error::NoTailBound)));
    }

    #[test]
    fn refinement_nests() {
        let s = half_sqrt_series();
        let wide = enclose_sum(&s, &pow2(-8)).unwrap();
        let narrow = enclose_sum(&s, &pow2(-30)).unwrap();
        assert!(wide.contains_enclosure(&narrow));
    }

    #[test]
    fn monomial_sums_cancel_and_multiply() {
        let r2 = ExactPosReal::power_of(int(2), rat(1, 2));
        let mut s = MonomialSum::from_monomial(&r2);
        s.add_monomial(&ExactPosReal::from_int(3), &Rational::one());
        let sq = s.mul(&s);
        // (3 + √2)^2 = 11 + 6√2
        let mut expect = MonomialSum::from_monomial(&ExactPosReal::from_int(11));
        expect.add_monomial(&r2, &int(6));
        assert_eq!(sq, expect);
        let mut z = s.clone();
        z.add(&s.scale_rational(&int(-1)));
        assert!(z.is_zero());
    }
}
