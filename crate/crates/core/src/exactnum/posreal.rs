//! Positive reals of the form `c * b1^e1 * ... * bk^ek` with rational `c`, `bi`, `ei`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::enclosure::Enclosure;
use super::rational::{self, floor_int, pow2, powi, Rational};
use crate::error::{Error, Result};

/// A positive real `scale * Π base^exponent`.
///
/// Canonical form: every base is `> 1`, bases are strictly increasing, every
/// exponent lies strictly between 0 and 1 (integer parts live in `scale`), and
/// no base is a perfect power that would let its exponent be simplified.
/// Equality is decided by [`compare`], not structurally, since distinct bases
/// can still be multiplicatively dependent (e.g. `2` and `4`).
#[derive(Clone, Debug)]
pub struct ExactPosReal {
    scale: Rational,
    factors: Vec<(Rational, Rational)>,
}

impl ExactPosReal {
    pub fn from_rational(r: Rational) -> Self {
        assert!(r.is_positive(), "ExactPosReal requires a positive value");
        Self { scale: r, factors: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(rational::int(n))
    }

    /// `base^exponent` for a positive rational base.
    pub fn power_of(base: Rational, exponent: Rational) -> Self {
        assert!(base.is_positive(), "negative-base powers are unsupported");
        Self::canonical(Rational::one(), vec![(base, exponent)])
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub fn factors(&self) -> &[(Rational, Rational)] {
        &self.factors
    }

    /// The value as a rational, when no irrational factor remains.
    pub fn as_rational(&self) -> Option<&Rational> {
        self.factors.is_empty().then_some(&self.scale)
    }

    fn canonical(mut scale: Rational, raw: Vec<(Rational, Rational)>) -> Self {
        let mut work: Vec<(Rational, Rational)> = Vec::new();
        let mut queue = raw;
        while let Some((mut b, mut e)) = queue.pop() {
            if e.is_zero() || b.is_one() {
                continue;
            }
            if b < Rational::one() {
                b = b.recip();
                e = -e;
            }
            let fl = floor_int(&e);
            if !fl.is_zero() {
                scale *= powi(&b, &fl);
                e -= Rational::from_integer(fl);
            }
            if e.is_zero() {
                continue;
            }
            // Reduce the base to a primitive (non perfect power) form: b = t^g.
            if let Some((t, g)) = primitive_root(&b) {
                queue.push((t, e * Rational::from_integer(BigInt::from(g))));
                continue;
            }
            match work.iter_mut().find(|(wb, _)| *wb == b) {
                Some(slot) => {
                    let merged = slot.1.clone() + e;
                    let b2 = slot.0.clone();
                    work.retain(|(wb, _)| *wb != b2);
                    queue.push((b2, merged));
                }
                None => work.push((b, e)),
            }
        }
        work.sort_by(|x, y| x.0.cmp(&y.0));
        Self { scale, factors: work }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut f = self.factors.clone();
        f.extend(other.factors.iter().cloned());
        Self::canonical(&self.scale * &other.scale, f)
    }

    pub fn mul_rational(&self, r: &Rational) -> Self {
        assert!(r.is_positive());
        Self { scale: &self.scale * r, factors: self.factors.clone() }
    }

    pub fn recip(&self) -> Self {
        let f = self.factors.iter().map(|(b, e)| (b.clone(), -e.clone())).collect();
        Self::canonical(self.scale.recip(), f)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }

    /// `self^e`, exact. `pow(x, 0) = 1`.
    pub fn pow(&self, e: &Rational) -> Self {
        let mut f: Vec<(Rational, Rational)> =
            self.factors.iter().map(|(b, x)| (b.clone(), x * e)).collect();
        let scale = if rational::is_integer(e) {
            powi(&self.scale, e.numer())
        } else {
            f.push((self.scale.clone(), e.clone()));
            Rational::one()
        };
        Self::canonical(scale, f)
    }

    pub fn is_one(&self) -> bool {
        self.compare_rational(&Rational::one()) == Ordering::Equal
    }

    /// Exact comparison: raise `self/other` to the lcm of the exponent
    /// denominators and compare the resulting rational with 1.
    pub fn compare(&self, other: &Self) -> Ordering {
        let q = self.div(other);
        if q.factors.is_empty() {
            return q.scale.cmp(&Rational::one());
        }
        let l = q
            .factors
            .iter()
            .fold(BigInt::one(), |acc, (_, e)| acc.lcm(e.denom()));
        let mut v = powi(&q.scale, &l);
        for (b, e) in &q.factors {
            let k = e * Rational::from_integer(l.clone());
            v *= powi(b, k.numer());
        }
        v.cmp(&Rational::one())
    }

    pub fn compare_rational(&self, r: &Rational) -> Ordering {
        if !r.is_positive() {
            return Ordering::Greater;
        }
        self.compare(&Self::from_rational(r.clone()))
    }

    /// Rigorous rational bounds with roughly `bits` bits of relative precision.
    pub fn enclose(&self, bits: u32) -> Enclosure {
        let mut lo = self.scale.clone();
        let mut hi = self.scale.clone();
        for (b, e) in &self.factors {
            let (l, h) = root_bounds(b, e, bits + 4);
            lo *= l;
            hi *= h;
        }
        Enclosure::new(lo, hi)
    }

    /// Natural log, approximate.
    pub fn ln_f64(&self) -> f64 {
        let lnr = |r: &Rational| {
            let e = rational::floor_log2(r);
            let m = rational::to_f64(&(r / pow2(e)));
            m.ln() + e as f64 * std::f64::consts::LN_2
        };
        let mut acc = lnr(&self.scale);
        for (b, e) in &self.factors {
            acc += rational::to_f64(e) * lnr(b);
        }
        acc
    }

    pub fn to_f64(&self) -> f64 {
        self.ln_f64().exp()
    }
}

/// For `b > 1`, returns `(t, g)` with `b = t^g` and `g > 1` maximal, if any.
fn primitive_root(b: &Rational) -> Option<(Rational, u32)> {
    let n = b.numer().magnitude();
    let d = b.denom().magnitude();
    let two_pow = |x: &num_bigint::BigUint| x.count_ones() == 1;
    if two_pow(n) && two_pow(d) {
        let en = n.bits() - 1;
        let ed = d.bits() - 1;
        let g = en.gcd(&ed);
        if g > 1 {
            let t = rational::pow2(en as i64 / g as i64 - ed as i64 / g as i64);
            return Some((t, g as u32));
        }
        return None;
    }
    let max_g = n.bits().max(d.bits()).min(64) as u32;
    for g in (2..=max_g).rev() {
        if let Some(t) = rational::exact_root_rat(b, g) {
            return Some((t, g));
        }
    }
    None
}

/// Bounds on `b^(a/c)` for `b > 1` and `0 < a/c < 1` (or any rational exponent).
fn root_bounds(b: &Rational, e: &Rational, bits: u32) -> (Rational, Rational) {
    if e.is_negative() {
        let (l, h) = root_bounds(b, &-e.clone(), bits);
        return (h.recip(), l.recip());
    }
    let a = e.numer().clone();
    let c = e.denom().to_u32().expect("exponent denominator too large");
    let x = powi(b, &a);
    // Choose s so that x * 2^(c*s) has about (bits*c) bits, then take the c-th root.
    let lg = rational::floor_log2(&x);
    let s = rational::ceil_int(&Rational::new(
        BigInt::from(bits as i64 * c as i64 - lg),
        BigInt::from(c),
    ))
    .to_i64()
    .unwrap();
    let scaled = &x * pow2(c as i64 * s);
    let f = floor_int(&scaled);
    let r = f.magnitude().nth_root(c);
    let r = BigInt::from(r);
    let lo = Rational::from_integer(r.clone()) * pow2(-s);
    let hi = Rational::from_integer(r + 1) * pow2(-s);
    (lo, hi)
}

impl PartialEq for ExactPosReal {
    fn eq(&self, other: &Self) -> bool {
        self.compare(other) == Ordering::Equal
    }
}

impl Eq for ExactPosReal {}

impl PartialOrd for ExactPosReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactPosReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.compare(other)
    }
}

/// Exact trichotomy of `x` vs `y`.
pub fn compare(x: &ExactPosReal, y: &ExactPosReal) -> Ordering {
    x.compare(y)
}

/// Exact `x^e`.
pub fn pow(x: &ExactPosReal, e: &Rational) -> ExactPosReal {
    x.pow(e)
}

impl fmt::Display for ExactPosReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", rational::render(&self.scale))?;
        for (b, e) in &self.factors {
            write!(f, " * {}^({})", rational::render(b), rational::render(e))?;
        }
        Ok(())
    }
}

impl FromStr for ExactPosReal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('*').map(str::trim);
        let head = parts.next().ok_or_else(|| Error::Parse("empty monomial".into()))?;
        let scale = rational::parse(head)?;
        if !scale.is_positive() {
            return Err(Error::Parse(format!("non-positive scale in {s:?}")));
        }
        let mut f = Vec::new();
        for p in parts {
            let (b, e) = p
                .split_once('^')
                .ok_or_else(|| Error::Parse(format!("bad factor {p:?}")))?;
            let b = rational::parse(b)?;
            let e = rational::parse(e.trim().trim_start_matches('(').trim_end_matches(')'))?;
            if !b.is_positive() {
                return Err(Error::Parse(format!("non-positive base in {p:?}")));
            }
            f.push((b, e));
        }
        Ok(Self::canonical(scale, f))
    }
}

impl serde::Serialize for ExactPosReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for ExactPosReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::{int, rat};

    fn pr(b: i64, n: i64, d: i64) -> ExactPosReal {
        ExactPosReal::power_of(int(b), rat(n, d))
    }

    #[test]
    fn compare_examples() {
        // 2^(1/2) vs 3^(1/3): 8 < 9 after raising to the 6th power
        assert_eq!(compare(&pr(2, 1, 2), &pr(3, 1, 3)), Ordering::Less);
        let half_root = ExactPosReal::power_of(rat(1, 2), rat(1, 2));
        assert_eq!(compare(&half_root, &ExactPosReal::one()), Ordering::Less);
        let x = pr(5, 2, 7).mul(&pr(3, -1, 4));
        assert_eq!(compare(&x, &x.clone()), Ordering::Equal);
    }

    #[test]
    fn pow_examples() {
        let q = ExactPosReal::from_rational(rat(1, 4)).pow(&rat(3, 2));
        assert_eq!(q.as_rational(), Some(&rat(1, 8)));
        let c = pr(2, 1, 3).pow(&int(3));
        assert_eq!(c.as_rational(), Some(&int(2)));
        let r = ExactPosReal::from_rational(rat(1, 5)).pow(&rat(1, 2));
        assert_eq!(r.to_string(), "1/5 * 5^(1/2)");
        assert_eq!(r, pr(5, -1, 2));
        assert!(pr(7, 1, 3).pow(&int(0)).is_one());
    }

    #[test]
    fn merges_and_parses() {
        let x = pr(2, 1, 3).mul(&pr(2, 1, 3)).mul(&pr(2, 1, 3));
        assert_eq!(x.as_rational(), Some(&int(2)));
        let y: ExactPosReal = "3/4 * 2^(1/3) * 5^(-1/2)".parse().unwrap();
        assert_eq!(y.to_string().parse::<ExactPosReal>().unwrap(), y);
        // 8^(1/2) = 2 * 2^(1/2)
        assert_eq!(pr(8, 1, 2).to_string(), "2 * 2^(1/2)");
    }

    #[test]
    fn enclosure_brackets_value() {
        let x = pr(2, 1, 2);
        let e = x.enclose(40);
        assert!(e.lo() < e.hi());
        let lo = rational::to_f64(e.lo());
        let hi = rational::to_f64(e.hi());
        assert!(lo <= std::f64::consts::SQRT_2 && std::f64::consts::SQRT_2 <= hi);
        assert!(hi - lo < 1e-10);
        let tiny = pr(2, -1001, 3);
        let e = tiny.enclose(30);
        assert!(e.lo().is_positive());
        assert!(e.width() / e.lo().clone() < rat(1, 1 << 20));
    }
}
