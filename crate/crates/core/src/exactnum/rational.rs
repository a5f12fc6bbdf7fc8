//! Helpers around `BigRational`: parsing, canonical rendering, dyadic rounding.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^e` for any integer `e`.
pub fn pow2(e: i64) -> Rational {
    let one = BigInt::one();
    if e >= 0 {
        Rational::from_integer(one << (e as usize))
    } else {
        Rational::new(one.clone(), one << ((-e) as usize))
    }
}

/// Renders `a` or `a/b` (canonical, reduced).
pub fn render(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `a`, `a/b`, `-a/b`, or a power of two `2^e` / `2^-e`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some(rest) = s.strip_prefix("2^") {
        let e: i64 = rest.trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| bad())?;
        return Ok(pow2(e));
    }
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn floor_int(r: &Rational) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn ceil_int(r: &Rational) -> BigInt {
    -((-r.numer()).div_floor(r.denom()))
}

/// Rounds down onto the grid `2^-bits`.
pub fn round_down(r: &Rational, bits: u32) -> Rational {
    let scaled = r * pow2(bits as i64);
    Rational::new(floor_int(&scaled), BigInt::one() << bits as usize)
}

/// Rounds up onto the grid `2^-bits`.
pub fn round_up(r: &Rational, bits: u32) -> Rational {
    let scaled = r * pow2(bits as i64);
    Rational::new(ceil_int(&scaled), BigInt::one() << bits as usize)
}

/// `floor(log2 |r|)` for nonzero `r`.
pub fn floor_log2(r: &Rational) -> i64 {
    debug_assert!(!r.is_zero());
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    let mut e = n.bits() as i64 - d.bits() as i64;
    // adjust so that 2^e <= |r| < 2^(e+1)
    let a = r.abs();
    while pow2(e) > a {
        e -= 1;
    }
    while pow2(e + 1) <= a {
        e += 1;
    }
    e
}

pub fn to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() && d != 0.0 => n / d,
        _ => {
            let e = floor_log2(r);
            let m = r / pow2(e);
            m.to_f64().unwrap_or(f64::NAN) * 2f64.powi(e.clamp(-2000, 2000) as i32)
        }
    }
}

/// Exact `k`-th root of a non-negative integer, if it exists.
pub fn exact_root(n: &BigUint, k: u32) -> Option<BigUint> {
    if k == 1 {
        return Some(n.clone());
    }
    let r = n.nth_root(k);
    if r.pow(k) == *n {
        Some(r)
    } else {
        None
    }
}

/// Exact `k`-th root of a positive rational, if it exists.
pub fn exact_root_rat(r: &Rational, k: u32) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = exact_root(r.numer().magnitude(), k)?;
    let d = exact_root(r.denom().magnitude(), k)?;
    Some(Rational::new(
        BigInt::from_biguint(Sign::Plus, n),
        BigInt::from_biguint(Sign::Plus, d),
    ))
}

pub fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

/// True for `2^e`, any integer `e`.
pub fn is_power_of_two(r: &Rational) -> bool {
    if !r.is_positive() {
        return false;
    }
    let pot = |b: &BigInt| {
        let m = b.magnitude();
        m.count_ones() == 1
    };
    pot(r.numer()) && pot(r.denom())
}

/// Positive integer power with a rational base and a (possibly negative) integer exponent.
pub fn powi(base: &Rational, e: &BigInt) -> Rational {
    let mag = e.magnitude().to_u32().expect("exponent too large");
    let p = num_traits::pow(base.clone(), mag as usize);
    if e.is_negative() {
        p.recip()
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        assert_eq!(parse("6/8").unwrap(), rat(3, 4));
        assert_eq!(render(&parse("-6/8").unwrap()), "-3/4");
        assert_eq!(parse("2^-20").unwrap(), pow2(-20));
        assert_eq!(render(&int(7)), "7");
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }

    #[test]
    fn log2_and_rounding() {
        assert_eq!(floor_log2(&rat(1, 8)), -3);
        assert_eq!(floor_log2(&rat(3, 8)), -2);
        assert_eq!(floor_log2(&int(9)), 3);
        let x = rat(1, 3);
        assert!(round_down(&x, 10) <= x && x <= round_up(&x, 10));
        assert_eq!(exact_root_rat(&rat(1, 4), 2), Some(rat(1, 2)));
        assert_eq!(exact_root_rat(&rat(1, 2), 2), None);
    }
}
