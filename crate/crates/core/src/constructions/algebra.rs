use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::series::ExpPoly;

/// Polynomial without constant term: `Σ β_i x^{k_i}` with distinct nonzero
/// exponent rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolynomialExpr {
    pub nvars: usize,
    pub monomials: Vec<(Rational, Vec<u32>)>,
}

impl PolynomialExpr {
    /// Explicit coefficient/row matrix; rows must be distinct and nonzero.
    pub fn new(nvars: usize, monomials: Vec<(Rational, Vec<u32>)>) -> Result<Self> {
        for (i, (_, row)) in monomials.iter().enumerate() {
            if row.len() != nvars {
                return Err(Error::Parse(format!("row {i} has {} exponents, expected {nvars}", row.len())));
            }
            if row.iter().all(|&k| k == 0) {
                return Err(Error::ConstantTerm);
            }
            if monomials[..i].iter().any(|(_, r)| r == row) {
                return Err(Error::DuplicateRows);
            }
        }
        Ok(Self { nvars, monomials })
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.iter().all(|(b, _)| b.is_zero())
    }

    /// `θ_i = Π_l θ_l^{k_il}` paired with `β_i`, zero coefficients dropped,
    /// sorted by decreasing `θ`.
    pub fn exponentials(&self, gens: &[u64]) -> Result<Vec<(Rational, Rational)>> {
        if gens.len() < self.nvars {
            return Err(Error::Parse(format!("{} generators for {} variables", gens.len(), self.nvars)));
        }
        let mut out: Vec<(Rational, Rational)> = self
            .monomials
            .iter()
            .filter(|(b, _)| !b.is_zero())
            .map(|(b, row)| {
                let t = row.iter().zip(gens).fold(BigInt::one(), |acc, (&k, &g)| acc * BigInt::from(g).pow(k));
                (b.clone(), Rational::from_integer(t))
            })
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1));
        if out.windows(2).any(|w| w[0].1 == w[1].1) {
            return Err(Error::DuplicateRows);
        }
        Ok(out)
    }
}

fn parse_monomial(s: &str) -> Result<(Rational, BTreeMap<usize, u32>)> {
    let mut coeff = Rational::one();
    let mut powers = BTreeMap::new();
    for factor in s.split('*').map(str::trim) {
        if factor.is_empty() {
            return Err(Error::Parse(format!("empty factor in {s:?}")));
        }
        if let Some(v) = factor.strip_prefix('x') {
            let (idx, exp) = match v.split_once('^') {
                Some((i, e)) => (i, e.trim().parse::<u32>().map_err(|e| Error::Parse(e.to_string()))?),
                None => (v, 1),
            };
            let idx: usize = idx.trim().parse().map_err(|_| Error::Parse(format!("bad variable {factor:?}")))?;
            *powers.entry(idx).or_insert(0) += exp;
        } else {
            coeff *= rational::parse(factor)?;
        }
    }
    powers.retain(|_, k| *k != 0);
    Ok((coeff, powers))
}

impl FromStr for PolynomialExpr {
    type Err = Error;

    /// Infix `b*x0^k0*x1^k1 + …`; like terms are combined, so `x0 - x0` is the
    /// zero polynomial.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() || s == "0" {
            return Ok(Self { nvars: 0, monomials: vec![] });
        }
        // split into signed terms
        let mut terms: Vec<(bool, String)> = vec![];
        let mut cur = String::new();
        let mut neg = false;
        for (i, ch) in s.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
                terms.push((neg, std::mem::take(&mut cur)));
                neg = ch == '-';
            } else if (ch == '+' || ch == '-') && i == 0 {
                neg = ch == '-';
            } else {
                cur.push(ch);
            }
        }
        terms.push((neg, cur));
        let mut acc: BTreeMap<Vec<(usize, u32)>, Rational> = BTreeMap::new();
        for (neg, t) in terms {
            let (c, powers) = parse_monomial(&t)?;
            if powers.is_empty() {
                return Err(Error::ConstantTerm);
            }
            let c = if neg { -c } else { c };
            *acc.entry(powers.into_iter().collect()).or_insert_with(Rational::zero) += c;
        }
        let nvars = acc.keys().flat_map(|k| k.iter().map(|(i, _)| i + 1)).max().unwrap_or(0);
        let monomials = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| {
                let mut row = vec![0u32; nvars];
                for (i, e) in k {
                    row[i] = e;
                }
                (c, row)
            })
            .collect();
        Self::new(nvars, monomials)
    }
}

impl fmt::Display for PolynomialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return f.write_str("0");
        }
        for (i, (b, row)) in self.monomials.iter().enumerate() {
            let sign = if b.is_negative() { "-" } else { "+" };
            match (i, b.is_negative()) {
                (0, false) => {}
                (0, true) => f.write_str("-")?,
                _ => write!(f, " {sign} ")?,
            }
            let mut parts = vec![];
            if !b.abs().is_one() {
                parts.push(rational::render(&b.abs()));
            }
            for (l, &k) in row.iter().enumerate() {
                match k {
                    0 => {}
                    1 => parts.push(format!("x{l}")),
                    _ => parts.push(format!("x{l}^{k}")),
                }
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}

/// Result of evaluating a polynomial at the generators: the exact values
/// `w_j = Σ β_i θ_i^j` and the dominance threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Freeness {
    ZeroPolynomial,
    /// `|w_j| > ½|β₁|θ₁^j` for every `j >= j0`.
    NonzeroWitness { values: ExpPoly, j0: u64 },
}

/// First `j >= 1` with `Σ_{i>=2} |β_i| θ_i^j < ½ |β₁| θ₁^j`, for `θ` sorted
/// decreasingly. The left side divided by `θ₁^j` is decreasing, so the
/// inequality persists.
pub fn dominance_threshold(terms: &[(Rational, Rational)]) -> u64 {
    let (b1, t1) = &terms[0];
    let half = b1.abs() / rational::int(2);
    let mut j = 1u64;
    loop {
        let e = BigInt::from(j);
        let rest = terms[1..]
            .iter()
            .fold(Rational::zero(), |acc, (b, t)| acc + b.abs() * rational::powi(&(t / t1), &e));
        if rest < half {
            return j;
        }
        j += 1;
    }
}

/// Generators must be distinct primes (their logarithms are then independent
/// over the rationals).
pub fn check_generators(gens: &[u64]) -> Result<()> {
    let prime = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d));
    for (i, &g) in gens.iter().enumerate() {
        if !prime(g) {
            return Err(Error::Parse(format!("generator {g} is not prime")));
        }
        if gens[..i].contains(&g) {
            return Err(Error::Parse(format!("generator {g} repeated")));
        }
    }
    Ok(())
}

pub fn evaluate(gens: &[u64], poly: &PolynomialExpr) -> Result<Freeness> {
    check_generators(gens)?;
    let terms = poly.exponentials(gens)?;
    if terms.is_empty() {
        return Ok(Freeness::ZeroPolynomial);
    }
    let j0 = dominance_threshold(&terms);
    Ok(Freeness::NonzeroWitness { values: ExpPoly { terms }, j0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;

    fn poly(s: &str) -> PolynomialExpr {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_render() {
        let p = poly("x0^2*x1 - 3*x0");
        assert_eq!(p.nvars, 2);
        assert_eq!(p.monomials.len(), 2);
        assert_eq!(poly(&p.to_string()), p);
        assert!(poly("x0 - x0").is_zero());
        assert!(matches!("3 + x0".parse::<PolynomialExpr>(), Err(Error::ConstantTerm)));
        assert!(matches!(
            PolynomialExpr::new(1, vec![(rat(1, 1), vec![1]), (rat(2, 1), vec![1])]),
            Err(Error::DuplicateRows)
        ));
    }

    #[test]
    fn thresholds() {
        match evaluate(&[2, 3], &poly("x1 - x0")).unwrap() {
            Freeness::NonzeroWitness { j0, values } => {
                assert_eq!(j0, 2);
                assert_eq!(values.value(2), rat(5, 1));
            }
            other => panic!("{other:?}"),
        }
        match evaluate(&[2, 3], &poly("x0^2*x1 - 3*x0")).unwrap() {
            Freeness::NonzeroWitness { j0, values } => {
                // j = 1: 3·2 < ½·12 fails with equality
                assert_eq!(j0, 2);
                assert_eq!(values.terms[0].1, rat(12, 1));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(evaluate(&[2, 3], &poly("x0 - x0")).unwrap(), Freeness::ZeroPolynomial);
        match evaluate(&[2, 3], &poly("x0*x1")).unwrap() {
            Freeness::NonzeroWitness { values, .. } => assert_eq!(values.value(3), rat(216, 1)),
            other => panic!("{other:?}"),
        }
        assert!(check_generators(&[2, 4]).is_err());
    }
}
