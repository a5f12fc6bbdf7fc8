use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::exactnum::{Enclosure, ExactPosReal, MonomialSum};
use crate::spaces::DyadicInterval;

/// Largest support enumerated by default (`2^20` sign patterns).
pub const DEFAULT_SUPPORT_LIMIT: usize = 20;

/// Value of `r_n` (`n >= 1`) on the level-`k` cell `j` (`k >= n`):
/// `sign(sin(2^n π t))` is `+1` on even level-`n` cells.
pub fn rademacher_sign(n: u32, k: u32, j: u64) -> i32 {
    debug_assert!(n >= 1 && n <= k);
    if (j >> (k - n)) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// `Σ_n a_n r_n` on the level-`K` cell `j`, `K = a.len()`.
pub fn level_value(a: &[Rational], j: u64) -> Rational {
    let k = a.len() as u32;
    a.iter().enumerate().fold(Rational::zero(), |acc, (i, x)| {
        if rademacher_sign(i as u32 + 1, k, j) > 0 {
            acc + x
        } else {
            acc - x
        }
    })
}

/// [`level_value`] on every level-`K` cell, left to right.
pub fn level_values(a: &[Rational]) -> Vec<Rational> {
    crate::par::map_range(0, 1u64 << a.len(), |j| level_value(a, j))
}

/// `‖Σ a_n r_n‖_p^p = 2^-K Σ_ε |Σ ε_n a_n|^p` as an exact formal sum, and its p-th root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RademacherNorm {
    pub p_mass: MonomialSum,
    /// The norm, when it is a single monomial.
    pub exact: Option<ExactPosReal>,
    pub norm: Enclosure,
}

pub fn rademacher_norm(a: &[Rational], p: &Rational) -> Result<RademacherNorm> {
    rademacher_norm_with_limit(a, p, DEFAULT_SUPPORT_LIMIT)
}

pub fn rademacher_norm_with_limit(a: &[Rational], p: &Rational, limit: usize) -> Result<RademacherNorm> {
    if a.len() > limit {
        return Err(Error::SupportTooLarge(a.len(), limit));
    }
    let k = a.len() as i64;
    // sign patterns are the level-K cells; collect distinct |values| with multiplicity
    let mut counts: BTreeMap<Rational, i64> = BTreeMap::new();
    for v in level_values(a) {
        if !v.is_zero() {
            *counts.entry(v.abs()).or_insert(0) += 1;
        }
    }
    let mut p_mass = MonomialSum::zero();
    for (v, c) in counts {
        p_mass.add_monomial(&ExactPosReal::from_rational(v).pow(p), &(rational::int(c) * rational::pow2(-k)));
    }
    let exact = p_mass.as_monomial().map(|m| m.pow(&p.recip()));
    let norm = match &exact {
        Some(m) => m.enclose(96),
        None => p_mass.enclose(96).root(p, 64),
    };
    Ok(RademacherNorm { p_mass, exact, norm })
}

/// Coefficient data for [`nonconstancy_check`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RademacherSpec {
    Finite(Vec<Rational>),
    /// A nonzero combination of normalized vectors with pairwise disjoint
    /// infinite supports: infinitely many coefficients are nonzero.
    DisjointBlocks,
}

/// Whether `Σ a_n r_n` is nonconstant on `cell`: the `r_n` with `n` at most
/// the cell level are constant there, every later one oscillates.
pub fn nonconstancy_check(a: &RademacherSpec, cell: &DyadicInterval) -> bool {
    match a {
        RademacherSpec::DisjointBlocks => true,
        RademacherSpec::Finite(v) => {
            let lvl = cell.level() as usize;
            v.iter().enumerate().any(|(i, x)| i + 1 > lvl && !x.is_zero())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;

    #[test]
    fn examples() {
        let one = rademacher_norm(&[rat(1, 1)], &rat(3, 2)).unwrap();
        assert_eq!(one.exact, Some(ExactPosReal::one()));
        let l2 = rademacher_norm(&[rat(3, 5), rat(4, 5)], &rat(2, 1)).unwrap();
        assert_eq!(l2.p_mass.as_rational(), Some(rat(1, 1)));
        let l1 = rademacher_norm(&[rat(3, 1), rat(4, 1)], &rat(1, 1)).unwrap();
        assert_eq!(l1.exact, Some(ExactPosReal::from_rational(rat(4, 1))));
        assert!(matches!(
            rademacher_norm_with_limit(&vec![rat(1, 1); 3], &rat(1, 1), 2),
            Err(Error::SupportTooLarge(3, 2))
        ));
    }

    #[test]
    fn level_values_follow_signs() {
        // r_1 = + on [0,1/2), r_2 = + on [0,1/4) ∪ [1/2,3/4)
        assert_eq!(level_values(&[rat(3, 1), rat(4, 1)]), vec![rat(7, 1), rat(-1, 1), rat(1, 1), rat(-7, 1)]);
    }

    #[test]
    fn nonconstancy() {
        let mut e5 = vec![rat(0, 1); 5];
        e5[4] = rat(1, 1);
        assert!(nonconstancy_check(&RademacherSpec::Finite(e5), &DyadicInterval::new(3, 2)));
        let a = RademacherSpec::Finite(vec![rat(1, 1), rat(1, 1)]);
        assert!(!nonconstancy_check(&a, &DyadicInterval::new(2, 1)));
        assert!(nonconstancy_check(&RademacherSpec::DisjointBlocks, &DyadicInterval::new(9, 3)));
    }
}
