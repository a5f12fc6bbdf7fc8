use num_traits::{One, Zero};

use crate::exactnum::rational::{pow2, Rational};
use crate::exactnum::Enclosure;
use crate::spaces::{BitString, DyadicInterval};

/// Staged nowhere-dense closed subset of a dyadic cell `U` with measure above `ε·μ(U)`.
///
/// Stage `t >= 1` removes, from every sub-cell `V` of `U` at relative depth
/// `t - 1`, the dyadic gap `V·1·0^(t+c)` sitting at the midpoint of `V`, where
/// `c` is the least integer with `2^-(c+1) <= 1 - ε`. Stage `t` removes at most
/// `μ(U)·2^-(t+c+1)`, so the limit keeps more than `μ(U)(1 - 2^-(c+1)) >= ε·μ(U)`
/// (strictly: later gaps partly fall into earlier ones). Every sub-cell of `U`
/// contains a gap, so the limit is nowhere dense.
#[derive(Clone, Debug)]
pub struct FatCantor {
    pub cell: DyadicInterval,
    pub eps: Rational,
    c: u32,
}

impl FatCantor {
    pub fn new(cell: DyadicInterval, eps: Rational) -> Self {
        assert!(eps > Rational::zero() && eps < Rational::one(), "ε must lie in (0,1)");
        let slack = Rational::one() - &eps;
        let mut c = 0u32;
        while pow2(-(c as i64) - 1) > slack {
            c += 1;
        }
        Self { cell, eps, c }
    }

    /// Gap removed from the sub-cell `v` (relative path) at its stage.
    pub fn gap(&self, v: &BitString) -> BitString {
        let t = v.level() + 1;
        let mut tail = vec![true];
        tail.extend(std::iter::repeat_n(false, (t + self.c) as usize));
        v.extend(&tail)
    }

    /// The stage-`t` set as disjoint closed dyadic pieces (relative paths).
    pub fn stage(&self, t: u32) -> Vec<BitString> {
        let mut pieces = vec![BitString::empty()];
        for s in 1..=t {
            for v in BitString::all_of_level(s - 1) {
                let g = self.gap(&v);
                pieces = subtract(pieces, &g);
            }
        }
        pieces
    }

    /// Exact measure of the stage-`t` set.
    pub fn stage_measure(&self, t: u32) -> Rational {
        let rel: Rational = self.stage(t).iter().fold(Rational::zero(), |acc, p| acc + p.measure());
        rel * self.cell.measure()
    }

    /// Enclosure of the limit measure from stage `t`: later stages remove at
    /// most `μ(U)·2^-(t+c+1)`.
    pub fn limit_enclosure(&self, t: u32) -> Enclosure {
        let hi = self.stage_measure(t);
        let rest = self.cell.measure() * pow2(-((t + self.c) as i64) - 1);
        Enclosure::new(&hi - rest, hi)
    }

    /// `ε·μ(U)`, the bound the limit strictly exceeds.
    pub fn target(&self) -> Rational {
        &self.eps * self.cell.measure()
    }

    pub fn pieces_absolute(&self, t: u32) -> Vec<DyadicInterval> {
        self.stage(t)
            .into_iter()
            .map(|p| DyadicInterval::in_block(self.cell.block, self.cell.cell.extend(p.bits())))
            .collect()
    }
}

fn subtract(pieces: Vec<BitString>, g: &BitString) -> Vec<BitString> {
    let mut out = Vec::with_capacity(pieces.len() + g.level() as usize);
    for p in pieces {
        if g.is_prefix_of(&p) {
            continue;
        }
        if p.is_prefix_of(g) {
            // complement of g inside p: siblings along the path from p down to g
            let bits = g.bits();
            for k in p.level() as usize..bits.len() {
                out.push(BitString::from_bits(bits[..k].to_vec()).child(!bits[k]));
            }
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;

    #[test]
    fn stage_zero_is_the_cell() {
        let f = FatCantor::new(DyadicInterval::new(0, 0), rat(1, 2));
        assert_eq!(f.stage_measure(0), Rational::one());
    }

    #[test]
    fn stage_three_bookkeeping() {
        let f = FatCantor::new(DyadicInterval::new(0, 0), rat(1, 2));
        // independent oracle: removal at stage n is at most 2^-(n+1)
        let bound = Rational::one() - (1..=3).map(|n| pow2(-n - 1)).fold(Rational::zero(), |a, b| a + b);
        let m = f.stage_measure(3);
        assert!(m >= bound);
        assert!(m > rat(1, 2));
        let e = f.limit_enclosure(3);
        assert!(*e.lo() > f.target());
    }

    #[test]
    fn stages_decrease_and_gaps_everywhere() {
        let f = FatCantor::new(DyadicInterval::new(1, 1), rat(3, 4));
        let mut prev = f.stage_measure(0);
        for t in 1..8 {
            let m = f.stage_measure(t);
            assert!(m <= prev);
            prev = m;
            // the stage bound alone reaches ε·μ(U); overlaps of later gaps make it strict
            assert!(*f.limit_enclosure(t).lo() >= f.target());
            if t >= 5 {
                assert!(*f.limit_enclosure(t).lo() > f.target(), "stage {t}");
            }
        }
        // every sub-cell up to depth 5 contains a removed gap
        let st = f.stage(7);
        for k in 0..=5 {
            for v in BitString::all_of_level(k) {
                let g = f.gap(&v);
                assert!(st.iter().all(|p| !p.comparable(&g)));
            }
        }
    }
}
