use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};
use crate::spaces::{BaseIndex, BitString, CarrierRef, DyadicInterval, SetExpr, SpaceModel};

/// One reservation: a nowhere-dense body inside `host`, of exact measure `mass`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub base: BaseIndex,
    pub host: DyadicInterval,
    pub mass: Rational,
}

/// Deterministic allocator of pairwise disjoint carriers.
///
/// Every carrier body is the fat Cantor set of its host cell with parameter 1/2
/// (see [`super::FatCantor`]): each sub-cell `V` of the host at relative depth `d`
/// loses the gap cell `V·1·0^(d+1)`. The body has measure strictly above
/// `½·ℓ(host)`, and the carrier takes exactly `mass <= ½·ℓ(host)` of it.
///
/// Free space is therefore never exhausted: [`find_free`](Self::find_free)
/// descends into gaps of existing bodies, so every dyadic cell keeps a
/// carrier-free sub-cell after any finite number of allocations.
///
/// On the half line the left half of every unit block is a preassigned bulk
/// host (mass 1/4); these are the units of block streams ([`crate::spaces::Run`]).
#[derive(Clone, Debug)]
pub struct CarrierLedger {
    id: u64,
    model: SpaceModel,
    allocations: Vec<Allocation>,
}

impl CarrierLedger {
    pub fn new(model: SpaceModel, id: u64) -> Result<Self> {
        match model {
            SpaceModel::UnitInterval | SpaceModel::HalfLine | SpaceModel::CantorSpace => {}
            other => return Err(Error::ModelMismatch(format!("no carrier ledger on {other}"))),
        }
        Ok(Self { id, model, allocations: Vec::new() })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn model(&self) -> &SpaceModel {
        &self.model
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocations
    }

    fn bulk(&self) -> bool {
        self.model == SpaceModel::HalfLine
    }

    /// The bulk host of a half-line block.
    pub fn bulk_host(block: u64) -> DyadicInterval {
        DyadicInterval::in_block(block, BitString::from_bits(vec![false]))
    }

    fn cell_of_base(&self, n: BaseIndex) -> DyadicInterval {
        match self.model.enumerate_base(n) {
            SetExpr::Dyadic(d) => d,
            SetExpr::Cylinder(c) => DyadicInterval::in_block(0, c),
            _ => unreachable!("ledger models enumerate cells"),
        }
    }

    /// Hosts meeting `u`, bulk included.
    fn hosts_meeting(&self, u: &DyadicInterval) -> Vec<DyadicInterval> {
        let mut out: Vec<DyadicInterval> =
            self.allocations.iter().filter(|a| !a.host.disjoint(u)).map(|a| a.host.clone()).collect();
        if self.bulk() {
            let b = Self::bulk_host(u.block);
            if !b.disjoint(u) {
                out.push(b);
            }
        }
        out
    }

    /// A dyadic cell inside `u` that meets no carrier body.
    pub fn find_free(&self, u: &DyadicInterval) -> DyadicInterval {
        let mut cur = u.clone();
        // hosts whose body is known to miss `cur` (cur lies in one of their gaps)
        let mut cleared: Vec<DyadicInterval> = Vec::new();
        loop {
            let live: Vec<DyadicInterval> =
                self.hosts_meeting(&cur).into_iter().filter(|h| !cleared.contains(h)).collect();
            if live.is_empty() {
                return cur;
            }
            let inner = live.iter().filter(|h| h.contains(&cur)).max_by_key(|h| h.level()).cloned();
            match inner {
                Some(h) => {
                    cur = gap_cell(&h, &cur);
                    cleared.push(h);
                }
                None => {
                    cur = DyadicInterval::in_block(cur.block, cur.cell.child(true));
                }
            }
        }
    }

    fn place(&mut self, n: BaseIndex, region: &DyadicInterval, mass: Rational) -> CarrierRef {
        // smallest host R·0^k with ℓ(host) >= 2·mass
        let mut host = region.clone();
        let two_mass = &mass * rational::int(2);
        while host.measure() / rational::int(2) >= two_mass {
            host = DyadicInterval::in_block(host.block, host.cell.child(false));
        }
        let alloc = self.allocations.len() as u32;
        self.allocations.push(Allocation { base: n, host: host.clone(), mass: mass.clone() });
        CarrierRef { ledger: self.id, alloc, host, path: vec![], mass }
    }

    /// Carrier of exactly `mass` inside `U_n`; fails when the free region found
    /// in `U_n` is smaller than `2·mass`.
    pub fn allocate_carrier(&mut self, n: BaseIndex, mass: &Rational) -> Result<CarrierRef> {
        assert!(*mass > Rational::zero());
        let u = self.cell_of_base(n);
        let r = self.find_free(&u);
        if mass * rational::int(2) > r.measure() {
            return Err(Error::BudgetExceeded(n));
        }
        Ok(self.place(n, &r, mass.clone()))
    }

    /// Carrier inside `U_n` of mass `min(cap, ½·ℓ(R))` for the free region `R`;
    /// never fails. `cap` must be a power of two.
    pub fn allocate_within(&mut self, n: BaseIndex, cap: &Rational) -> CarrierRef {
        debug_assert!(rational::is_power_of_two(cap));
        let u = self.cell_of_base(n);
        let r = self.find_free(&u);
        let half = r.measure() / rational::int(2);
        let mass = if *cap < half { cap.clone() } else { half };
        self.place(n, &r, mass)
    }

    /// Independent check that `r` lies in `u` and misses every body.
    pub fn verify_free(&self, u: &DyadicInterval, r: &DyadicInterval) -> bool {
        if !u.contains(r) {
            return false;
        }
        self.hosts_meeting(r).iter().all(|h| h.contains(r) && in_some_gap(h, r))
    }

    /// Pairwise disjointness of all bodies, containment of each carrier in its
    /// π-base element, and a free cell in every cell up to `depth` (in blocks
    /// `0..blocks` on the half line).
    pub fn check_invariants(&self, depth: u32, blocks: u64) -> Result<()> {
        for (i, a) in self.allocations.iter().enumerate() {
            if !self.cell_of_base(a.base).contains(&a.host) {
                return Err(Error::DisjointnessViolation(format!("allocation {i} escapes U_{}", a.base)));
            }
            if a.mass.clone() * rational::int(2) > a.host.measure() {
                return Err(Error::DisjointnessViolation(format!("allocation {i} overfills its host")));
            }
            let mut others: Vec<DyadicInterval> =
                self.allocations[..i].iter().map(|b| b.host.clone()).collect();
            if self.bulk() {
                others.push(Self::bulk_host(a.host.block));
            }
            for h in others {
                let ok = h.disjoint(&a.host)
                    || (h.contains(&a.host) && in_some_gap(&h, &a.host))
                    || (a.host.contains(&h) && in_some_gap(&a.host, &h));
                if !ok {
                    return Err(Error::DisjointnessViolation(format!("allocation {i} meets a body")));
                }
            }
        }
        let nblocks = if self.bulk() { blocks.max(1) } else { 1 };
        for b in 0..nblocks {
            for k in 0..=depth {
                for c in BitString::all_of_level(k) {
                    let u = DyadicInterval::in_block(b, c);
                    let r = self.find_free(&u);
                    if !self.verify_free(&u, &r) {
                        return Err(Error::DisjointnessViolation(format!("no free cell in {u:?}")));
                    }
                    let inside: Rational = self
                        .allocations
                        .iter()
                        .filter(|a| u.contains(&a.host))
                        .fold(Rational::zero(), |acc, a| acc + &a.mass);
                    if inside + r.measure() > u.measure() {
                        return Err(Error::DisjointnessViolation(format!("overfull cell {u:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sum of allocated masses; always below the total of requested caps.
    pub fn total_mass(&self) -> Rational {
        self.allocations.iter().fold(Rational::zero(), |acc, a| acc + &a.mass)
    }
}

/// Gap cell of `u` relative to the body of host `h ⊇ u`: `u·1·0^(d+1)` with `d`
/// the depth of `u` below `h`.
pub fn gap_cell(h: &DyadicInterval, u: &DyadicInterval) -> DyadicInterval {
    let d = (u.level() - h.level()) as usize;
    let mut tail = vec![true];
    tail.extend(std::iter::repeat_n(false, d + 1));
    DyadicInterval::in_block(u.block, u.cell.extend(&tail))
}

fn in_some_gap(h: &DyadicInterval, r: &DyadicInterval) -> bool {
    let bits = r.cell.bits();
    (h.level() as usize..bits.len()).any(|k| {
        let v = DyadicInterval::in_block(r.block, BitString::from_bits(bits[..k].to_vec()));
        gap_cell(h, &v).contains(r)
    })
}

/// Masses `μ_n` (n >= 1) with `μ_{n+1} <= a_n μ_n` and `Σ μ_n < M`, all dyadic.
///
/// `μ_1` is the largest power of two strictly below `M/2`; each next mass is the largest
/// power of two not exceeding `min(a_n, 1/2)·μ_n`.
pub fn geometric_blocks(region_mass: &Rational, ratios: impl Fn(u64) -> Rational, count: u64) -> Vec<Rational> {
    assert!(*region_mass > Rational::zero());
    let mut out = Vec::with_capacity(count as usize);
    let half = rational::rat(1, 2);
    let half_mass = region_mass / rational::int(2);
    let mut cur = pow2(rational::floor_log2(&half_mass));
    if cur == half_mass {
        cur = &cur / rational::int(2);
    }
    for n in 1..=count {
        out.push(cur.clone());
        let a = ratios(n);
        let f = if a < half { a } else { half.clone() };
        cur = pow2(rational::floor_log2(&(&cur * f)));
    }
    out
}

/// `⌈log₂ j!⌉`.
pub fn log2_factorial_ceil(j: u64) -> i64 {
    let f: num_bigint::BigInt = (1..=j.max(1)).map(num_bigint::BigInt::from).product();
    let r = Rational::from_integer(f);
    let fl = rational::floor_log2(&r);
    if rational::is_power_of_two(&r) {
        fl
    } else {
        fl + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rational::rat;
    use num_traits::One;

    #[test]
    fn first_allocation_rule() {
        let mut l = CarrierLedger::new(SpaceModel::UnitInterval, 1).unwrap();
        let c = l.allocate_carrier(0, &rat(1, 8)).unwrap();
        assert_eq!(c.host, DyadicInterval::new(2, 0));
        assert!(DyadicInterval::new(1, 0).contains(&c.host));
        // the sibling [1/4, 1/2) stays free
        let sib = DyadicInterval::new(2, 1);
        assert_eq!(l.find_free(&sib), sib);
        assert!(l.verify_free(&sib, &sib));
    }

    #[test]
    fn second_allocation_goes_to_reserved_sibling() {
        let mut l = CarrierLedger::new(SpaceModel::UnitInterval, 1).unwrap();
        let a = l.allocate_carrier(0, &rat(1, 8)).unwrap();
        let b = l.allocate_carrier(1, &rat(1, 16)).unwrap();
        assert!(DyadicInterval::new(2, 1).contains(&b.host));
        assert_eq!(SetExpr::Carrier(a).disjoint(&SetExpr::Carrier(b)), Some(true));
        l.check_invariants(6, 1).unwrap();
    }

    #[test]
    fn budget_exceeded() {
        let mut l = CarrierLedger::new(SpaceModel::UnitInterval, 1).unwrap();
        assert!(matches!(l.allocate_carrier(4, &rat(1, 4)), Err(Error::BudgetExceeded(4))));
    }

    #[test]
    fn allocation_inside_a_body_uses_its_gaps() {
        let mut l = CarrierLedger::new(SpaceModel::UnitInterval, 1).unwrap();
        l.allocate_within(0, &rat(1, 2)); // host = [0,1)
        let c = l.allocate_within(3, &rat(1, 2));
        // U_3 = [0,1/4) lies inside the first body; the carrier sits in a gap
        assert!(DyadicInterval::new(2, 0).contains(&c.host));
        l.check_invariants(7, 1).unwrap();
    }

    #[test]
    fn half_line_bulk_is_avoided() {
        let mut l = CarrierLedger::new(SpaceModel::HalfLine, 9).unwrap();
        for n in 0..40 {
            let c = l.allocate_within(n, &pow2(-(n as i64) - 2));
            assert!(!CarrierLedger::bulk_host(c.host.block).contains(&c.host) || c.host.level() > 1);
        }
        l.check_invariants(5, 4).unwrap();
    }

    #[test]
    fn geometric_block_examples() {
        let m = geometric_blocks(&rat(1, 1), |_| rat(1, 2), 10);
        for (i, mu) in m.iter().enumerate() {
            assert_eq!(*mu, pow2(-(i as i64) - 2));
        }
        let f = geometric_blocks(&rat(1, 1), |n| rat(1, n as i64), 64);
        let mut s = Rational::zero();
        for n in 0..63 {
            assert!(f[n + 1] <= &f[n] / rational::int(n as i64 + 1));
            s += &f[n];
        }
        assert!(s < Rational::one());
        let q = geometric_blocks(&rat(1, 4), |_| rat(1, 2), 20);
        assert!(q.iter().fold(Rational::zero(), |a, b| a + b) < rat(1, 4));
    }

    #[test]
    fn factorial_exponents() {
        assert_eq!(log2_factorial_ceil(1), 0);
        assert_eq!(log2_factorial_ceil(2), 1);
        assert_eq!(log2_factorial_ceil(3), 3);
        assert_eq!(log2_factorial_ceil(4), 5);
    }
}
