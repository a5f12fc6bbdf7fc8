use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactnum::rational::{self, Rational};
use crate::spaces::BitString;

/// Longest seed accepted; keeps every shared block below `4^31`.
pub const MAX_SEED_LEN: u32 = 3;

/// First index of block `M_k = [4^k, 4^(k+1))`.
pub fn block_start(k: u32) -> u64 {
    1u64 << (2 * k)
}

pub fn block_end(k: u32) -> u64 {
    1u64 << (2 * k + 2)
}

/// Block containing index `m >= 1`.
pub fn block_of(m: u64) -> u32 {
    (63 - m.leading_zeros()) / 2
}

/// `Σ_{i∈M_k} 1/i >= 1`: `M_k` splits into `[N, 2N)` and `[2N, 4N)`, each
/// contributing more than `1/2`. Exact check for small `k`.
pub fn block_sum_exact(k: u32) -> Rational {
    (block_start(k)..block_end(k)).fold(Rational::zero(), |acc, i| acc + rational::rat(1, i as i64))
}

/// `A_α = ∪{M_k : k ∈ A'_α}` for the branch `s·1·0^∞` of the binary tree;
/// `A'_α` holds the breadth-first indices `2^ℓ - 1 + v` of the branch's prefixes.
/// Distinct seeds give distinct branches, hence finite intersections.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlmostDisjointIndex {
    pub seed: BitString,
}

impl AlmostDisjointIndex {
    pub fn new(seed: BitString) -> Result<Self> {
        if seed.level() > MAX_SEED_LEN {
            return Err(Error::Parse(format!("seed {seed} longer than {MAX_SEED_LEN} bits")));
        }
        Ok(Self { seed })
    }

    /// Bit `i` of the branch.
    pub fn branch_bit(&self, i: usize) -> bool {
        let s = self.seed.bits();
        match i.cmp(&s.len()) {
            std::cmp::Ordering::Less => s[i],
            std::cmp::Ordering::Equal => true,
            std::cmp::Ordering::Greater => false,
        }
    }

    /// Block index of the branch prefix of length `l` (`l <= 30`).
    pub fn block_at_level(&self, l: u32) -> u32 {
        let v = (0..l as usize).fold(0u64, |acc, i| (acc << 1) | self.branch_bit(i) as u64);
        ((1u64 << l) - 1 + v) as u32
    }

    /// `k ∈ A'_α`.
    pub fn has_block(&self, k: u32) -> bool {
        let l = 63 - (k as u64 + 1).leading_zeros();
        self.block_at_level(l) == k
    }

    /// `m ∈ A_α`.
    pub fn contains(&self, m: u64) -> bool {
        m >= 1 && self.has_block(block_of(m))
    }

    /// Blocks of `A'_α` below `4^31`, in increasing order.
    pub fn blocks(&self) -> Vec<u32> {
        (0..5).map(|l| self.block_at_level(l)).filter(|&k| k <= 30).collect()
    }

    /// Length of the common branch prefix with `other`.
    pub fn split_level(&self, other: &AlmostDisjointIndex) -> u32 {
        let mut i = 0usize;
        while self.branch_bit(i) == other.branch_bit(i) {
            i += 1;
            assert!(i <= 64, "identical branches");
        }
        i as u32
    }

    /// Shared blocks with `other`: exactly the prefixes of length `<= split_level`.
    pub fn shared_blocks(&self, other: &AlmostDisjointIndex) -> Vec<u32> {
        (0..=self.split_level(other)).map(|l| self.block_at_level(l)).collect()
    }

    /// Largest index of a block shared with `other`; beyond it `A_α ∩ A_β = ∅`.
    pub fn intersection_cut(&self, other: &AlmostDisjointIndex) -> u64 {
        let k = *self.shared_blocks(other).iter().max().expect("root block is shared");
        block_end(k) - 1
    }
}

pub fn check_distinct(seeds: &[AlmostDisjointIndex]) -> Result<()> {
    for (i, a) in seeds.iter().enumerate() {
        for b in &seeds[i + 1..] {
            if a == b {
                return Err(Error::SeedCollision(a.seed.to_string()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn ad(s: &str) -> AlmostDisjointIndex {
        AlmostDisjointIndex::new(s.parse().unwrap()).unwrap()
    }

    #[test]
    fn block_sums_reach_one() {
        for k in 0..5 {
            assert!(block_sum_exact(k) >= Rational::one(), "block {k}");
        }
    }

    #[test]
    fn blocks_and_membership() {
        let a = ad("01");
        // branch 0,1,1,0,0,... ; prefixes "", "0", "01", "011", "0110"
        assert_eq!(a.blocks(), vec![0, 1, 4, 10, 21]);
        assert!(a.contains(1) && a.contains(3) && a.contains(4) && !a.contains(16));
        assert!(a.contains(256));
    }

    #[test]
    fn almost_disjointness() {
        let a = ad("000");
        let b = ad("001");
        assert_eq!(a.split_level(&b), 2);
        assert_eq!(a.shared_blocks(&b).len(), 3);
        assert_eq!(ad("11").split_level(&ad("111")), 3);
        let cut = a.intersection_cut(&b);
        for m in cut + 1..cut + 5000 {
            assert!(!(a.contains(m) && b.contains(m)));
        }
        let c = ad("1");
        assert_eq!(a.shared_blocks(&c), vec![0]);
        assert_eq!(a.intersection_cut(&c), 3);
        assert!(check_distinct(&[a.clone(), b, a]).is_err());
    }
}
