//! Construction recipes: carriers, h_A, g_B, basic families, dense-lineability
//! generators and algebra generators.

mod algebra;
mod almost;
mod build;
mod fatcantor;
mod ledger;

pub use almost::{block_end, block_of, block_start, block_sum_exact, check_distinct, AlmostDisjointIndex, MAX_SEED_LEN};
pub use fatcantor::FatCantor;
pub use ledger::{gap_cell, geometric_blocks, log2_factorial_ceil, Allocation, CarrierLedger};
pub use algebra::{check_generators, dominance_threshold, evaluate, Freeness, PolynomialExpr};
pub use build::{
    algebra_generator_eval, algebra_values, build_basic_family, build_dense_generators, build_gb, build_ha,
    build_simple, rebuild, seed_id, DensePair, FamilyMode, BULK_GROUP,
};
