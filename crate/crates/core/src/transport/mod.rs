//! Measure-preserving relabelings between the dyadic models, Rademacher sums
//! and the tensor embedding.

mod maps;
mod ops;
mod rademacher;

pub use maps::{map_set, pull_back_cell, push_map, MapTag};
pub use ops::{
    apply_map, binary_transport, fubini_check, interleave_transport, product_lift, resident, tensor_embed,
    BinaryDirection, InterleaveDirection, Residency, TensorFactor,
};
pub use rademacher::{
    level_value, level_values, nonconstancy_check, rademacher_norm, rademacher_norm_with_limit, rademacher_sign,
    RademacherNorm, RademacherSpec, DEFAULT_SUPPORT_LIMIT,
};
