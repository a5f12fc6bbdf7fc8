//! Measure-space models, their countable π-bases, and symbolic sets.

mod cell;
mod model;
mod setexpr;

pub use cell::{BitString, DyadicInterval};
pub use model::{cell_of, index_of, pair, unpair, BaseIndex, SpaceModel};
pub use setexpr::{CarrierRef, Run, SetExpr};
