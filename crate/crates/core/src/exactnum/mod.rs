//! Exact positive-real arithmetic and certified enclosures.

mod enclosure;
mod posreal;
pub mod rational;
mod sum;

pub use enclosure::Enclosure;
pub use posreal::{compare, pow, ExactPosReal};
pub use rational::Rational;
pub use sum::{default_goal, enclose_sum, parse_goal, PRECISION_ENV, geometric_tail, GeometricTerms, MonomialSum, TermSource};
