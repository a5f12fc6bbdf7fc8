//! Exact construction and certification of functions that are p-integrable
//! but nowhere q-integrable.
//!
//! Witnesses are built in [`constructions`] over the models of [`spaces`],
//! described by the closed-form strand families of [`series`], moved between
//! models by [`transport`] and judged by [`certify`].

pub mod certify;
pub mod cli;
pub mod constructions;
pub mod error;
pub mod export;
pub mod exactnum;
pub mod io;
pub mod par;
pub mod series;
pub mod spaces;
pub mod suite;
pub mod transport;

pub use error::{Error, Result};
