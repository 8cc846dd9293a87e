pub mod error;
pub mod expr;

pub use error::{Error, Result};
pub use expr::{Atom, Expression};
pub mod jet;
pub mod parse;
pub mod family;
pub mod algebra;
pub mod sample;
pub mod invariants;
pub mod flows;
