//! Commutator expansions for functions of commuting self-adjoint tuples,
//! verified on finite-dimensional models.

pub mod aae;
pub mod error;
pub mod expansion;
pub mod fit;
pub mod hs;
pub mod jet;
pub mod multiindex;
pub mod operator;
pub mod quadrature;
pub mod symdiff;

pub use error::{Error, Result};
pub use multiindex::MultiIndex;
