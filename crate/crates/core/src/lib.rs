//! Norms of the embedding between weighted anchored and ANOVA spaces.

pub mod bounds;
pub mod error;
pub mod exponent;
pub mod lattice;
pub mod operator;
pub mod pnorm;
pub mod quadrature;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use exponent::ExponentPair;
pub use lattice::SubsetMask;
pub use weights::WeightScheme;
