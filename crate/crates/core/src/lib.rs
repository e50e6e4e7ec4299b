pub mod config;
pub mod dump;
pub mod error;
pub mod expr;
pub mod family;
pub mod fit;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod process;
pub mod quadrature;
pub mod semigroup;
pub mod semilinear;
pub mod spaces;

pub use error::{Error, Result};
pub use family::{HypothesisConstants, OperatorFamily};
pub use semigroup::{Contour, SemigroupEvaluator};
pub use spaces::{DiscreteSpace, Norm, C64};
