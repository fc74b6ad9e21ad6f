//! Exact finite-space liftings, product disintegrations and liftings that
//! split across the product.

pub mod algebra;
pub mod error;
pub mod harness;
pub mod lifting;
pub mod measure;
pub mod process;
pub mod product;
pub mod rational;
pub mod report;
pub mod space;
pub mod split_ac;
pub mod split_chain;

pub use algebra::{generate_algebra, SigmaAlgebra};
pub use error::{Error, Result};
pub use lifting::{AnchorLifting, DensityTable, SetMap};
pub use measure::{conditional_expectation, Measure, SimpleFunction};
pub use rational::Rational;
pub use report::{LawResult, SweepMode, VerificationReport};
pub use space::{Event, FiniteSpace};
