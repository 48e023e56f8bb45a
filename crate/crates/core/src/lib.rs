//! Finite-scale spectral and lower-bound analysis of stochastic semigroups.
//!
//! The library works on a finite cell decomposition of a measure space: a
//! [`StateSpace`] carries strictly positive cell masses, densities live in the
//! weighted L¹ over those cells, and operators act in density coordinates.
//! On top of that sit three semigroup model families (rate matrices,
//! discrete-time stochastic matrices, and transport-plus-jump models with an
//! exact singular/kernel split), evaluators for `T_t` and Cesàro means, and
//! the analysis layers: Doeblin-style uniform lower bounds with machine-checkable
//! convergence certificates, spectral/resolvent diagnostics, and a step-by-step
//! verifier for the compact-part convergence argument.

pub mod certify;
pub mod error;
pub mod evolution;
pub mod lower_bounds;
pub mod models;
pub mod operator;
pub mod reference;
pub mod space;
pub mod spectral;

pub use error::{Error, Result};
pub use models::{AtomModel, CtmcModel, DtmcModel, Model, PdmpModel, SplitMix64};
pub use operator::{KernelOperator, SingularPart, StructuredOperator};
pub use space::{Density, DualVector, StateSpace};
