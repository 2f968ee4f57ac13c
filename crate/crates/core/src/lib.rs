//! Log-linear missing-data-mechanism models for incomplete contingency tables.
//!
//! A table cross-classifies `n` categorical variables; `k` of them may be
//! unobserved for some units, so counts arrive in `2^k` blocks, one per
//! response pattern. Each missing-capable variable gets a mechanism
//! (NMAR, MAR on another variable, or MCAR) and the library fits the
//! resulting Poisson model by closed form where one is known and by EM
//! otherwise.

pub mod em;
pub mod error;
pub mod estimators;
pub mod fixtures;
pub mod inference;
pub mod linsolve;
pub mod model;
pub mod params;
pub mod report;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
pub use estimators::{fit, fit_with, BoundaryCandidate, BoundaryReport, FitMethod, FitOptions, FitResult, GuardMode};
pub use model::{Mechanism, MechanismSpec, ModelCategory};
pub use params::ModelParams;
pub use table::{IncompleteTable, ObservedBlock, Response, ResponsePattern, VariableMeta};
