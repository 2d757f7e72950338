//! Interpretable differencing of two black-box classifiers.
//!
//! Given a feature matrix and the predictions of two models on it, this crate
//! grows a *joint surrogate tree* (two greedy entropy trees that share split
//! conditions until the models start to disagree), reads off the regions where
//! the two surrogates predict different labels as a ruleset of axis-aligned
//! boxes, and scores such rulesets against held-out predictions.
//!
//! Modules, bottom up:
//!
//! * [`tabular`]: datasets, CSV ingestion, one-hot encoding, seeded splits.
//! * [`dtree`]: entropy impurity, exhaustive split search, tree fitting.
//! * [`jst`]: the joint surrogate tree and its divergence criterion.
//! * [`diffrules`]: diff-region extraction and ruleset evaluation.
//! * [`refine`]: precision-oriented splitting of impure diff leaves.
//! * [`metrics`]: precision/recall/F1, diff rate, fidelity.
//! * [`baselines`]: direct difference trees and separate surrogates.

pub mod baselines;
pub mod diffrules;
pub mod dtree;
mod error;
pub mod jst;
pub mod metrics;
pub mod refine;
pub mod tabular;

pub use error::{Error, Result};

/// Version tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: u32 = 1;
