//! Risk analysis for hierarchical Bayesian meta linear regression.
//!
//! The crate evaluates the exact frequentist risk of the empirical-Bayes MAP
//! estimator for a novel task, explicit-constant upper bounds on that risk, and
//! Fano-style minimax lower bounds, together with the numerical oracles used
//! to check them.
//!
//! Modules, bottom-up:
//!
//! * [`matan`]: singular-value extremes, SPD solves, trace bounds.
//! * [`model`]: hyper-prior, tasks, environments, sampling, bound constants.
//! * [`posterior`]: hyper-mean and novel-task posteriors.
//! * [`risk`]: exact bias and variance, Monte Carlo risk, upper bounds.
//! * [`fano`]: packing sets, KL matrices, mutual-information bounds.

pub mod error;
pub mod fano;
pub mod matan;
pub mod model;
pub mod posterior;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
pub use matan::{Matrix, SingularExtremes};
pub use model::{
    BoundConstants, ConstantsMode, DesignKind, Environment, EnvironmentSpec, HyperPrior,
    Observations, Task,
};
pub use posterior::{NovelPosterior, SolvePath, TauPosterior};
pub use risk::{RiskReport, UpperBoundReport};
pub use fano::{DiscreteMeta, FanoInput, KLMatrix, LossSpec, PackingSet, Scheme};
