//! Causal effects with an unobserved exposure or outcome.
//!
//! * [`graph`]: causal diagrams, d-separation, back-door and front-door checks.
//! * [`table`], [`data`], [`adjust`], [`latent`]: discrete joint tables,
//!   CSV ingestion, adjustment formulas and a synthetic latent-class generator.
//! * [`identify`]: recovery of a latent variable's joint law from two proxy
//!   families via a generalized eigenproblem, and the causal effects it licenses.
//! * [`lp`]: exact rational simplex and brute-force vertex enumeration.
//! * [`bounds`]: counterfactual (response-type) programs and sharp bounds.

pub mod graph;
pub mod rational;
pub mod table;
pub mod data;
pub mod adjust;
pub mod latent;
pub mod identify;
pub mod exec;
pub mod fixtures;
pub mod lp;
pub mod bounds;

pub use graph::{CausalDiagram, Criterion, CriterionReport, GraphError};
pub use rational::Rational;
pub use table::{JointTable, Prob, TableError, Variable};
