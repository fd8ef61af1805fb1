//! Simulation of collective decision making as the evolution of a population
//! of ideas over an `M`-bit problem space.
//!
//! Agents perceive a shared (possibly biased) utility landscape through their
//! own noisy lens and take turns applying six evolutionary operators to a
//! common idea population. The [`harness`] module runs the heterogeneity/bias
//! sweep and the behavioural-preset comparison on top of [`simulation::run`].

pub mod error;
pub mod evolution;
pub mod genealogy;
pub mod harness;
pub mod landscape;
pub mod metrics;
pub mod numfmt;
pub mod seed;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
pub use evolution::{Direction, OperatorKind, OperatorParams, Population};
pub use genealogy::{build_genealogy, EventLog, EvolutionaryEvent, GenealogyDag, GenealogyStats};
pub use landscape::{Idea, IndividualUtility, UtilityLandscape};
pub use metrics::OutcomeMetrics;
pub use simulation::{run, GroupPreset, SimulationConfig, SimulationResult};
