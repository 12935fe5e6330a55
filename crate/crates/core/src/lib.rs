//! Probabilistic abductive diagnosis over causal networks with an isa
//! taxonomy.
//!
//! * [`kb`] parses and validates networks.
//! * [`scenario`] defines scenarios, their validity and their probability.
//! * [`oracle`] finds best explanations by exhaustive search.
//! * [`solver`] finds them by Steiner-tree dynamic programming.
//! * [`recognition`] maps concept taxonomies with counts onto the solver.

pub mod generate;
pub mod kb;
pub mod oracle;
pub mod ranking;
pub mod recognition;
pub mod scenario;
pub mod solver;

pub use kb::{parse_network, CausalNetwork, EventId, KbError, NetworkBuilder, TOP};
pub use ranking::RankedExplanation;
pub use scenario::{ObservationSet, Scenario, ScenarioError};
