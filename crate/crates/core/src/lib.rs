//! One-Step Ahead Sequential Super Learner for spatio-temporal cost panels.
//!
//! The crate is organized around a yearly panel of city-level cost
//! observations. A zoo of base learners is refitted sequentially on growing
//! history prefixes; meta-algorithms combine the learners' one-step-ahead
//! predictions; and an overarching selector picks, at each time step, the
//! algorithm (or convex combination of algorithms) with the smallest
//! penalized cumulative one-step-ahead risk. On synthetic panels the true
//! regression function is known, which powers the oracle probes and the
//! variable-importance calibration checks.
//!
//! Modules:
//! - [`panel`]: panel data model, covariate schema, CSV/JSON ingestion.
//! - [`graph`]: city dependency graph and degree statistics.
//! - [`features`]: grid-to-city SWI aggregation, quarter CDFs, compound
//!   covariates.
//! - [`learners`]: the base-learner zoo, screening, combiners.
//! - [`superlearner`]: risk ledgers, simplex nets, selection, the staged
//!   schedule, oracle probes.
//! - [`importance`]: rank-based variable-importance measures with
//!   permutation tests.
//! - [`synthgen`]: seeded synthetic panel generator with known ground truth.

pub mod features;
pub mod graph;
pub mod importance;
pub mod learners;
pub mod panel;
pub(crate) mod stats;
pub mod superlearner;
pub mod synthgen;

pub use graph::{degree_stats, DegreeStats, DependencyGraph};
pub use panel::{
    CityId, CovariateKind, CovariateRole, CovariateSchema, Observation, Panel, PanelSlice,
    SchemaEntry, TimeIndex,
};
