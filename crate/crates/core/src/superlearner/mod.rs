//! The sequential super-learning meta-layer: cumulative one-step-ahead
//! risks, penalized selection, simplex-net aggregation, oracle probes and
//! the staged training schedule.

mod ledger;
mod probe;
mod schedule;
mod simplex;

use thiserror::Error;

use crate::learners::LearnerError;
use crate::panel::{PanelError, TimeIndex};

pub use ledger::{select_continuous, select_discrete, update_ledger, PenaltyVariant, RiskLedger};
pub use probe::{ExcessGap, OracleProbe, TruthModel};
pub use schedule::{
    forecast_total, run_schedule, AlgorithmSliceRecord, AlgorithmSpec, BaseSliceRecord,
    DominanceRecord, ForecastReport, ForecastRow, ScheduleConfig, ScheduleOutput,
};
pub use simplex::{binomial, epsilon_net, SimplexWeights, SIMPLEX_SUM_TOLERANCE};

#[derive(Debug, Error)]
pub enum SuperLearnerError {
    #[error("non-sequential update: expected slice {expected:?}, got {got:?}")]
    NonSequentialUpdate { expected: TimeIndex, got: TimeIndex },
    #[error("prediction matrix dimensions do not match the ledger")]
    DimensionMismatch,
    #[error("unknown algorithm stream {0}")]
    UnknownStream(usize),
    #[error("ledger time {t} invalid: {committed} slices committed")]
    BadLedgerTime { t: usize, committed: usize },
    #[error("invalid simplex weights: {0}")]
    BadWeights(String),
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("empty epsilon-net")]
    EmptyNet,
    #[error("panel too short: need at least {need} slices, got {got}")]
    PanelTooShort { need: usize, got: usize },
    #[error("stage lengths must all be >= 1")]
    BadStages,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("oracle probe requires synthetic truth")]
    ProbeRequiresTruth,
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Panel(#[from] PanelError),
}
