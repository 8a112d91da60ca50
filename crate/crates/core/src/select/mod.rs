//! Rolling-origin cross-validation, forecast metrics and the candidate search.

mod cv;
mod leaderboard;
mod metrics;
mod search;

pub use cv::{make_rolling_splits, Fold, RollingCVPlan, MIN_TRAIN_ROWS};
pub use leaderboard::{Leaderboard, LeaderboardEntry, StopReason};
pub use metrics::{accuracy, mape, nrmse, rmse, Accuracy, MapeScore};
pub use search::{
    default_grid, evaluate_candidate, search, search_with, select_best_per_station, CandidateScore, CandidateSpec, Clock,
    FixedClock, SearchBudget, Selection, SystemClock, TrainingData,
};

use crate::trees::TreeError;

#[derive(Debug, thiserror::Error)]
pub enum SelectError {
    #[error("series has {n} rows, the plan needs at least {required}")]
    SeriesTooShort { n: usize, required: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("plan was built for {plan} rows, data has {rows}")]
    PlanMismatch { plan: usize, rows: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("nrmse undefined: actuals are constant zero")]
    DegenerateTarget,
    #[error("mape undefined: every actual is zero")]
    AllActualsZero,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("candidate grid is empty")]
    NoCandidates,
    #[error("leaderboard for station `{0}` is empty")]
    EmptyLeaderboard(String),
    #[error("fold {fold}: {source}")]
    Fit {
        fold: usize,
        #[source]
        source: TreeError,
    },
    #[error("fold {fold}: {source}")]
    Score {
        fold: usize,
        #[source]
        source: Box<SelectError>,
    },
}
