use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constraint labels of the joint energy-efficiency problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Total transmit power within the harvested budget.
    C1,
    /// WPT time inside the cycle.
    C2,
    /// Minimum rate of the SIC (cell-center) user.
    C3,
    /// Minimum rate of the cell-edge user.
    C4,
    /// UAV x-coordinate inside the box.
    C5,
    /// UAV y-coordinate inside the box.
    C6,
    /// Intra-pair coefficients sum to one.
    C7,
    /// Per-antenna transmit power cap.
    C8,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("pairing needs an even number of users, got {0}")]
    OddUserCount(usize),

    #[error("WPT time {tau} must be in [0, {cycle})")]
    InvalidWptTime { tau: f64, cycle: f64 },

    #[error("null space for {what} of pair {pair} is empty (rank deficient channels)")]
    RankDeficient { pair: usize, what: &'static str },

    #[error("empty strategy space [{lo}, {hi}]")]
    EmptyStrategySpace { lo: f64, hi: f64 },

    #[error("infeasible: constraint {constraint}{}: {detail}", pair.map(|p| format!(" at pair {p}")).unwrap_or_default())]
    Infeasible {
        constraint: Constraint,
        pair: Option<usize>,
        detail: String,
    },

    #[error("search grid has {points} evaluations, limit is {limit}")]
    GridTooLarge { points: u128, limit: u128 },
}

impl Error {
    pub(crate) fn infeasible(constraint: Constraint, pair: Option<usize>, detail: impl Into<String>) -> Self {
        Error::Infeasible {
            constraint,
            pair,
            detail: detail.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
