//! Labeling, chronological splitting and scaling of feature rows.

mod benchmark;
mod scaler;
mod split;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use benchmark::{
    apply_publication_lag, benchmark_return, fixed_income_growth, label_example, LabelOutcome,
};
pub use scaler::{fit_scaler, ColumnStats, DropReason, DroppedColumn, ScalerParams};
pub use split::{chronological_split, Split};

use crate::features::FeatureRow;

/// Prediction horizons the stack supports, in months.
pub const HORIZONS: [u8; 8] = [1, 2, 3, 4, 5, 6, 9, 12];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("yield to maturity {0} is not above -1")]
    DomainError(f64),
    #[error("{what} not available: price data ends {last:?}, needed {needed}")]
    HorizonBeyondData {
        what: &'static str,
        needed: NaiveDate,
        last: Option<NaiveDate>,
    },
    #[error("no fixed-income quote at or before {0}")]
    NoBenchmarkQuote(NaiveDate),
    #[error("empty input")]
    EmptyInput,
    #[error("train fraction {0} outside (0, 1)")]
    InvalidTrainFraction(f64),
    #[error("unsupported horizon {0} months")]
    InvalidHorizon(u32),
    #[error("row width {got} does not match {expected} columns")]
    WidthMismatch { expected: usize, got: usize },
}

/// Validated horizon in months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Horizon(u8);

impl Horizon {
    pub fn new(months: u32) -> Result<Self, DatasetError> {
        HORIZONS
            .iter()
            .find(|h| u32::from(**h) == months)
            .map(|h| Horizon(*h))
            .ok_or(DatasetError::InvalidHorizon(months))
    }

    pub fn months(self) -> u32 {
        u32::from(self.0)
    }

    pub fn all() -> impl Iterator<Item = Horizon> {
        HORIZONS.iter().map(|h| Horizon(*h))
    }
}

impl TryFrom<u32> for Horizon {
    type Error = DatasetError;
    fn try_from(v: u32) -> Result<Self, DatasetError> {
        Horizon::new(v)
    }
}

impl From<Horizon> for u32 {
    fn from(h: Horizon) -> u32 {
        h.months()
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Horizon {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        let v: u32 = s
            .trim()
            .parse()
            .map_err(|_| DatasetError::InvalidHorizon(0))?;
        Horizon::new(v)
    }
}

/// A feature row with its horizon outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub row: FeatureRow,
    pub horizon: Horizon,
    pub label: u8,
    pub realized_stock_return: f64,
    pub fi_benchmark_return: f64,
}

/// Anything with an as-of date can be split chronologically.
pub trait AsOf {
    fn as_of(&self) -> NaiveDate;
}

impl AsOf for FeatureRow {
    fn as_of(&self) -> NaiveDate {
        self.as_of
    }
}

impl AsOf for LabeledExample {
    fn as_of(&self) -> NaiveDate {
        self.row.as_of
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizons_are_validated() {
        assert!(Horizon::new(3).is_ok());
        assert!(Horizon::new(7).is_err());
        assert_eq!(Horizon::all().count(), 8);
        assert_eq!("12".parse::<Horizon>().unwrap().months(), 12);
    }
}
