//! Point-in-time feature computation for (stock, as_of) pairs.

mod assemble;
mod beta;
mod macro_env;
mod market;
mod ratios;
mod trading;
mod ttm;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assemble::{
    assemble_feature_vector, FeatureBuilder, FeatureRow, FeatureSchema, StockInputs,
    StockTypeFeatures, Vocabulary,
};
pub use beta::{compute_beta, daily_returns, BetaDefinition, BetaError, DEFAULT_MIN_OBSERVATIONS};
pub use macro_env::{compute_macro_features, MacroFeatures};
pub use market::{ActivityType, DailyBar, MacroData, PriceHistory, StockProfile, StockSnapshot};
pub use ratios::{
    compute_ratios, safe_div, statement_ratios, year_ago, RatioSet, VisibleStatements,
    YEAR_AGO_TOLERANCE_DAYS,
};
pub use trading::{compute_trading_features, TradingFeatures};
pub use ttm::{ttm_aggregate, ttm_basis, TtmBasis, TtmValues};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("{symbol}: no report visible at {as_of}")]
    NoVisibleReports { symbol: String, as_of: NaiveDate },
    #[error("{symbol}: no price on or before {as_of}")]
    NoPrice { symbol: String, as_of: NaiveDate },
    #[error("{symbol}: market cap {market_cap} at {as_of} is not positive")]
    NonPositiveMarketCap {
        symbol: String,
        as_of: NaiveDate,
        market_cap: f64,
    },
    #[error("{symbol}: fewer than four contiguous quarters visible at {as_of}")]
    InsufficientHistory { symbol: String, as_of: NaiveDate },
    #[error("{field} code {code:?} is not in the vocabulary")]
    VocabularyViolation { field: &'static str, code: String },
    #[error("no trading day in the month ending {as_of}")]
    NoTradingDays { as_of: NaiveDate },
    #[error("{series} has no recent observation at {date}")]
    SeriesGapTooLarge { series: &'static str, date: NaiveDate },
    #[error(transparent)]
    Beta(#[from] BetaError),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Months between publication and first use of a report.
    pub lag_months: u32,
    pub beta: BetaDefinition,
    pub beta_min_observations: usize,
    /// Oldest acceptable macro observation, in days before the lookup date.
    pub macro_staleness_days: i64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lag_months: 1,
            beta: BetaDefinition::default(),
            beta_min_observations: DEFAULT_MIN_OBSERVATIONS,
            macro_staleness_days: 20,
        }
    }
}
