//! Market-side inputs: daily bars, stock profiles, macro series, snapshots.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::calendar::DatedSeries;
use crate::cleaner::{LineItem, StatementSeries};
use crate::store::StatementType;

/// One trading day of a stock, including the individual-investor flow split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    /// Close adjusted for capital increases and cash dividends.
    pub adj_close: f64,
    pub volume: f64,
    pub trades_value: f64,
    pub indiv_buy_value: f64,
    pub indiv_buy_count: f64,
    pub indiv_sell_value: f64,
    pub indiv_sell_count: f64,
}

/// Date-sorted daily history of one stock.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceHistory {
    bars: Vec<DailyBar>,
    adjusted: DatedSeries,
}

impl PriceHistory {
    pub fn new(mut bars: Vec<DailyBar>) -> Self {
        bars.sort_by_key(|b| b.date);
        bars.dedup_by_key(|b| b.date);
        let adjusted = bars.iter().map(|b| (b.date, b.adj_close)).collect();
        Self { bars, adjusted }
    }

    pub fn bars(&self) -> &[DailyBar] {
        &self.bars
    }

    pub fn adjusted_close(&self) -> &DatedSeries {
        &self.adjusted
    }

    /// Index of the first bar dated after `date`.
    pub fn upper_bound(&self, date: NaiveDate) -> usize {
        self.bars.partition_point(|b| b.date <= date)
    }

    /// Bars with `after < date <= until`, and the index of the first one.
    pub fn window(&self, after: NaiveDate, until: NaiveDate) -> (usize, &[DailyBar]) {
        let lo = self.upper_bound(after);
        let hi = self.upper_bound(until).max(lo);
        (lo, &self.bars[lo..hi])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityType {
    Production,
    Other,
}

impl ActivityType {
    pub const ALL: [ActivityType; 2] = [ActivityType::Production, ActivityType::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityType::Production => "production",
            ActivityType::Other => "other",
        }
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityType {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, FeatureError> {
        ActivityType::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| FeatureError::VocabularyViolation {
                field: "activity_type",
                code: s.to_string(),
            })
    }
}

/// Static stock classification (industry, exchange, activity type).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StockProfile {
    pub symbol: String,
    pub industry: String,
    pub exchange: String,
    pub activity_type: ActivityType,
}

/// Macro and market-level daily series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroData {
    /// Daily return of the government bond (fixed-income) index.
    pub gov_bond_return: DatedSeries,
    /// Annual yield to maturity of the fixed-income benchmark.
    pub fixed_income_ytm: DatedSeries,
    pub usd_irr: DatedSeries,
    pub equal_weight_index: DatedSeries,
    /// Market-cap weighted index level.
    pub market_index: DatedSeries,
    pub gold_usd: DatedSeries,
}

impl MacroData {
    /// Everything observed on or before `date`.
    pub fn truncated(&self, date: NaiveDate) -> Self {
        Self {
            gov_bond_return: self.gov_bond_return.truncated(date),
            fixed_income_ytm: self.fixed_income_ytm.truncated(date),
            usd_irr: self.usd_irr.truncated(date),
            equal_weight_index: self.equal_weight_index.truncated(date),
            market_index: self.market_index.truncated(date),
            gold_usd: self.gold_usd.truncated(date),
        }
    }

    /// Bond-fund price level compounded from the daily returns, starting at 1.
    pub fn bond_index(&self) -> DatedSeries {
        let mut level = 1.0;
        self.gov_bond_return
            .iter()
            .map(|(d, r)| {
                level *= 1.0 + r;
                (d, level)
            })
            .collect()
    }
}

/// Point-in-time view of one stock's price and size.
#[derive(Debug, Clone, Copy)]
pub struct StockSnapshot<'a> {
    pub symbol: &'a str,
    pub as_of: NaiveDate,
    /// Adjusted close of the last trading day on or before `as_of`.
    pub adjusted_close: f64,
    pub shares_outstanding: f64,
    pub market_cap: f64,
    pub history: &'a PriceHistory,
}

impl<'a> StockSnapshot<'a> {
    /// Build a snapshot from the price history and the latest visible
    /// balance sheet's share count.
    pub fn at(
        symbol: &'a str,
        as_of: NaiveDate,
        history: &'a PriceHistory,
        series: &StatementSeries,
        lag_months: u32,
    ) -> Result<Self, FeatureError> {
        let (_, price) = history
            .adjusted_close()
            .at_or_before(as_of)
            .ok_or_else(|| FeatureError::NoPrice {
                symbol: symbol.to_string(),
                as_of,
            })?;
        let shares = series
            .visible(StatementType::BalanceSheet, as_of, lag_months)
            .iter()
            .rev()
            .find_map(|r| r.get(LineItem::SharesOutstanding))
            .ok_or_else(|| FeatureError::NoVisibleReports {
                symbol: symbol.to_string(),
                as_of,
            })?;
        let market_cap = price * shares;
        if !(market_cap > 0.0) || !market_cap.is_finite() {
            return Err(FeatureError::NonPositiveMarketCap {
                symbol: symbol.to_string(),
                as_of,
                market_cap,
            });
        }
        Ok(Self {
            symbol,
            as_of,
            adjusted_close: price,
            shares_outstanding: shares,
            market_cap,
            history,
        })
    }
}
