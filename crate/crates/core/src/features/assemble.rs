//! Feature row layout and assembly.
//!
//! Column order: the 24 ratio columns, one-hot `industry=<code>` columns in
//! vocabulary order, one-hot `exchange=<code>` columns, `activity=production`,
//! `activity=other`, the 5 trading columns and the 7 macro columns.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::macro_env::{compute_macro_features, MacroFeatures};
use super::ratios::{compute_ratios, RatioSet};
use super::trading::{compute_trading_features, TradingFeatures};
use super::{
    ActivityType, FeatureConfig, FeatureError, MacroData, PriceHistory, StockProfile,
    StockSnapshot,
};
use crate::cleaner::StatementSeries;

/// Declared categorical codes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub industries: Vec<String>,
    pub exchanges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StockTypeFeatures {
    pub industry: String,
    pub market_exchange: String,
    pub activity_type: ActivityType,
}

impl From<&StockProfile> for StockTypeFeatures {
    fn from(p: &StockProfile) -> Self {
        Self {
            industry: p.industry.clone(),
            market_exchange: p.exchange.clone(),
            activity_type: p.activity_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<String>,
}

impl FeatureSchema {
    pub fn new(vocabulary: &Vocabulary) -> Self {
        let mut columns: Vec<String> = RatioSet::NAMES.iter().map(|s| s.to_string()).collect();
        columns.extend(vocabulary.industries.iter().map(|c| format!("industry={c}")));
        columns.extend(vocabulary.exchanges.iter().map(|c| format!("exchange={c}")));
        columns.extend(ActivityType::ALL.iter().map(|a| format!("activity={a}")));
        columns.extend(TradingFeatures::NAMES.iter().map(|s| s.to_string()));
        columns.extend(MacroFeatures::NAMES.iter().map(|s| s.to_string()));
        Self { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// One (symbol, as_of) feature vector; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub symbol: String,
    pub as_of: NaiveDate,
    pub values: Vec<Option<f64>>,
}

fn one_hot(
    codes: &[String],
    value: &str,
    field: &'static str,
) -> Result<Vec<Option<f64>>, FeatureError> {
    if !codes.iter().any(|c| c == value) {
        return Err(FeatureError::VocabularyViolation {
            field,
            code: value.to_string(),
        });
    }
    Ok(codes
        .iter()
        .map(|c| Some(if c == value { 1.0 } else { 0.0 }))
        .collect())
}

pub fn assemble_feature_vector(
    symbol: &str,
    as_of: NaiveDate,
    ratios: &RatioSet,
    stock_type: &StockTypeFeatures,
    trading: &TradingFeatures,
    macro_features: &MacroFeatures,
    vocabulary: &Vocabulary,
) -> Result<FeatureRow, FeatureError> {
    let mut values = ratios.values();
    values.extend(one_hot(&vocabulary.industries, &stock_type.industry, "industry")?);
    values.extend(one_hot(
        &vocabulary.exchanges,
        &stock_type.market_exchange,
        "exchange",
    )?);
    values.extend(
        ActivityType::ALL
            .iter()
            .map(|a| Some(if *a == stock_type.activity_type { 1.0 } else { 0.0 })),
    );
    values.extend(trading.values());
    values.extend(macro_features.values());
    Ok(FeatureRow {
        symbol: symbol.to_string(),
        as_of,
        values,
    })
}

/// Everything known about one stock.
#[derive(Debug, Clone)]
pub struct StockInputs {
    pub profile: StockProfile,
    pub history: PriceHistory,
    pub series: StatementSeries,
}

/// Computes feature rows from read-only inputs.
#[derive(Debug, Clone)]
pub struct FeatureBuilder {
    pub config: FeatureConfig,
    pub vocabulary: Vocabulary,
    pub macro_data: MacroData,
    stocks: HashMap<String, StockInputs>,
}

impl FeatureBuilder {
    pub fn new(config: FeatureConfig, vocabulary: Vocabulary, macro_data: MacroData) -> Self {
        Self {
            config,
            vocabulary,
            macro_data,
            stocks: HashMap::new(),
        }
    }

    pub fn add_stock(&mut self, inputs: StockInputs) {
        self.stocks.insert(inputs.profile.symbol.clone(), inputs);
    }

    pub fn stock(&self, symbol: &str) -> Option<&StockInputs> {
        self.stocks.get(symbol)
    }

    /// Symbols in ascending order.
    pub fn symbols(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self.stocks.keys().map(String::as_str).collect();
        s.sort_unstable();
        s
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(&self.vocabulary)
    }

    pub fn snapshot<'a>(
        &'a self,
        symbol: &'a str,
        as_of: NaiveDate,
    ) -> Result<StockSnapshot<'a>, FeatureError> {
        let s = self
            .stocks
            .get(symbol)
            .ok_or_else(|| FeatureError::UnknownSymbol(symbol.to_string()))?;
        StockSnapshot::at(symbol, as_of, &s.history, &s.series, self.config.lag_months)
    }

    /// Feature row for `symbol` at `as_of`. Trading and macro blocks that
    /// cannot be computed are carried as missing; a stock without visible
    /// reports or a price yields an error.
    pub fn build_row(&self, symbol: &str, as_of: NaiveDate) -> Result<FeatureRow, FeatureError> {
        let s = self
            .stocks
            .get(symbol)
            .ok_or_else(|| FeatureError::UnknownSymbol(symbol.to_string()))?;
        let snapshot = self.snapshot(symbol, as_of)?;
        let ratios = compute_ratios(
            &s.series,
            &snapshot,
            &self.macro_data.market_index,
            as_of,
            &self.config,
        )?;
        let trading = compute_trading_features(&s.history, as_of).unwrap_or_default();
        let macro_features =
            compute_macro_features(&self.macro_data, as_of, self.config.macro_staleness_days)
                .unwrap_or_else(|e| {
                    log::debug!("macro block missing at {as_of}: {e}");
                    MacroFeatures::default()
                });
        assemble_feature_vector(
            symbol,
            as_of,
            &ratios,
            &StockTypeFeatures::from(&s.profile),
            &trading,
            &macro_features,
            &self.vocabulary,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary {
            industries: vec!["auto".into(), "bank".into()],
            exchanges: vec!["main".into()],
        }
    }

    fn stock_type(industry: &str) -> StockTypeFeatures {
        StockTypeFeatures {
            industry: industry.into(),
            market_exchange: "main".into(),
            activity_type: ActivityType::Production,
        }
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap()
    }

    #[test]
    fn width_and_one_hot_blocks() {
        let ratios = RatioSet {
            debt_to_equity: Some(0.5),
            ..Default::default()
        };
        let row = assemble_feature_vector(
            "X",
            date(),
            &ratios,
            &stock_type("bank"),
            &TradingFeatures::default(),
            &MacroFeatures::default(),
            &vocab(),
        )
        .unwrap();
        let schema = FeatureSchema::new(&vocab());
        assert_eq!(row.values.len(), schema.width());
        assert_eq!(schema.width(), 24 + 2 + 1 + 2 + 5 + 7);
        assert_eq!(row.values[0], Some(0.5));
        // an unset ratio stays missing
        assert_eq!(row.values[1], None);
        let block = |lo: usize, n: usize| -> f64 { row.values[lo..lo + n].iter().map(|v| v.unwrap()).sum() };
        assert_eq!(block(24, 2), 1.0);
        assert_eq!(row.values[25], Some(1.0));
        assert_eq!(block(26, 1), 1.0);
        assert_eq!(block(27, 2), 1.0);
        assert_eq!(schema.columns[25], "industry=bank");
    }

    #[test]
    fn unknown_code() {
        let e = assemble_feature_vector(
            "X",
            date(),
            &RatioSet::default(),
            &stock_type("mining"),
            &TradingFeatures::default(),
            &MacroFeatures::default(),
            &vocab(),
        );
        assert!(matches!(e, Err(FeatureError::VocabularyViolation { field: "industry", .. })));
    }
}
