//! Macroeconomic and market-level features.
//!
//! Level lookups take the nearest observation on or before the requested
//! date, and fail when that observation is older than the staleness bound.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{FeatureError, MacroData};
use crate::calendar::{add_months, DatedSeries};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroFeatures {
    pub gov_bond_return_1m: Option<f64>,
    pub usd_irr_rate: Option<f64>,
    pub usd_irr_return_1m: Option<f64>,
    pub equal_weight_index_return_1m: Option<f64>,
    pub market_index_value: Option<f64>,
    pub market_index_return_3m: Option<f64>,
    pub gold_usd_return_1m: Option<f64>,
}

impl MacroFeatures {
    pub const NAMES: &'static [&'static str] = &[
        "gov_bond_return_1m",
        "usd_irr_rate",
        "usd_irr_return_1m",
        "equal_weight_index_return_1m",
        "market_index_value",
        "market_index_return_3m",
        "gold_usd_return_1m",
    ];

    pub fn values(&self) -> Vec<Option<f64>> {
        vec![
            self.gov_bond_return_1m,
            self.usd_irr_rate,
            self.usd_irr_return_1m,
            self.equal_weight_index_return_1m,
            self.market_index_value,
            self.market_index_return_3m,
            self.gold_usd_return_1m,
        ]
    }
}

fn level(
    series: &DatedSeries,
    name: &'static str,
    date: NaiveDate,
    staleness_days: i64,
) -> Result<f64, FeatureError> {
    series
        .at_or_before_within(date, staleness_days)
        .map(|(_, v)| v)
        .ok_or(FeatureError::SeriesGapTooLarge {
            series: name,
            date,
        })
}

fn period_return(
    series: &DatedSeries,
    name: &'static str,
    as_of: NaiveDate,
    months: i32,
    staleness_days: i64,
) -> Result<Option<f64>, FeatureError> {
    let end = level(series, name, as_of, staleness_days)?;
    let start = level(series, name, add_months(as_of, -months), staleness_days)?;
    Ok((start != 0.0).then(|| end / start - 1.0))
}

pub fn compute_macro_features(
    data: &MacroData,
    as_of: NaiveDate,
    staleness_days: i64,
) -> Result<MacroFeatures, FeatureError> {
    let bond: Vec<f64> = data
        .gov_bond_return
        .window(add_months(as_of, -1), as_of)
        .map(|(_, r)| r)
        .collect();
    if bond.is_empty() {
        return Err(FeatureError::SeriesGapTooLarge {
            series: "gov_bond_return",
            date: as_of,
        });
    }
    let gov_bond_return_1m = bond.iter().sum::<f64>() / bond.len() as f64;
    Ok(MacroFeatures {
        gov_bond_return_1m: Some(gov_bond_return_1m),
        usd_irr_rate: Some(level(&data.usd_irr, "usd_irr", as_of, staleness_days)?),
        usd_irr_return_1m: period_return(&data.usd_irr, "usd_irr", as_of, 1, staleness_days)?,
        equal_weight_index_return_1m: period_return(
            &data.equal_weight_index,
            "equal_weight_index",
            as_of,
            1,
            staleness_days,
        )?,
        market_index_value: Some(level(&data.market_index, "market_index", as_of, staleness_days)?),
        market_index_return_3m: period_return(
            &data.market_index,
            "market_index",
            as_of,
            3,
            staleness_days,
        )?,
        gold_usd_return_1m: period_return(&data.gold_usd, "gold_usd", as_of, 1, staleness_days)?,
    })
}
