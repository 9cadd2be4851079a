use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DatasetError, Horizon};
use crate::calendar::{add_months, DatedSeries};

/// Earliest date a report published on `publish_date` may influence a
/// prediction: the publish date shifted forward by `lag_months` calendar
/// months, clamped to month end.
pub fn apply_publication_lag(publish_date: NaiveDate, lag_months: u32) -> NaiveDate {
    add_months(publish_date, lag_months as i32)
}

/// Monthly growth factor `(1 + ytm)^(1/12)` of a fixed-income position.
pub fn fixed_income_growth(ytm: f64) -> Result<f64, DatasetError> {
    if !(ytm > -1.0) || !ytm.is_finite() {
        return Err(DatasetError::DomainError(ytm));
    }
    Ok((1.0 + ytm).powf(1.0 / 12.0))
}

/// Benchmark return over `horizon`: `factor^h - 1`.
pub fn benchmark_return(ytm: f64, horizon: Horizon) -> Result<f64, DatasetError> {
    Ok(fixed_income_growth(ytm)?.powi(horizon.months() as i32) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub label: u8,
    pub realized_stock_return: f64,
    pub fi_benchmark_return: f64,
    pub entry_date: NaiveDate,
    pub exit_date: NaiveDate,
}

/// Label one (stock, as_of, horizon): 1 iff the adjusted-price return strictly
/// beats the fixed-income return compounded from the YTM quoted at `as_of`.
/// Prices are taken at the nearest trading day on or before each date.
pub fn label_example(
    adjusted_close: &DatedSeries,
    as_of: NaiveDate,
    horizon: Horizon,
    ytm_curve: &DatedSeries,
) -> Result<LabelOutcome, DatasetError> {
    let target = add_months(as_of, horizon.months() as i32);
    let last = adjusted_close.last_date();
    if last.is_none_or(|l| l < target) {
        return Err(DatasetError::HorizonBeyondData {
            what: "exit price",
            needed: target,
            last,
        });
    }
    let (entry_date, entry) =
        adjusted_close
            .at_or_before(as_of)
            .ok_or(DatasetError::HorizonBeyondData {
                what: "entry price",
                needed: as_of,
                last,
            })?;
    let (exit_date, exit) = adjusted_close
        .at_or_before(target)
        .expect("series reaches the target date");
    let (_, ytm) = ytm_curve
        .at_or_before(as_of)
        .ok_or(DatasetError::NoBenchmarkQuote(as_of))?;
    let realized = exit / entry - 1.0;
    let bench = benchmark_return(ytm, horizon)?;
    Ok(LabelOutcome {
        label: u8::from(realized > bench),
        realized_stock_return: realized,
        fi_benchmark_return: bench,
        entry_date,
        exit_date,
    })
}
