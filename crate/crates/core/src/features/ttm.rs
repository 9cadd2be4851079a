//! Trailing-twelve-month valuation ratios.
//!
//! The TTM basis at a date is the sum of the four most recent visible
//! quarterly income statements, provided they form one contiguous year
//! (newest and oldest period ends at most nine months plus
//! [`YEAR_AGO_TOLERANCE_DAYS`] apart), with the share count of the latest
//! visible balance sheet.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ratios::{safe_div, YEAR_AGO_TOLERANCE_DAYS};
use super::{FeatureError, StockSnapshot};
use crate::calendar::{add_days, add_months};
use crate::cleaner::{LineItem, StatementSeries};
use crate::dataset::apply_publication_lag;
use crate::store::StatementType;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TtmValues {
    pub eps_ttm: Option<f64>,
    pub revenue_per_share_ttm: Option<f64>,
    pub pe_ttm: Option<f64>,
    pub ps_ttm: Option<f64>,
    pub pe_ttm_median: Option<f64>,
    pub ps_ttm_median: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtmBasis {
    pub net_income: f64,
    pub revenue: f64,
    pub shares: f64,
}

impl TtmBasis {
    pub fn eps(&self) -> Option<f64> {
        safe_div(Some(self.net_income), Some(self.shares))
    }

    pub fn revenue_per_share(&self) -> Option<f64> {
        safe_div(Some(self.revenue), Some(self.shares))
    }
}

/// Sum of the latest four visible quarters at `date`, or `None` when fewer
/// than four contiguous quarters (or no share count) are visible.
pub fn ttm_basis(series: &StatementSeries, date: NaiveDate, lag_months: u32) -> Option<TtmBasis> {
    let income = series.visible(StatementType::IncomeStatement, date, lag_months);
    if income.len() < 4 {
        return None;
    }
    let last4 = &income[income.len() - 4..];
    let span_limit = add_days(add_months(last4[0].period_end, 9), YEAR_AGO_TOLERANCE_DAYS);
    if last4[3].period_end > span_limit {
        return None;
    }
    let mut net_income = 0.0;
    let mut revenue = 0.0;
    for r in last4 {
        net_income += r.get(LineItem::NetIncome)?;
        revenue += r.get(LineItem::Revenue)?;
    }
    let shares = series
        .visible(StatementType::BalanceSheet, date, lag_months)
        .iter()
        .rev()
        .find_map(|r| r.get(LineItem::SharesOutstanding))?;
    Some(TtmBasis {
        net_income,
        revenue,
        shares,
    })
}

/// Dates at which the visible report set can change.
fn visibility_changes(series: &StatementSeries, lag_months: u32) -> Vec<NaiveDate> {
    let mut dates: Vec<NaiveDate> = [StatementType::IncomeStatement, StatementType::BalanceSheet]
        .into_iter()
        .flat_map(|st| {
            series
                .reports(st)
                .iter()
                .chain(series.superseded.get(&st).into_iter().flatten())
        })
        .map(|r| apply_publication_lag(r.publish_date, lag_months))
        .collect();
    dates.sort();
    dates.dedup();
    dates
}

fn median_of(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// TTM EPS, revenue per share, P/E, P/S and the medians of the daily P/E and
/// P/S over the trailing twelve months. Each day's ratio uses that day's
/// adjusted close against the basis visible on that day.
pub fn ttm_aggregate(
    series: &StatementSeries,
    snapshot: &StockSnapshot<'_>,
    as_of: NaiveDate,
    lag_months: u32,
) -> Result<TtmValues, FeatureError> {
    let basis = ttm_basis(series, as_of, lag_months).ok_or_else(|| {
        FeatureError::InsufficientHistory {
            symbol: series.symbol.clone(),
            as_of,
        }
    })?;
    let eps = basis.eps();
    let rps = basis.revenue_per_share();
    let price = Some(snapshot.adjusted_close);

    let changes = visibility_changes(series, lag_months);
    let (_, window) = snapshot.history.window(add_months(as_of, -12), as_of);
    let mut pe_daily = Vec::with_capacity(window.len());
    let mut ps_daily = Vec::with_capacity(window.len());
    let mut cached: Option<(usize, Option<TtmBasis>)> = None;
    for bar in window {
        // number of change points on or before this day identifies the basis
        let k = changes.partition_point(|c| *c <= bar.date);
        let day_basis = match cached {
            Some((ck, b)) if ck == k => b,
            _ => {
                let b = ttm_basis(series, bar.date, lag_months);
                cached = Some((k, b));
                b
            }
        };
        if let Some(b) = day_basis {
            if let Some(v) = safe_div(Some(bar.adj_close), b.eps()) {
                pe_daily.push(v);
            }
            if let Some(v) = safe_div(Some(bar.adj_close), b.revenue_per_share()) {
                ps_daily.push(v);
            }
        }
    }
    Ok(TtmValues {
        eps_ttm: eps,
        revenue_per_share_ttm: rps,
        pe_ttm: safe_div(price, eps),
        ps_ttm: safe_div(price, rps),
        pe_ttm_median: median_of(pe_daily),
        ps_ttm_median: median_of(ps_daily),
    })
}
