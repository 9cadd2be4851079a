//! Financial ratio features.
//!
//! Each statement ratio reads the latest report of its statement type that is
//! visible at `as_of`. "Average X" is the mean of that report's value and the
//! value in the report for the same period one year earlier. Any ratio with a
//! missing input or a zero denominator is missing.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::beta::{compute_beta, daily_returns};
use super::ttm::ttm_aggregate;
use super::{FeatureConfig, FeatureError, StockSnapshot};
use crate::calendar::{add_days, add_months, DatedSeries};
use crate::cleaner::{CleanReport, LineItem, StatementSeries};
use crate::store::StatementType;

/// Max distance, in days, between a period end and "one year earlier".
pub const YEAR_AGO_TOLERANCE_DAYS: i64 = 20;

macro_rules! ratio_set {
    ($($field:ident),+ $(,)?) => {
        /// The ratio block of a feature row, in column order.
        #[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
        pub struct RatioSet {
            $(pub $field: Option<f64>),+
        }

        impl RatioSet {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),+];

            pub fn values(&self) -> Vec<Option<f64>> {
                vec![$(self.$field),+]
            }
        }
    };
}

ratio_set! {
    debt_to_equity,
    return_on_fixed_assets,
    debt_ratio,
    gross_profit_margin,
    current_ratio,
    net_income_margin,
    operating_profit_margin,
    interest_coverage,
    roe,
    cash_flow_to_income,
    quick_ratio,
    long_term_debt_ratio,
    roa,
    inventory_turnover,
    asset_turnover,
    cash_ratio,
    gross_profit_growth,
    revenue_growth,
    re_ta,
    pe_ttm,
    pe_ttm_median,
    ps_ttm,
    ps_ttm_median,
    beta_1y,
}

/// `num / den`, missing when either side is missing, the denominator is zero
/// or the result is not finite.
pub fn safe_div(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    let (n, d) = (num?, den?);
    if d == 0.0 {
        return None;
    }
    let q = n / d;
    q.is_finite().then_some(q)
}

fn mean2(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? + b?) / 2.0)
}

/// The report in `reports` covering the same period one year before `current`.
pub fn year_ago<'a>(reports: &[&'a CleanReport], current: &CleanReport) -> Option<&'a CleanReport> {
    let target = add_months(current.period_end, -12);
    let lo = add_days(target, -YEAR_AGO_TOLERANCE_DAYS);
    let hi = add_days(target, YEAR_AGO_TOLERANCE_DAYS);
    reports
        .iter()
        .filter(|r| r.period_end >= lo && r.period_end <= hi)
        .min_by_key(|r| (r.period_end - target).num_days().abs())
        .copied()
}

/// Latest visible report of each statement type plus its year-ago counterpart.
#[derive(Debug, Clone, Copy, Default)]
pub struct VisibleStatements<'a> {
    pub income: Option<&'a CleanReport>,
    pub income_year_ago: Option<&'a CleanReport>,
    pub balance: Option<&'a CleanReport>,
    pub balance_year_ago: Option<&'a CleanReport>,
    pub cash_flow: Option<&'a CleanReport>,
}

impl<'a> VisibleStatements<'a> {
    pub fn at(series: &'a StatementSeries, as_of: NaiveDate, lag_months: u32) -> Self {
        let pick = |st| {
            let vis = series.visible(st, as_of, lag_months);
            let cur = vis.last().copied();
            let ya = cur.and_then(|c| year_ago(&vis, c));
            (cur, ya)
        };
        let (income, income_year_ago) = pick(StatementType::IncomeStatement);
        let (balance, balance_year_ago) = pick(StatementType::BalanceSheet);
        let (cash_flow, _) = pick(StatementType::CashFlow);
        Self {
            income,
            income_year_ago,
            balance,
            balance_year_ago,
            cash_flow,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.income.is_none() && self.balance.is_none() && self.cash_flow.is_none()
    }
}

fn item(r: Option<&CleanReport>, i: LineItem) -> Option<f64> {
    r.and_then(|r| r.get(i))
}

/// The statement-only ratios (everything except the price-based ones and beta).
pub fn statement_ratios(v: &VisibleStatements<'_>) -> RatioSet {
    use LineItem::*;
    let inc = |i| item(v.income, i);
    let inc_ya = |i| item(v.income_year_ago, i);
    let bal = |i| item(v.balance, i);
    let avg = |i| mean2(bal(i), item(v.balance_year_ago, i));
    let cf = |i| item(v.cash_flow, i);

    let cash_total = match (bal(Cash), bal(CashEquivalents)) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    };
    let quick_num = match (bal(CurrentAssets), bal(Inventory)) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    RatioSet {
        debt_to_equity: safe_div(bal(TotalDebt), bal(TotalEquity)),
        return_on_fixed_assets: safe_div(inc(NetIncome), avg(FixedAssets)),
        debt_ratio: safe_div(bal(TotalDebt), bal(TotalAssets)),
        gross_profit_margin: safe_div(inc(GrossProfit), inc(Revenue)),
        current_ratio: safe_div(bal(CurrentAssets), bal(CurrentLiabilities)),
        net_income_margin: safe_div(inc(NetIncome), inc(Revenue)),
        operating_profit_margin: safe_div(inc(OperatingProfit), inc(Revenue)),
        interest_coverage: safe_div(inc(Ebit), inc(InterestExpense)),
        roe: safe_div(inc(NetIncome), avg(TotalEquity)),
        cash_flow_to_income: safe_div(cf(OperatingCashFlow), inc(NetIncome)),
        quick_ratio: safe_div(quick_num, bal(CurrentLiabilities)),
        long_term_debt_ratio: safe_div(bal(LongTermDebt), bal(TotalAssets)),
        roa: safe_div(inc(NetIncome), avg(TotalAssets)),
        inventory_turnover: safe_div(inc(Cogs), avg(Inventory)),
        asset_turnover: safe_div(inc(Revenue), avg(TotalAssets)),
        cash_ratio: safe_div(cash_total, bal(CurrentLiabilities)),
        gross_profit_growth: safe_div(inc(GrossProfit), inc_ya(GrossProfit)).map(|g| g - 1.0),
        revenue_growth: safe_div(inc(Revenue), inc_ya(Revenue)).map(|g| g - 1.0),
        re_ta: safe_div(bal(RetainedEarnings), bal(TotalAssets)),
        ..RatioSet::default()
    }
}

/// All ratio features for one stock at `as_of`.
pub fn compute_ratios(
    series: &StatementSeries,
    snapshot: &StockSnapshot<'_>,
    market_index: &DatedSeries,
    as_of: NaiveDate,
    config: &FeatureConfig,
) -> Result<RatioSet, FeatureError> {
    let visible = VisibleStatements::at(series, as_of, config.lag_months);
    if visible.is_empty() {
        return Err(FeatureError::NoVisibleReports {
            symbol: series.symbol.clone(),
            as_of,
        });
    }
    let mut set = statement_ratios(&visible);

    if let Ok(ttm) = ttm_aggregate(series, snapshot, as_of, config.lag_months) {
        set.pe_ttm = ttm.pe_ttm;
        set.ps_ttm = ttm.ps_ttm;
        set.pe_ttm_median = ttm.pe_ttm_median;
        set.ps_ttm_median = ttm.ps_ttm_median;
    }

    let window_start = add_months(as_of, -12);
    let stock = daily_returns(snapshot.history.adjusted_close(), window_start, as_of);
    let market = daily_returns(market_index, window_start, as_of);
    set.beta_1y = compute_beta(&stock, &market, config.beta, config.beta_min_observations).ok();
    Ok(set)
}
