//! Quarterly-rebalanced three-asset backtest.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    choose_scenario, real_return, AssetWeights, BacktestError, Scenario, StrategyConfig,
};
use crate::calendar::{month_grid, DatedSeries};

/// Asset order used by every `[f64; 3]` in this module.
pub const ASSETS: [&str; 3] = ["gold", "bond", "stock"];

/// Price levels of the three legs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssetSeries {
    pub gold: DatedSeries,
    pub bond: DatedSeries,
    /// Market-cap weighted index standing in for a market ETF.
    pub stock: DatedSeries,
}

impl AssetSeries {
    /// Nearest prior price of each leg.
    pub fn prices_at(&self, date: NaiveDate) -> Result<[f64; 3], BacktestError> {
        let mut out = [0.0; 3];
        for (i, s) in [&self.gold, &self.bond, &self.stock].into_iter().enumerate() {
            let (_, p) = s.at_or_before(date).ok_or(BacktestError::MissingPrice {
                asset: ASSETS[i],
                date,
            })?;
            if !(p > 0.0) || !p.is_finite() {
                return Err(BacktestError::NonPositivePrice {
                    asset: ASSETS[i],
                    date,
                    price: p,
                });
            }
            out[i] = p;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub date: NaiveDate,
    /// Value held in each leg.
    pub values: [f64; 3],
    /// Prices at which `values` were last marked.
    pub prices: [f64; 3],
}

impl PortfolioState {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mark holdings to new prices.
    pub fn revalue(&self, date: NaiveDate, prices: [f64; 3]) -> Result<Self, BacktestError> {
        check_prices(date, &prices)?;
        let mut values = self.values;
        for i in 0..3 {
            values[i] *= prices[i] / self.prices[i];
        }
        Ok(Self { date, values, prices })
    }
}

fn check_prices(date: NaiveDate, prices: &[f64; 3]) -> Result<(), BacktestError> {
    for (i, &p) in prices.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            return Err(BacktestError::NonPositivePrice {
                asset: ASSETS[i],
                date,
                price: p,
            });
        }
    }
    Ok(())
}

/// Mark to `prices`, then set each leg to `weight * total`.
pub fn rebalance(
    state: &PortfolioState,
    weights: &AssetWeights,
    prices: [f64; 3],
    date: NaiveDate,
) -> Result<PortfolioState, BacktestError> {
    weights.validate()?;
    let marked = state.revalue(date, prices)?;
    let total = marked.total();
    if !(total > 0.0) {
        return Err(BacktestError::NonPositiveValue);
    }
    let w = weights.as_array();
    Ok(PortfolioState {
        date,
        values: [w[0] * total, w[1] * total, w[2] * total],
        prices,
    })
}

/// Compounded monthly inflation over rates dated in `[start, end)`.
pub fn inflation_over(monthly: &DatedSeries, start: NaiveDate, end: NaiveDate) -> f64 {
    monthly
        .iter()
        .filter(|(d, _)| *d >= start && *d < end)
        .fold(1.0, |g, (_, r)| g * (1.0 + r))
        - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub p_market: Option<f64>,
    /// `None` for fixed-weight runs.
    pub scenario: Option<Scenario>,
    pub weights: AssetWeights,
    pub gold_return: f64,
    pub bond_return: f64,
    pub stock_return: f64,
    pub nominal_return: f64,
    pub inflation: f64,
    pub real_return: f64,
    pub cumulative_nominal: f64,
    pub cumulative_real: f64,
    pub end_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub rows: Vec<PeriodRow>,
    /// Periods whose forecast was missing; the previous weights were held.
    pub missing_forecasts: Vec<NaiveDate>,
}

impl StrategyReport {
    pub fn period_returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.nominal_return).collect()
    }

    pub fn cumulative_nominal(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_nominal)
    }

    pub fn cumulative_real(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_real)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "start,end,p_market,scenario,w_gold,w_bond,w_stock,gold_return,bond_return,stock_return,\
             nominal_return,inflation,real_return,cumulative_nominal,cumulative_real,end_value\n",
        );
        for r in &self.rows {
            let p = r.p_market.map(|p| p.to_string()).unwrap_or_default();
            let s = r.scenario.map(|s| s.number().to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{p},{s},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.start,
                r.end,
                r.weights.gold,
                r.weights.bond,
                r.weights.stock,
                r.gold_return,
                r.bond_return,
                r.stock_return,
                r.nominal_return,
                r.inflation,
                r.real_return,
                r.cumulative_nominal,
                r.cumulative_real,
                r.end_value
            );
        }
        out
    }

    /// Named x/y series for plotting, dated at each period end.
    pub fn plot_series(&self) -> BTreeMap<&'static str, Vec<(NaiveDate, f64)>> {
        let mut m = BTreeMap::new();
        let col = |f: fn(&PeriodRow) -> f64| self.rows.iter().map(|r| (r.end, f(r))).collect();
        m.insert("period_nominal_return", col(|r| r.nominal_return));
        m.insert("period_real_return", col(|r| r.real_return));
        m.insert("cumulative_nominal_return", col(|r| r.cumulative_nominal));
        m.insert("cumulative_real_return", col(|r| r.cumulative_real));
        m
    }
}

fn simulate(
    dates: &[NaiveDate],
    prices: &AssetSeries,
    inflation: &DatedSeries,
    initial_value: f64,
    mut policy: impl FnMut(NaiveDate, Option<&PeriodRow>) -> (Option<f64>, Option<Scenario>, AssetWeights),
) -> Result<Vec<PeriodRow>, BacktestError> {
    let mut rows: Vec<PeriodRow> = Vec::new();
    let first_prices = prices.prices_at(dates[0])?;
    let mut state = PortfolioState {
        date: dates[0],
        values: [initial_value / 3.0; 3],
        prices: first_prices,
    };
    let (mut growth_nominal, mut growth_real) = (1.0, 1.0);
    for w in dates.windows(2) {
        let (start, end) = (w[0], w[1]);
        let (p_market, scenario, weights) = policy(start, rows.last());
        let start_prices = prices.prices_at(start)?;
        let held = rebalance(&state, &weights, start_prices, start)?;
        let start_value = held.total();
        let end_prices = prices.prices_at(end)?;
        let marked = held.revalue(end, end_prices)?;
        let nominal = marked.total() / start_value - 1.0;
        let infl = inflation_over(inflation, start, end);
        let real = real_return(nominal, infl)?;
        growth_nominal *= 1.0 + nominal;
        growth_real *= 1.0 + real;
        let leg = |i: usize| end_prices[i] / start_prices[i] - 1.0;
        rows.push(PeriodRow {
            start,
            end,
            p_market,
            scenario,
            weights,
            gold_return: leg(0),
            bond_return: leg(1),
            stock_return: leg(2),
            nominal_return: nominal,
            inflation: infl,
            real_return: real,
            cumulative_nominal: growth_nominal - 1.0,
            cumulative_real: growth_real - 1.0,
            end_value: marked.total(),
        });
        state = marked;
    }
    Ok(rows)
}

fn rebalance_dates(
    config: &StrategyConfig,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<Vec<NaiveDate>, BacktestError> {
    config.validate()?;
    let dates = month_grid(from, to, config.rebalance_months.max(1));
    if dates.len() < 2 {
        return Err(BacktestError::EmptyPeriod { from, to });
    }
    Ok(dates)
}

/// At each rebalance date read `P(market)`, choose the scenario and
/// rebalance; holdings drift with prices until the next date. A missing
/// forecast holds the previous period's weights (the defensive weights in
/// the first period).
pub fn run_backtest(
    forecasts: &BTreeMap<NaiveDate, f64>,
    prices: &AssetSeries,
    inflation: &DatedSeries,
    config: &StrategyConfig,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<StrategyReport, BacktestError> {
    let dates = rebalance_dates(config, from, to)?;
    let mut missing = Vec::new();
    let rows = simulate(&dates, prices, inflation, config.initial_value, |date, prev| {
        match forecasts.get(&date) {
            Some(&p) => {
                let s = choose_scenario(p, config);
                (Some(p), Some(s), config.weights(s))
            }
            None => {
                log::warn!("no market forecast at {date}; holding prior weights");
                missing.push(date);
                match prev {
                    Some(r) => (None, r.scenario, r.weights),
                    None => (None, Some(Scenario::Defensive), config.defensive_weights),
                }
            }
        }
    })?;
    Ok(StrategyReport {
        rows,
        missing_forecasts: missing,
    })
}

/// Constant weights, rebalanced on the same schedule.
pub fn run_fixed_weights(
    weights: AssetWeights,
    prices: &AssetSeries,
    inflation: &DatedSeries,
    config: &StrategyConfig,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<StrategyReport, BacktestError> {
    let dates = rebalance_dates(config, from, to)?;
    let rows = simulate(&dates, prices, inflation, config.initial_value, |_, _| {
        (None, None, weights)
    })?;
    Ok(StrategyReport {
        rows,
        missing_forecasts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, 1).unwrap()
    }

    fn flat() -> AssetSeries {
        let s = DatedSeries::from_points([(d(2020, 1), 1.0)]);
        AssetSeries {
            gold: s.clone(),
            bond: s.clone(),
            stock: s,
        }
    }

    #[test]
    fn rebalance_applies_weights() {
        let c = StrategyConfig::default();
        let state = PortfolioState {
            date: d(2020, 1),
            values: [500.0, 250.0, 250.0],
            prices: [1.0; 3],
        };
        let g = rebalance(&state, &c.growth_weights, [1.0; 3], d(2020, 1)).unwrap();
        assert_eq!(g.values, [200.0, 100.0, 700.0]);
        let s2 = rebalance(&state, &c.defensive_weights, [1.0; 3], d(2020, 1)).unwrap();
        assert_eq!(s2.values, [200.0, 700.0, 100.0]);
        let again = rebalance(&g, &c.growth_weights, [1.0; 3], d(2020, 1)).unwrap();
        assert_eq!(again, g);
        assert!(matches!(
            rebalance(&state, &c.growth_weights, [1.0, 0.0, 1.0], d(2020, 1)),
            Err(BacktestError::NonPositivePrice { asset: "bond", .. })
        ));
    }

    #[test]
    fn stock_doubling_under_growth_scenario() {
        let mut prices = flat();
        prices.stock = DatedSeries::from_points([(d(2020, 1), 1.0), (d(2020, 4), 2.0)]);
        let forecasts = BTreeMap::from([(d(2020, 1), 1.0)]);
        let r = run_backtest(
            &forecasts,
            &prices,
            &DatedSeries::new(),
            &StrategyConfig::default(),
            d(2020, 1),
            d(2020, 4),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!((r.rows[0].nominal_return - 0.70).abs() < 1e-12);
    }

    #[test]
    fn flat_prices_give_zero_returns() {
        let forecasts = BTreeMap::from([(d(2020, 1), 0.2), (d(2020, 4), 0.9)]);
        let r = run_backtest(
            &forecasts,
            &flat(),
            &DatedSeries::new(),
            &StrategyConfig::default(),
            d(2020, 1),
            d(2020, 10),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows.iter().all(|row| row.nominal_return == 0.0));
        assert_eq!(r.cumulative_nominal(), 0.0);
        // the third period has no forecast and keeps the growth weights
        assert_eq!(r.missing_forecasts, vec![d(2020, 7)]);
        assert_eq!(r.rows[2].scenario, Some(Scenario::Growth));
    }

    #[test]
    fn inflation_is_compounded_per_period() {
        let infl = DatedSeries::from_points([(d(2020, 1), 0.01), (d(2020, 2), 0.01), (d(2020, 3), 0.01), (d(2020, 4), 0.5)]);
        let r = run_fixed_weights(
            AssetWeights::new(0.0, 0.0, 1.0).unwrap(),
            &flat(),
            &infl,
            &StrategyConfig::default(),
            d(2020, 1),
            d(2020, 4),
        )
        .unwrap();
        let i = 1.01f64.powi(3) - 1.0;
        assert!((r.rows[0].inflation - i).abs() < 1e-15);
        assert!((r.rows[0].real_return - (1.0 / (1.0 + i) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn csv_has_one_line_per_period() {
        let r = run_fixed_weights(
            AssetWeights::new(0.2, 0.1, 0.7).unwrap(),
            &flat(),
            &DatedSeries::new(),
            &StrategyConfig::default(),
            d(2020, 1),
            d(2021, 1),
        )
        .unwrap();
        assert_eq!(r.to_csv().lines().count(), 5);
        assert_eq!(r.plot_series()["cumulative_nominal_return"].len(), 4);
    }
}
