//! Trading features over the trailing calendar month `(as_of - 1 month, as_of]`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{FeatureError, PriceHistory};
use crate::calendar::add_months;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TradingFeatures {
    pub avg_price_volatility: Option<f64>,
    pub avg_daily_return: Option<f64>,
    pub avg_trades_value: Option<f64>,
    pub bs_power_ratio: Option<f64>,
    pub ownership_change: Option<f64>,
}

impl TradingFeatures {
    pub const NAMES: &'static [&'static str] = &[
        "avg_price_volatility",
        "avg_daily_return",
        "avg_trades_value",
        "bs_power_ratio",
        "ownership_change",
    ];

    pub fn values(&self) -> Vec<Option<f64>> {
        vec![
            self.avg_price_volatility,
            self.avg_daily_return,
            self.avg_trades_value,
            self.bs_power_ratio,
            self.ownership_change,
        ]
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Means of the daily quantities over the trailing month. Days whose
/// quantity is undefined (zero low, zero trade count, no previous close) are
/// skipped for that quantity only.
pub fn compute_trading_features(
    history: &PriceHistory,
    as_of: NaiveDate,
) -> Result<TradingFeatures, FeatureError> {
    let (first, window) = history.window(add_months(as_of, -1), as_of);
    if window.is_empty() {
        return Err(FeatureError::NoTradingDays { as_of });
    }
    let bars = history.bars();
    let volatility = mean(window.iter().filter(|b| b.low > 0.0).map(|b| b.high / b.low));
    let daily_return = mean(window.iter().enumerate().filter_map(|(i, b)| {
        let prev = bars.get((first + i).checked_sub(1)?)?;
        (prev.adj_close > 0.0).then(|| b.adj_close / prev.adj_close - 1.0)
    }));
    let trades_value = mean(window.iter().map(|b| b.trades_value));
    let power = mean(window.iter().filter_map(|b| {
        if b.indiv_buy_count > 0.0 && b.indiv_sell_count > 0.0 && b.indiv_sell_value > 0.0 {
            let buyer = b.indiv_buy_value / b.indiv_buy_count;
            let seller = b.indiv_sell_value / b.indiv_sell_count;
            Some(buyer / seller)
        } else {
            None
        }
    }));
    let ownership = mean(window.iter().map(|b| b.indiv_buy_value - b.indiv_sell_value));
    Ok(TradingFeatures {
        avg_price_volatility: volatility,
        avg_daily_return: daily_return,
        avg_trades_value: trades_value,
        bs_power_ratio: power,
        ownership_change: ownership,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DailyBar;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, m, day).unwrap()
    }

    fn bar(date: NaiveDate, high: f64, low: f64, close: f64) -> DailyBar {
        DailyBar {
            date,
            open: close,
            high,
            low,
            close,
            adj_close: close,
            volume: 10.0,
            trades_value: 1000.0,
            indiv_buy_value: 100.0,
            indiv_buy_count: 10.0,
            indiv_sell_value: 100.0,
            indiv_sell_count: 20.0,
        }
    }

    #[test]
    fn volatility_is_mean_high_low() {
        let h = PriceHistory::new(vec![bar(d(3, 1), 102.0, 100.0, 101.0), bar(d(3, 2), 104.0, 100.0, 102.0)]);
        let t = compute_trading_features(&h, d(3, 2)).unwrap();
        assert!((t.avg_price_volatility.unwrap() - 1.03).abs() < 1e-12);
    }

    #[test]
    fn buyer_over_seller_power() {
        let h = PriceHistory::new(vec![bar(d(3, 1), 1.0, 1.0, 1.0)]);
        let t = compute_trading_features(&h, d(3, 1)).unwrap();
        assert_eq!(t.bs_power_ratio, Some(2.0));
        assert_eq!(t.ownership_change, Some(0.0));
        // the only bar has no predecessor
        assert_eq!(t.avg_daily_return, None);
    }

    #[test]
    fn return_uses_bar_before_window() {
        let h = PriceHistory::new(vec![bar(d(1, 15), 1.0, 1.0, 100.0), bar(d(3, 1), 1.0, 1.0, 110.0)]);
        let t = compute_trading_features(&h, d(3, 1)).unwrap();
        assert!((t.avg_daily_return.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn future_bars_are_ignored() {
        let base = vec![bar(d(3, 1), 102.0, 100.0, 101.0)];
        let mut extended = base.clone();
        extended.push(bar(d(3, 2), 200.0, 100.0, 150.0));
        let a = compute_trading_features(&PriceHistory::new(base), d(3, 1)).unwrap();
        let b = compute_trading_features(&PriceHistory::new(extended), d(3, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_month() {
        let h = PriceHistory::new(vec![bar(d(1, 1), 1.0, 1.0, 1.0)]);
        assert!(matches!(
            compute_trading_features(&h, d(3, 1)),
            Err(FeatureError::NoTradingDays { .. })
        ));
    }
}
