//! Market-level probability as the cap-weighted mean of per-stock
//! probabilities.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Horizon;

/// Predicted-cap share below which a forecast is flagged.
pub const LOW_COVERAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OutlookError {
    #[error("no stock in the universe has a prediction")]
    EmptyUniverse,
    #[error("{symbol}: market cap {cap} is not positive")]
    NonPositiveCap { symbol: String, cap: f64 },
    #[error("{symbol}: probability {p} outside [0, 1]")]
    InvalidProbability { symbol: String, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub symbol: String,
    pub as_of: NaiveDate,
    pub horizon: Horizon,
    pub probability: f64,
}

/// One stock of the universe at the forecast date; `probability` is `None`
/// when the stock has no prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseMember {
    pub symbol: String,
    pub market_cap: f64,
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketForecast {
    pub as_of: NaiveDate,
    pub horizon: Horizon,
    pub p_market: f64,
    /// Stocks contributing to `p_market`.
    pub n_stocks: usize,
    /// Cap of the contributing stocks.
    pub total_market_cap: f64,
    /// Contributing cap over the cap of the whole universe.
    pub coverage: f64,
    pub low_confidence: bool,
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

pub fn market_probability(
    as_of: NaiveDate,
    horizon: Horizon,
    universe: &[UniverseMember],
) -> Result<MarketForecast, OutlookError> {
    let mut all_cap = NeumaierSum::default();
    let mut cap = NeumaierSum::default();
    let mut weighted = NeumaierSum::default();
    let mut n = 0usize;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in universe {
        if !(m.market_cap > 0.0) || !m.market_cap.is_finite() {
            return Err(OutlookError::NonPositiveCap {
                symbol: m.symbol.clone(),
                cap: m.market_cap,
            });
        }
        all_cap.add(m.market_cap);
        let Some(p) = m.probability else { continue };
        if !(0.0..=1.0).contains(&p) {
            return Err(OutlookError::InvalidProbability {
                symbol: m.symbol.clone(),
                p,
            });
        }
        cap.add(m.market_cap);
        weighted.add(p * m.market_cap);
        lo = lo.min(p);
        hi = hi.max(p);
        n += 1;
    }
    if n == 0 {
        return Err(OutlookError::EmptyUniverse);
    }
    let total = cap.value();
    // rounding can push a convex combination a hair outside its hull
    let p_market = (weighted.value() / total).clamp(lo, hi);
    let coverage = total / all_cap.value();
    Ok(MarketForecast {
        as_of,
        horizon,
        p_market,
        n_stocks: n,
        total_market_cap: total,
        coverage,
        low_confidence: coverage < LOW_COVERAGE,
    })
}

pub fn forecasts_csv(forecasts: &[MarketForecast]) -> String {
    let mut out = String::from("date,horizon,p_market,n_stocks,total_market_cap,coverage,low_confidence\n");
    for f in forecasts {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f.as_of, f.horizon, f.p_market, f.n_stocks, f.total_market_cap, f.coverage, f.low_confidence
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(symbol: &str, cap: f64, p: Option<f64>) -> UniverseMember {
        UniverseMember {
            symbol: symbol.into(),
            market_cap: cap,
            probability: p,
        }
    }

    fn run(u: &[UniverseMember]) -> Result<MarketForecast, OutlookError> {
        market_probability(
            NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
            Horizon::new(3).unwrap(),
            u,
        )
    }

    #[test]
    fn weighted_means() {
        assert_eq!(run(&[member("a", 1.0, Some(0.4)), member("b", 1.0, Some(0.6))]).unwrap().p_market, 0.5);
        assert_eq!(run(&[member("a", 1.0, Some(1.0)), member("b", 3.0, Some(0.0))]).unwrap().p_market, 0.25);
        assert_eq!(run(&[member("a", 7.0, Some(0.73))]).unwrap().p_market, 0.73);
    }

    #[test]
    fn coverage_and_errors() {
        let f = run(&[member("a", 1.0, Some(0.9)), member("b", 3.0, None)]).unwrap();
        assert_eq!(f.n_stocks, 1);
        assert_eq!(f.coverage, 0.25);
        assert!(f.low_confidence);
        assert_eq!(run(&[member("a", 1.0, None)]), Err(OutlookError::EmptyUniverse));
        assert_eq!(run(&[]), Err(OutlookError::EmptyUniverse));
        assert!(matches!(
            run(&[member("a", 0.0, Some(0.5))]),
            Err(OutlookError::NonPositiveCap { .. })
        ));
    }

    #[test]
    fn compensated_sum() {
        let s: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
