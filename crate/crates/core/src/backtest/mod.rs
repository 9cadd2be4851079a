//! Two-scenario gold/bond/stock allocation, top-k stock portfolios and
//! nominal/real return accounting. Trading is frictionless and perfectly
//! divisible.

mod engine;
mod topk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use chrono::NaiveDate;

pub use engine::{
    inflation_over, rebalance, run_backtest, run_fixed_weights, AssetSeries, PeriodRow,
    PortfolioState, StrategyReport,
};
pub use topk::{run_top_k, top_k_portfolio, TopKPeriod, TopKPortfolio};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BacktestError {
    #[error("return {0} is not above -1")]
    DomainError(f64),
    #[error("{asset} price {price} at {date} is not positive")]
    NonPositivePrice {
        asset: &'static str,
        date: NaiveDate,
        price: f64,
    },
    #[error("no {asset} price on or before {date}")]
    MissingPrice { asset: &'static str, date: NaiveDate },
    #[error("weights {0:?} must be non-negative and sum to 1")]
    InvalidWeights([f64; 3]),
    #[error("backtest needs at least two rebalance dates between {from} and {to}")]
    EmptyPeriod { from: NaiveDate, to: NaiveDate },
    #[error("portfolio value must be positive")]
    NonPositiveValue,
}

/// Tolerance on the weight sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetWeights {
    pub gold: f64,
    pub bond: f64,
    pub stock: f64,
}

impl AssetWeights {
    pub fn new(gold: f64, bond: f64, stock: f64) -> Result<Self, BacktestError> {
        let w = Self { gold, bond, stock };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        let a = self.as_array();
        if a.iter().any(|v| !(*v >= 0.0)) || ((a[0] + a[1] + a[2]) - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(BacktestError::InvalidWeights(a));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.gold, self.bond, self.stock]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Market expected to beat fixed income: stock-heavy.
    Growth,
    /// Otherwise: bond-heavy.
    Defensive,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::Growth => 1,
            Scenario::Defensive => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub threshold: f64,
    pub growth_weights: AssetWeights,
    pub defensive_weights: AssetWeights,
    pub rebalance_months: u32,
    pub initial_value: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            growth_weights: AssetWeights {
                gold: 0.20,
                bond: 0.10,
                stock: 0.70,
            },
            defensive_weights: AssetWeights {
                gold: 0.20,
                bond: 0.70,
                stock: 0.10,
            },
            rebalance_months: 3,
            initial_value: 1000.0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        self.growth_weights.validate()?;
        self.defensive_weights.validate()?;
        if !(self.initial_value > 0.0) {
            return Err(BacktestError::NonPositiveValue);
        }
        Ok(())
    }

    pub fn weights(&self, scenario: Scenario) -> AssetWeights {
        match scenario {
            Scenario::Growth => self.growth_weights,
            Scenario::Defensive => self.defensive_weights,
        }
    }
}

/// Strictly above the threshold is the growth scenario.
pub fn choose_scenario(p_market: f64, config: &StrategyConfig) -> Scenario {
    if p_market > config.threshold {
        Scenario::Growth
    } else {
        Scenario::Defensive
    }
}

/// `(1 + nominal) / (1 + inflation) - 1`.
pub fn real_return(nominal: f64, inflation: f64) -> Result<f64, BacktestError> {
    if !(inflation > -1.0) {
        return Err(BacktestError::DomainError(inflation));
    }
    if !(nominal > -1.0) {
        return Err(BacktestError::DomainError(nominal));
    }
    Ok((1.0 + nominal) / (1.0 + inflation) - 1.0)
}

/// `(1 + real) * (1 + inflation) - 1`.
pub fn nominal_return(real: f64, inflation: f64) -> f64 {
    (1.0 + real) * (1.0 + inflation) - 1.0
}

/// `prod(1 + r) - 1`.
pub fn cumulative_return(returns: &[f64]) -> Result<f64, BacktestError> {
    let mut growth = 1.0;
    for &r in returns {
        if !(r > -1.0) {
            return Err(BacktestError::DomainError(r));
        }
        growth *= 1.0 + r;
    }
    Ok(growth - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios() {
        let c = StrategyConfig::default();
        assert_eq!(c.weights(choose_scenario(0.7, &c)), AssetWeights { gold: 0.2, bond: 0.1, stock: 0.7 });
        assert_eq!(c.weights(choose_scenario(0.3, &c)), AssetWeights { gold: 0.2, bond: 0.7, stock: 0.1 });
        assert_eq!(choose_scenario(0.5, &c), Scenario::Defensive);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn weight_validation() {
        assert!(AssetWeights::new(0.5, 0.5, 0.0).is_ok());
        assert!(AssetWeights::new(0.5, 0.6, -0.1).is_err());
        assert!(AssetWeights::new(0.5, 0.5, 0.1).is_err());
    }

    #[test]
    fn real_returns() {
        assert!((real_return(0.10, 0.0).unwrap() - 0.10).abs() < 1e-15);
        assert!(real_return(0.10, 0.10).unwrap().abs() < 1e-15);
        // 1.21 / 1.10 - 1
        assert!((real_return(0.21, 0.10).unwrap() - 0.10).abs() < 1e-14);
        assert!(real_return(0.1, -1.0).is_err());
    }

    #[test]
    fn compounding() {
        assert_eq!(cumulative_return(&[]).unwrap(), 0.0);
        assert!((cumulative_return(&[0.1, -0.1]).unwrap() + 0.01).abs() < 1e-15);
        assert!((cumulative_return(&[0.37]).unwrap() - 0.37).abs() < 1e-15);
        assert!((cumulative_return(&[0.1, 0.1]).unwrap() - 0.21).abs() < 1e-15);
        assert!(cumulative_return(&[-1.0]).is_err());
    }
}
