//! Equal-weight portfolios of the k stocks with the highest predicted
//! probability. Ties are broken by ascending symbol.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::DatedSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKPortfolio {
    /// (symbol, weight), best first.
    pub members: Vec<(String, f64)>,
    /// Fewer than k candidates were available.
    pub degenerate: bool,
}

fn rank(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

pub fn top_k_portfolio(predictions: &[(String, f64)], k: usize) -> TopKPortfolio {
    let mut sorted = predictions.to_vec();
    sorted.sort_by(rank);
    sorted.truncate(k);
    let n = sorted.len();
    let w = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    TopKPortfolio {
        members: sorted.into_iter().map(|(s, _)| (s, w)).collect(),
        degenerate: n < k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKPeriod {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub portfolio: TopKPortfolio,
    /// Equal-weight mean of member returns; `None` when no member is priced.
    pub nominal_return: Option<f64>,
}

/// Hold the top-k portfolio chosen at each date until the next one. Members
/// without a price at either end are left out of that period's mean.
pub fn run_top_k(
    predictions: &BTreeMap<NaiveDate, Vec<(String, f64)>>,
    prices: &BTreeMap<String, DatedSeries>,
    dates: &[NaiveDate],
    k: usize,
) -> Vec<TopKPeriod> {
    dates
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let portfolio =
                top_k_portfolio(predictions.get(&start).map_or(&[][..], Vec::as_slice), k);
            let returns: Vec<f64> = portfolio
                .members
                .iter()
                .filter_map(|(s, _)| {
                    let series = prices.get(s)?;
                    let (_, a) = series.at_or_before(start)?;
                    let (_, b) = series.at_or_before(end)?;
                    (a > 0.0).then(|| b / a - 1.0)
                })
                .collect();
            let nominal_return =
                (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64);
            TopKPeriod {
                start,
                end,
                portfolio,
                nominal_return,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(ps: &[(&str, f64)]) -> Vec<(String, f64)> {
        ps.iter().map(|(s, p)| (s.to_string(), *p)).collect()
    }

    #[test]
    fn fewer_than_k() {
        let p = top_k_portfolio(&preds(&[("a", 0.1), ("b", 0.2), ("c", 0.3), ("d", 0.4), ("e", 0.5)]), 20);
        assert_eq!(p.members.len(), 5);
        assert!(p.members.iter().all(|(_, w)| *w == 0.2));
        assert!(p.degenerate);
    }

    #[test]
    fn tie_at_cutoff_prefers_smaller_symbol() {
        let p = top_k_portfolio(&preds(&[("zed", 0.5), ("abc", 0.5), ("top", 0.9)]), 2);
        let names: Vec<&str> = p.members.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(names, ["top", "abc"]);
        assert!(!p.degenerate);
    }

    #[test]
    fn period_returns_are_equal_weight() {
        let d = |m| NaiveDate::from_ymd_opt(2020, m, 1).unwrap();
        let prices = BTreeMap::from([
            ("a".to_string(), DatedSeries::from_points([(d(1), 1.0), (d(4), 1.2)])),
            ("b".to_string(), DatedSeries::from_points([(d(1), 1.0), (d(4), 0.9)])),
        ]);
        let predictions = BTreeMap::from([(d(1), preds(&[("a", 0.8), ("b", 0.7), ("c", 0.1)]))]);
        let r = run_top_k(&predictions, &prices, &[d(1), d(4)], 2);
        assert!((r[0].nominal_return.unwrap() - 0.05).abs() < 1e-12);
    }
}
