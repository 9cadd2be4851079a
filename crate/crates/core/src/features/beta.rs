//! One-year beta.
//!
//! Two definitions are available. [`BetaDefinition::PrintedFormula`] divides
//! the covariance by the variance of the *stock* returns,
//! `Cov(Rm, Rs) / Var(Rs)`, which is the column definition this feature set
//! was specified with. [`BetaDefinition::Conventional`] divides by the variance
//! of the market returns, `Cov(Rs, Rm) / Var(Rm)`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::DatedSeries;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaDefinition {
    #[default]
    PrintedFormula,
    Conventional,
}

/// Paired observations needed before a beta is reported.
pub const DEFAULT_MIN_OBSERVATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BetaError {
    #[error("{got} paired observations, need {need}")]
    InsufficientObservations { got: usize, need: usize },
    #[error("variance of the denominator series is zero")]
    DegenerateVariance,
}

/// Simple returns `p_t / p_{t-1} - 1` for observations dated in
/// `(after, until]`; the previous observation may predate the window.
pub fn daily_returns(levels: &DatedSeries, after: NaiveDate, until: NaiveDate) -> DatedSeries {
    let mut out = DatedSeries::new();
    let mut prev = levels.at_or_before(after).map(|(_, v)| v);
    for (d, v) in levels.window(after, until) {
        if let Some(p) = prev {
            if p != 0.0 {
                out.insert(d, v / p - 1.0);
            }
        }
        prev = Some(v);
    }
    out
}

/// Beta of `stock` against `market`, paired on common dates.
pub fn compute_beta(
    stock: &DatedSeries,
    market: &DatedSeries,
    definition: BetaDefinition,
    min_observations: usize,
) -> Result<f64, BetaError> {
    let pairs: Vec<(f64, f64)> = stock
        .iter()
        .filter_map(|(d, rs)| market.get(d).map(|rm| (rs, rm)))
        .collect();
    if pairs.len() < min_observations.max(2) {
        return Err(BetaError::InsufficientObservations {
            got: pairs.len(),
            need: min_observations.max(2),
        });
    }
    let n = pairs.len() as f64;
    let mean_s = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_m = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut var_s, mut var_m) = (0.0, 0.0, 0.0);
    for &(s, m) in &pairs {
        let (ds, dm) = (s - mean_s, m - mean_m);
        cov += ds * dm;
        var_s += ds * ds;
        var_m += dm * dm;
    }
    let denom = match definition {
        BetaDefinition::PrintedFormula => var_s,
        BetaDefinition::Conventional => var_m,
    };
    let denominator_values = pairs.iter().map(|&(s, m)| match definition {
        BetaDefinition::PrintedFormula => s,
        BetaDefinition::Conventional => m,
    });
    let (lo, hi) = denominator_values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    // a constant series can leave rounding residue in the centred sum
    if lo == hi || !(denom > 0.0) {
        return Err(BetaError::DegenerateVariance);
    }
    // the 1/n factors cancel
    Ok(cov / denom)
}
