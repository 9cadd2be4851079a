//! Daily price, flow and macro paths.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::MacroRegime;
use crate::calendar::{add_months, first_of_month, DatedSeries};
use crate::features::{DailyBar, MacroData};

const TRADING_DAYS_PER_YEAR: f64 = 252.0;

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Log-price path over `days.len()` trading days starting at `ln(p0)`.
/// Between consecutive anchors the path is a Brownian bridge landing exactly
/// on `ln(1 + returns[j])` above the previous anchor; outside the anchors it
/// is a driftless random walk.
pub(crate) fn log_price_path(
    n_days: usize,
    anchors: &[usize],
    returns: &[f64],
    p0: f64,
    daily_vol: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    debug_assert!(anchors.is_empty() && returns.is_empty() || anchors.len() == returns.len() + 1);
    let mut lp = vec![0.0; n_days];
    lp[0] = p0.ln();
    let first = anchors.first().copied().unwrap_or(n_days);
    let last = anchors.last().copied().unwrap_or(n_days);
    for t in 1..=first.min(n_days - 1) {
        lp[t] = lp[t - 1] + daily_vol * normal(rng);
    }
    for (j, r) in returns.iter().enumerate() {
        let (a, b) = (anchors[j], anchors[j + 1]);
        let m = b - a;
        let steps: Vec<f64> = (0..m).map(|_| daily_vol * normal(rng)).collect();
        let total: f64 = steps.iter().sum();
        let target = (1.0 + r).ln();
        let mut walk = 0.0;
        for (k, step) in steps.iter().enumerate() {
            walk += step;
            let frac = (k + 1) as f64 / m as f64;
            lp[a + k + 1] = if k + 1 == m {
                lp[a] + target
            } else {
                lp[a] + walk - frac * total + frac * target
            };
        }
    }
    for t in last + 1..n_days {
        lp[t] = lp[t - 1] + daily_vol * normal(rng);
    }
    lp
}

/// Bars around a close path, with intraday range and individual flows.
pub(crate) fn bars_from_closes(
    days: &[NaiveDate],
    closes: &[f64],
    daily_vol: f64,
    rng: &mut impl Rng,
) -> Vec<DailyBar> {
    let mut prev = closes[0];
    days.iter()
        .zip(closes)
        .map(|(&date, &close)| {
            let open = prev * (daily_vol / 3.0 * normal(rng)).exp();
            prev = close;
            let up = 1.0 + (daily_vol / 2.0 * normal(rng)).abs();
            let down = 1.0 - (daily_vol / 2.0 * normal(rng)).abs().min(0.5);
            let volume = (rng.random_range(10.0f64..14.0).exp()).round();
            let trades_value = volume * close;
            let buy_share = rng.random_range(0.3..0.9);
            let sell_share = rng.random_range(0.3..0.9);
            DailyBar {
                date,
                open,
                high: open.max(close) * up,
                low: open.min(close) * down,
                close,
                adj_close: close,
                volume,
                trades_value,
                indiv_buy_value: trades_value * buy_share,
                indiv_buy_count: rng.random_range(5..500) as f64,
                indiv_sell_value: trades_value * sell_share,
                indiv_sell_count: rng.random_range(5..500) as f64,
            }
        })
        .collect()
}

/// Macro series other than the market indices, on the trading days.
pub(crate) fn macro_series(days: &[NaiveDate], regime: &MacroRegime, rng: &mut impl Rng) -> MacroData {
    let mut data = MacroData::default();
    let mut ytm = regime.ytm_mean;
    let mut gold = 1_200.0;
    let mut usd = 250_000.0;
    let gbm = |level: f64, drift: f64, vol: f64, z: f64| {
        let dt = 1.0 / TRADING_DAYS_PER_YEAR;
        level * ((drift - vol * vol / 2.0) * dt + vol * dt.sqrt() * z).exp()
    };
    for (i, &d) in days.iter().enumerate() {
        if i > 0 {
            ytm += regime.ytm_reversion * (regime.ytm_mean - ytm) + regime.ytm_daily_vol * normal(rng);
            ytm = ytm.clamp(0.02, 0.6);
            gold = gbm(gold, regime.gold_drift, regime.gold_vol, normal(rng));
            usd = gbm(usd, regime.usd_drift, regime.usd_vol, normal(rng));
        }
        let carry = (1.0 + ytm).powf(1.0 / TRADING_DAYS_PER_YEAR) - 1.0;
        data.fixed_income_ytm.insert(d, ytm);
        data.gov_bond_return.insert(d, carry + 0.0003 * normal(rng));
        data.gold_usd.insert(d, gold);
        data.usd_irr.insert(d, usd);
    }
    data
}

/// Monthly inflation rates dated on the first of each month in
/// `[first_of_month(from), to]`.
pub(crate) fn inflation_series(
    from: NaiveDate,
    to: NaiveDate,
    regime: &MacroRegime,
    rng: &mut impl Rng,
) -> DatedSeries {
    let noise = Normal::new(0.0, regime.inflation_noise).expect("non-negative sd");
    let mut out = DatedSeries::new();
    let mut m = first_of_month(from);
    while m <= to {
        out.insert(m, (regime.inflation_monthly + noise.sample(rng)).max(0.0));
        m = add_months(m, 1);
    }
    out
}

/// Cap-weighted index (base 1000) and equal-weight index (base 100) from
/// per-stock closes on a shared calendar.
pub(crate) fn market_indices(
    days: &[NaiveDate],
    closes: &[Vec<f64>],
    shares: &[f64],
) -> (DatedSeries, DatedSeries) {
    let cap_at = |t: usize| -> f64 { closes.iter().zip(shares).map(|(c, s)| c[t] * s).sum() };
    let base = cap_at(0);
    let mut cap_index = DatedSeries::new();
    let mut ew_index = DatedSeries::new();
    let mut ew = 100.0;
    for (t, &d) in days.iter().enumerate() {
        if t > 0 {
            let mean: f64 =
                closes.iter().map(|c| c[t] / c[t - 1] - 1.0).sum::<f64>() / closes.len() as f64;
            ew *= 1.0 + mean;
        }
        cap_index.insert(d, 1_000.0 * cap_at(t) / base);
        ew_index.insert(d, ew);
    }
    (cap_index, ew_index)
}
