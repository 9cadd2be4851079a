//! Fixtures and independent oracles shared by the integration tests and the
//! acceptance target.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Months, NaiveDate, Weekday};
use dss_core::calendar::DatedSeries;
use dss_core::cleaner::{map_to_unified, merge_quarterlies, CleanReport, LineItem, MappingRegistry, StatementSeries};
use dss_core::features::{
    compute_ratios, BetaDefinition, DailyBar, FeatureBuilder, FeatureConfig, FeatureRow, MacroData, PriceHistory,
    RatioSet, StockInputs, StockSnapshot,
};
use dss_core::fixtures::MarketInputs;
use dss_core::store::{announcement_id, Announcement, FixtureRecord, RawReport, StatementType};
use dss_core::synth::{generate_market, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn visible_on(publish: NaiveDate, day: NaiveDate) -> bool {
    publish.checked_add_months(Months::new(1)).unwrap() <= day
}

// ---------------------------------------------------------------- ratios

pub const RATIO_LAG: u32 = 1;

pub struct RatioFixture {
    pub reports: Vec<CleanReport>,
    pub series: StatementSeries,
    pub history: PriceHistory,
    pub market: DatedSeries,
    pub as_of: NaiveDate,
}

fn quarter_ends() -> Vec<NaiveDate> {
    let mut out = Vec::new();
    for y in 2018..=2020 {
        for (m, day) in [(3, 31), (6, 30), (9, 30), (12, 31)] {
            let pe = d(y, m, day);
            if pe >= d(2018, 6, 30) && pe <= d(2020, 3, 31) {
                out.push(pe);
            }
        }
    }
    out
}

fn clean(st: StatementType, period_end: NaiveDate, publish: NaiveDate, revision: u32, items: Vec<(LineItem, f64)>) -> CleanReport {
    CleanReport {
        symbol: "R".into(),
        statement_type: st,
        period_end,
        publish_date: publish,
        revision,
        format_version: 1,
        items: items.into_iter().collect(),
        missing: BTreeSet::new(),
    }
}

fn balance_items(rng: &mut ChaCha8Rng) -> Vec<(LineItem, f64)> {
    use LineItem::*;
    let cash = rng.random_range(10.0..5e4);
    let ce = rng.random_range(0.0..5e4);
    let inv = rng.random_range(1.0..1e5);
    let ca = cash + ce + inv + rng.random_range(0.0..1e5);
    let fa = rng.random_range(1.0..3e5);
    let oa = rng.random_range(0.0..5e4);
    let ltd = rng.random_range(0.0..1e5);
    vec![
        (Cash, cash),
        (CashEquivalents, ce),
        (Inventory, inv),
        (CurrentAssets, ca),
        (FixedAssets, fa),
        (OtherAssets, oa),
        (TotalAssets, ca + fa + oa),
        (CurrentLiabilities, rng.random_range(1.0..2e5)),
        (LongTermDebt, ltd),
        (TotalDebt, ltd + rng.random_range(1.0..1e5)),
        (TotalEquity, rng.random_range(1.0..4e5) * if rng.random_bool(0.1) { -1.0 } else { 1.0 }),
        (RetainedEarnings, rng.random_range(-1e5..1e5)),
        (SharesOutstanding, rng.random_range(1e3f64..1e7).round()),
    ]
}

fn income_items(rng: &mut ChaCha8Rng) -> Vec<(LineItem, f64)> {
    use LineItem::*;
    let rev = rng.random_range(1e3..1e6);
    let cogs = rev * rng.random_range(0.2..0.95);
    let gp = rev - cogs;
    let op = gp * rng.random_range(-0.5..0.8);
    let ebit = op + rng.random_range(-100.0..100.0);
    vec![
        (Revenue, rev),
        (Cogs, cogs),
        (GrossProfit, gp),
        (OperatingProfit, op),
        (Ebit, ebit),
        (InterestExpense, rng.random_range(1.0..1e4)),
        (NetIncome, ebit * rng.random_range(0.3..0.9) + rng.random_range(1.0..50.0)),
    ]
}

fn weekdays(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days()
        .take_while(|x| *x <= to)
        .filter(|x| !matches!(x.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

pub fn bar(date: NaiveDate, price: f64, volume: f64) -> DailyBar {
    DailyBar {
        date,
        open: price,
        high: price * 1.01,
        low: price * 0.99,
        close: price,
        adj_close: price,
        volume,
        trades_value: volume * price,
        indiv_buy_value: volume * price * 0.4,
        indiv_buy_count: 10.0,
        indiv_sell_value: volume * price * 0.3,
        indiv_sell_count: 12.0,
    }
}

/// Eight quarters of statements (with occasional later revisions) and two
/// years of daily prices.
pub fn ratio_fixture(seed: u64) -> RatioFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for pe in quarter_ends() {
        let publish = pe + chrono::Days::new(rng.random_range(15..75));
        reports.push(clean(StatementType::IncomeStatement, pe, publish, 0, income_items(&mut rng)));
        reports.push(clean(StatementType::BalanceSheet, pe, publish, 0, balance_items(&mut rng)));
        let ocf = rng.random_range(-1e5..1e5);
        reports.push(clean(StatementType::CashFlow, pe, publish, 0, vec![(LineItem::OperatingCashFlow, ocf)]));
        if rng.random_bool(0.2) {
            let later = publish + chrono::Days::new(rng.random_range(1..40));
            reports.push(clean(StatementType::BalanceSheet, pe, later, 1, balance_items(&mut rng)));
        }
        if rng.random_bool(0.2) {
            let later = publish + chrono::Days::new(rng.random_range(1..40));
            reports.push(clean(StatementType::IncomeStatement, pe, later, 1, income_items(&mut rng)));
        }
    }
    let as_of = d(2020, 5, 1) + chrono::Days::new(rng.random_range(0..120));
    let days = weekdays(d(2019, 1, 1), as_of + chrono::Days::new(30));
    let (mut p, mut m) = (rng.random_range(5.0..500.0), 1000.0);
    let mut bars = Vec::new();
    let mut market = DatedSeries::new();
    for day in days {
        let rm: f64 = rng.random_range(-0.02..0.02);
        let rs = 0.8 * rm + rng.random_range(-0.02..0.02);
        m *= 1.0 + rm;
        p *= 1.0 + rs;
        bars.push(bar(day, p, rng.random_range(1e3..1e6)));
        market.insert(day, m);
    }
    RatioFixture {
        series: merge_quarterlies(reports.clone()).unwrap(),
        reports,
        history: PriceHistory::new(bars),
        market,
        as_of,
    }
}

pub fn ratio_config() -> FeatureConfig {
    FeatureConfig {
        lag_months: RATIO_LAG,
        beta: BetaDefinition::PrintedFormula,
        beta_min_observations: 60,
        macro_staleness_days: 20,
    }
}

pub fn computed_ratios(fx: &RatioFixture) -> RatioSet {
    let snapshot = StockSnapshot::at("R", fx.as_of, &fx.history, &fx.series, RATIO_LAG).unwrap();
    compute_ratios(&fx.series, &snapshot, &fx.market, fx.as_of, &ratio_config()).unwrap()
}

/// Latest revision of each period visible on `day`, oldest period first.
fn oracle_visible(reports: &[CleanReport], st: StatementType, day: NaiveDate) -> Vec<&CleanReport> {
    let mut best: BTreeMap<NaiveDate, &CleanReport> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.statement_type == st && visible_on(r.publish_date, day)) {
        let slot = best.entry(r.period_end).or_insert(r);
        if r.revision > slot.revision {
            *slot = r;
        }
    }
    best.into_values().collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

/// (sum of net income, sum of revenue, shares) over the last four visible quarters.
fn oracle_ttm(reports: &[CleanReport], day: NaiveDate) -> Option<(f64, f64, f64)> {
    let inc = oracle_visible(reports, StatementType::IncomeStatement, day);
    if inc.len() < 4 {
        return None;
    }
    let q = &inc[inc.len() - 4..];
    let months = |x: NaiveDate| x.year() * 12 + x.month() as i32;
    if months(q[3].period_end) - months(q[0].period_end) != 9 {
        return None;
    }
    let g = |r: &CleanReport, i| r.items[&i];
    let ni = g(q[0], LineItem::NetIncome) + g(q[1], LineItem::NetIncome) + g(q[2], LineItem::NetIncome) + g(q[3], LineItem::NetIncome);
    let rev = g(q[0], LineItem::Revenue) + g(q[1], LineItem::Revenue) + g(q[2], LineItem::Revenue) + g(q[3], LineItem::Revenue);
    let bal = oracle_visible(reports, StatementType::BalanceSheet, day);
    let shares = bal.last()?.items[&LineItem::SharesOutstanding];
    Some((ni, rev, shares))
}

/// Every ratio recomputed from the raw fixture, by column name.
pub fn oracle_ratios(fx: &RatioFixture) -> BTreeMap<&'static str, Option<f64>> {
    use LineItem::*;
    let day = fx.as_of;
    let latest = |st| oracle_visible(&fx.reports, st, day).last().copied();
    let year_ago = |r: &CleanReport| {
        oracle_visible(&fx.reports, r.statement_type, day)
            .into_iter()
            .find(|o| o.period_end.year() == r.period_end.year() - 1 && o.period_end.month() == r.period_end.month())
    };
    let inc = latest(StatementType::IncomeStatement).unwrap();
    let bal = latest(StatementType::BalanceSheet).unwrap();
    let cf = latest(StatementType::CashFlow).unwrap();
    let inc0 = year_ago(inc);
    let bal0 = year_ago(bal);
    let i = |x| inc.items[&x];
    let b = |x| bal.items[&x];
    let avg = |x| bal0.map(|o| (b(x) + o.items[&x]) / 2.0);

    let price = fx.history.bars().iter().rev().find(|x| x.date <= day).unwrap().adj_close;
    let ttm = oracle_ttm(&fx.reports, day);
    let start = day.checked_sub_months(Months::new(12)).unwrap();
    let window: Vec<&DailyBar> = fx.history.bars().iter().filter(|x| x.date > start && x.date <= day).collect();
    let daily_ttm: Vec<(f64, (f64, f64, f64))> =
        window.iter().filter_map(|x| oracle_ttm(&fx.reports, x.date).map(|t| (x.adj_close, t))).collect();
    let daily = |num: fn((f64, f64, f64)) -> f64| median(daily_ttm.iter().map(|(p, t)| p / (num(*t) / t.2)).collect());

    // beta: printed definition, Cov(Rm, Rs) / Var(Rs)
    let prices: Vec<(NaiveDate, f64)> = fx.history.bars().iter().map(|x| (x.date, x.adj_close)).collect();
    let market: Vec<(NaiveDate, f64)> = fx.market.iter().collect();
    let rets = |s: &[(NaiveDate, f64)]| -> BTreeMap<NaiveDate, f64> {
        s.windows(2).filter(|w| w[1].0 > start && w[1].0 <= day).map(|w| (w[1].0, w[1].1 / w[0].1 - 1.0)).collect()
    };
    let (rs, rm) = (rets(&prices), rets(&market));
    let pairs: Vec<(f64, f64)> = rs.iter().filter_map(|(k, s)| rm.get(k).map(|m| (*s, *m))).collect();
    let n = pairs.len() as f64;
    let (ms, mm) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let cov: f64 = pairs.iter().map(|p| (p.0 - ms) * (p.1 - mm)).sum();
    let var_s: f64 = pairs.iter().map(|p| (p.0 - ms) * (p.0 - ms)).sum();
    let beta = (pairs.len() >= 60).then(|| cov / var_s);

    BTreeMap::from([
        ("debt_to_equity", Some(b(TotalDebt) / b(TotalEquity))),
        ("return_on_fixed_assets", avg(FixedAssets).map(|a| i(NetIncome) / a)),
        ("debt_ratio", Some(b(TotalDebt) / b(TotalAssets))),
        ("gross_profit_margin", Some(i(GrossProfit) / i(Revenue))),
        ("current_ratio", Some(b(CurrentAssets) / b(CurrentLiabilities))),
        ("net_income_margin", Some(i(NetIncome) / i(Revenue))),
        ("operating_profit_margin", Some(i(OperatingProfit) / i(Revenue))),
        ("interest_coverage", Some(i(Ebit) / i(InterestExpense))),
        ("roe", avg(TotalEquity).map(|a| i(NetIncome) / a)),
        ("cash_flow_to_income", Some(cf.items[&OperatingCashFlow] / i(NetIncome))),
        ("quick_ratio", Some((b(CurrentAssets) - b(Inventory)) / b(CurrentLiabilities))),
        ("long_term_debt_ratio", Some(b(LongTermDebt) / b(TotalAssets))),
        ("roa", avg(TotalAssets).map(|a| i(NetIncome) / a)),
        ("inventory_turnover", avg(Inventory).map(|a| i(Cogs) / a)),
        ("asset_turnover", avg(TotalAssets).map(|a| i(Revenue) / a)),
        ("cash_ratio", Some((b(Cash) + b(CashEquivalents)) / b(CurrentLiabilities))),
        ("gross_profit_growth", inc0.map(|o| i(GrossProfit) / o.items[&GrossProfit] - 1.0)),
        ("revenue_growth", inc0.map(|o| i(Revenue) / o.items[&Revenue] - 1.0)),
        ("re_ta", Some(b(RetainedEarnings) / b(TotalAssets))),
        ("pe_ttm", ttm.map(|(ni, _, sh)| price / (ni / sh))),
        ("pe_ttm_median", daily(|t| t.0)),
        ("ps_ttm", ttm.map(|(_, rev, sh)| price / (rev / sh))),
        ("ps_ttm_median", daily(|t| t.1)),
        ("beta_1y", beta),
    ])
}

/// Names of the ratios that disagree with their oracle beyond `tol`.
pub fn ratio_mismatches(fx: &RatioFixture, tol: f64) -> Vec<String> {
    let got = computed_ratios(fx);
    let want = oracle_ratios(fx);
    assert_eq!(want.len(), RatioSet::NAMES.len());
    RatioSet::NAMES
        .iter()
        .zip(got.values())
        .filter_map(|(name, g)| {
            let w = want[name];
            let ok = match (g, w) {
                (Some(a), Some(b)) => rel_close(a, b, tol),
                (None, None) => true,
                _ => false,
            };
            (!ok).then(|| format!("{name}: got {g:?}, oracle {w:?}"))
        })
        .collect()
}

// ---------------------------------------------------------------- parser corpus

#[derive(Debug, serde::Deserialize)]
pub struct CorpusRow {
    pub table: String,
    pub label: String,
    pub value: String,
    pub expect: serde_json::Value,
}

#[derive(Debug, serde::Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub format_version: u16,
    pub statement_type: StatementType,
    pub rows: Vec<CorpusRow>,
}

pub fn parser_corpus() -> Vec<CorpusCase> {
    serde_json::from_str(include_str!("../data/parser_corpus.json")).unwrap()
}

/// Problems found mapping one corpus case; empty when every expectation holds.
pub fn check_corpus_case(case: &CorpusCase, registry: &MappingRegistry) -> Vec<String> {
    let ann = Announcement {
        announcement_id: "corpus".into(),
        symbol: "C".into(),
        statement_type: case.statement_type,
        period_end: d(2020, 3, 31),
        publish_date: d(2020, 4, 30),
        format_version: case.format_version,
        revision: 0,
    };
    let mut tables: Vec<dss_core::store::RawTable> = Vec::new();
    for r in &case.rows {
        if tables.last().is_none_or(|t| t.name != r.table) {
            tables.push(dss_core::store::RawTable { name: r.table.clone(), rows: Vec::new() });
        }
        tables.last_mut().unwrap().rows.push(dss_core::store::RawRow { label: r.label.clone(), value: r.value.clone() });
    }
    let raw = RawReport { announcement_id: "corpus".into(), tables };
    let out = match map_to_unified(&raw, &ann, registry) {
        Ok(o) => o,
        Err(e) => return vec![format!("{}: {e}", case.name)],
    };
    let mut problems = Vec::new();
    let mut expected_items = BTreeSet::new();
    for r in &case.rows {
        let item = registry.lookup(case.format_version, &r.label);
        let fail = |m: String| format!("{} / {:?}: {m}", case.name, r.label);
        match (&r.expect, item) {
            (serde_json::Value::Number(n), Some(item)) => {
                expected_items.insert(item);
                let want = n.as_f64().unwrap();
                if out.report.get(item) != Some(want) {
                    problems.push(fail(format!("placed {:?}, expected {want}", out.report.get(item))));
                }
            }
            (serde_json::Value::String(s), Some(item)) if s == "missing" => {
                if !out.report.missing.contains(&item) || out.report.items.contains_key(&item) {
                    problems.push(fail("not recorded as missing".into()));
                }
            }
            (serde_json::Value::String(s), Some(item)) if s == "quarantined" => {
                if out.report.items.contains_key(&item) || !out.quarantined.iter().any(|q| q.label == r.label) {
                    problems.push(fail("not quarantined".into()));
                }
            }
            (serde_json::Value::String(s), None) if s == "unmapped" => {
                if !out.unmapped.contains(&r.label) {
                    problems.push(fail("not reported unmapped".into()));
                }
            }
            (e, i) => problems.push(fail(format!("unexpected mapping {i:?} for expectation {e}"))),
        }
    }
    // nothing placed that the corpus did not state, in particular no zero fill
    for (item, v) in &out.report.items {
        if !expected_items.contains(item) {
            problems.push(format!("{}: {item} = {v} placed without a source value", case.name));
        }
    }
    problems
}

// ---------------------------------------------------------------- synthetic markets

pub fn announcement_for(r: &FixtureRecord) -> Announcement {
    Announcement {
        announcement_id: announcement_id(&r.symbol, r.statement_type, r.period_end, r.revision),
        symbol: r.symbol.clone(),
        statement_type: r.statement_type,
        period_end: r.period_end,
        publish_date: r.publish_date,
        format_version: r.format_version,
        revision: r.revision,
    }
}

/// Clean every record of a bundle and merge per symbol.
pub fn clean_records(records: &[FixtureRecord]) -> BTreeMap<String, StatementSeries> {
    let registry = MappingRegistry::builtin();
    let mut by_symbol: BTreeMap<String, Vec<CleanReport>> = BTreeMap::new();
    for r in records {
        let ann = announcement_for(r);
        let raw = RawReport { announcement_id: ann.announcement_id.clone(), tables: r.tables.clone() };
        let out = map_to_unified(&raw, &ann, &registry).unwrap();
        by_symbol.entry(r.symbol.clone()).or_default().push(out.report);
    }
    by_symbol.into_iter().map(|(s, rs)| (s, merge_quarterlies(rs).unwrap())).collect()
}

pub struct SmallMarket {
    pub inputs: MarketInputs,
    pub series: BTreeMap<String, StatementSeries>,
}

pub fn small_market(n_stocks: usize, n_quarters: usize, seed: u64) -> SmallMarket {
    let bundle = generate_market(&SynthConfig {
        n_stocks,
        n_quarters,
        rng_seed: seed,
        ..SynthConfig::default()
    })
    .unwrap();
    SmallMarket {
        series: clean_records(&bundle.records),
        inputs: bundle.inputs,
    }
}

pub fn builder_for(inputs: &MarketInputs, series: &BTreeMap<String, StatementSeries>, config: FeatureConfig) -> FeatureBuilder {
    let mut b = FeatureBuilder::new(config, inputs.vocabulary.clone(), inputs.macro_data.clone());
    for p in &inputs.profiles {
        b.add_stock(StockInputs {
            profile: p.clone(),
            history: inputs.prices[&p.symbol].clone(),
            series: series[&p.symbol].clone(),
        });
    }
    b
}

fn scale_after(s: &DatedSeries, as_of: NaiveDate, rng: &mut ChaCha8Rng) -> DatedSeries {
    s.iter().map(|(k, v)| if k > as_of { (k, v * rng.random_range(0.5..1.5)) } else { (k, v) }).collect()
}

/// Perturb every input dated after `as_of`: price bars, macro observations
/// and statements not yet visible under `lag_months`.
pub fn mutate_future(
    market: &SmallMarket,
    as_of: NaiveDate,
    lag_months: u32,
    rng: &mut ChaCha8Rng,
) -> SmallMarket {
    let mut inputs = market.inputs.clone();
    for h in inputs.prices.values_mut() {
        let bars = h
            .bars()
            .iter()
            .map(|b| {
                if b.date > as_of {
                    let f = rng.random_range(0.5..1.5);
                    let mut b = bar(b.date, b.adj_close * f, b.volume * rng.random_range(0.1..10.0));
                    b.indiv_buy_count *= f;
                    b
                } else {
                    *b
                }
            })
            .collect();
        *h = PriceHistory::new(bars);
    }
    let m = &market.inputs.macro_data;
    inputs.macro_data = MacroData {
        gov_bond_return: scale_after(&m.gov_bond_return, as_of, rng),
        fixed_income_ytm: scale_after(&m.fixed_income_ytm, as_of, rng),
        usd_irr: scale_after(&m.usd_irr, as_of, rng),
        equal_weight_index: scale_after(&m.equal_weight_index, as_of, rng),
        market_index: scale_after(&m.market_index, as_of, rng),
        gold_usd: scale_after(&m.gold_usd, as_of, rng),
    };
    let mut series = market.series.clone();
    for s in series.values_mut() {
        for r in s.reports.values_mut().chain(s.superseded.values_mut()).flatten() {
            if r.publish_date.checked_add_months(Months::new(lag_months)).unwrap() > as_of {
                let f = rng.random_range(0.5..1.5);
                r.items.values_mut().for_each(|v| *v *= f);
            }
        }
    }
    SmallMarket { inputs, series }
}

pub fn row_bits(r: &Result<FeatureRow, dss_core::features::FeatureError>) -> Result<Vec<Option<u64>>, String> {
    match r {
        Ok(row) => Ok(row.values.iter().map(|v| v.map(f64::to_bits)).collect()),
        Err(e) => Err(e.to_string()),
    }
}
