//! Delimited-text fixture formats for market data.
//!
//! A bundle directory holds:
//!
//! * `reports.jsonl`: one [`FixtureRecord`] per line
//! * `prices.csv`: daily bars, one row per (symbol, date)
//! * `macro.csv`: daily macro and index levels
//! * `inflation.csv`: monthly inflation rates dated on the first of the month
//! * `stocks.csv`: stock profiles
//! * `vocabulary.json`: the closed industry and exchange code lists

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::DatedSeries;
use crate::features::{ActivityType, DailyBar, MacroData, PriceHistory, StockProfile, Vocabulary};
use crate::store::FixtureRecord;

pub const REPORTS_FILE: &str = "reports.jsonl";
pub const PRICES_FILE: &str = "prices.csv";
pub const MACRO_FILE: &str = "macro.csv";
pub const INFLATION_FILE: &str = "inflation.csv";
pub const STOCKS_FILE: &str = "stocks.csv";
pub const VOCABULARY_FILE: &str = "vocabulary.json";

pub const BUNDLE_FILES: [&str; 6] = [
    REPORTS_FILE,
    PRICES_FILE,
    MACRO_FILE,
    INFLATION_FILE,
    STOCKS_FILE,
    VOCABULARY_FILE,
];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

type Result<T> = std::result::Result<T, FixtureError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FixtureError + '_ {
    move |source| FixtureError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PriceRow {
    symbol: String,
    date: NaiveDate,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    adj_close: f64,
    volume: f64,
    trades_value: f64,
    indiv_buy_value: f64,
    indiv_buy_count: f64,
    indiv_sell_value: f64,
    indiv_sell_count: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MacroRow {
    date: NaiveDate,
    gov_bond_return: Option<f64>,
    fixed_income_ytm: Option<f64>,
    usd_irr: Option<f64>,
    equal_weight_index: Option<f64>,
    market_index: Option<f64>,
    gold_usd: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RateRow {
    date: NaiveDate,
    rate: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

pub fn write_prices(path: &Path, prices: &BTreeMap<String, PriceHistory>) -> Result<()> {
    write_csv(
        path,
        prices.iter().flat_map(|(symbol, h)| {
            h.bars().iter().map(move |b| PriceRow {
                symbol: symbol.clone(),
                date: b.date,
                open: b.open,
                high: b.high,
                low: b.low,
                close: b.close,
                adj_close: b.adj_close,
                volume: b.volume,
                trades_value: b.trades_value,
                indiv_buy_value: b.indiv_buy_value,
                indiv_buy_count: b.indiv_buy_count,
                indiv_sell_value: b.indiv_sell_value,
                indiv_sell_count: b.indiv_sell_count,
            })
        }),
    )
}

pub fn read_prices(path: &Path) -> Result<BTreeMap<String, PriceHistory>> {
    let mut bars: BTreeMap<String, Vec<DailyBar>> = BTreeMap::new();
    for r in read_csv::<PriceRow>(path)? {
        bars.entry(r.symbol).or_default().push(DailyBar {
            date: r.date,
            open: r.open,
            high: r.high,
            low: r.low,
            close: r.close,
            adj_close: r.adj_close,
            volume: r.volume,
            trades_value: r.trades_value,
            indiv_buy_value: r.indiv_buy_value,
            indiv_buy_count: r.indiv_buy_count,
            indiv_sell_value: r.indiv_sell_value,
            indiv_sell_count: r.indiv_sell_count,
        });
    }
    Ok(bars.into_iter().map(|(s, b)| (s, PriceHistory::new(b))).collect())
}

pub fn write_macro(path: &Path, data: &MacroData) -> Result<()> {
    let series = [
        &data.gov_bond_return,
        &data.fixed_income_ytm,
        &data.usd_irr,
        &data.equal_weight_index,
        &data.market_index,
        &data.gold_usd,
    ];
    let mut dates: Vec<NaiveDate> = series.iter().flat_map(|s| s.iter().map(|(d, _)| d)).collect();
    dates.sort();
    dates.dedup();
    write_csv(
        path,
        dates.into_iter().map(|date| MacroRow {
            date,
            gov_bond_return: data.gov_bond_return.get(date),
            fixed_income_ytm: data.fixed_income_ytm.get(date),
            usd_irr: data.usd_irr.get(date),
            equal_weight_index: data.equal_weight_index.get(date),
            market_index: data.market_index.get(date),
            gold_usd: data.gold_usd.get(date),
        }),
    )
}

pub fn read_macro(path: &Path) -> Result<MacroData> {
    let mut data = MacroData::default();
    for r in read_csv::<MacroRow>(path)? {
        let put = |s: &mut DatedSeries, v: Option<f64>| {
            if let Some(v) = v {
                s.insert(r.date, v);
            }
        };
        put(&mut data.gov_bond_return, r.gov_bond_return);
        put(&mut data.fixed_income_ytm, r.fixed_income_ytm);
        put(&mut data.usd_irr, r.usd_irr);
        put(&mut data.equal_weight_index, r.equal_weight_index);
        put(&mut data.market_index, r.market_index);
        put(&mut data.gold_usd, r.gold_usd);
    }
    Ok(data)
}

pub fn write_inflation(path: &Path, monthly: &DatedSeries) -> Result<()> {
    write_csv(path, monthly.iter().map(|(date, rate)| RateRow { date, rate }))
}

pub fn read_inflation(path: &Path) -> Result<DatedSeries> {
    Ok(read_csv::<RateRow>(path)?.into_iter().map(|r| (r.date, r.rate)).collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct StockRow {
    symbol: String,
    industry: String,
    exchange: String,
    activity_type: ActivityType,
}

pub fn write_stocks(path: &Path, profiles: &[StockProfile]) -> Result<()> {
    write_csv(
        path,
        profiles.iter().map(|p| StockRow {
            symbol: p.symbol.clone(),
            industry: p.industry.clone(),
            exchange: p.exchange.clone(),
            activity_type: p.activity_type,
        }),
    )
}

pub fn read_stocks(path: &Path) -> Result<Vec<StockProfile>> {
    Ok(read_csv::<StockRow>(path)?
        .into_iter()
        .map(|r| StockProfile {
            symbol: r.symbol,
            industry: r.industry,
            exchange: r.exchange,
            activity_type: r.activity_type,
        })
        .collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FixtureError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FixtureError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_vocabulary(path: &Path, vocabulary: &Vocabulary) -> Result<()> {
    write_json(path, vocabulary)
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    read_json(path)
}

pub fn write_reports(path: &Path, records: &[FixtureRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| FixtureError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Everything the pipeline reads from a bundle, except the reports, which go
/// through the report store.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInputs {
    pub profiles: Vec<StockProfile>,
    pub prices: BTreeMap<String, PriceHistory>,
    pub macro_data: MacroData,
    pub inflation: DatedSeries,
    pub vocabulary: Vocabulary,
}

impl MarketInputs {
    pub fn read(dir: &Path) -> Result<Self> {
        Ok(Self {
            profiles: read_stocks(&dir.join(STOCKS_FILE))?,
            prices: read_prices(&dir.join(PRICES_FILE))?,
            macro_data: read_macro(&dir.join(MACRO_FILE))?,
            inflation: read_inflation(&dir.join(INFLATION_FILE))?,
            vocabulary: read_vocabulary(&dir.join(VOCABULARY_FILE))?,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_stocks(&dir.join(STOCKS_FILE), &self.profiles)?;
        write_prices(&dir.join(PRICES_FILE), &self.prices)?;
        write_macro(&dir.join(MACRO_FILE), &self.macro_data)?;
        write_inflation(&dir.join(INFLATION_FILE), &self.inflation)?;
        write_vocabulary(&dir.join(VOCABULARY_FILE), &self.vocabulary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, m, day).unwrap()
    }

    #[test]
    fn market_inputs_round_trip_exactly() {
        let bar = |date, close: f64| DailyBar {
            date,
            open: close * 0.99,
            high: close * 1.013,
            low: close * 0.981,
            close,
            adj_close: close / 3.0,
            volume: 1234.0,
            trades_value: close * 1234.0,
            indiv_buy_value: 0.1 + 0.2,
            indiv_buy_count: 7.0,
            indiv_sell_value: 1e-300,
            indiv_sell_count: 3.0,
        };
        let mut macro_data = MacroData::default();
        macro_data.gold_usd.insert(d(1, 4), 1850.123456789);
        macro_data.fixed_income_ytm.insert(d(1, 5), 0.2);
        let inputs = MarketInputs {
            profiles: vec![StockProfile {
                symbol: "AB".into(),
                industry: "cement".into(),
                exchange: "tse".into(),
                activity_type: ActivityType::Production,
            }],
            prices: BTreeMap::from([(
                "AB".to_string(),
                PriceHistory::new(vec![bar(d(1, 4), 1000.0 / 7.0), bar(d(1, 5), 2.0f64.sqrt())]),
            )]),
            macro_data,
            inflation: DatedSeries::from_points([(d(1, 1), 0.031)]),
            vocabulary: Vocabulary {
                industries: vec!["cement".into()],
                exchanges: vec!["tse".into()],
            },
        };
        let dir = tempfile::tempdir().unwrap();
        inputs.write(dir.path()).unwrap();
        assert_eq!(MarketInputs::read(dir.path()).unwrap(), inputs);
    }
}
