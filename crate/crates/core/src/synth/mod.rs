//! Seed-deterministic synthetic market with a planted, learnable signal.
//!
//! Each stock-quarter gets target values for gross profit margin, debt ratio
//! and current ratio. Integer statements are built around them and the
//! ratios are read back from the integers, so the score below is a function
//! of exactly what the feature stage computes:
//!
//! ```text
//! z = ((gpm - 0.30) / 0.08 - (debt_ratio - 0.45) / 0.10 + (current_ratio - 1.5) / 0.40) / sqrt(3)
//! P(label = 1) = 1 / (1 + exp(-k z)),    k = 5.25 s / (1 - s)
//! ```
//!
//! with `s` the signal strength (`s = 1` labels `z > 0` deterministically).
//! The stock's adjusted-price return over the three months after the as-of
//! date is then planted as `benchmark ± (0.02 + |e|)`, `e ~ N(0, 0.05²)`,
//! with the sign given by the label; the daily log-price path between as-of
//! dates is a Brownian bridge hitting that return exactly.

mod paths;
mod statements;

pub use statements::{render_number, render_table};

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{add_days, add_months, first_of_month, is_weekday, last_day_of_month};
use crate::cleaner::{LineItem, MappingRegistry};
use crate::dataset::{benchmark_return, Horizon};
use crate::features::{ActivityType, PriceHistory, StockProfile, Vocabulary};
use crate::fixtures::{self, FixtureError, MarketInputs};
use crate::store::{FixtureRecord, StatementType};

use statements::{build_statements, revise_balance, RatioProfile, RatioTargets};

/// Slope of the label logistic at signal strength 0.5.
pub const SLOPE_AT_HALF: f64 = 5.25;
/// Horizon, in months, the label and planted return refer to.
pub const SIGNAL_HORIZON_MONTHS: u32 = 3;
/// Minimum distance of a planted return from the benchmark.
pub const RETURN_MARGIN: f64 = 0.02;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic market config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MacroRegime {
    pub inflation_monthly: f64,
    pub inflation_noise: f64,
    pub ytm_mean: f64,
    /// Daily pull of the yield towards `ytm_mean`.
    pub ytm_reversion: f64,
    pub ytm_daily_vol: f64,
    pub gold_drift: f64,
    pub gold_vol: f64,
    pub usd_drift: f64,
    pub usd_vol: f64,
}

impl Default for MacroRegime {
    fn default() -> Self {
        Self {
            inflation_monthly: 0.025,
            inflation_noise: 0.004,
            ytm_mean: 0.20,
            ytm_reversion: 0.02,
            ytm_daily_vol: 0.0005,
            gold_drift: 0.10,
            gold_vol: 0.18,
            usd_drift: 0.15,
            usd_vol: 0.12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_stocks: usize,
    pub n_quarters: usize,
    pub rng_seed: u64,
    pub signal_strength: f64,
    /// Each report picks its format uniformly from this list.
    pub format_versions: Vec<u16>,
    pub industries: Vec<String>,
    pub exchanges: Vec<String>,
    /// Period end of the first statement quarter.
    pub first_period_end: NaiveDate,
    /// Share of balance sheets that get a later restatement.
    pub revision_rate: f64,
    /// Share of income statements whose interest expense is marked missing.
    pub missing_rate: f64,
    pub macro_regime: MacroRegime,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_stocks: 50,
            n_quarters: 16,
            rng_seed: 7,
            signal_strength: 0.5,
            format_versions: vec![1, 2, 3],
            industries: ["automotive", "banking", "cement", "chemicals", "food", "metals", "pharma", "technology"]
                .map(String::from)
                .to_vec(),
            exchanges: vec!["tse".into(), "ifb".into()],
            first_period_end: NaiveDate::from_ymd_opt(2016, 3, 31).expect("valid date"),
            revision_rate: 0.03,
            missing_rate: 0.01,
            macro_regime: MacroRegime::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_stocks < 1 {
            return bad("n_stocks must be at least 1");
        }
        if self.n_quarters < 8 {
            return bad("n_quarters must be at least 8");
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad("signal_strength must lie in [0, 1]");
        }
        if self.format_versions.is_empty() || self.format_versions.iter().any(|v| !(1..=3).contains(v)) {
            return bad("format_versions must be a non-empty subset of {1, 2, 3}");
        }
        if self.industries.is_empty() || self.exchanges.is_empty() {
            return bad("industry and exchange vocabularies must be non-empty");
        }
        let pe = self.first_period_end;
        use chrono::Datelike;
        if !pe.month().is_multiple_of(3) || pe != last_day_of_month(pe.year(), pe.month()) {
            return bad("first_period_end must be a calendar quarter end");
        }
        if !(0.0..=1.0).contains(&self.revision_rate) || !(0.0..=1.0).contains(&self.missing_rate) {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }

    /// Slope `k` of the label logistic; `None` means labels are the sign of
    /// the score.
    pub fn logistic_slope(&self) -> Option<f64> {
        let s = self.signal_strength;
        (s < 1.0).then(|| SLOPE_AT_HALF * s / (1.0 - s))
    }
}

/// The signal score of one stock-quarter.
pub fn signal_score(gross_profit_margin: f64, debt_ratio: f64, current_ratio: f64) -> f64 {
    ((gross_profit_margin - 0.30) / 0.08 - (debt_ratio - 0.45) / 0.10 + (current_ratio - 1.5) / 0.40)
        / 3f64.sqrt()
}

/// Label probability for a score under a slope (`None`: deterministic).
pub fn label_probability(score: f64, slope: Option<f64>) -> f64 {
    match slope {
        Some(k) => 1.0 / (1.0 + (-k * score).exp()),
        None if score > 0.0 => 1.0,
        None => 0.0,
    }
}

/// Accuracy of the Bayes rule `score > 0` against realized labels.
pub fn bayes_accuracy(examples: impl IntoIterator<Item = (f64, u8)>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for (score, label) in examples {
        hit += usize::from(u8::from(score > 0.0) == label);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub symbol: String,
    pub as_of: NaiveDate,
    pub gross_profit_margin: f64,
    pub debt_ratio: f64,
    pub current_ratio: f64,
    pub score: f64,
    pub probability: f64,
    pub label: u8,
    pub planted_return: f64,
    pub benchmark_return: f64,
}

/// The generating rule and its realized labels. Kept apart from the
/// fixtures; the pipeline never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rng_seed: u64,
    pub signal_strength: f64,
    pub logistic_slope: Option<f64>,
    pub horizon_months: u32,
    pub score_formula: String,
    pub price_process: String,
    /// Realized accuracy of `score > 0` on the planted labels.
    pub bayes_accuracy: f64,
    /// `mean(max(p, 1 - p))` over all stock-quarters.
    pub expected_bayes_accuracy: f64,
    pub majority_share: f64,
    pub rows: Vec<GroundTruthRow>,
}

/// Generated fixtures plus the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketBundle {
    pub records: Vec<FixtureRecord>,
    pub inputs: MarketInputs,
    pub ground_truth: GroundTruth,
}

impl MarketBundle {
    /// Write the fixture files into `dir`.
    pub fn write_fixtures(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir).map_err(|source| SynthError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        fixtures::write_reports(&dir.join(fixtures::REPORTS_FILE), &self.records)?;
        self.inputs.write(dir)?;
        Ok(())
    }

    pub fn write_ground_truth(&self, path: &Path) -> Result<(), SynthError> {
        Ok(fixtures::write_json(path, &self.ground_truth)?)
    }
}

/// Statement quarters, as-of dates and the trading calendar.
#[derive(Debug, Clone)]
struct Timeline {
    period_ends: Vec<NaiveDate>,
    /// `as_ofs[q]` is the first date the quarter-`q` reports are the latest
    /// visible ones; one more date closes the last label window.
    as_ofs: Vec<NaiveDate>,
    days: Vec<NaiveDate>,
    /// Index in `days` of the last trading day on or before each as-of date.
    anchors: Vec<usize>,
}

impl Timeline {
    fn new(config: &SynthConfig) -> Self {
        use chrono::Datelike;
        let period_ends: Vec<NaiveDate> = (0..config.n_quarters)
            .map(|q| {
                let d = add_months(first_of_month(config.first_period_end), 3 * q as i32);
                last_day_of_month(d.year(), d.month())
            })
            .collect();
        let as_ofs: Vec<NaiveDate> = (0..=config.n_quarters)
            .map(|q| add_months(first_of_month(config.first_period_end), 3 * q as i32 + 4))
            .collect();
        let start = add_months(as_ofs[0], -12);
        let end = add_days(*as_ofs.last().expect("non-empty"), 7);
        let days: Vec<NaiveDate> = start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| is_weekday(*d))
            .collect();
        let anchors = as_ofs
            .iter()
            .map(|a| days.partition_point(|d| d <= a) - 1)
            .collect();
        Self {
            period_ends,
            as_ofs,
            days,
            anchors,
        }
    }
}

struct StockDraw {
    profile: StockProfile,
    records: Vec<FixtureRecord>,
    closes: Vec<f64>,
    history: PriceHistory,
    shares: f64,
    truth: Vec<GroundTruthRow>,
}

fn pick<'a, T>(items: &'a [T], rng: &mut impl Rng) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn generate_stock(
    symbol: String,
    config: &SynthConfig,
    timeline: &Timeline,
    benchmarks: &[f64],
    registry: &MappingRegistry,
    seed: u64,
) -> StockDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = StockProfile {
        symbol: symbol.clone(),
        industry: pick(&config.industries, &mut rng).clone(),
        exchange: pick(&config.exchanges, &mut rng).clone(),
        activity_type: if rng.random_bool(0.7) {
            ActivityType::Production
        } else {
            ActivityType::Other
        },
    };
    let ratio_profile = RatioProfile::draw(&mut rng);
    let shares = rng.random_range(10_000_000i64..1_000_000_000);
    let revenue_scale = Normal::new(27.0f64, 1.0).expect("positive sd").sample(&mut rng);
    let slope = config.logistic_slope();
    let surprise = Normal::new(0.0, 0.05).expect("positive sd");

    let mut records = Vec::new();
    let mut truth = Vec::with_capacity(config.n_quarters);
    let mut planted = Vec::with_capacity(config.n_quarters);
    for (q, &period_end) in timeline.period_ends.iter().enumerate() {
        let targets = ratio_profile.quarter(&mut rng);
        let revenue = (revenue_scale + 0.02 * q as f64 + 0.08 * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .exp()
            .round() as i64;
        let statements = build_statements(targets, revenue, shares, &mut rng);

        let RatioTargets {
            gross_profit_margin,
            debt_ratio,
            current_ratio,
        } = statements.realized();
        let score = signal_score(gross_profit_margin, debt_ratio, current_ratio);
        let probability = label_probability(score, slope);
        let label = match slope {
            Some(_) => u8::from(rng.random::<f64>() < probability),
            None => u8::from(score > 0.0),
        };
        let e: f64 = surprise.sample(&mut rng);
        let gap = RETURN_MARGIN + e.abs().min(0.5);
        let bench = benchmarks[q];
        let planted_return = if label == 1 { bench + gap } else { bench - gap };
        planted.push(planted_return);
        truth.push(GroundTruthRow {
            symbol: symbol.clone(),
            as_of: timeline.as_ofs[q],
            gross_profit_margin,
            debt_ratio,
            current_ratio,
            score,
            probability,
            label,
            planted_return,
            benchmark_return: bench,
        });

        for st in StatementType::ALL {
            let version = *pick(&config.format_versions, &mut rng);
            let publish_date = add_days(period_end, rng.random_range(10..=25));
            let missing: Vec<LineItem> =
                if st == StatementType::IncomeStatement && rng.random_bool(config.missing_rate) {
                    vec![LineItem::InterestExpense]
                } else {
                    Vec::new()
                };
            let items = statements.items(st);
            records.push(FixtureRecord {
                symbol: symbol.clone(),
                statement_type: st,
                period_end,
                publish_date,
                format_version: version,
                revision: 0,
                tables: vec![render_table(registry, st, version, items, &missing)],
            });
            if st == StatementType::BalanceSheet && rng.random_bool(config.revision_rate) {
                let revised = revise_balance(items, &mut rng);
                records.push(FixtureRecord {
                    symbol: symbol.clone(),
                    statement_type: st,
                    period_end,
                    publish_date: add_days(publish_date, rng.random_range(3..=10)),
                    format_version: version,
                    revision: 1,
                    tables: vec![render_table(registry, st, version, &revised, &[])],
                });
            }
        }
    }

    let daily_vol = rng.random_range(0.01..0.025);
    let p0 = rng.random_range(1_000.0..20_000.0);
    let closes: Vec<f64> =
        paths::log_price_path(timeline.days.len(), &timeline.anchors, &planted, p0, daily_vol, &mut rng)
            .into_iter()
            .map(f64::exp)
            .collect();
    let history = PriceHistory::new(paths::bars_from_closes(&timeline.days, &closes, daily_vol, &mut rng));
    StockDraw {
        profile,
        records,
        closes,
        history,
        shares: shares as f64,
        truth,
    }
}

/// Seed of the `i`-th stock, derived from the root seed.
fn sub_seeds(root: u64, n: usize) -> (u64, Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    let macro_seed = rng.random();
    (macro_seed, (0..n).map(|_| rng.random()).collect())
}

pub fn generate_market(config: &SynthConfig) -> Result<MarketBundle, SynthError> {
    config.validate()?;
    let timeline = Timeline::new(config);
    let (macro_seed, seeds) = sub_seeds(config.rng_seed, config.n_stocks);
    let mut macro_rng = ChaCha8Rng::seed_from_u64(macro_seed);
    let mut macro_data = paths::macro_series(&timeline.days, &config.macro_regime, &mut macro_rng);
    let inflation = paths::inflation_series(
        timeline.days[0],
        *timeline.days.last().expect("non-empty calendar"),
        &config.macro_regime,
        &mut macro_rng,
    );

    let horizon = Horizon::new(SIGNAL_HORIZON_MONTHS).expect("supported horizon");
    let benchmarks: Vec<f64> = timeline.as_ofs[..config.n_quarters]
        .iter()
        .map(|&a| {
            let (_, ytm) = macro_data
                .fixed_income_ytm
                .at_or_before(a)
                .expect("yield quoted from the first trading day");
            benchmark_return(ytm, horizon).expect("yield is clamped above -1")
        })
        .collect();

    let registry = MappingRegistry::builtin();
    let width = config.n_stocks.to_string().len().max(3);
    let draws: Vec<StockDraw> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            generate_stock(format!("S{:0width$}", i + 1), config, &timeline, &benchmarks, &registry, seed)
        })
        .collect();

    let closes: Vec<Vec<f64>> = draws.iter().map(|d| d.closes.clone()).collect();
    let shares: Vec<f64> = draws.iter().map(|d| d.shares).collect();
    let (cap_index, ew_index) = paths::market_indices(&timeline.days, &closes, &shares);
    macro_data.market_index = cap_index;
    macro_data.equal_weight_index = ew_index;

    let mut records = Vec::new();
    let mut profiles = Vec::new();
    let mut prices = std::collections::BTreeMap::new();
    let mut rows = Vec::new();
    for d in draws {
        records.extend(d.records);
        prices.insert(d.profile.symbol.clone(), d.history);
        profiles.push(d.profile);
        rows.extend(d.truth);
    }

    let expected = rows.iter().map(|r| r.probability.max(1.0 - r.probability)).sum::<f64>() / rows.len() as f64;
    let positive = rows.iter().filter(|r| r.label == 1).count() as f64 / rows.len() as f64;
    let ground_truth = GroundTruth {
        rng_seed: config.rng_seed,
        signal_strength: config.signal_strength,
        logistic_slope: config.logistic_slope(),
        horizon_months: SIGNAL_HORIZON_MONTHS,
        score_formula: "z = ((gross_profit_margin - 0.30) / 0.08 - (debt_ratio - 0.45) / 0.10 \
                        + (current_ratio - 1.5) / 0.40) / sqrt(3); P(label = 1) = sigmoid(k z)"
            .into(),
        price_process: "log adjusted close: driftless Gaussian random walk before the first as-of \
                        date and after the last; between consecutive as-of dates a Brownian bridge \
                        ending at ln(1 + benchmark +/- (0.02 + |e|)), e ~ N(0, 0.05^2), sign from the label"
            .into(),
        bayes_accuracy: bayes_accuracy(rows.iter().map(|r| (r.score, r.label))),
        expected_bayes_accuracy: expected,
        majority_share: positive.max(1.0 - positive),
        rows,
    };

    Ok(MarketBundle {
        records,
        inputs: MarketInputs {
            profiles,
            prices,
            macro_data,
            inflation,
            vocabulary: Vocabulary {
                industries: config.industries.clone(),
                exchanges: config.exchanges.clone(),
            },
        },
        ground_truth,
    })
}
