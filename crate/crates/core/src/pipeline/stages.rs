use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::artifacts::{file_hash, io_err, value_hash, Manifest, StageWriter, Workspace};
use super::tables::{feature_csv, fmt_opt, labeled_csv, read_feature_csv, read_labeled_csv};
use super::{PipelineConfig, PipelineError};
use crate::backtest::{
    inflation_over, real_return, run_backtest, run_fixed_weights, run_top_k, AssetSeries, StrategyReport,
};
use crate::calendar::{month_grid, quarter_starts, DatedSeries};
use crate::cleaner::{map_to_unified, merge_quarterlies, MappingRegistry, StatementSeries};
use crate::dataset::{
    apply_publication_lag, chronological_split, fit_scaler, label_example, DatasetError, Horizon, LabeledExample,
    ScalerParams,
};
use crate::features::{FeatureBuilder, FeatureRow, StockInputs};
use crate::fixtures::{self, MarketInputs};
use crate::model::{accuracy, train_model, AccuracyTable, Dataset, Model, ModelKind, MODEL_FORMAT_VERSION};
use crate::outlook::{forecasts_csv, market_probability, MarketForecast, OutlookError, UniverseMember};
use crate::store::ReportStore;
use crate::synth::{generate_market, SynthConfig};

pub const STAGES: [&str; 9] = [
    "ingest", "clean", "features", "dataset", "train", "evaluate", "outlook", "backtest", "report",
];

const STORE_DIR: &str = "store";
const SERIES_FILE: &str = "series.json";
const FEATURES_FILE: &str = "features.csv";

fn horizon_dir(h: Horizon) -> String {
    format!("h{}", h.months())
}

fn csv_text(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Quote a free-text cell if it needs it.
fn cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn missing_fraction(row: &FeatureRow) -> f64 {
    if row.values.is_empty() {
        return 0.0;
    }
    row.values.iter().filter(|v| v.is_none()).count() as f64 / row.values.len() as f64
}

/// One period of the top-k stock portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKRow {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub members: Vec<String>,
    pub degenerate: bool,
    pub nominal_return: Option<f64>,
    pub inflation: f64,
    pub real_return: Option<f64>,
}

/// Everything the backtest stage computes, as consumed by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResults {
    pub horizon: Horizon,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub strategy: StrategyReport,
    pub growth_only: StrategyReport,
    pub defensive_only: StrategyReport,
    pub top_k: Vec<TopKRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitSummary {
    horizon: Horizon,
    n_train: usize,
    n_test: usize,
    n_inference: usize,
    boundary: Option<NaiveDate>,
    skipped_sparse: usize,
    skipped_other: usize,
    dropped_columns: Vec<String>,
    warning: Option<String>,
}

/// The pipeline over one config and work directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    ws: Workspace,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        let ws = Workspace::new(config.paths.work.clone());
        Self { config, ws }
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    /// Hash of the configuration a stage's output depends on, including every
    /// upstream stage's share.
    pub fn config_hash(&self, stage: &str) -> String {
        value_hash(&self.config_slice(stage))
    }

    fn config_slice(&self, stage: &str) -> serde_json::Value {
        let c = &self.config;
        let up = |s: &str| self.config_slice(s);
        match stage {
            "ingest" => json!({ "stage": "ingest" }),
            "clean" => json!({ "up": up("ingest"), "mappings": c.paths.mappings }),
            "features" => json!({
                "up": up("clean"),
                "lag_months": c.lag_months,
                "features": c.features,
            }),
            "dataset" => json!({
                "up": up("features"),
                "horizons": c.horizons(),
                "train_fraction": c.train_fraction,
                "max_missing_fraction": c.max_missing_fraction,
            }),
            "train" => json!({
                "up": up("dataset"),
                "models": c.models,
                "model": c.model,
                "seed": c.seeds.model,
            }),
            "evaluate" => json!({ "up": up("train") }),
            "outlook" => json!({ "up": up("train"), "outlook_model": c.outlook_model }),
            "backtest" => json!({ "up": up("outlook"), "strategy": c.strategy, "backtest": c.backtest }),
            "report" => json!({ "evaluate": up("evaluate"), "backtest": up("backtest") }),
            other => json!({ "stage": other }),
        }
    }

    fn require(&self, stage: &'static str) -> Result<Manifest, PipelineError> {
        self.ws.require(stage, &self.config_hash(stage))
    }

    fn fixture(&self, name: &str) -> Result<PathBuf, PipelineError> {
        let p = self.config.paths.fixtures.join(name);
        if !p.exists() {
            return Err(PipelineError::MissingUpstreamArtifact { step: "synth", path: p });
        }
        Ok(p)
    }

    fn fixture_hashes(&self, names: &[&str]) -> Result<BTreeMap<String, String>, PipelineError> {
        names
            .iter()
            .map(|n| Ok((format!("fixtures/{n}"), file_hash(&self.fixture(n)?)?)))
            .collect()
    }

    fn upstream_hashes(&self, stages: &[&str]) -> Result<BTreeMap<String, String>, PipelineError> {
        stages
            .iter()
            .map(|s| Ok((format!("{s}/manifest.json"), self.ws.manifest_hash(s)?)))
            .collect()
    }

    /// Generate a synthetic bundle into the fixture directory and its ground
    /// truth into `truth_path`.
    pub fn synth(&self, truth_path: &Path) -> Result<(), PipelineError> {
        let cfg = SynthConfig {
            rng_seed: self.config.seeds.synth,
            ..self.config.synth.clone()
        };
        let bundle = generate_market(&cfg)?;
        bundle.write_fixtures(&self.config.paths.fixtures)?;
        if let Some(parent) = truth_path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        bundle.write_ground_truth(truth_path)?;
        Ok(())
    }

    pub fn ingest(&self) -> Result<Manifest, PipelineError> {
        let reports = self.fixture(fixtures::REPORTS_FILE)?;
        let mut w = StageWriter::begin(&self.ws, "ingest")?;
        let store_root = self.ws.root().join(STORE_DIR);
        if store_root.exists() {
            fs::remove_dir_all(&store_root).map_err(io_err(&store_root))?;
        }
        let mut store = ReportStore::open(&store_root)?;
        let ids = store.ingest_fixture_file(&reports)?;
        w.record(&store_root)?;
        let n_symbols = store.symbols().count();
        log::info!("ingested {} reports for {n_symbols} symbols", ids.len());
        w.finish(
            self.config_hash("ingest"),
            None,
            json!({ "reports": ids.len(), "symbols": n_symbols }),
            self.fixture_hashes(&[fixtures::REPORTS_FILE])?,
        )
    }

    pub fn clean(&self) -> Result<Manifest, PipelineError> {
        self.require("ingest")?;
        let store = ReportStore::open(self.ws.root().join(STORE_DIR))?;
        let mut registry = MappingRegistry::builtin();
        if let Some(dir) = &self.config.paths.mappings {
            registry.load_dir(dir)?;
        }
        let symbols: Vec<String> = store.symbols().map(String::from).collect();

        struct Cleaned {
            series: StatementSeries,
            quarantine: Vec<String>,
            unmapped: Vec<String>,
            rejected: Vec<String>,
        }
        let cleaned: Vec<Cleaned> = symbols
            .par_iter()
            .map(|symbol| -> Result<Cleaned, PipelineError> {
                let mut reports = Vec::new();
                let (mut quarantine, mut unmapped, mut rejected) = (Vec::new(), Vec::new(), Vec::new());
                for stored in store.fetch_all(symbol)? {
                    let a = &stored.announcement;
                    match map_to_unified(&stored.report, a, &registry) {
                        Ok(out) => {
                            for q in &out.quarantined {
                                quarantine.push(format!(
                                    "{},{},{},{},{},{},{},{}",
                                    a.announcement_id,
                                    a.symbol,
                                    a.statement_type,
                                    a.period_end,
                                    cell(&q.table),
                                    cell(&q.label),
                                    cell(&q.value),
                                    cell(&q.reason)
                                ));
                            }
                            for label in &out.unmapped {
                                unmapped.push(format!(
                                    "{},{},{},{}",
                                    a.announcement_id,
                                    a.symbol,
                                    a.format_version,
                                    cell(label)
                                ));
                            }
                            reports.push(out.report);
                        }
                        Err(e) => rejected.push(format!(
                            "{},{},{},{},{}",
                            a.announcement_id,
                            a.symbol,
                            a.statement_type,
                            a.period_end,
                            cell(&e.to_string())
                        )),
                    }
                }
                let series = if reports.is_empty() {
                    StatementSeries {
                        symbol: symbol.clone(),
                        ..StatementSeries::default()
                    }
                } else {
                    merge_quarterlies(reports)?
                };
                Ok(Cleaned {
                    series,
                    quarantine,
                    unmapped,
                    rejected,
                })
            })
            .collect::<Result<_, _>>()?;

        let mut w = StageWriter::begin(&self.ws, "clean")?;
        let gaps: Vec<String> = cleaned
            .iter()
            .flat_map(|c| {
                c.series.gaps.iter().flat_map(move |(st, gs)| {
                    gs.iter().map(move |g| {
                        format!("{},{st},{},{},{}", c.series.symbol, g.after, g.before, g.missing_quarters)
                    })
                })
            })
            .collect();
        let n_quarantined: usize = cleaned.iter().map(|c| c.quarantine.len()).sum();
        let n_rejected: usize = cleaned.iter().map(|c| c.rejected.len()).sum();
        let n_unmapped: usize = cleaned.iter().map(|c| c.unmapped.len()).sum();
        w.write(
            "quarantine.csv",
            csv_text(
                "announcement_id,symbol,statement_type,period_end,table,label,value,reason",
                cleaned.iter().flat_map(|c| c.quarantine.iter().cloned()),
            )
            .as_bytes(),
        )?;
        w.write(
            "unmapped.csv",
            csv_text(
                "announcement_id,symbol,format_version,label",
                cleaned.iter().flat_map(|c| c.unmapped.iter().cloned()),
            )
            .as_bytes(),
        )?;
        w.write(
            "rejected.csv",
            csv_text(
                "announcement_id,symbol,statement_type,period_end,error",
                cleaned.iter().flat_map(|c| c.rejected.iter().cloned()),
            )
            .as_bytes(),
        )?;
        w.write("gaps.csv", csv_text("symbol,statement_type,after,before,missing_quarters", gaps).as_bytes())?;
        let series: Vec<StatementSeries> = cleaned.into_iter().map(|c| c.series).collect();
        w.write(SERIES_FILE, &serde_json::to_vec(&series).expect("series serialize"))?;
        w.finish(
            self.config_hash("clean"),
            None,
            json!({
                "symbols": series.len(),
                "quarantined_rows": n_quarantined,
                "rejected_reports": n_rejected,
                "unmapped_labels": n_unmapped,
            }),
            self.upstream_hashes(&["ingest"])?,
        )
    }

    fn load_builder(&self) -> Result<(FeatureBuilder, MarketInputs), PipelineError> {
        let series: Vec<StatementSeries> = read_json(&self.ws.stage_dir("clean").join(SERIES_FILE))?;
        let mut by_symbol: BTreeMap<String, StatementSeries> =
            series.into_iter().map(|s| (s.symbol.clone(), s)).collect();
        let mut inputs = MarketInputs::read(&self.config.paths.fixtures)?;
        let mut builder = FeatureBuilder::new(
            self.config.feature_config(),
            inputs.vocabulary.clone(),
            inputs.macro_data.clone(),
        );
        for profile in &inputs.profiles {
            let history = inputs.prices.remove(&profile.symbol).unwrap_or_default();
            let series = by_symbol.remove(&profile.symbol).unwrap_or_else(|| StatementSeries {
                symbol: profile.symbol.clone(),
                ..StatementSeries::default()
            });
            builder.add_stock(StockInputs {
                profile: profile.clone(),
                history: history.clone(),
                series,
            });
            inputs.prices.insert(profile.symbol.clone(), history);
        }
        Ok((builder, inputs))
    }

    fn market_fixture_hashes(&self) -> Result<BTreeMap<String, String>, PipelineError> {
        self.fixture_hashes(&[
            fixtures::PRICES_FILE,
            fixtures::MACRO_FILE,
            fixtures::STOCKS_FILE,
            fixtures::VOCABULARY_FILE,
        ])
    }

    pub fn features(&self) -> Result<Manifest, PipelineError> {
        self.require("clean")?;
        let (builder, inputs) = self.load_builder()?;
        let symbols: Vec<String> = builder.symbols().into_iter().map(String::from).collect();
        let lag = self.config.lag_months;
        let first_visible = symbols
            .iter()
            .filter_map(|s| builder.stock(s))
            .flat_map(|s| s.series.reports.values().flatten())
            .map(|r| apply_publication_lag(r.publish_date, lag))
            .min();
        let last_price = inputs.prices.values().filter_map(|h| h.adjusted_close().last_date()).max();
        let from = self.config.features.from.or(first_visible);
        let to = self.config.features.to.or(last_price);
        let grid = match (from, to) {
            (Some(f), Some(t)) => quarter_starts(f, t),
            _ => Vec::new(),
        };
        let pairs: Vec<(&str, NaiveDate)> =
            symbols.iter().flat_map(|s| grid.iter().map(move |d| (s.as_str(), *d))).collect();
        let results: Vec<Result<FeatureRow, String>> = pairs
            .par_iter()
            .map(|(s, d)| builder.build_row(s, *d).map_err(|e| e.to_string()))
            .collect();
        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        for ((s, d), r) in pairs.iter().zip(results) {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => skipped.push(format!("{s},{d},{}", cell(&e))),
            }
        }
        let columns = builder.schema().columns;
        let mut w = StageWriter::begin(&self.ws, "features")?;
        w.write(FEATURES_FILE, &feature_csv(&columns, &rows))?;
        w.write_json("schema.json", &columns)?;
        w.write("skipped.csv", csv_text("symbol,as_of,reason", skipped.iter().cloned()).as_bytes())?;
        let mut input_hashes = self.upstream_hashes(&["clean"])?;
        input_hashes.extend(self.market_fixture_hashes()?);
        w.finish(
            self.config_hash("features"),
            None,
            json!({
                "rows": rows.len(),
                "skipped": skipped.len(),
                "grid": grid.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            }),
            input_hashes,
        )
    }

    pub fn dataset(&self) -> Result<Manifest, PipelineError> {
        self.require("features")?;
        let (columns, rows) = read_feature_csv(&self.ws.stage_dir("features").join(FEATURES_FILE))?;
        let inputs = MarketInputs::read(&self.config.paths.fixtures)?;
        let ytm = &inputs.macro_data.fixed_income_ytm;
        let empty = DatedSeries::new();
        let max_missing = self.config.max_missing_fraction;

        struct HorizonData {
            summary: SplitSummary,
            train: Vec<LabeledExample>,
            test: Vec<LabeledExample>,
            inference: Vec<FeatureRow>,
            scaler: Option<ScalerParams>,
        }
        let per_horizon: Vec<HorizonData> = self
            .config
            .horizons()
            .into_par_iter()
            .map(|h| -> Result<HorizonData, PipelineError> {
                let mut labeled = Vec::new();
                let mut inference = Vec::new();
                let (mut sparse, mut other) = (0, 0);
                for row in &rows {
                    if missing_fraction(row) > max_missing {
                        sparse += 1;
                        continue;
                    }
                    let prices = inputs.prices.get(&row.symbol).map_or(&empty, |p| p.adjusted_close());
                    match label_example(prices, row.as_of, h, ytm) {
                        Ok(o) => labeled.push(LabeledExample {
                            row: row.clone(),
                            horizon: h,
                            label: o.label,
                            realized_stock_return: o.realized_stock_return,
                            fi_benchmark_return: o.fi_benchmark_return,
                        }),
                        Err(DatasetError::HorizonBeyondData { .. }) => inference.push(row.clone()),
                        Err(e) => {
                            log::debug!("{} {}: {e}", row.symbol, row.as_of);
                            other += 1;
                        }
                    }
                }
                let mut summary = SplitSummary {
                    horizon: h,
                    n_train: 0,
                    n_test: 0,
                    n_inference: inference.len(),
                    boundary: None,
                    skipped_sparse: sparse,
                    skipped_other: other,
                    dropped_columns: Vec::new(),
                    warning: None,
                };
                if labeled.is_empty() {
                    summary.warning = Some(format!("no labeled rows for horizon {h}"));
                    log::warn!("no labeled rows for horizon {h}");
                    return Ok(HorizonData {
                        summary,
                        train: Vec::new(),
                        test: Vec::new(),
                        inference,
                        scaler: None,
                    });
                }
                let split = chronological_split(labeled, self.config.train_fraction)?;
                let train_values: Vec<Vec<Option<f64>>> = split.train.iter().map(|e| e.row.values.clone()).collect();
                let scaler = fit_scaler(&columns, &train_values)?;
                summary.n_train = split.train.len();
                summary.n_test = split.test.len();
                summary.boundary = Some(split.boundary);
                summary.dropped_columns = scaler.dropped.iter().map(|d| d.name.clone()).collect();
                summary.warning = split.warning;
                Ok(HorizonData {
                    summary,
                    train: split.train,
                    test: split.test,
                    inference,
                    scaler: Some(scaler),
                })
            })
            .collect::<Result<_, _>>()?;

        let mut w = StageWriter::begin(&self.ws, "dataset")?;
        for hd in &per_horizon {
            let dir = horizon_dir(hd.summary.horizon);
            if let Some(scaler) = &hd.scaler {
                w.write(&format!("{dir}/train.csv"), &labeled_csv(&columns, &hd.train))?;
                w.write(&format!("{dir}/test.csv"), &labeled_csv(&columns, &hd.test))?;
                w.write_json(&format!("{dir}/scaler.json"), scaler)?;
            }
            w.write(&format!("{dir}/inference.csv"), &feature_csv(&columns, &hd.inference))?;
            w.write_json(&format!("{dir}/split.json"), &hd.summary)?;
        }
        let mut input_hashes = self.upstream_hashes(&["features"])?;
        input_hashes.extend(self.fixture_hashes(&[fixtures::PRICES_FILE, fixtures::MACRO_FILE])?);
        let summaries: Vec<&SplitSummary> = per_horizon.iter().map(|h| &h.summary).collect();
        w.finish(
            self.config_hash("dataset"),
            None,
            json!({ "columns": columns, "horizons": summaries }),
            input_hashes,
        )
    }

    fn split_summary(&self, h: Horizon) -> Result<SplitSummary, PipelineError> {
        read_json(&self.ws.stage_dir("dataset").join(horizon_dir(h)).join("split.json"))
    }

    fn scaled(examples: &[LabeledExample], scaler: &ScalerParams) -> Result<Dataset, PipelineError> {
        let features = examples
            .iter()
            .map(|e| scaler.transform(&e.row.values))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset::new(features, examples.iter().map(|e| e.label).collect())?)
    }

    /// Horizons with a non-empty training set.
    fn trainable_horizons(&self) -> Result<Vec<Horizon>, PipelineError> {
        let mut out = Vec::new();
        for h in self.config.horizons() {
            if self.split_summary(h)?.n_train > 0 {
                out.push(h);
            }
        }
        Ok(out)
    }

    pub fn train(&self) -> Result<Manifest, PipelineError> {
        self.require("dataset")?;
        let dataset_hash = self.ws.manifest_hash("dataset")?;
        let horizons = self.trainable_horizons()?;
        let mut data = BTreeMap::new();
        for &h in &horizons {
            let dir = self.ws.stage_dir("dataset").join(horizon_dir(h));
            let scaler: ScalerParams = read_json(&dir.join("scaler.json"))?;
            let (_, train) = read_labeled_csv(&dir.join("train.csv"), h)?;
            data.insert(h, (Self::scaled(&train, &scaler)?, scaler));
        }
        let jobs: Vec<(Horizon, ModelKind)> = horizons
            .iter()
            .flat_map(|h| self.config.models.iter().map(move |k| (*h, *k)))
            .collect();
        let seed = self.config.seeds.model;
        let models: Vec<Model> = jobs
            .par_iter()
            .map(|&(h, kind)| -> Result<Model, PipelineError> {
                let (ds, scaler) = &data[&h];
                log::info!("training {} for horizon {h} on {} rows", kind.label(), ds.len());
                Ok(Model {
                    format_version: MODEL_FORMAT_VERSION,
                    horizon: h,
                    manifest_hash: dataset_hash.clone(),
                    columns: scaler.output_columns(),
                    scaler: scaler.clone(),
                    params: train_model(kind, ds, &self.config.model, seed)?,
                })
            })
            .collect::<Result<_, _>>()?;
        let mut w = StageWriter::begin(&self.ws, "train")?;
        for m in &models {
            w.write_json(&format!("{}/{}.json", horizon_dir(m.horizon), m.kind().as_str()), m)?;
        }
        w.finish(
            self.config_hash("train"),
            Some(seed),
            json!({
                "horizons": horizons,
                "models": self.config.models.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
            }),
            self.upstream_hashes(&["dataset"])?,
        )
    }

    fn model_path(&self, h: Horizon, kind: ModelKind) -> PathBuf {
        self.ws.stage_dir("train").join(horizon_dir(h)).join(format!("{}.json", kind.as_str()))
    }

    fn load_model(&self, h: Horizon, kind: ModelKind) -> Result<Model, PipelineError> {
        let path = self.model_path(h, kind);
        if !path.exists() {
            return Err(PipelineError::MissingUpstreamArtifact { step: "train", path });
        }
        read_json(&path)
    }

    pub fn evaluate(&self) -> Result<Manifest, PipelineError> {
        self.require("train")?;
        self.require("dataset")?;
        let mut table = AccuracyTable::default();
        let mut w = StageWriter::begin(&self.ws, "evaluate")?;
        for h in self.trainable_horizons()? {
            let dir = self.ws.stage_dir("dataset").join(horizon_dir(h));
            let (_, train) = read_labeled_csv(&dir.join("train.csv"), h)?;
            let (_, test) = read_labeled_csv(&dir.join("test.csv"), h)?;
            let models = self
                .config
                .models
                .iter()
                .map(|k| self.load_model(h, *k))
                .collect::<Result<Vec<_>, _>>()?;
            let mut probs: Vec<Vec<f64>> = vec![Vec::new(); test.len()];
            for m in &models {
                let train_ds = Self::scaled(&train, &m.scaler)?;
                let train_acc = accuracy(&m.params, &train_ds)?;
                if test.is_empty() {
                    log::warn!("horizon {h}: empty test set, {} not scored", m.kind().label());
                    continue;
                }
                let test_ds = Self::scaled(&test, &m.scaler)?;
                table.insert(m.kind(), h, train_acc, accuracy(&m.params, &test_ds)?);
                for (p, x) in probs.iter_mut().zip(&test_ds.features) {
                    p.push(m.predict_proba(x)?);
                }
            }
            let header = format!(
                "symbol,as_of,label,{}",
                models.iter().map(|m| m.kind().label()).collect::<Vec<_>>().join(",")
            );
            let lines = test.iter().zip(&probs).map(|(e, ps)| {
                let mut l = format!("{},{},{}", e.row.symbol, e.row.as_of, e.label);
                for p in ps {
                    let _ = write!(l, ",{p}");
                }
                l
            });
            w.write(&format!("predictions_{}.csv", horizon_dir(h)), csv_text(&header, lines).as_bytes())?;
        }
        w.write("accuracy.csv", table.to_csv().as_bytes())?;
        w.write("averages.csv", table.averages_csv().as_bytes())?;
        w.finish(
            self.config_hash("evaluate"),
            None,
            serde_json::to_value(&table).expect("table serializes"),
            self.upstream_hashes(&["train", "dataset"])?,
        )
    }

    /// Test accuracies computed by the evaluate stage.
    pub fn accuracy_table(&self) -> Result<AccuracyTable, PipelineError> {
        let m = self.require("evaluate")?;
        serde_json::from_value(m.params).map_err(|e| PipelineError::Artifact {
            path: self.ws.manifest_path("evaluate"),
            message: e.to_string(),
        })
    }

    pub fn outlook(&self, horizon: Horizon) -> Result<Manifest, PipelineError> {
        self.require("train")?;
        self.require("features")?;
        let model = self.load_model(horizon, self.config.outlook_model)?;
        let (_, rows) = read_feature_csv(&self.ws.stage_dir("features").join(FEATURES_FILE))?;
        let (builder, _) = self.load_builder()?;
        let max_missing = self.config.max_missing_fraction;

        let mut by_date: BTreeMap<NaiveDate, BTreeMap<String, f64>> = BTreeMap::new();
        for r in &rows {
            if missing_fraction(r) > max_missing {
                continue;
            }
            by_date.entry(r.as_of).or_default().insert(r.symbol.clone(), model.predict_raw(&r.values)?);
        }
        let symbols: Vec<String> = builder.symbols().into_iter().map(String::from).collect();
        let mut forecasts: Vec<MarketForecast> = Vec::new();
        let mut stock_lines = Vec::new();
        for (date, probs) in &by_date {
            let universe: Vec<UniverseMember> = symbols
                .iter()
                .filter_map(|s| {
                    let snap = builder.snapshot(s, *date).ok()?;
                    Some(UniverseMember {
                        symbol: s.clone(),
                        market_cap: snap.market_cap,
                        probability: probs.get(s).copied(),
                    })
                })
                .collect();
            for m in &universe {
                stock_lines.push(format!("{date},{},{},{}", m.symbol, m.market_cap, fmt_opt(m.probability)));
            }
            match market_probability(*date, horizon, &universe) {
                Ok(f) => forecasts.push(f),
                Err(OutlookError::EmptyUniverse) => log::warn!("{date}: no stock has a prediction"),
                Err(e) => return Err(e.into()),
            }
        }
        let mut w = StageWriter::begin(&self.ws, "outlook")?;
        w.write("forecasts.csv", forecasts_csv(&forecasts).as_bytes())?;
        w.write("stock_predictions.csv", csv_text("date,symbol,market_cap,probability", stock_lines).as_bytes())?;
        w.write_json("forecasts.json", &forecasts)?;
        w.finish(
            self.config_hash("outlook"),
            None,
            json!({ "horizon": horizon, "model": self.config.outlook_model.as_str(), "dates": forecasts.len() }),
            self.upstream_hashes(&["train", "features"])?,
        )
    }

    fn read_stock_predictions(&self) -> Result<BTreeMap<NaiveDate, Vec<(String, f64)>>, PipelineError> {
        let path = self.ws.stage_dir("outlook").join("stock_predictions.csv");
        let mut r = csv::Reader::from_path(&path).map_err(|e| PipelineError::Artifact {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let mut out: BTreeMap<NaiveDate, Vec<(String, f64)>> = BTreeMap::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| PipelineError::Artifact {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if rec[3].is_empty() {
                continue;
            }
            let bad = |m: String| PipelineError::Artifact { path: path.clone(), message: m };
            let date: NaiveDate = rec[0].parse().map_err(|_| bad(format!("bad date {:?}", &rec[0])))?;
            let p: f64 = rec[3].parse().map_err(|_| bad(format!("bad probability {:?}", &rec[3])))?;
            out.entry(date).or_default().push((rec[1].to_string(), p));
        }
        Ok(out)
    }

    pub fn backtest(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<Manifest, PipelineError> {
        let outlook = self.require("outlook")?;
        self.require("dataset")?;
        let horizon: Horizon = serde_json::from_value(outlook.params["horizon"].clone()).map_err(|e| {
            PipelineError::Artifact {
                path: self.ws.manifest_path("outlook"),
                message: e.to_string(),
            }
        })?;
        let forecasts: Vec<MarketForecast> = read_json(&self.ws.stage_dir("outlook").join("forecasts.json"))?;
        let series: BTreeMap<NaiveDate, f64> = forecasts.iter().map(|f| (f.as_of, f.p_market)).collect();
        let predictions = self.read_stock_predictions()?;
        let inputs = MarketInputs::read(&self.config.paths.fixtures)?;
        let m = &inputs.macro_data;
        let gold: DatedSeries = m
            .gold_usd
            .iter()
            .filter_map(|(d, g)| m.usd_irr.get(d).map(|fx| (d, g * fx)))
            .collect();
        let assets = AssetSeries {
            gold,
            bond: m.bond_index(),
            stock: m.market_index.clone(),
        };

        let boundary = self.split_summary(horizon)?.boundary;
        let first_after = boundary.and_then(|b| series.keys().find(|d| **d > b).copied());
        let from = from
            .or(self.config.backtest.from)
            .or(first_after)
            .or_else(|| series.keys().next().copied());
        let to = to.or(self.config.backtest.to).or_else(|| series.keys().last().copied());
        let (Some(from), Some(to)) = (from, to) else {
            return Err(PipelineError::Config("no market forecasts to backtest".into()));
        };
        let strategy_cfg = &self.config.strategy;
        let strategy = run_backtest(&series, &assets, &inputs.inflation, strategy_cfg, from, to)?;
        let growth_only =
            run_fixed_weights(strategy_cfg.growth_weights, &assets, &inputs.inflation, strategy_cfg, from, to)?;
        let defensive_only =
            run_fixed_weights(strategy_cfg.defensive_weights, &assets, &inputs.inflation, strategy_cfg, from, to)?;
        let stock_prices: BTreeMap<String, DatedSeries> = inputs
            .prices
            .iter()
            .map(|(s, h)| (s.clone(), h.adjusted_close().clone()))
            .collect();
        let dates = month_grid(from, to, strategy_cfg.rebalance_months.max(1));
        let top_k = run_top_k(&predictions, &stock_prices, &dates, self.config.backtest.top_k)
            .into_iter()
            .map(|p| -> Result<TopKRow, PipelineError> {
                let inflation = inflation_over(&inputs.inflation, p.start, p.end);
                let real = p.nominal_return.map(|n| real_return(n, inflation)).transpose()?;
                Ok(TopKRow {
                    start: p.start,
                    end: p.end,
                    members: p.portfolio.members.iter().map(|(s, _)| s.clone()).collect(),
                    degenerate: p.portfolio.degenerate,
                    nominal_return: p.nominal_return,
                    inflation,
                    real_return: real,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let results = BacktestResults {
            horizon,
            from,
            to,
            strategy,
            growth_only,
            defensive_only,
            top_k,
        };

        let mut w = StageWriter::begin(&self.ws, "backtest")?;
        w.write("strategy.csv", results.strategy.to_csv().as_bytes())?;
        w.write("growth_only.csv", results.growth_only.to_csv().as_bytes())?;
        w.write("defensive_only.csv", results.defensive_only.to_csv().as_bytes())?;
        let top_lines = results.top_k.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.start,
                r.end,
                r.members.join(";"),
                r.degenerate,
                fmt_opt(r.nominal_return),
                r.inflation,
                fmt_opt(r.real_return)
            )
        });
        w.write(
            "top_k.csv",
            csv_text("start,end,members,degenerate,nominal_return,inflation,real_return", top_lines).as_bytes(),
        )?;
        w.write_json("results.json", &results)?;
        let mut input_hashes = self.upstream_hashes(&["outlook", "dataset"])?;
        input_hashes.extend(self.fixture_hashes(&[fixtures::MACRO_FILE, fixtures::INFLATION_FILE, fixtures::PRICES_FILE])?);
        w.finish(
            self.config_hash("backtest"),
            None,
            json!({
                "horizon": horizon,
                "from": from,
                "to": to,
                "missing_forecasts": results.strategy.missing_forecasts,
            }),
            input_hashes,
        )
    }

    pub fn report(&self) -> Result<Manifest, PipelineError> {
        self.require("evaluate")?;
        self.require("backtest")?;
        let eval_dir = self.ws.stage_dir("evaluate");
        let accuracy = fs::read(eval_dir.join("accuracy.csv")).map_err(io_err(&eval_dir))?;
        let averages = fs::read(eval_dir.join("averages.csv")).map_err(io_err(&eval_dir))?;
        let results: BacktestResults = read_json(&self.ws.stage_dir("backtest").join("results.json"))?;
        let forecast_path = self.ws.stage_dir("outlook").join("forecasts.csv");
        let forecasts = fs::read(&forecast_path).map_err(io_err(&forecast_path))?;

        let mut w = StageWriter::begin(&self.ws, "report")?;
        w.write("accuracy_table.csv", &accuracy)?;
        w.write("accuracy_averages.csv", &averages)?;
        w.write("market_forecast.csv", &forecasts)?;

        let header = "start,end,strategy,growth_only,defensive_only,top_k";
        let period = |real: bool| {
            let pick = |r: &crate::backtest::PeriodRow| if real { r.real_return } else { r.nominal_return };
            results
                .strategy
                .rows
                .iter()
                .zip(&results.growth_only.rows)
                .zip(&results.defensive_only.rows)
                .zip(&results.top_k)
                .map(|(((s, g), d), t)| {
                    let tk = if real { t.real_return } else { t.nominal_return };
                    format!("{},{},{},{},{},{}", s.start, s.end, pick(s), pick(g), pick(d), fmt_opt(tk))
                })
                .collect::<Vec<_>>()
        };
        w.write("returns_nominal.csv", csv_text(header, period(false)).as_bytes())?;
        w.write("returns_real.csv", csv_text(header, period(true)).as_bytes())?;

        let cumulative = |real: bool| {
            let mut growth = [1.0f64; 4];
            let mut lines = vec![format!("{},0,0,0,0", results.from)];
            for (((s, g), d), t) in results
                .strategy
                .rows
                .iter()
                .zip(&results.growth_only.rows)
                .zip(&results.defensive_only.rows)
                .zip(&results.top_k)
            {
                let pick = |r: &crate::backtest::PeriodRow| if real { r.real_return } else { r.nominal_return };
                // a period without any priced top-k member holds cash
                let tk = if real { t.real_return } else { t.nominal_return };
                let tk = tk.unwrap_or(if real { 1.0 / (1.0 + t.inflation) - 1.0 } else { 0.0 });
                for (acc, r) in growth.iter_mut().zip([pick(s), pick(g), pick(d), tk]) {
                    *acc *= 1.0 + r;
                }
                lines.push(format!(
                    "{},{},{},{},{}",
                    s.end,
                    growth[0] - 1.0,
                    growth[1] - 1.0,
                    growth[2] - 1.0,
                    growth[3] - 1.0
                ));
            }
            lines
        };
        let cum_header = "date,strategy,growth_only,defensive_only,top_k";
        w.write("cumulative_nominal.csv", csv_text(cum_header, cumulative(false)).as_bytes())?;
        w.write("cumulative_real.csv", csv_text(cum_header, cumulative(true)).as_bytes())?;

        let table = self.accuracy_table()?;
        let mut summary = String::new();
        let _ = writeln!(summary, "horizon used for allocation: {} months", results.horizon);
        let _ = writeln!(summary, "backtest window: {} to {}", results.from, results.to);
        for r in table.averages() {
            let _ = writeln!(
                summary,
                "{}: mean train accuracy {:.2}%, mean test accuracy {:.2}%",
                r.model.label(),
                r.train * 100.0,
                r.test * 100.0
            );
        }
        let _ = writeln!(
            summary,
            "strategy cumulative return: nominal {:.4}, real {:.4}",
            results.strategy.cumulative_nominal(),
            results.strategy.cumulative_real()
        );
        let _ = writeln!(
            summary,
            "growth-only cumulative nominal {:.4}; defensive-only cumulative nominal {:.4}",
            results.growth_only.cumulative_nominal(),
            results.defensive_only.cumulative_nominal()
        );
        if !results.strategy.missing_forecasts.is_empty() {
            let _ = writeln!(summary, "periods without a forecast: {}", results.strategy.missing_forecasts.len());
        }
        w.write("summary.txt", summary.as_bytes())?;
        w.finish(
            self.config_hash("report"),
            None,
            serde_json::Value::Null,
            self.upstream_hashes(&["evaluate", "backtest"])?,
        )
    }

    /// Every stage from ingest to report.
    pub fn run_all(&self, outlook_horizon: Horizon) -> Result<(), PipelineError> {
        self.ingest()?;
        self.clean()?;
        self.features()?;
        self.dataset()?;
        self.train()?;
        self.evaluate()?;
        self.outlook(outlook_horizon)?;
        self.backtest(None, None)?;
        self.report()?;
        Ok(())
    }
}
