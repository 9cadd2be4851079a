//! File-backed document store for raw statement announcements.
//!
//! Layout under the store root:
//!
//! ```text
//! docs/<symbol>/<statement_type>/<period_end>_r<revision>.json
//! ```
//!
//! Each file holds the announcement metadata and the report body exactly as
//! ingested. Writes go through a temp file and a rename, so readers never see
//! partial documents. The store assumes a single writer.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("malformed metadata: {0}")]
    MalformedMetadata(String),
    #[error("revision {revision} of {symbol} {statement_type} {period_end} already stored with a different body")]
    DuplicateRevision {
        symbol: String,
        statement_type: StatementType,
        period_end: NaiveDate,
        revision: u32,
    },
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("store i/o at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt document {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementType {
    BalanceSheet,
    IncomeStatement,
    CashFlow,
}

impl StatementType {
    pub const ALL: [StatementType; 3] = [
        StatementType::BalanceSheet,
        StatementType::IncomeStatement,
        StatementType::CashFlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatementType::BalanceSheet => "balance_sheet",
            StatementType::IncomeStatement => "income_statement",
            StatementType::CashFlow => "cash_flow",
        }
    }
}

impl fmt::Display for StatementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatementType {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        StatementType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| StoreError::MalformedMetadata(format!("unknown statement type {s:?}")))
    }
}

/// Metadata describing one published statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub announcement_id: String,
    pub symbol: String,
    pub statement_type: StatementType,
    pub period_end: NaiveDate,
    pub publish_date: NaiveDate,
    pub format_version: u16,
    pub revision: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRow {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub name: String,
    pub rows: Vec<RawRow>,
}

/// A statement body in its original semi-structured form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReport {
    pub announcement_id: String,
    pub tables: Vec<RawTable>,
}

impl RawReport {
    pub fn rows(&self) -> impl Iterator<Item = (&str, &RawRow)> {
        self.tables
            .iter()
            .flat_map(|t| t.rows.iter().map(move |r| (t.name.as_str(), r)))
    }
}

/// One line of the line-delimited fixture format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub symbol: String,
    pub statement_type: StatementType,
    pub period_end: NaiveDate,
    pub publish_date: NaiveDate,
    pub format_version: u16,
    pub revision: u32,
    pub tables: Vec<RawTable>,
}

/// Metadata plus body, as persisted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredReport {
    pub announcement: Announcement,
    pub report: RawReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReportKey {
    pub statement_type: StatementType,
    pub period_end: NaiveDate,
    pub revision: u32,
}

/// Inclusive bounds on `period_end`; `None` leaves a side open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PeriodRange {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

impl PeriodRange {
    pub const ALL: PeriodRange = PeriodRange { from: None, to: None };

    pub fn between(from: NaiveDate, to: NaiveDate) -> Self {
        Self {
            from: Some(from),
            to: Some(to),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from.is_none_or(|f| date >= f) && self.to.is_none_or(|t| date <= t)
    }
}

/// Deterministic id derived from the uniqueness key.
pub fn announcement_id(
    symbol: &str,
    statement_type: StatementType,
    period_end: NaiveDate,
    revision: u32,
) -> String {
    let mut h = Sha256::new();
    h.update(format!("{symbol}|{statement_type}|{period_end}|{revision}").as_bytes());
    let digest = h.finalize();
    format!("ann-{}", &hex::encode(digest)[..16])
}

fn validate_symbol(symbol: &str) -> Result<()> {
    let bad = symbol.is_empty()
        || symbol.trim() != symbol
        || symbol == "."
        || symbol == ".."
        || symbol
            .chars()
            .any(|c| c.is_control() || matches!(c, '/' | '\\' | ':' | '|'));
    if bad {
        return Err(StoreError::MalformedMetadata(format!(
            "symbol {symbol:?} is empty or contains reserved characters"
        )));
    }
    Ok(())
}

fn validate(record: &FixtureRecord) -> Result<()> {
    validate_symbol(&record.symbol)?;
    if record.publish_date < record.period_end {
        return Err(StoreError::MalformedMetadata(format!(
            "{} {}: publish date {} precedes period end {}",
            record.symbol, record.statement_type, record.publish_date, record.period_end
        )));
    }
    if record.tables.iter().all(|t| t.rows.is_empty()) {
        return Err(StoreError::MalformedMetadata(format!(
            "{} {} {}: empty report body",
            record.symbol, record.statement_type, record.period_end
        )));
    }
    if let Some(row) = record
        .tables
        .iter()
        .flat_map(|t| &t.rows)
        .find(|r| r.label.trim().is_empty())
    {
        return Err(StoreError::MalformedMetadata(format!(
            "{} {} {}: row with value {:?} has no label",
            record.symbol, record.statement_type, record.period_end, row.value
        )));
    }
    Ok(())
}

/// Embedded document store rooted at a directory.
#[derive(Debug)]
pub struct ReportStore {
    root: PathBuf,
    index: BTreeMap<String, BTreeMap<ReportKey, PathBuf>>,
}

impl ReportStore {
    /// Open (creating if needed) a store rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let docs = root.join("docs");
        fs::create_dir_all(&docs).map_err(io_err(&docs))?;
        let mut index: BTreeMap<String, BTreeMap<ReportKey, PathBuf>> = BTreeMap::new();
        for sym_entry in fs::read_dir(&docs).map_err(io_err(&docs))? {
            let sym_entry = sym_entry.map_err(io_err(&docs))?;
            let symbol = sym_entry.file_name().to_string_lossy().into_owned();
            for st in StatementType::ALL {
                let dir = sym_entry.path().join(st.as_str());
                if !dir.is_dir() {
                    continue;
                }
                for doc in fs::read_dir(&dir).map_err(io_err(&dir))? {
                    let path = doc.map_err(io_err(&dir))?.path();
                    if let Some(key) = parse_doc_name(st, &path) {
                        index.entry(symbol.clone()).or_default().insert(key, path);
                    }
                }
            }
        }
        Ok(Self { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.index.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn doc_path(&self, symbol: &str, key: ReportKey) -> PathBuf {
        self.root
            .join("docs")
            .join(symbol)
            .join(key.statement_type.as_str())
            .join(format!("{}_r{}.json", key.period_end, key.revision))
    }

    /// Store one announcement. Re-ingesting an identical document is a no-op
    /// returning the same id.
    pub fn ingest_announcement(&mut self, record: &FixtureRecord) -> Result<String> {
        validate(record)?;
        let key = ReportKey {
            statement_type: record.statement_type,
            period_end: record.period_end,
            revision: record.revision,
        };
        let id = announcement_id(
            &record.symbol,
            record.statement_type,
            record.period_end,
            record.revision,
        );
        let stored = StoredReport {
            announcement: Announcement {
                announcement_id: id.clone(),
                symbol: record.symbol.clone(),
                statement_type: record.statement_type,
                period_end: record.period_end,
                publish_date: record.publish_date,
                format_version: record.format_version,
                revision: record.revision,
            },
            report: RawReport {
                announcement_id: id.clone(),
                tables: record.tables.clone(),
            },
        };
        if let Some(path) = self.index.get(&record.symbol).and_then(|m| m.get(&key)) {
            let existing = read_doc(path)?;
            if existing == stored {
                return Ok(id);
            }
            return Err(StoreError::DuplicateRevision {
                symbol: record.symbol.clone(),
                statement_type: record.statement_type,
                period_end: record.period_end,
                revision: record.revision,
            });
        }
        let path = self.doc_path(&record.symbol, key);
        let dir = path.parent().expect("doc path has a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let bytes = serde_json::to_vec_pretty(&stored).expect("stored report serializes");
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, &bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        self.index
            .entry(record.symbol.clone())
            .or_default()
            .insert(key, path);
        Ok(id)
    }

    /// Ingest every record of a line-delimited fixture file, in file order.
    pub fn ingest_fixture_file(&mut self, path: impl AsRef<Path>) -> Result<Vec<String>> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut ids = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                StoreError::MalformedMetadata(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            ids.push(self.ingest_announcement(&record)?);
        }
        Ok(ids)
    }

    /// Reports for one symbol and statement type whose `period_end` falls in
    /// `range`, sorted by `(period_end, revision)`. Unless `all_revisions` is
    /// set only the highest revision of each period is returned.
    pub fn fetch_reports(
        &self,
        symbol: &str,
        statement_type: StatementType,
        range: PeriodRange,
        all_revisions: bool,
    ) -> Result<Vec<StoredReport>> {
        let docs = self
            .index
            .get(symbol)
            .ok_or_else(|| StoreError::UnknownSymbol(symbol.to_string()))?;
        let mut selected: Vec<&PathBuf> = Vec::new();
        let mut last_period: Option<NaiveDate> = None;
        for (key, path) in docs
            .iter()
            .filter(|(k, _)| k.statement_type == statement_type && range.contains(k.period_end))
        {
            // keys iterate in (period_end, revision) order within a statement type
            if !all_revisions && last_period == Some(key.period_end) {
                selected.pop();
            }
            selected.push(path);
            last_period = Some(key.period_end);
        }
        selected.into_iter().map(|p| read_doc(p)).collect()
    }

    /// Every stored document of a symbol across statement types, all revisions.
    pub fn fetch_all(&self, symbol: &str) -> Result<Vec<StoredReport>> {
        let docs = self
            .index
            .get(symbol)
            .ok_or_else(|| StoreError::UnknownSymbol(symbol.to_string()))?;
        docs.values().map(|p| read_doc(p)).collect()
    }
}

fn parse_doc_name(statement_type: StatementType, path: &Path) -> Option<ReportKey> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".json")?;
    let (date, rev) = stem.split_once("_r")?;
    Some(ReportKey {
        statement_type,
        period_end: NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?,
        revision: rev.parse().ok()?,
    })
}

fn read_doc(path: &Path) -> Result<StoredReport> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt {
        path: path.to_path_buf(),
        source,
    })
}
