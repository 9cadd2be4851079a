//! Report cleaning: number normalization, mapping onto the canonical chart of
//! accounts, and merging quarterly reports into per-stock series.

pub mod chart;
pub mod mapping;
pub mod merge;
pub mod number;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chart::{mandatory_items, LineItem};
pub use mapping::{check_identities, map_to_unified, CleanOutcome, MappingRegistry, QuarantinedRow};
pub use merge::{merge_quarterlies, Gap, StatementSeries};
pub use number::{normalize_label, normalize_number, NumberError};

use crate::store::StatementType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CleanError {
    #[error("no mapping table for format version {0}")]
    UnknownFormatVersion(u16),
    #[error("{symbol} {statement_type} {period_end}: mandatory item {item} missing")]
    MandatoryItemMissing {
        symbol: String,
        statement_type: StatementType,
        period_end: NaiveDate,
        item: LineItem,
    },
    #[error("identity {identity} violated: stated {stated}, derived {derived}")]
    IdentityViolation {
        identity: &'static str,
        stated: f64,
        derived: f64,
    },
    #[error("reports for several symbols passed to one series: {0:?}")]
    MixedSymbols(Vec<String>),
    #[error("mapping table: {0}")]
    MappingTable(String),
}

/// One statement expressed in canonical line items (standalone-quarter figures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub symbol: String,
    pub statement_type: StatementType,
    pub period_end: NaiveDate,
    pub publish_date: NaiveDate,
    pub revision: u32,
    pub format_version: u16,
    pub items: BTreeMap<LineItem, f64>,
    /// Items the source explicitly marked as missing.
    #[serde(default)]
    pub missing: BTreeSet<LineItem>,
}

impl CleanReport {
    pub fn get(&self, item: LineItem) -> Option<f64> {
        self.items.get(&item).copied()
    }
}
