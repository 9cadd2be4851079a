//! Format-version mapping tables and the raw-to-unified mapper.
//!
//! A mapping table is a CSV file with the header
//! `format_version,source_label,canonical_code`. Labels are compared after
//! [`normalize_label`]. The built-in tables (versions 1-3) ship inside the
//! crate; further versions are added by dropping a CSV into a directory and
//! loading it with [`MappingRegistry::load_dir`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chart::{mandatory_items, LineItem};
use super::number::{normalize_label, normalize_number, NumberError};
use super::{CleanError, CleanReport};
use crate::store::{Announcement, RawReport};

const BUILTIN: &[(&str, &str)] = &[
    ("v1.csv", include_str!("../../mappings/v1.csv")),
    ("v2.csv", include_str!("../../mappings/v2.csv")),
    ("v3.csv", include_str!("../../mappings/v3.csv")),
];

/// Relative tolerance of the accounting identity checks.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Deserialize)]
struct MappingLine {
    format_version: u16,
    source_label: String,
    canonical_code: String,
}

#[derive(Debug, Clone, Default)]
pub struct MappingRegistry {
    tables: BTreeMap<u16, HashMap<String, LineItem>>,
}

impl MappingRegistry {
    /// Registry holding the tables embedded in the crate.
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        for (name, text) in BUILTIN {
            reg.add_csv(name, text.as_bytes())
                .expect("embedded mapping tables are well formed");
        }
        reg
    }

    /// Add every `*.csv` mapping table found in `dir` (sorted by file name).
    pub fn load_dir(&mut self, dir: impl AsRef<Path>) -> Result<(), CleanError> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| CleanError::MappingTable(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        for p in paths {
            let bytes = fs::read(&p)
                .map_err(|e| CleanError::MappingTable(format!("{}: {e}", p.display())))?;
            self.add_csv(&p.display().to_string(), &bytes)?;
        }
        Ok(())
    }

    pub fn add_csv(&mut self, source: &str, bytes: &[u8]) -> Result<(), CleanError> {
        let mut rdr = csv::Reader::from_reader(bytes);
        for (i, line) in rdr.deserialize::<MappingLine>().enumerate() {
            let line =
                line.map_err(|e| CleanError::MappingTable(format!("{source} row {}: {e}", i + 1)))?;
            let item: LineItem = line
                .canonical_code
                .parse()
                .map_err(|e| CleanError::MappingTable(format!("{source} row {}: {e}", i + 1)))?;
            let label = normalize_label(&line.source_label);
            let table = self.tables.entry(line.format_version).or_default();
            match table.get(&label) {
                Some(existing) if *existing != item => {
                    return Err(CleanError::MappingTable(format!(
                        "{source}: label {:?} maps to both {existing} and {item} in version {}",
                        line.source_label, line.format_version
                    )));
                }
                _ => {
                    table.insert(label, item);
                }
            }
        }
        Ok(())
    }

    pub fn versions(&self) -> impl Iterator<Item = u16> + '_ {
        self.tables.keys().copied()
    }

    pub fn lookup(&self, format_version: u16, label: &str) -> Option<LineItem> {
        self.tables
            .get(&format_version)?
            .get(&normalize_label(label))
            .copied()
    }

    /// Source labels of one version, keyed by canonical item. When several
    /// labels map to one item the lexicographically first is returned.
    pub fn labels_for(&self, format_version: u16) -> Option<BTreeMap<LineItem, String>> {
        let table = self.tables.get(&format_version)?;
        let mut out: BTreeMap<LineItem, String> = BTreeMap::new();
        for (label, item) in table {
            let slot = out.entry(*item).or_insert_with(|| label.clone());
            if label < slot {
                *slot = label.clone();
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedRow {
    pub table: String,
    pub label: String,
    pub value: String,
    pub reason: String,
}

/// Result of mapping one raw report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanOutcome {
    pub report: CleanReport,
    /// Labels with no entry in the version's mapping table.
    pub unmapped: Vec<String>,
    /// Mapped rows whose value could not be parsed.
    pub quarantined: Vec<QuarantinedRow>,
}

fn identity_holds(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= IDENTITY_TOLERANCE * lhs.abs().max(rhs.abs())
}

/// Check the derivable identities on a set of items, returning the first violation.
pub fn check_identities(items: &BTreeMap<LineItem, f64>) -> Result<(), CleanError> {
    use LineItem::*;
    let get = |i: LineItem| items.get(&i).copied();
    if let (Some(rev), Some(cogs), Some(gp)) = (get(Revenue), get(Cogs), get(GrossProfit)) {
        if !identity_holds(gp, rev - cogs) {
            return Err(CleanError::IdentityViolation {
                identity: "gross_profit = revenue - cogs",
                stated: gp,
                derived: rev - cogs,
            });
        }
    }
    if let (Some(ca), Some(fa), Some(ta)) = (get(CurrentAssets), get(FixedAssets), get(TotalAssets))
    {
        let derived = ca + fa + get(OtherAssets).unwrap_or(0.0);
        if !identity_holds(ta, derived) {
            return Err(CleanError::IdentityViolation {
                identity: "total_assets = current_assets + fixed_assets + other_assets",
                stated: ta,
                derived,
            });
        }
    }
    Ok(())
}

/// Map a raw report onto the canonical chart of accounts.
pub fn map_to_unified(
    raw: &RawReport,
    announcement: &Announcement,
    registry: &MappingRegistry,
) -> Result<CleanOutcome, CleanError> {
    let version = announcement.format_version;
    if !registry.tables.contains_key(&version) {
        return Err(CleanError::UnknownFormatVersion(version));
    }
    let mut items = BTreeMap::new();
    let mut missing = BTreeSet::new();
    let mut unmapped = Vec::new();
    let mut quarantined = Vec::new();

    for (table, row) in raw.rows() {
        let Some(item) = registry.lookup(version, &row.label) else {
            unmapped.push(row.label.clone());
            continue;
        };
        let quarantine = |reason: String| QuarantinedRow {
            table: table.to_string(),
            label: row.label.clone(),
            value: row.value.clone(),
            reason,
        };
        match normalize_number(&row.value) {
            Ok(v) => match items.get(&item) {
                Some(prev) if *prev != v => {
                    quarantined.push(quarantine(format!("conflicting duplicate of {item}")))
                }
                Some(_) => {}
                None => {
                    items.insert(item, v);
                }
            },
            Err(NumberError::Missing) => {
                missing.insert(item);
            }
            Err(e @ NumberError::Unparseable(_)) => quarantined.push(quarantine(e.to_string())),
        }
    }
    for m in &missing {
        if items.contains_key(m) {
            quarantined.push(QuarantinedRow {
                table: String::new(),
                label: m.to_string(),
                value: String::new(),
                reason: format!("{m} both stated and marked missing"),
            });
        }
    }
    missing.retain(|m| !items.contains_key(m));

    for item in mandatory_items(announcement.statement_type) {
        if !items.contains_key(item) {
            return Err(CleanError::MandatoryItemMissing {
                symbol: announcement.symbol.clone(),
                statement_type: announcement.statement_type,
                period_end: announcement.period_end,
                item: *item,
            });
        }
    }
    check_identities(&items)?;

    Ok(CleanOutcome {
        report: CleanReport {
            symbol: announcement.symbol.clone(),
            statement_type: announcement.statement_type,
            period_end: announcement.period_end,
            publish_date: announcement.publish_date,
            revision: announcement.revision,
            format_version: version,
            items,
            missing,
        },
        unmapped,
        quarantined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{RawRow, RawTable, StatementType};
    use chrono::NaiveDate;

    fn ann(st: StatementType, version: u16) -> Announcement {
        Announcement {
            announcement_id: "a".into(),
            symbol: "X".into(),
            statement_type: st,
            period_end: NaiveDate::from_ymd_opt(2020, 3, 31).unwrap(),
            publish_date: NaiveDate::from_ymd_opt(2020, 4, 20).unwrap(),
            format_version: version,
            revision: 0,
        }
    }

    fn raw(rows: &[(&str, &str)]) -> RawReport {
        RawReport {
            announcement_id: "a".into(),
            tables: vec![RawTable {
                name: "t".into(),
                rows: rows
                    .iter()
                    .map(|(l, v)| RawRow {
                        label: l.to_string(),
                        value: v.to_string(),
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn vocabularies_of_two_versions_map_to_revenue() {
        let reg = MappingRegistry::builtin();
        assert_eq!(reg.lookup(1, "Net sales"), Some(LineItem::Revenue));
        assert_eq!(reg.lookup(2, "Operating revenue"), Some(LineItem::Revenue));
        assert_eq!(reg.lookup(3, "درآمدهاي عملياتي"), Some(LineItem::Revenue));
        assert_eq!(reg.lookup(2, "Net sales"), None);
    }

    #[test]
    fn gross_profit_identity_passes() {
        let reg = MappingRegistry::builtin();
        let out = map_to_unified(
            &raw(&[("Net sales", "100"), ("Cost of goods sold", "60"), ("Gross profit", "40")]),
            &ann(StatementType::IncomeStatement, 1),
            &reg,
        )
        .unwrap();
        assert_eq!(out.report.items[&LineItem::GrossProfit], 40.0);
        assert!(out.unmapped.is_empty() && out.quarantined.is_empty());
    }

    #[test]
    fn gross_profit_identity_violation() {
        let reg = MappingRegistry::builtin();
        let err = map_to_unified(
            &raw(&[("Net sales", "100"), ("Cost of goods sold", "60"), ("Gross profit", "45")]),
            &ann(StatementType::IncomeStatement, 1),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(err, CleanError::IdentityViolation { .. }));
    }

    #[test]
    fn missing_unmapped_and_quarantined_rows_are_separated() {
        let reg = MappingRegistry::builtin();
        let out = map_to_unified(
            &raw(&[
                ("Net sales", "1,000"),
                ("Interest expense", "—"),
                ("Net income", "12x"),
                ("Dividends declared", "5"),
            ]),
            &ann(StatementType::IncomeStatement, 1),
            &reg,
        )
        .unwrap();
        let r = &out.report;
        assert!(r.missing.contains(&LineItem::InterestExpense));
        assert!(!r.items.contains_key(&LineItem::InterestExpense));
        assert!(!r.items.contains_key(&LineItem::NetIncome));
        assert_eq!(out.quarantined.len(), 1);
        assert_eq!(out.unmapped, vec!["Dividends declared".to_string()]);
    }

    #[test]
    fn mandatory_and_version_errors() {
        let reg = MappingRegistry::builtin();
        let err = map_to_unified(
            &raw(&[("Net income", "5")]),
            &ann(StatementType::IncomeStatement, 1),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            CleanError::MandatoryItemMissing {
                item: LineItem::Revenue,
                ..
            }
        ));
        let err = map_to_unified(
            &raw(&[("Net sales", "5")]),
            &ann(StatementType::IncomeStatement, 9),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(err, CleanError::UnknownFormatVersion(9)));
    }

    #[test]
    fn new_version_from_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("v7.csv"),
            "format_version,source_label,canonical_code\n7,Turnover,revenue\n",
        )
        .unwrap();
        let mut reg = MappingRegistry::builtin();
        reg.load_dir(dir.path()).unwrap();
        let out = map_to_unified(
            &raw(&[("Turnover", "9")]),
            &ann(StatementType::IncomeStatement, 7),
            &reg,
        )
        .unwrap();
        assert_eq!(out.report.items[&LineItem::Revenue], 9.0);
    }

    #[test]
    fn conflicting_table_entries_are_rejected() {
        let mut reg = MappingRegistry::default();
        let err = reg
            .add_csv(
                "x",
                b"format_version,source_label,canonical_code\n1,Sales,revenue\n1,sales,cogs\n",
            )
            .unwrap_err();
        assert!(matches!(err, CleanError::MappingTable(_)));
    }
}
