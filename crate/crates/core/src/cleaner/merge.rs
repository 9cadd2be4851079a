use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{CleanError, CleanReport};
use crate::dataset::apply_publication_lag;
use crate::store::StatementType;

/// Mean Gregorian quarter length in days.
const QUARTER_DAYS: f64 = 365.25 / 4.0;

/// Missing quarters between two consecutive reports. Never interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after: NaiveDate,
    pub before: NaiveDate,
    pub missing_quarters: u32,
}

/// Chronological per-stock statements, one report per (statement type, period).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatementSeries {
    pub symbol: String,
    /// Highest revision of every period, strictly increasing `period_end`.
    pub reports: BTreeMap<StatementType, Vec<CleanReport>>,
    /// Lower revisions, kept so point-in-time readers can see what was
    /// published before a restatement.
    pub superseded: BTreeMap<StatementType, Vec<CleanReport>>,
    pub gaps: BTreeMap<StatementType, Vec<Gap>>,
}

impl StatementSeries {
    pub fn reports(&self, statement_type: StatementType) -> &[CleanReport] {
        self.reports
            .get(&statement_type)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn gaps(&self, statement_type: StatementType) -> &[Gap] {
        self.gaps.get(&statement_type).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.reports.values().all(Vec::is_empty)
    }

    /// Reports usable at `as_of`: for each period the highest revision whose
    /// publication date plus `lag_months` is on or before `as_of`. Sorted by period.
    pub fn visible(
        &self,
        statement_type: StatementType,
        as_of: NaiveDate,
        lag_months: u32,
    ) -> Vec<&CleanReport> {
        let mut best: BTreeMap<NaiveDate, &CleanReport> = BTreeMap::new();
        let candidates = self
            .reports(statement_type)
            .iter()
            .chain(self.superseded.get(&statement_type).into_iter().flatten());
        for r in candidates {
            if apply_publication_lag(r.publish_date, lag_months) > as_of {
                continue;
            }
            match best.get(&r.period_end) {
                Some(b) if b.revision >= r.revision => {}
                _ => {
                    best.insert(r.period_end, r);
                }
            }
        }
        best.into_values().collect()
    }
}

fn quarters_between(a: NaiveDate, b: NaiveDate) -> u32 {
    ((b - a).num_days() as f64 / QUARTER_DAYS).round().max(0.0) as u32
}

/// Merge cleaned quarterly reports of one stock into a series.
pub fn merge_quarterlies(reports: Vec<CleanReport>) -> Result<StatementSeries, CleanError> {
    let mut symbols: Vec<String> = reports.iter().map(|r| r.symbol.clone()).collect();
    symbols.sort();
    symbols.dedup();
    if symbols.len() > 1 {
        return Err(CleanError::MixedSymbols(symbols));
    }
    let mut series = StatementSeries {
        symbol: symbols.pop().unwrap_or_default(),
        ..Default::default()
    };

    let mut by_type: BTreeMap<StatementType, BTreeMap<NaiveDate, Vec<CleanReport>>> =
        BTreeMap::new();
    for r in reports {
        by_type
            .entry(r.statement_type)
            .or_default()
            .entry(r.period_end)
            .or_default()
            .push(r);
    }
    for (st, periods) in by_type {
        let mut latest = Vec::with_capacity(periods.len());
        let mut older = Vec::new();
        for (_, mut revs) in periods {
            // stable sort keeps input order among equal revisions; last one wins
            revs.sort_by_key(|r| r.revision);
            let top = revs.pop().expect("period group is non-empty");
            if let Some(dup) = revs.last() {
                if dup.revision == top.revision {
                    revs.pop();
                }
            }
            older.extend(revs);
            latest.push(top);
        }
        let gaps: Vec<Gap> = latest
            .windows(2)
            .filter_map(|w| {
                let q = quarters_between(w[0].period_end, w[1].period_end);
                (q > 1).then(|| Gap {
                    after: w[0].period_end,
                    before: w[1].period_end,
                    missing_quarters: q - 1,
                })
            })
            .collect();
        if !gaps.is_empty() {
            series.gaps.insert(st, gaps);
        }
        if !older.is_empty() {
            series.superseded.insert(st, older);
        }
        series.reports.insert(st, latest);
    }
    Ok(series)
}
