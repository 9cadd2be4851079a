//! Calendar helpers and dated series lookups shared by every stage.
//!
//! All month arithmetic clamps to the last valid day of the target month, so
//! `2020-01-31 + 1 month = 2020-02-29`.

use std::collections::BTreeMap;

use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

/// Shift `date` by `months` calendar months (negative goes back), clamping the day.
pub fn add_months(date: NaiveDate, months: i32) -> NaiveDate {
    let shifted = if months >= 0 {
        date.checked_add_months(Months::new(months as u32))
    } else {
        date.checked_sub_months(Months::new(months.unsigned_abs()))
    };
    shifted.expect("date arithmetic stays inside chrono's representable range")
}

pub fn add_days(date: NaiveDate, days: i64) -> NaiveDate {
    let shifted = if days >= 0 {
        date.checked_add_days(Days::new(days as u64))
    } else {
        date.checked_sub_days(Days::new(days.unsigned_abs()))
    };
    shifted.expect("date arithmetic stays inside chrono's representable range")
}

pub fn is_weekday(date: NaiveDate) -> bool {
    date.weekday().number_from_monday() <= 5
}

pub fn last_day_of_month(year: i32, month: u32) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    add_days(first_next, -1)
}

pub fn first_of_month(date: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(date.year(), date.month(), 1).expect("valid month")
}

/// Calendar-quarter start dates (Jan/Apr/Jul/Oct 1st) in `[from, to]`.
pub fn quarter_starts(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let first_month = ((from.month0() / 3) * 3) + 1;
    let mut d = NaiveDate::from_ymd_opt(from.year(), first_month, 1).expect("valid month");
    if d < from {
        d = add_months(d, 3);
    }
    while d <= to {
        out.push(d);
        d = add_months(d, 3);
    }
    out
}

/// Dates stepping `step_months` from `start` while `<= end`. Each date is
/// computed from `start` directly so clamping never accumulates.
pub fn month_grid(start: NaiveDate, end: NaiveDate, step_months: u32) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut k = 0i32;
    loop {
        let d = add_months(start, k * step_months as i32);
        if d > end {
            break;
        }
        out.push(d);
        k += 1;
    }
    out
}

/// A date-indexed series of observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatedSeries {
    points: BTreeMap<NaiveDate, f64>,
}

impl DatedSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: impl IntoIterator<Item = (NaiveDate, f64)>) -> Self {
        Self {
            points: points.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, date: NaiveDate, value: f64) {
        self.points.insert(date, value);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.points.get(&date).copied()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.points.keys().next().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.points.keys().next_back().copied()
    }

    /// Latest observation dated on or before `date`.
    pub fn at_or_before(&self, date: NaiveDate) -> Option<(NaiveDate, f64)> {
        self.points.range(..=date).next_back().map(|(d, v)| (*d, *v))
    }

    /// Like [`Self::at_or_before`] but rejects observations older than
    /// `max_staleness_days`.
    pub fn at_or_before_within(
        &self,
        date: NaiveDate,
        max_staleness_days: i64,
    ) -> Option<(NaiveDate, f64)> {
        self.at_or_before(date)
            .filter(|(d, _)| (date - *d).num_days() <= max_staleness_days)
    }

    /// Observations with `after < date <= until`.
    pub fn window(
        &self,
        after: NaiveDate,
        until: NaiveDate,
    ) -> impl DoubleEndedIterator<Item = (NaiveDate, f64)> + '_ {
        use std::ops::Bound::{Excluded, Included};
        let range = if after < until {
            Some(self.points.range((Excluded(after), Included(until))))
        } else {
            None
        };
        range.into_iter().flatten().map(|(d, v)| (*d, *v))
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (NaiveDate, f64)> + '_ {
        self.points.iter().map(|(d, v)| (*d, *v))
    }

    /// Restrict to observations dated on or before `date`.
    pub fn truncated(&self, date: NaiveDate) -> Self {
        Self {
            points: self.points.range(..=date).map(|(d, v)| (*d, *v)).collect(),
        }
    }
}

impl FromIterator<(NaiveDate, f64)> for DatedSeries {
    fn from_iter<T: IntoIterator<Item = (NaiveDate, f64)>>(iter: T) -> Self {
        Self::from_points(iter)
    }
}
