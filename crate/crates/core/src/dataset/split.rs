use chrono::NaiveDate;

use super::{AsOf, DatasetError};

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    /// Latest as-of date in the train part.
    pub boundary: NaiveDate,
    pub warning: Option<String>,
}

/// Sort rows by as-of date (stable) and put the first `ceil(fraction * n)`
/// into train. Rows sharing the boundary date all go to train.
pub fn chronological_split<T: AsOf>(
    mut rows: Vec<T>,
    train_fraction: f64,
) -> Result<Split<T>, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidTrainFraction(train_fraction));
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    rows.sort_by_key(AsOf::as_of);
    let n = rows.len();
    // guard against 0.7 * 10 = 7.000000000000001 style round-up
    let mut cut = ((train_fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let boundary = rows[cut - 1].as_of();
    while cut < n && rows[cut].as_of() == boundary {
        cut += 1;
    }
    let test = rows.split_off(cut);
    let warning = test.is_empty().then(|| {
        format!("all {n} rows fall on or before {boundary}; test set is empty")
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(Split {
        train: rows,
        test,
        boundary,
        warning,
    })
}
