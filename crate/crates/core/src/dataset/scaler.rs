//! Standard scaling with train-median imputation.
//!
//! Standard deviations use the population (1/n) convention.

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    /// Index in the unscaled row.
    pub source_index: usize,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    AllMissing,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: DropReason,
}

/// Per-column statistics fitted on train rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub input_columns: Vec<String>,
    pub columns: Vec<ColumnStats>,
    pub dropped: Vec<DroppedColumn>,
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Fit imputation and scaling statistics on `rows` (width = `columns.len()`).
pub fn fit_scaler(
    columns: &[String],
    rows: &[Vec<Option<f64>>],
) -> Result<ScalerParams, DatasetError> {
    if rows.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
        return Err(DatasetError::WidthMismatch {
            expected: columns.len(),
            got: bad.len(),
        });
    }
    let n = rows.len() as f64;
    let mut stats = Vec::new();
    let mut dropped = Vec::new();
    for (j, name) in columns.iter().enumerate() {
        let mut present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        if present.is_empty() {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: DropReason::AllMissing,
            });
            continue;
        }
        present.sort_by(f64::total_cmp);
        let med = median(&present);
        // imputing with the median keeps a constant column constant
        let constant = present.first() == present.last();
        let filled = || rows.iter().map(|r| r[j].unwrap_or(med));
        let mean = filled().sum::<f64>() / n;
        let var = filled().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if constant || !(std > 0.0) {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: DropReason::Constant,
            });
            continue;
        }
        stats.push(ColumnStats {
            name: name.clone(),
            source_index: j,
            median: med,
            mean,
            std,
        });
    }
    for d in &dropped {
        log::info!("scaler drops column {} ({:?})", d.name, d.reason);
    }
    Ok(ScalerParams {
        input_columns: columns.to_vec(),
        columns: stats,
        dropped,
    })
}

impl ScalerParams {
    pub fn output_columns(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Impute with train medians, then z-score with train moments.
    pub fn transform(&self, row: &[Option<f64>]) -> Result<Vec<f64>, DatasetError> {
        if row.len() != self.input_columns.len() {
            return Err(DatasetError::WidthMismatch {
                expected: self.input_columns.len(),
                got: row.len(),
            });
        }
        Ok(self
            .columns
            .iter()
            .map(|c| (row[c.source_index].unwrap_or(c.median) - c.mean) / c.std)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn population_moments() {
        let rows = vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)]];
        let p = fit_scaler(&names(1), &rows).unwrap();
        let c = &p.columns[0];
        assert_eq!(c.mean, 2.0);
        assert!((c.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let z: Vec<f64> = rows.iter().map(|r| p.transform(r).unwrap()[0]).collect();
        // -1 / sqrt(2/3) = -1.224744871391589...
        assert!((z[0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn constant_and_all_missing_columns_dropped() {
        let rows = vec![
            vec![Some(5.0), None, Some(1.0)],
            vec![Some(5.0), None, Some(2.0)],
        ];
        let p = fit_scaler(&names(3), &rows).unwrap();
        assert_eq!(p.output_columns(), vec!["c2".to_string()]);
        assert_eq!(
            p.dropped,
            vec![
                DroppedColumn { name: "c0".into(), reason: DropReason::Constant },
                DroppedColumn { name: "c1".into(), reason: DropReason::AllMissing },
            ]
        );
    }

    #[test]
    fn missing_values_take_the_train_median() {
        let rows = vec![vec![Some(1.0)], vec![Some(3.0)], vec![Some(10.0)], vec![None]];
        let p = fit_scaler(&names(1), &rows).unwrap();
        assert_eq!(p.columns[0].median, 3.0);
        let imputed = p.transform(&[None]).unwrap()[0];
        let explicit = p.transform(&[Some(3.0)]).unwrap()[0];
        assert_eq!(imputed, explicit);
        let at_mean = p.transform(&[Some(p.columns[0].mean)]).unwrap()[0];
        assert_eq!(at_mean, 0.0);
    }

    #[test]
    fn width_checks() {
        let p = fit_scaler(&names(1), &[vec![Some(1.0)], vec![Some(2.0)]]).unwrap();
        assert!(p.transform(&[Some(1.0), Some(2.0)]).is_err());
        assert!(fit_scaler(&names(2), &[vec![Some(1.0)]]).is_err());
        assert!(fit_scaler(&names(1), &[]).is_err());
    }
}
