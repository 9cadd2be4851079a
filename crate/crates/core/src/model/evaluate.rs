//! Accuracy at the 0.5 threshold and the per-horizon comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Dataset, ModelError, ModelKind, ModelParams};
use crate::dataset::Horizon;

/// `p >= CLASS_THRESHOLD` is class 1.
pub const CLASS_THRESHOLD: f64 = 0.5;

pub fn predicted_class(p: f64) -> u8 {
    u8::from(p >= CLASS_THRESHOLD)
}

pub fn accuracy(model: &ModelParams, data: &Dataset) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let mut correct = 0usize;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        if predicted_class(model.predict_proba(x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Test accuracy by model and horizon, plus per-model train/test averages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<AccuracyCell>", into = "Vec<AccuracyCell>")]
pub struct AccuracyTable {
    /// (model, horizon) -> (train accuracy, test accuracy)
    cells: BTreeMap<(ModelKind, Horizon), (f64, f64)>,
}

/// One table cell in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub model: ModelKind,
    pub horizon: Horizon,
    pub train: f64,
    pub test: f64,
}

impl From<Vec<AccuracyCell>> for AccuracyTable {
    fn from(cells: Vec<AccuracyCell>) -> Self {
        let mut t = Self::default();
        for c in cells {
            t.insert(c.model, c.horizon, c.train, c.test);
        }
        t
    }
}

impl From<AccuracyTable> for Vec<AccuracyCell> {
    fn from(t: AccuracyTable) -> Self {
        t.cells
            .into_iter()
            .map(|((model, horizon), (train, test))| AccuracyCell {
                model,
                horizon,
                train,
                test,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub model: ModelKind,
    pub train: f64,
    pub test: f64,
}

impl AccuracyTable {
    pub fn insert(&mut self, model: ModelKind, horizon: Horizon, train: f64, test: f64) {
        self.cells.insert((model, horizon), (train, test));
    }

    pub fn test_accuracy(&self, model: ModelKind, horizon: Horizon) -> Option<f64> {
        self.cells.get(&(model, horizon)).map(|c| c.1)
    }

    pub fn train_accuracy(&self, model: ModelKind, horizon: Horizon) -> Option<f64> {
        self.cells.get(&(model, horizon)).map(|c| c.0)
    }

    fn models(&self) -> Vec<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .filter(|m| self.cells.keys().any(|(k, _)| k == m))
            .collect()
    }

    pub fn averages(&self) -> Vec<AverageRow> {
        self.models()
            .into_iter()
            .map(|m| {
                let cells: Vec<(f64, f64)> = self
                    .cells
                    .iter()
                    .filter(|((k, _), _)| *k == m)
                    .map(|(_, v)| *v)
                    .collect();
                let n = cells.len() as f64;
                AverageRow {
                    model: m,
                    train: cells.iter().map(|c| c.0).sum::<f64>() / n,
                    test: cells.iter().map(|c| c.1).sum::<f64>() / n,
                }
            })
            .collect()
    }

    /// Rows are models, columns are horizons in months; blank where not run.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Model");
        for h in Horizon::all() {
            let _ = write!(out, ",{h}");
        }
        out.push('\n');
        for m in self.models() {
            out.push_str(m.label());
            for h in Horizon::all() {
                out.push(',');
                if let Some(a) = self.test_accuracy(m, h) {
                    let _ = write!(out, "{:.2}", a * 100.0);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn averages_csv(&self) -> String {
        let mut out = String::from("Model,Train Accuracy,Test Accuracy\n");
        for r in self.averages() {
            let _ = writeln!(out, "{},{:.2},{:.2}", r.model.label(), r.train * 100.0, r.test * 100.0);
        }
        out
    }
}
