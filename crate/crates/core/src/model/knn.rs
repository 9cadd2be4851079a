//! k-nearest neighbours with Euclidean distance; the probability is the
//! fraction of positive neighbours. Distance ties go to the earlier row.

use serde::{Deserialize, Serialize};

use super::{Dataset, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Knn {
    pub fn fit(data: &Dataset, k: usize) -> Result<Self, ModelError> {
        data.require_nonempty()?;
        if k == 0 {
            return Err(ModelError::InvalidConfig("k must be at least 1".into()));
        }
        Ok(Self {
            k: k.min(data.len()),
            features: data.features.clone(),
            labels: data.labels.clone(),
        })
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let positive = dist[..self.k]
            .iter()
            .filter(|(_, i)| self.labels[*i] == 1)
            .count();
        positive as f64 / self.k as f64
    }
}
