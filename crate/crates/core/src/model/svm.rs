//! Linear SVM trained with the Pegasos sub-gradient method on the hinge
//! loss. Probabilities come from a logistic link `1 / (1 + exp(-(a m + b)))`
//! on the margin `m`, with `a` and `b` fitted on the training margins by
//! Newton's method (Platt scaling).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::logistic;
use super::{Dataset, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub platt_a: f64,
    pub platt_b: f64,
}

/// Fit `a, b` minimizing the log loss of `logistic(a m + b)` against `y`.
fn platt(margins: &[f64], labels: &[u8]) -> (f64, f64) {
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-9, 0.0, 1e-9);
        for (&m, &y) in margins.iter().zip(labels) {
            let p = logistic(a * m + b);
            let r = p - f64::from(y);
            let w = p * (1.0 - p);
            ga += r * m;
            gb += r;
            haa += w * m * m;
            hab += w * m;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if !(det.abs() > 1e-300) {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        // bounded steps keep separable data from diverging
        let scale = 1.0f64.min(10.0 / (da.abs() + db.abs()).max(1e-300));
        a -= scale * da;
        b -= scale * db;
        if (da.abs() + db.abs()) * scale < 1e-10 {
            break;
        }
    }
    (a, b)
}

impl LinearSvm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        logistic(self.platt_a * self.margin(x) + self.platt_b)
    }

    pub fn fit(data: &Dataset, config: &SvmConfig, seed: u64) -> Result<Self, ModelError> {
        data.require_nonempty()?;
        if !(config.lambda > 0.0) {
            return Err(ModelError::InvalidConfig("svm lambda must be positive".into()));
        }
        let d = data.width();
        let n = data.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // the bias is the weight of a constant feature and is regularized with the rest
        let mut w = vec![0.0; d + 1];
        let radius = 1.0 / config.lambda.sqrt();
        let steps = config.epochs.max(1) * n;
        for t in 1..=steps {
            let i = rng.random_range(0..n);
            let x = &data.features[i];
            let y = if data.labels[i] == 1 { 1.0 } else { -1.0 };
            let eta = 1.0 / (config.lambda * t as f64);
            let m = w[d] + w[..d].iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
            let shrink = 1.0 - eta * config.lambda;
            w.iter_mut().for_each(|wi| *wi *= shrink);
            if y * m < 1.0 {
                w[..d].iter_mut().zip(x).for_each(|(wi, xi)| *wi += eta * y * xi);
                w[d] += eta * y;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|wi| *wi *= radius / norm);
            }
        }
        let b = w.pop().expect("bias slot");
        let mut model = Self {
            weights: w,
            bias: b,
            platt_a: 1.0,
            platt_b: 0.0,
        };
        let margins: Vec<f64> = data.features.iter().map(|x| model.margin(x)).collect();
        let (a, pb) = platt(&margins, &data.labels);
        model.platt_a = a;
        model.platt_b = pb;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn separable_fixture() {
        let data = fixtures::separable(600, 2);
        let m = LinearSvm::fit(&data, &SvmConfig::default(), 1).unwrap();
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, y)| u8::from(m.predict_proba(x) >= 0.5) == **y)
            .count();
        assert!(correct as f64 / 600.0 >= 0.97, "{correct}");
        assert!(m.platt_a > 0.0);
    }

    #[test]
    fn platt_recovers_a_known_link() {
        // labels drawn deterministically so that the empirical rate follows logistic(2m)
        let margins: Vec<f64> = (0..2000).map(|i| (i as f64 / 1000.0) - 1.0).collect();
        let labels: Vec<u8> = margins
            .iter()
            .enumerate()
            .map(|(i, m)| u8::from(((i * 7919) % 1000) as f64 / 1000.0 < logistic(2.0 * m)))
            .collect();
        let (a, b) = platt(&margins, &labels);
        assert!((a - 2.0).abs() < 0.3, "{a}");
        assert!(b.abs() < 0.2, "{b}");
    }
}
