//! L2-regularized logistic regression fitted by full-batch Adam.

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::{Dataset, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        logistic(self.margin(x))
    }

    pub fn fit(data: &Dataset, config: &LogisticConfig) -> Result<Self, ModelError> {
        data.require_nonempty()?;
        let d = data.width();
        let mut model = Self {
            weights: vec![0.0; d],
            bias: 0.0,
        };
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
            &[d, 1],
        );
        let n = data.len() as f64;
        let mut gw = vec![0.0; d];
        for _ in 0..config.iterations {
            gw.iter_mut()
                .zip(&model.weights)
                .for_each(|(g, w)| *g = config.l2 * w);
            let mut gb = 0.0;
            for (x, &y) in data.features.iter().zip(&data.labels) {
                let r = (model.predict_proba(x) - f64::from(y)) / n;
                gb += r;
                gw.iter_mut().zip(x).for_each(|(g, v)| *g += r * v);
            }
            adam.begin_step();
            adam.update(0, &mut model.weights, &gw);
            let mut b = [model.bias];
            adam.update(1, &mut b, &[gb]);
            model.bias = b[0];
        }
        Ok(model)
    }
}
