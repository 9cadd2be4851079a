//! CART classification trees (Gini impurity) and bagged random forests.
//! Leaves predict the fraction of positive training rows that reach them.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf: 5,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            max_depth: 8,
            min_leaf: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Node {
    Leaf {
        p: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub width: usize,
    nodes: Vec<Node>,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    data: &'a Dataset,
    config: TreeConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&i| self.data.labels[i] == 1).count();
        self.nodes.push(Node::Leaf {
            p: pos as f64 / rows.len() as f64,
        });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold, weighted child impurity) over candidate features.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let d = self.data.width();
        let features: Vec<usize> = match self.config.max_features {
            Some(m) if m < d => {
                let mut f = sample(&mut self.rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let n = rows.len() as f64;
        let total_pos = rows.iter().filter(|&&i| self.data.labels[i] == 1).count() as f64;
        let min_leaf = self.config.min_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in features {
            let x = |i: usize| self.data.features[i][f];
            sorted.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
            let mut left_pos = 0.0;
            for k in 0..sorted.len() - 1 {
                if self.data.labels[sorted[k]] == 1 {
                    left_pos += 1.0;
                }
                let (a, b) = (x(sorted[k]), x(sorted[k + 1]));
                let left_n = (k + 1) as f64;
                if a == b || k + 1 < min_leaf || sorted.len() - (k + 1) < min_leaf {
                    continue;
                }
                let right_n = n - left_n;
                let score = (left_n * gini(left_pos, left_n)
                    + right_n * gini(total_pos - left_pos, right_n))
                    / n;
                if best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, a + (b - a) / 2.0, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.data.labels[i] == 1).count();
        if depth >= self.config.max_depth || pos == 0 || pos == n || n < 2 * self.config.min_leaf.max(1) {
            return self.leaf(rows);
        }
        // like common CART implementations, a split without impurity gain is
        // still taken so that interaction effects can appear deeper down
        let Some((feature, threshold, _)) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.data.features[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { p: 0.0 });
        let left = self.grow(&left_rows, depth + 1);
        let right = self.grow(&right_rows, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

impl DecisionTree {
    fn fit_rows(data: &Dataset, rows: &[usize], config: &TreeConfig, seed: u64) -> Self {
        let mut b = Builder {
            data,
            config: *config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
        };
        b.grow(rows, 0);
        Self {
            width: data.width(),
            nodes: b.nodes,
        }
    }

    pub fn fit(data: &Dataset, config: &TreeConfig, seed: u64) -> Result<Self, ModelError> {
        data.require_nonempty()?;
        let rows: Vec<usize> = (0..data.len()).collect();
        Ok(Self::fit_rows(data, &rows, config, seed))
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { p } => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bootstrap-aggregated trees, each split drawing `sqrt(d)` candidate features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub width: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(data: &Dataset, config: &ForestConfig, seed: u64) -> Result<Self, ModelError> {
        data.require_nonempty()?;
        if config.trees == 0 {
            return Err(ModelError::InvalidConfig("forest needs at least one tree".into()));
        }
        let d = data.width();
        let tree_config = TreeConfig {
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            max_features: Some(((d as f64).sqrt().round() as usize).max(1)),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..config.trees)
            .map(|_| {
                let rows: Vec<usize> = (0..data.len()).map(|_| rng.random_range(0..data.len())).collect();
                DecisionTree::fit_rows(data, &rows, &tree_config, rng.random())
            })
            .collect();
        Ok(Self { width: d, trees })
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }
}
