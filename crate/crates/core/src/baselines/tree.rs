//! CART decision tree on weighted Gini impurity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Weighted fraction of flagged samples reaching the leaf.
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// `usize::MAX` for unlimited depth.
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` searches all.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf: 1,
            max_features: None,
        }
    }
}

/// Samples go left when `x[feature] <= threshold`. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    w: &'a [f64],
    config: TreeConfig,
    rng: Option<&'a mut Rng>,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

#[inline]
fn gini_mass(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        0.0
    } else {
        let p = pos / total;
        2.0 * total * p * (1.0 - p)
    }
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let f = self.x.cols();
        match (self.config.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < f => {
                let mut all: Vec<usize> = (0..f).collect();
                for i in 0..k {
                    let j = i + rng.below(f - i);
                    all.swap(i, j);
                }
                let mut chosen = all[..k].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..f).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let total: f64 = idx.iter().map(|&i| self.w[i]).sum();
        let pos: f64 = idx
            .iter()
            .filter(|&&i| self.y[i] == 1)
            .map(|&i| self.w[i])
            .sum();
        let parent = gini_mass(pos, total);
        let min_leaf = self.config.min_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for f in self.candidate_features() {
            sorted.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let (mut lw, mut lp) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                lw += self.w[i];
                if self.y[i] == 1 {
                    lp += self.w[i];
                }
                let (a, b) = (self.x.get(i, f), self.x.get(sorted[k + 1], f));
                if a == b || k + 1 < min_leaf || sorted.len() - k - 1 < min_leaf {
                    continue;
                }
                let impurity = gini_mass(lp, lw) + gini_mass(pos - lp, total - lw);
                if impurity < parent - 1e-12
                    && best.as_ref().map_or(true, |s| impurity < s.impurity - 1e-15)
                {
                    let mut mid = a + (b - a) / 2.0;
                    if mid >= b {
                        mid = a;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold: mid,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let total: f64 = idx.iter().map(|&i| self.w[i]).sum();
        let pos: f64 = idx
            .iter()
            .filter(|&&i| self.y[i] == 1)
            .map(|&i| self.w[i])
            .sum();
        let value = if total > 0.0 { pos / total } else { 0.0 };
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value });
        let pure = pos <= 0.0 || pos >= total;
        if pure || depth >= self.config.max_depth || idx.len() < 2 {
            return id;
        }
        let Some(split) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[u8], config: TreeConfig) -> Result<Self> {
        Self::fit_weighted(x, y, &vec![1.0; y.len()], config, None)
    }

    /// Samples with zero weight are ignored. `rng` drives per-split feature
    /// subsampling when `config.max_features` is set.
    pub fn fit_weighted(
        x: &Matrix,
        y: &[u8],
        weights: &[f64],
        config: TreeConfig,
        rng: Option<&mut Rng>,
    ) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::invalid("cannot fit a tree on an empty training set"));
        }
        if y.len() != x.rows() || weights.len() != x.rows() {
            return Err(Error::shape(
                format!("{} rows", x.rows()),
                format!("{} labels / {} weights", y.len(), weights.len()),
            ));
        }
        let idx: Vec<usize> = (0..x.rows()).filter(|&i| weights[i] > 0.0).collect();
        if idx.is_empty() {
            return Err(Error::invalid("all sample weights are zero"));
        }
        let mut b = Builder {
            x,
            y,
            w: weights,
            config,
            rng,
            nodes: Vec::new(),
        };
        b.build(idx, 0);
        Ok(Self {
            n_features: x.cols(),
            nodes: b.nodes,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::shape(
                format!("tree over {} features", self.n_features),
                format!("{} input columns", x.cols()),
            ));
        }
        Ok((0..x.rows()).map(|r| self.predict_row(x.row(r))).collect())
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
