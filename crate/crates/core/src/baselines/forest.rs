//! Random forest: bootstrap-weighted CART trees with per-split feature
//! subsampling, averaged leaf scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeConfig};
use crate::error::{Error, Result};
use crate::tensor::{derive_seed, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Resample the training rows with replacement for every tree.
    pub bootstrap: bool,
    /// Draw `ceil(sqrt(F))` candidate features at every split.
    pub feature_subsampling: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            min_leaf: 1,
            bootstrap: true,
            feature_subsampling: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

/// `ceil(sqrt(F))`, at least 1.
pub fn subsample_width(n_features: usize) -> usize {
    ((n_features as f64).sqrt().ceil() as usize).max(1)
}

impl RandomForest {
    /// Tree `t` draws from its own stream seeded by `derive_seed(seed, t)`, so
    /// the result does not depend on how trees are scheduled across threads.
    pub fn fit(x: &Matrix, y: &[u8], config: ForestConfig) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if x.rows() == 0 {
            return Err(Error::invalid("cannot fit a forest on an empty training set"));
        }
        let n = x.rows();
        let tree_config = TreeConfig {
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            max_features: config
                .feature_subsampling
                .then(|| subsample_width(x.cols())),
        };
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = Rng::new(derive_seed(config.seed, t as u64));
                let weights = if config.bootstrap {
                    let mut counts = vec![0.0; n];
                    for _ in 0..n {
                        counts[rng.below(n)] += 1.0;
                    }
                    counts
                } else {
                    vec![1.0; n]
                };
                DecisionTree::fit_weighted(x, y, &weights, tree_config, Some(&mut rng))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_features: x.cols(),
            trees,
        })
    }

    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mut sum = vec![0.0; x.rows()];
        for tree in &self.trees {
            for (s, v) in sum.iter_mut().zip(tree.score(x)?) {
                *s += v;
            }
        }
        let k = self.trees.len() as f64;
        Ok(sum.into_iter().map(|s| s / k).collect())
    }
}
