//! The five comparison methods and a uniform fit/score interface over all
//! six methods, PGN4 included.

pub mod adaboost;
pub mod forest;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adaboost::{AdaBoost, AdaBoostConfig, Stump};
pub use forest::{ForestConfig, RandomForest};
pub use mlp::Mlp;
pub use svm::{LinearSvm, SvmConfig};
pub use tree::{DecisionTree, TreeConfig, TreeNode};

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::nn::{Network, Pgn4Config, Pgn4Model};
use crate::tensor::{derive_seed, Matrix, Rng};
use crate::train::{train, TrainConfig, TrainHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pgn4,
    Svm,
    Dt,
    Rf,
    Ada,
    Nn,
}

impl Method {
    /// Report order.
    pub const ALL: [Method; 6] = [
        Method::Pgn4,
        Method::Svm,
        Method::Dt,
        Method::Rf,
        Method::Ada,
        Method::Nn,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Pgn4 => "pgn4",
            Method::Svm => "svm",
            Method::Dt => "dt",
            Method::Rf => "rf",
            Method::Ada => "ada",
            Method::Nn => "nn",
        }
    }

    /// Column heading used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Pgn4 => "PGN4",
            Method::Svm => "SVM",
            Method::Dt => "DT",
            Method::Rf => "RF",
            Method::Ada => "Ada",
            Method::Nn => "NN",
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, Method::Pgn4 | Method::Nn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown method '{s}' (expected one of pgn4, svm, dt, rf, ada, nn)"
                ))
            })
    }
}

/// Anything that maps feature rows to flagged-class scores in `[0, 1]`.
pub trait Classifier {
    fn method(&self) -> Method;
    fn n_features(&self) -> usize;
    fn score(&self, x: &Matrix) -> Result<Vec<f64>>;
}

/// Hyperparameters for every method. Seeds inside the per-method configs
/// are overwritten by [`fit`] from the seed it is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    pub train: TrainConfig,
    pub pgn4: Pgn4Config,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub ada: AdaBoostConfig,
    pub svm: SvmConfig,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            pgn4: Pgn4Config::default(),
            tree: TreeConfig::default(),
            forest: ForestConfig::default(),
            ada: AdaBoostConfig::default(),
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pgn4(Pgn4Model),
    Nn(Mlp),
    Svm(LinearSvm),
    Dt(DecisionTree),
    Rf(RandomForest),
    Ada(AdaBoost),
}

impl Classifier for Model {
    fn method(&self) -> Method {
        match self {
            Model::Pgn4(_) => Method::Pgn4,
            Model::Nn(_) => Method::Nn,
            Model::Svm(_) => Method::Svm,
            Model::Dt(_) => Method::Dt,
            Model::Rf(_) => Method::Rf,
            Model::Ada(_) => Method::Ada,
        }
    }

    fn n_features(&self) -> usize {
        match self {
            Model::Pgn4(m) => m.input_length,
            Model::Nn(m) => m.input_length(),
            Model::Svm(m) => m.weights.len(),
            Model::Dt(m) => m.n_features,
            Model::Rf(m) => m.n_features,
            Model::Ada(m) => m.n_features,
        }
    }

    fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features() {
            return Err(Error::shape(
                format!("{} model over {} features", self.method(), self.n_features()),
                format!("{} input columns", x.cols()),
            ));
        }
        match self {
            Model::Pgn4(m) => m.predict(x),
            Model::Nn(m) => m.predict(x),
            Model::Svm(m) => m.score(x),
            Model::Dt(m) => m.score(x),
            Model::Rf(m) => m.score(x),
            Model::Ada(m) => m.score(x),
        }
    }
}

/// A trained model plus, for the two networks, its per-epoch history.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: Model,
    pub history: Option<TrainHistory>,
}

/// Trains `method` on `train`. `valid` only feeds the networks' per-epoch
/// monitoring; it never influences the fitted parameters.
pub fn fit(
    method: Method,
    train_set: &DatasetTable,
    valid: &DatasetTable,
    params: &MethodParams,
    seed: u64,
) -> Result<Fitted> {
    if train_set.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let x = train_set.features();
    let y = train_set.labels();
    let init_seed = derive_seed(seed, 0);
    let train_seed = derive_seed(seed, 1);
    let fitted = match method {
        Method::Pgn4 => {
            let mut m = Pgn4Model::init(train_set.n_features(), &mut Rng::new(init_seed), params.pgn4)?;
            let cfg = TrainConfig {
                seed: train_seed,
                ..params.train.clone()
            };
            let h = train(&mut m, train_set, valid, &cfg)?;
            Fitted {
                model: Model::Pgn4(m),
                history: Some(h),
            }
        }
        Method::Nn => {
            let mut m = Mlp::init(train_set.n_features(), &mut Rng::new(init_seed))?;
            let cfg = TrainConfig {
                seed: train_seed,
                ..params.train.clone()
            };
            let h = train(&mut m, train_set, valid, &cfg)?;
            Fitted {
                model: Model::Nn(m),
                history: Some(h),
            }
        }
        Method::Svm => {
            let cfg = SvmConfig {
                seed: train_seed,
                ..params.svm
            };
            Fitted {
                model: Model::Svm(LinearSvm::fit(x, y, cfg)?),
                history: None,
            }
        }
        Method::Dt => Fitted {
            model: Model::Dt(DecisionTree::fit(x, y, params.tree)?),
            history: None,
        },
        Method::Rf => {
            let cfg = ForestConfig {
                seed: train_seed,
                ..params.forest
            };
            Fitted {
                model: Model::Rf(RandomForest::fit(x, y, cfg)?),
                history: None,
            }
        }
        Method::Ada => Fitted {
            model: Model::Ada(AdaBoost::fit(x, y, params.ada)?),
            history: None,
        },
    };
    Ok(fitted)
}

/// Twenty linearly separable points in two dimensions with margin 2 along
/// the first axis; flagged rows sit at positive `x0`.
pub fn separable_fixture() -> DatasetTable {
    let mut rows = Vec::with_capacity(20);
    let mut labels = Vec::with_capacity(20);
    for i in 0..10 {
        let a = 1.0 + 0.25 * i as f64;
        let b = -1.0 + 0.5 * (i % 5) as f64;
        rows.push(vec![a, b]);
        labels.push(1);
        rows.push(vec![-a, -b]);
        labels.push(0);
    }
    DatasetTable::new(
        vec!["x0".into(), "x1".into()],
        Matrix::from_rows(&rows).expect("rectangular"),
        labels,
    )
    .expect("valid fixture")
}

/// Training configuration under which both networks fit
/// [`separable_fixture`] perfectly.
pub fn fixture_params() -> MethodParams {
    MethodParams {
        train: TrainConfig {
            learning_rate: 1e-2,
            epochs: 100,
            batch_size: 8,
            ..Default::default()
        },
        ..Default::default()
    }
}
