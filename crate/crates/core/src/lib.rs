//! Problem-gambler detection from tabular behavioral features.
//!
//! The crate trains and evaluates PGN4, a four-block 1-D convolutional
//! network, on features chosen and ordered by their correlation with the
//! responsible-gambling flag, alongside five classical baselines.

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod persist;
pub mod select;
pub mod synth;
pub mod tensor;
pub mod train;

pub use baselines::{Classifier, Method, MethodParams, Model};
pub use data::{DatasetTable, StandardizeStats};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use nn::{Mode, Network, Pgn4Config, Pgn4Model};
pub use select::{CorrelationReport, FeatureArrangement, RankMode};
pub use tensor::{Matrix, Rng, Tensor3};
pub use train::{TrainConfig, TrainHistory};
