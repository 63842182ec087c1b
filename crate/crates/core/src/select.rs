//! Correlation-based feature selection and arrangement.
//!
//! Features are ranked by their Pearson correlation with the flag. The top N
//! form the candidate pool, which is then laid out so that strongly
//! inter-correlated candidates sit next to each other in the 1-D input the
//! convolutional network slides its filters over.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub r: f64,
    /// Either input had zero variance; `r` is 0.
    pub degenerate: bool,
}

struct Centered {
    values: Vec<f64>,
    norm: f64,
    degenerate: bool,
}

fn center(x: &[f64]) -> Centered {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let values: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    Centered {
        degenerate: norm <= 1e-12 * scale * n.sqrt(),
        values,
        norm,
    }
}

fn centered_corr(a: &Centered, b: &Centered) -> Pearson {
    if a.degenerate || b.degenerate {
        return Pearson {
            r: 0.0,
            degenerate: true,
        };
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Pearson {
        r: (dot / (a.norm * b.norm)).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(Error::shape(
            format!("{} values", x.len()),
            format!("{} values", y.len()),
        ));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least 2 observations"));
    }
    Ok(centered_corr(&center(x), &center(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub feature_names: Vec<String>,
    /// Correlation of each feature with the flag.
    pub flag_corr: Vec<f64>,
    pub degenerate: Vec<bool>,
    /// Symmetric feature-feature correlations; the diagonal is 1 except for
    /// degenerate features, whose rows are all zero.
    pub pairwise: Matrix,
}

impl CorrelationReport {
    /// Feature indices ordered by descending relevance, ties by column order.
    pub fn ranking(&self, mode: RankMode) -> Vec<usize> {
        let key = |i: usize| match mode {
            RankMode::Absolute => self.flag_corr[i].abs(),
            RankMode::Signed => self.flag_corr[i],
        };
        let mut idx: Vec<usize> = (0..self.flag_corr.len())
            .filter(|&i| !self.degenerate[i])
            .collect();
        idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
        idx
    }

    pub fn n_usable(&self) -> usize {
        self.degenerate.iter().filter(|d| !**d).count()
    }
}

/// Flag correlations and the full pairwise matrix for every feature column.
pub fn correlation_report(table: &DatasetTable) -> Result<CorrelationReport> {
    if table.n_rows() < 2 {
        return Err(Error::invalid("correlation report needs at least 2 rows"));
    }
    let cols: Vec<Centered> = (0..table.n_features())
        .into_par_iter()
        .map(|c| center(&table.features().column(c)))
        .collect();
    let flags = center(&table.labels_f64());
    let flag_corr: Vec<f64> = cols.iter().map(|c| centered_corr(c, &flags).r).collect();
    let degenerate: Vec<bool> = cols.iter().map(|c| c.degenerate).collect();

    let f = cols.len();
    let rows: Vec<Vec<f64>> = (0..f)
        .into_par_iter()
        .map(|i| {
            (0..f)
                .map(|j| {
                    if i == j {
                        if cols[i].degenerate {
                            0.0
                        } else {
                            1.0
                        }
                    } else {
                        centered_corr(&cols[i], &cols[j]).r
                    }
                })
                .collect()
        })
        .collect();
    let mut pairwise = Matrix::from_rows(&rows)?;
    // The dot product is symmetric up to summation order; copy the upper
    // triangle so the matrix is exactly symmetric.
    for i in 0..f {
        for j in 0..i {
            let v = pairwise.get(j, i);
            pairwise.set(i, j, v);
        }
    }
    Ok(CorrelationReport {
        feature_names: table.feature_names().to_vec(),
        flag_corr,
        degenerate,
        pairwise,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    #[default]
    Absolute,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureArrangement {
    /// Network input order.
    pub ordered_names: Vec<String>,
    /// The top-N candidates in rank order.
    pub candidate_pool: Vec<String>,
    pub n: usize,
}

/// Picks the top `n` features by flag correlation and arranges them.
///
/// The arrangement is a greedy anchor/neighbor chain: the best-ranked
/// unplaced candidate becomes the next anchor, and the unplaced candidate with
/// the largest |pairwise correlation| to that anchor is placed right after it.
/// Ties go to the lower column index.
pub fn select_and_arrange(
    report: &CorrelationReport,
    n: usize,
    mode: RankMode,
) -> Result<FeatureArrangement> {
    let usable = report.n_usable();
    if n == 0 || n > usable {
        return Err(Error::invalid(format!(
            "feature count {n} outside 1..={usable} (non-degenerate features)"
        )));
    }
    let pool: Vec<usize> = report.ranking(mode).into_iter().take(n).collect();
    let mut placed = vec![false; pool.len()];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let anchor_slot = placed.iter().position(|p| !p).expect("unplaced candidate");
        placed[anchor_slot] = true;
        let anchor = pool[anchor_slot];
        order.push(anchor);

        let mut best: Option<(usize, f64)> = None;
        for (slot, &cand) in pool.iter().enumerate() {
            if placed[slot] {
                continue;
            }
            let c = report.pairwise.get(anchor, cand).abs();
            let better = match best {
                None => true,
                Some((b_slot, b_c)) => c > b_c || (c == b_c && cand < pool[b_slot]),
            };
            if better {
                best = Some((slot, c));
            }
        }
        if let Some((slot, _)) = best {
            placed[slot] = true;
            order.push(pool[slot]);
        }
    }
    let name = |i: usize| report.feature_names[i].clone();
    Ok(FeatureArrangement {
        ordered_names: order.into_iter().map(name).collect(),
        candidate_pool: pool.into_iter().map(name).collect(),
        n,
    })
}

/// Restricts `table` to the arranged columns, in arrangement order.
pub fn project(table: &DatasetTable, arrangement: &FeatureArrangement) -> Result<DatasetTable> {
    let idx = arrangement
        .ordered_names
        .iter()
        .map(|name| {
            table
                .feature_index(name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table.select_columns(&idx))
}
