//! The experiment protocol: split, rank features on the training split,
//! and for every feature count arrange, project, standardize, train every
//! method and evaluate on the validation split.
//!
//! Every artifact carries the configuration hash and seed, and none carries a
//! timestamp, so two runs with one configuration produce identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::baselines::{fit, Method, MethodParams};
use crate::data::{load_csv, split_indices, standardize, DatasetTable};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::persist::Pipeline;
use crate::select::{correlation_report, project, select_and_arrange, CorrelationReport, FeatureArrangement, RankMode};
use crate::synth::{generate, Preset, DEFAULT_LABEL_COLUMN, REASON_COLUMN};
use crate::tensor::{derive_seed, Rng};

/// Number of features fed to the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureCount {
    /// Every non-degenerate feature, still in arranged order.
    Full,
    N(usize),
}

impl FeatureCount {
    pub fn label(self) -> String {
        match self {
            FeatureCount::Full => "full".into(),
            FeatureCount::N(n) => n.to_string(),
        }
    }
}

impl fmt::Display for FeatureCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for FeatureCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(FeatureCount::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(FeatureCount::N(n)),
            _ => Err(Error::invalid(format!(
                "feature count '{s}' must be a positive integer or 'full'"
            ))),
        }
    }
}

impl Serialize for FeatureCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FeatureCount::Full => s.serialize_str("full"),
            FeatureCount::N(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for FeatureCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(usize),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(0) => Err(serde::de::Error::custom("feature count must be >= 1")),
            Repr::N(n) => Ok(FeatureCount::N(n)),
            Repr::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Parses a comma-separated list such as `5,10,20,50,full`.
pub fn parse_feature_counts(s: &str) -> Result<Vec<FeatureCount>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Parses a comma-separated method list such as `pgn4,svm`.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Which rows the correlation ranking sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    /// Training split only (no validation leakage).
    #[default]
    Train,
    /// Every row, validation included.
    FullTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// CSV input; exclusive with `preset`.
    pub data: Option<PathBuf>,
    /// Synthetic input; exclusive with `data`.
    pub preset: Option<Preset>,
    /// Seed for preset generation; defaults to `seed`.
    pub data_seed: Option<u64>,
    pub label: String,
    pub exclude: Vec<String>,
    pub feature_counts: Vec<FeatureCount>,
    pub methods: Vec<Method>,
    pub params: MethodParams,
    pub valid_fraction: f64,
    pub rank_mode: RankMode,
    pub selection_scope: SelectionScope,
    pub seed: u64,
    pub save_models: bool,
    /// Not part of the configuration hash.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            preset: None,
            data_seed: None,
            label: DEFAULT_LABEL_COLUMN.into(),
            exclude: vec![REASON_COLUMN.into()],
            feature_counts: vec![
                FeatureCount::Full,
                FeatureCount::N(50),
                FeatureCount::N(20),
                FeatureCount::N(10),
                FeatureCount::N(5),
            ],
            methods: Method::ALL.to_vec(),
            params: MethodParams::default(),
            valid_fraction: 0.25,
            rank_mode: RankMode::Absolute,
            selection_scope: SelectionScope::Train,
            seed: 0,
            save_models: true,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Hex SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex(&Sha256::digest(json)))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("give either a CSV path or a preset, not both"))
            }
            (None, None) => return Err(Error::invalid("no data source: give a CSV path or a preset")),
            _ => {}
        }
        if self.feature_counts.is_empty() {
            return Err(Error::invalid("no feature counts requested"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested"));
        }
        self.params.train.validate()
    }

    /// Loads or generates the full table.
    pub fn load_table(&self) -> Result<DatasetTable> {
        match (&self.data, self.preset) {
            (Some(path), _) => load_csv(path, &self.label, &self.exclude),
            (None, Some(preset)) => {
                Ok(generate(&preset.spec(self.data_seed.unwrap_or(self.seed)))?.table)
            }
            (None, None) => Err(Error::invalid("no data source: give a CSV path or a preset")),
        }
    }

    /// Provenance line written at the top of every CSV artifact.
    pub fn provenance_line(&self) -> Result<String> {
        Ok(format!("config_hash={} seed={}", self.hash()?, self.seed))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok { report: EvalReport },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn report(&self) -> Option<&EvalReport> {
        match &self.outcome {
            CellOutcome::Ok { report } => Some(report),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeature {
    pub rank: usize,
    pub feature: String,
    pub correlation: f64,
    /// 1-based position in the network input.
    pub input_position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub feature_count: FeatureCount,
    pub n_features: usize,
    pub arrangement: FeatureArrangement,
    pub top_features: Vec<TopFeature>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub feature_count: FeatureCount,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub n_rows: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub rows: Vec<CountRow>,
    pub skipped: Vec<Skipped>,
}

impl SweepResult {
    pub fn failed_cells(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| &r.cells)
            .filter(|c| c.report().is_none())
            .count()
    }

    pub fn cell(&self, count: FeatureCount, method: Method) -> Option<&Cell> {
        self.rows
            .iter()
            .find(|r| r.feature_count == count)?
            .cells
            .iter()
            .find(|c| c.method == method)
    }

    pub fn grid_csv(&self) -> String {
        let mut s = format!("# config_hash={} seed={}\n", self.config_hash, self.seed);
        s.push_str("feature_count,n_features,method,status,accuracy,f1,roc_auc,pr_auc,tp,fp,tn,fn,error\n");
        for row in &self.rows {
            for cell in &row.cells {
                let _ = write!(s, "{},{},{},", row.feature_count, row.n_features, cell.method);
                match &cell.outcome {
                    CellOutcome::Ok { report: r } => {
                        let c = &r.confusion;
                        let _ = writeln!(
                            s,
                            "ok,{},{},{},{},{},{},{},{},",
                            r.accuracy, r.f1, r.roc_auc, r.pr_auc, c.tp, c.fp, c.tn, c.fn_
                        );
                    }
                    CellOutcome::Failed { error } => {
                        let _ = writeln!(s, "failed,,,,,,,,,\"{}\"", error.replace('"', "'"));
                    }
                }
            }
        }
        s
    }
}

/// Paths of the artifacts for one (feature count, method) cell.
pub fn cell_stem(count: FeatureCount, method: Method) -> String {
    format!("N{}_{}", count.label(), method.id())
}

pub fn top_features_path(dir: &Path, count: FeatureCount) -> PathBuf {
    dir.join(format!("top_features_N{}.csv", count.label()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn top_features(report: &CorrelationReport, arrangement: &FeatureArrangement) -> Vec<TopFeature> {
    arrangement
        .candidate_pool
        .iter()
        .enumerate()
        .map(|(rank, name)| {
            let idx = report
                .feature_names
                .iter()
                .position(|n| n == name)
                .expect("pool drawn from report");
            TopFeature {
                rank: rank + 1,
                feature: name.clone(),
                correlation: report.flag_corr[idx],
                input_position: arrangement
                    .ordered_names
                    .iter()
                    .position(|n| n == name)
                    .expect("pool equals arrangement set")
                    + 1,
            }
        })
        .collect()
}

fn top_features_csv(provenance: &str, rows: &[TopFeature]) -> String {
    let mut s = format!("# {provenance}\nrank,feature,correlation,input_position\n");
    for t in rows {
        let _ = writeln!(s, "{},{},{},{}", t.rank, t.feature, t.correlation, t.input_position);
    }
    s
}

/// Reads a top-feature CSV back.
pub fn read_top_features(path: &Path) -> Result<Vec<TopFeature>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for rec in reader.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// The seed of the (feature count, method) cell.
pub fn cell_seed(seed: u64, n_features: usize, method: Method) -> u64 {
    let m = Method::ALL.iter().position(|&x| x == method).expect("known method") as u64;
    derive_seed(derive_seed(seed, 100 + n_features as u64), m)
}

struct Prepared {
    train: DatasetTable,
    valid: DatasetTable,
    arrangement: FeatureArrangement,
    stats: crate::data::StandardizeStats,
}

/// Runs the sweep and, when `config.out` is set, writes every artifact.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let hash = config.hash()?;
    let provenance = config.provenance_line()?;
    let table = config.load_table()?;
    let (train_idx, valid_idx) = split_indices(
        table.n_rows(),
        config.valid_fraction,
        &mut Rng::new(derive_seed(config.seed, 10)),
    )?;
    let train_raw = table.select_rows(&train_idx);
    let valid_raw = table.select_rows(&valid_idx);
    let report = match config.selection_scope {
        SelectionScope::Train => correlation_report(&train_raw)?,
        SelectionScope::FullTable => correlation_report(&table)?,
    };
    let usable = report.n_usable();
    log::info!(
        "{} rows x {} features; {} train / {} validation; {} usable features",
        table.n_rows(),
        table.n_features(),
        train_raw.n_rows(),
        valid_raw.n_rows(),
        usable
    );

    let mut skipped = Vec::new();
    let mut prepared: Vec<(FeatureCount, usize, Result<Prepared>)> = Vec::new();
    for &count in &config.feature_counts {
        let n = match count {
            FeatureCount::Full => usable,
            FeatureCount::N(n) if n > table.n_features() => {
                let reason = format!("exceeds the {} available features", table.n_features());
                log::info!("skipping feature count {n}: {reason}");
                skipped.push(Skipped {
                    feature_count: count,
                    reason,
                });
                continue;
            }
            FeatureCount::N(n) => n,
        };
        let prep = (|| {
            let arrangement = select_and_arrange(&report, n, config.rank_mode)?;
            let (train, others, stats) = standardize(
                &project(&train_raw, &arrangement)?,
                &[&project(&valid_raw, &arrangement)?],
            )?;
            let valid = others.into_iter().next().expect("one table");
            Ok(Prepared {
                train,
                valid,
                arrangement,
                stats,
            })
        })();
        prepared.push((count, n, prep));
    }

    let jobs: Vec<(usize, Method)> = (0..prepared.len())
        .flat_map(|i| config.methods.iter().map(move |&m| (i, m)))
        .collect();
    let results: Vec<(Cell, Option<Pipeline>, Option<crate::train::TrainHistory>)> = jobs
        .par_iter()
        .map(|&(i, method)| {
            let (count, n, prep) = &prepared[i];
            let seed = cell_seed(config.seed, *n, method);
            let run = || -> Result<(EvalReport, Pipeline, Option<crate::train::TrainHistory>)> {
                let p = prep.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                let start = Instant::now();
                let fitted = fit(method, &p.train, &p.valid, &config.params, seed)?;
                let pipeline = Pipeline {
                    arrangement: p.arrangement.clone(),
                    stats: p.stats.clone(),
                    model: fitted.model,
                    provenance: serde_json::json!({
                        "config_hash": hash,
                        "seed": config.seed,
                        "cell_seed": seed,
                        "feature_count": count,
                    }),
                };
                let scores = crate::baselines::Classifier::score(&pipeline.model, p.valid.features())?;
                let report = evaluate(&scores, p.valid.labels())?;
                log::info!(
                    "N={count} {method}: roc auc {:.4} in {:.1}s",
                    report.roc_auc,
                    start.elapsed().as_secs_f64()
                );
                Ok((report, pipeline, fitted.history))
            };
            match run() {
                Ok((report, pipeline, history)) => (
                    Cell {
                        method,
                        seed,
                        outcome: CellOutcome::Ok { report },
                    },
                    Some(pipeline),
                    history,
                ),
                Err(e) => {
                    log::warn!("N={count} {method} failed: {e}");
                    (
                        Cell {
                            method,
                            seed,
                            outcome: CellOutcome::Failed {
                                error: e.to_string(),
                            },
                        },
                        None,
                        None,
                    )
                }
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(prepared.len());
    let mut results = results.into_iter();
    let mut extras = Vec::new();
    for (count, n, prep) in &prepared {
        let arrangement = match prep {
            Ok(p) => p.arrangement.clone(),
            Err(_) => FeatureArrangement {
                ordered_names: Vec::new(),
                candidate_pool: Vec::new(),
                n: *n,
            },
        };
        let mut cells = Vec::with_capacity(config.methods.len());
        for _ in &config.methods {
            let (cell, pipeline, history) = results.next().expect("one result per job");
            extras.push((*count, cell.method, pipeline, history));
            cells.push(cell);
        }
        rows.push(CountRow {
            feature_count: *count,
            n_features: *n,
            top_features: top_features(&report, &arrangement),
            arrangement,
            cells,
        });
    }

    let result = SweepResult {
        config_hash: hash,
        seed: config.seed,
        config: config.clone(),
        n_rows: table.n_rows(),
        n_features: table.n_features(),
        n_train: train_raw.n_rows(),
        n_valid: valid_raw.n_rows(),
        rows,
        skipped,
    };

    if let Some(out) = &config.out {
        create_dir(out)?;
        for sub in ["curves", "models", "history"] {
            create_dir(&out.join(sub))?;
        }
        write_file(&out.join("grid.csv"), result.grid_csv())?;
        write_file(&out.join("grid.json"), serde_json::to_string_pretty(&result)?)?;
        write_file(&out.join("config.json"), serde_json::to_string_pretty(config)?)?;

        let mut split = format!("# {provenance}\nrow,set\n");
        let mut sets = vec![""; table.n_rows()];
        for &i in &train_idx {
            sets[i] = "train";
        }
        for &i in &valid_idx {
            sets[i] = "valid";
        }
        for (i, s) in sets.iter().enumerate() {
            let _ = writeln!(split, "{i},{s}");
        }
        write_file(&out.join("split.csv"), split)?;

        let mut corr = format!("# {provenance}\nfeature,correlation,degenerate\n");
        for (i, name) in report.feature_names.iter().enumerate() {
            let _ = writeln!(corr, "{name},{},{}", report.flag_corr[i], report.degenerate[i]);
        }
        write_file(&out.join("correlations.csv"), corr)?;

        for row in &result.rows {
            write_file(
                &top_features_path(out, row.feature_count),
                top_features_csv(&provenance, &row.top_features),
            )?;
            for cell in &row.cells {
                if let Some(r) = cell.report() {
                    let stem = cell_stem(row.feature_count, cell.method);
                    write_file(
                        &out.join("curves").join(format!("{stem}_roc.csv")),
                        format!("# {provenance}\n{}", r.roc_csv()),
                    )?;
                    write_file(
                        &out.join("curves").join(format!("{stem}_pr.csv")),
                        format!("# {provenance}\n{}", r.pr_csv()),
                    )?;
                }
            }
        }
        for (count, method, pipeline, history) in &extras {
            let stem = cell_stem(*count, *method);
            if let (true, Some(p)) = (config.save_models, pipeline) {
                p.save(out.join("models").join(format!("{stem}.pgn4")))?;
            }
            if let Some(h) = history {
                h.write_csv(out.join("history").join(format!("{stem}.csv")), Some(&provenance))?;
            }
        }
    }
    Ok(result)
}

/// Mean and population standard deviation of each metric across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummaryRow {
    pub feature_count: FeatureCount,
    pub method: Method,
    pub runs: usize,
    pub metrics: BTreeMap<String, (f64, f64)>,
}

/// Runs the sweep `repeats` times with seeds `seed, seed+1, ...` on the same
/// data, each into `out/repeat_<r>`, and writes `out/summary.csv`.
pub fn run_repeats(config: &ExperimentConfig, repeats: usize) -> Result<(Vec<SweepResult>, Vec<RepeatSummaryRow>)> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let mut results = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut c = config.clone();
        c.seed = config.seed.wrapping_add(r as u64);
        c.data_seed = Some(config.data_seed.unwrap_or(config.seed));
        c.out = config.out.as_ref().map(|o| o.join(format!("repeat_{r}")));
        results.push(run_sweep(&c)?);
    }
    let mut summary = Vec::new();
    for row in &results[0].rows {
        for cell in &row.cells {
            let reports: Vec<&EvalReport> = results
                .iter()
                .filter_map(|res| res.cell(row.feature_count, cell.method)?.report())
                .collect();
            let mut metrics = BTreeMap::new();
            if !reports.is_empty() {
                for (name, get) in METRICS {
                    let vals: Vec<f64> = reports.iter().map(|r| get(r)).collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                    metrics.insert(name.to_string(), (mean, var.sqrt()));
                }
            }
            summary.push(RepeatSummaryRow {
                feature_count: row.feature_count,
                method: cell.method,
                runs: reports.len(),
                metrics,
            });
        }
    }
    if let Some(out) = &config.out {
        let mut s = format!("# {} repeats={repeats}\n", config.provenance_line()?);
        s.push_str("feature_count,method,runs");
        for (name, _) in METRICS {
            let _ = write!(s, ",{name}_mean,{name}_std");
        }
        s.push('\n');
        for row in &summary {
            let _ = write!(s, "{},{},{}", row.feature_count, row.method, row.runs);
            for (name, _) in METRICS {
                match row.metrics.get(name) {
                    Some((m, sd)) => {
                        let _ = write!(s, ",{m},{sd}");
                    }
                    None => s.push_str(",,"),
                }
            }
            s.push('\n');
        }
        write_file(&out.join("summary.csv"), s)?;
    }
    Ok((results, summary))
}

type MetricGetter = fn(&EvalReport) -> f64;

pub const METRICS: [(&str, MetricGetter); 4] = [
    ("accuracy", |r| r.accuracy),
    ("f1", |r| r.f1),
    ("roc_auc", |r| r.roc_auc),
    ("pr_auc", |r| r.pr_auc),
];

/// Loads `grid.json` from a sweep output directory.
pub fn load_sweep(dir: impl AsRef<Path>) -> Result<SweepResult> {
    let path = dir.as_ref().join("grid.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path,
        message: format!("corrupt sweep result: {e}"),
    })
}

/// Plain-text table of the grid. Within each feature count the best value of
/// every metric column is marked with `*`; failed cells render as `-`.
/// Below the table, the top features of the smallest feature count.
pub fn render_report(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} rows x {} features ({} train / {} validation), seed {}, config {}",
        result.n_rows,
        result.n_features,
        result.n_train,
        result.n_valid,
        result.seed,
        &result.config_hash[..12.min(result.config_hash.len())]
    );
    let _ = writeln!(
        s,
        "{:<10} {:<6} {:>9} {:>9} {:>9} {:>9}",
        "N", "Method", "Acc", "F1", "ROC AUC", "PR AUC"
    );
    for row in &result.rows {
        let best: Vec<Option<f64>> = METRICS
            .iter()
            .map(|(_, get)| {
                row.cells
                    .iter()
                    .filter_map(|c| c.report().map(|r| get(r)))
                    .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            })
            .collect();
        for cell in &row.cells {
            let n_label = if row.feature_count == FeatureCount::Full {
                format!("full({})", row.n_features)
            } else {
                row.feature_count.label()
            };
            let _ = write!(s, "{:<10} {:<6}", n_label, cell.method.label());
            for (k, (_, get)) in METRICS.iter().enumerate() {
                let text = match cell.report() {
                    Some(r) => {
                        let v = get(r);
                        let mark = if Some(v) == best[k] { "*" } else { " " };
                        format!("{v:.4}{mark}")
                    }
                    None => "-".into(),
                };
                let _ = write!(s, " {text:>9}");
            }
            s.push('\n');
        }
    }
    for sk in &result.skipped {
        let _ = writeln!(s, "{:<10} -      (skipped: {})", sk.feature_count.label(), sk.reason);
    }
    let smallest = result
        .rows
        .iter()
        .filter(|r| !r.top_features.is_empty())
        .min_by_key(|r| r.n_features);
    if let Some(row) = smallest {
        let _ = writeln!(s, "\nTop {} features by |correlation| with the flag:", row.n_features);
        let _ = writeln!(s, "{:>4}  {:<32} {:>12} {:>9}", "Rank", "Feature", "Correlation", "Position");
        for t in &row.top_features {
            let _ = writeln!(
                s,
                "{:>4}  {:<32} {:>12.4} {:>9}",
                t.rank, t.feature, t.correlation, t.input_position
            );
        }
    }
    s
}
