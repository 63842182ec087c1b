//! `pgn4`: experiment runner for correlation-arranged 1-D CNN problem-gambler
//! detection and its baselines.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pgn4_core::baselines::{fit, Classifier, Method};
use pgn4_core::data::{split_indices, standardize};
use pgn4_core::experiment::{
    load_sweep, parse_feature_counts, parse_methods, render_report, run_repeats, run_sweep,
    ExperimentConfig, FeatureCount, SelectionScope,
};
use pgn4_core::metrics::evaluate;
use pgn4_core::persist::Pipeline;
use pgn4_core::select::{correlation_report, project, select_and_arrange};
use pgn4_core::synth::{generate, reason_histogram, Preset, SynthSpec};
use pgn4_core::tensor::{derive_seed, Rng};

#[derive(Parser)]
#[command(name = "pgn4", version, about = "Problem-gambler detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Rank features by correlation with the flag on the training split.
    ReportCorrelations(CorrArgs),
    /// Run the feature-count x method grid and write all artifacts.
    Sweep(SweepArgs),
    /// Train one method at one feature count and save the model.
    Train(TrainArgs),
    /// Score a CSV with a saved model and print the four metrics.
    Evaluate(EvaluateArgs),
    /// Print a sweep's grid and top features as a text table.
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic preset instead of a CSV: a-like or b-like.
    #[arg(long)]
    preset: Option<Preset>,
    /// Label column name.
    #[arg(long)]
    label: Option<String>,
    /// Columns to ignore (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
    /// Seed for splitting, initialization and synthetic data.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct TrainFlags {
    /// Training epochs for PGN4 and the MLP.
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size for PGN4 and the MLP.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate for PGN4 and the MLP.
    #[arg(long)]
    lr: Option<f64>,
    /// Trees in the random forest.
    #[arg(long)]
    n_trees: Option<usize>,
    /// Boosting rounds for AdaBoost.
    #[arg(long)]
    ada_rounds: Option<usize>,
    /// Maximum depth for the decision tree and forest trees.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Validation fraction of the seeded split.
    #[arg(long)]
    valid_fraction: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset preset: a-like or b-like (or give --spec).
    #[arg(long, conflicts_with = "spec")]
    preset: Option<Preset>,
    /// JSON generator specification.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of features to list.
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Rank on every row instead of the training split.
    #[arg(long)]
    full_table: bool,
    /// Also write the full ranking as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainFlags,
    /// Feature counts, e.g. 5,10,20,50,full.
    #[arg(long)]
    features: Option<String>,
    /// Methods, e.g. pgn4,svm,dt,rf,ada,nn.
    #[arg(long)]
    methods: Option<String>,
    /// Rank features on every row (validation included) instead of the
    /// training split.
    #[arg(long)]
    full_table_selection: bool,
    /// Skip writing model files.
    #[arg(long)]
    no_models: bool,
    /// Repeat over k consecutive seeds and report mean and std.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainFlags,
    /// Method: pgn4, svm, dt, rf, ada or nn.
    #[arg(long, default_value = "pgn4")]
    method: Method,
    /// Feature count: a number or "full".
    #[arg(long, default_value = "5")]
    features: FeatureCount,
    /// Output model path (.pgn4).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model (.pgn4).
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Write ROC and PR curve CSVs to this directory.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory.
    dir: PathBuf,
}

fn base_config(data: &DataArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &data.config {
        Some(p) => ExperimentConfig::from_json_file(p)
            .with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &data.data {
        cfg.data = Some(d.clone());
        cfg.preset = None;
    }
    if let Some(p) = data.preset {
        cfg.preset = Some(p);
        cfg.data = None;
    }
    if let Some(l) = &data.label {
        cfg.label = l.clone();
    }
    if let Some(e) = &data.exclude {
        cfg.exclude = e.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(s) = data.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut ExperimentConfig, t: &TrainFlags) {
    let p = &mut cfg.params;
    if let Some(v) = t.epochs {
        p.train.epochs = v;
    }
    if let Some(v) = t.batch_size {
        p.train.batch_size = v;
    }
    if let Some(v) = t.lr {
        p.train.learning_rate = v;
    }
    if let Some(v) = t.n_trees {
        p.forest.n_trees = v;
    }
    if let Some(v) = t.ada_rounds {
        p.ada.n_rounds = v;
    }
    if let Some(v) = t.max_depth {
        p.tree.max_depth = v;
        p.forest.max_depth = v;
    }
    if let Some(v) = t.valid_fraction {
        cfg.valid_fraction = v;
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let (spec, source) = match (&a.preset, &a.spec) {
        (Some(p), None) => (p.spec(a.seed), p.name().to_string()),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut spec: SynthSpec = serde_json::from_str(&text)?;
            spec.seed = a.seed;
            (spec, path.display().to_string())
        }
        _ => bail!("give exactly one of --preset or --spec"),
    };
    let data = generate(&spec)?;
    data.write_csv(&a.out, Some(&format!("source={source} seed={}", spec.seed)))
        .with_context(|| format!("writing {}", a.out.display()))?;
    let (neg, pos) = data.table.class_counts();
    println!(
        "wrote {}: {} rows x {} features ({pos} flagged, {neg} unflagged)",
        a.out.display(),
        data.table.n_rows(),
        data.table.n_features()
    );
    let names: Vec<&str> = data
        .signal_columns
        .iter()
        .map(|&c| data.table.feature_names()[c].as_str())
        .collect();
    println!("planted features: {}", names.join(", "));
    if let Some(reasons) = &data.reasons {
        let flagged: Vec<&String> = reasons.iter().filter(|r| !r.is_empty()).collect();
        if !flagged.is_empty() {
            println!("reason codes:");
            for (code, freq) in reason_histogram(&flagged)? {
                println!("  {code:<22} {freq:.4}");
            }
        }
    }
    Ok(())
}

fn cmd_correlations(a: CorrArgs) -> Result<()> {
    let cfg = base_config(&a.data)?;
    let table = cfg.load_table()?;
    let report = if a.full_table {
        correlation_report(&table)?
    } else {
        let (train, _) = split_indices(
            table.n_rows(),
            cfg.valid_fraction,
            &mut Rng::new(derive_seed(cfg.seed, 10)),
        )?;
        correlation_report(&table.select_rows(&train))?
    };
    let ranking = report.ranking(cfg.rank_mode);
    println!("{:>4}  {:<32} {:>12}", "Rank", "Feature", "Correlation");
    for (rank, &i) in ranking.iter().take(a.top).enumerate() {
        println!("{:>4}  {:<32} {:>12.4}", rank + 1, report.feature_names[i], report.flag_corr[i]);
    }
    let degenerate = report.degenerate.iter().filter(|d| **d).count();
    if degenerate > 0 {
        println!("{degenerate} constant feature(s) excluded from ranking");
    }
    if let Some(out) = a.out {
        let mut s = format!("# {}\nrank,feature,correlation\n", cfg.provenance_line()?);
        for (rank, &i) in ranking.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", rank + 1, report.feature_names[i], report.flag_corr[i]));
        }
        fs::write(&out, s).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<bool> {
    let mut cfg = base_config(&a.data)?;
    apply_train_flags(&mut cfg, &a.train);
    if let Some(f) = &a.features {
        cfg.feature_counts = parse_feature_counts(f)?;
    }
    if let Some(m) = &a.methods {
        cfg.methods = parse_methods(m)?;
    }
    if a.full_table_selection {
        cfg.selection_scope = SelectionScope::FullTable;
    }
    if a.no_models {
        cfg.save_models = false;
    }
    cfg.out = Some(a.out.clone());
    if a.repeats > 1 {
        let (results, summary) = run_repeats(&cfg, a.repeats)?;
        println!("{} repeats (extension: mean ± std over consecutive seeds)", a.repeats);
        println!("{:<8} {:<6} {:>17} {:>17}", "N", "Method", "ROC AUC", "Accuracy");
        for row in &summary {
            let fmt = |k: &str| {
                row.metrics
                    .get(k)
                    .map_or("-".to_string(), |(m, s)| format!("{m:.4} ± {s:.4}"))
            };
            println!(
                "{:<8} {:<6} {:>17} {:>17}",
                row.feature_count.label(),
                row.method.label(),
                fmt("roc_auc"),
                fmt("accuracy")
            );
        }
        println!("summary written to {}", a.out.join("summary.csv").display());
        return Ok(results.iter().all(|r| r.failed_cells() == 0));
    }
    let result = run_sweep(&cfg)?;
    print!("{}", render_report(&result));
    println!("artifacts written to {}", a.out.display());
    let failed = result.failed_cells();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see grid.csv");
    }
    Ok(failed == 0)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = base_config(&a.data)?;
    apply_train_flags(&mut cfg, &a.train);
    let table = cfg.load_table()?;
    let (train_idx, valid_idx) = split_indices(
        table.n_rows(),
        cfg.valid_fraction,
        &mut Rng::new(derive_seed(cfg.seed, 10)),
    )?;
    let train_raw = table.select_rows(&train_idx);
    let valid_raw = table.select_rows(&valid_idx);
    let report = correlation_report(&train_raw)?;
    let n = match a.features {
        FeatureCount::Full => report.n_usable(),
        FeatureCount::N(n) => n,
    };
    let arrangement = select_and_arrange(&report, n, cfg.rank_mode)?;
    let (train, others, stats) = standardize(
        &project(&train_raw, &arrangement)?,
        &[&project(&valid_raw, &arrangement)?],
    )?;
    let valid = &others[0];
    let seed = pgn4_core::experiment::cell_seed(cfg.seed, n, a.method);
    let fitted = fit(a.method, &train, valid, &cfg.params, seed)?;
    let scores = fitted.model.score(valid.features())?;
    let eval = evaluate(&scores, valid.labels())?;
    let pipeline = Pipeline {
        arrangement,
        stats,
        model: fitted.model,
        provenance: serde_json::json!({
            "config_hash": cfg.hash()?,
            "seed": cfg.seed,
            "cell_seed": seed,
            "feature_count": a.features,
        }),
    };
    pipeline
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} on {n} features: validation accuracy {:.4}, F1 {:.4}, ROC AUC {:.4}, PR AUC {:.4}",
        a.method.label(),
        eval.accuracy,
        eval.f1,
        eval.roc_auc,
        eval.pr_auc
    );
    println!("input order: {}", pipeline.arrangement.ordered_names.join(", "));
    println!("model written to {}", a.out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let pipeline = Pipeline::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let cfg = base_config(&a.data)?;
    let table = cfg.load_table()?;
    let scores = pipeline.score_table(&table)?;
    let eval = evaluate(&scores, table.labels())?;
    println!("{}", serde_json::to_string_pretty(&eval)?);
    if let Some(dir) = a.curves {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("roc.csv"), eval.roc_csv())?;
        fs::write(dir.join("pr.csv"), eval.pr_csv())?;
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let result = load_sweep(&a.dir)?;
    print!("{}", render_report(&result));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a).map(|_| true),
        Command::ReportCorrelations(a) => cmd_correlations(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| true),
        Command::Report(a) => cmd_report(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
