//! Acceptance suite: one test per criterion. Each test prints a single
//! `[PASS]`/`[FAIL]` line with the measured quantity and the pinned tolerance
//! (run with `--nocapture` to see them), and the test name itself reports the
//! outcome in the normal harness output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pgn4_core::baselines::{
    fit, fixture_params, separable_fixture, Classifier, DecisionTree, ForestConfig, Method,
    RandomForest, TreeConfig,
};
use pgn4_core::experiment::{run_sweep, ExperimentConfig, FeatureCount};
use pgn4_core::metrics::{pr_auc, roc_auc};
use pgn4_core::nn::{Conv1d, Dense, Network, Pgn4Config, Pgn4Model};
use pgn4_core::persist::Pipeline;
use pgn4_core::select::{correlation_report, pearson, select_and_arrange, RankMode};
use pgn4_core::synth::{generate, reason_histogram, ReasonDistribution, SynthSpec};
use pgn4_core::tensor::{Matrix, Rng, Tensor3};
use pgn4_core::train::{adam_step, gradient_check, train, AdamState, TrainConfig, GRAD_CHECK_FLOOR};
use pgn4_core::synth::Preset;
use pgn4_core::{DatasetTable, Error, MethodParams};

// Pinned tolerances.
const GRAD_TOL_FULL: f64 = 1e-4;
const GRAD_TOL_LAYER: f64 = 1e-6;
const GRAD_STEP: f64 = 1e-5;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const SHAPE_BUDGET: Duration = Duration::from_secs(1);
const ADAM_TRACE_TOL: f64 = 1e-12;
const ADAM_FIRST_STEP_TOL: f64 = 1e-6;
const METRIC_TOL: f64 = 1e-12;
const METRIC_INSTANCES: u64 = 200;
const ARRANGE_TABLES: u64 = 100;
const PLANTED_SEEDS: u64 = 10;
const PLANTED_MIN_HITS: usize = 9;
const OVERFIT_LOSS: f64 = 0.01;
const OVERFIT_EPOCHS: usize = 200;
const OVERFIT_LR: f64 = 1e-3;
const MIN_PGN4_AUC_AT_5: f64 = 0.85;
const MAX_AUC_DROP_FULL_TO_5: f64 = 0.05;
const SWEEP_BUDGET: Duration = Duration::from_secs(15 * 60);
const REASON_SAMPLES: usize = 100_000;
const REASON_TOL: f64 = 0.02;

fn verdict(criterion: u32, title: &str, pass: bool, detail: String) {
    println!(
        "[{}] criterion {criterion}: {title} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({title}) failed: {detail}");
}

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / (norm(a) + norm(n)).max(GRAD_CHECK_FLOOR)
}

/// Central differences of `loss` with respect to every entry of `params`.
fn numeric<F: FnMut(&[f64]) -> f64>(params: &[f64], mut loss: F) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + GRAD_STEP;
            let up = loss(&p);
            p[i] = orig - GRAD_STEP;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * GRAD_STEP)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let mut rng = Rng::new(1);

    // Full network: 12 inputs, batch of 4.
    let model = Pgn4Model::init(12, &mut rng, Pgn4Config::default()).unwrap();
    let x = Matrix::new(4, 12, rng.normal(48, 0.0, 1.0).unwrap()).unwrap();
    let labels = [1.0, 0.0, 1.0, 0.0];
    let full = gradient_check(&model, &x, &labels, GRAD_STEP, GRAD_TOL_FULL).unwrap();

    // Dense layer alone, loss = <R, W x + b>.
    let mut dense = Dense::new(7, 5);
    dense.weight = rng.normal(35, 0.0, 0.5).unwrap();
    dense.bias = rng.normal(5, 0.0, 0.5).unwrap();
    let dx = Matrix::new(4, 7, rng.normal(28, 0.0, 1.0).unwrap()).unwrap();
    let dr = Matrix::new(4, 5, rng.normal(20, 0.0, 1.0).unwrap()).unwrap();
    let dg = dense.backward(&dx, &dr).unwrap();
    let dense_errs = [
        rel_error(
            &dg.weight,
            &numeric(&dense.weight, |w| {
                let d = Dense { weight: w.to_vec(), ..dense.clone() };
                dot(d.forward(&dx).unwrap().data(), dr.data())
            }),
        ),
        rel_error(
            &dg.bias,
            &numeric(&dense.bias, |b| {
                let d = Dense { bias: b.to_vec(), ..dense.clone() };
                dot(d.forward(&dx).unwrap().data(), dr.data())
            }),
        ),
        rel_error(
            dg.input.data(),
            &numeric(dx.data(), |v| {
                let m = Matrix::new(4, 7, v.to_vec()).unwrap();
                dot(dense.forward(&m).unwrap().data(), dr.data())
            }),
        ),
    ];

    // Convolution alone, both strides.
    let mut conv_errs = Vec::new();
    for stride in [1, 2] {
        let mut conv = Conv1d::new(3, 4, 3, stride).unwrap();
        conv.weight = rng.normal(conv.weight.len(), 0.0, 0.5).unwrap();
        conv.bias = rng.normal(4, 0.0, 0.5).unwrap();
        let cx = Tensor3::new(2, 3, 9, rng.normal(54, 0.0, 1.0).unwrap()).unwrap();
        let out_len = conv.output_length(9);
        let r = Tensor3::new(2, 4, out_len, rng.normal(8 * out_len, 0.0, 1.0).unwrap()).unwrap();
        let g = conv.backward(&cx, &r).unwrap();
        conv_errs.push(rel_error(
            &g.weight,
            &numeric(&conv.weight, |w| {
                let c = Conv1d { weight: w.to_vec(), ..conv.clone() };
                dot(c.forward(&cx).unwrap().data(), r.data())
            }),
        ));
        conv_errs.push(rel_error(
            &g.bias,
            &numeric(&conv.bias, |b| {
                let c = Conv1d { bias: b.to_vec(), ..conv.clone() };
                dot(c.forward(&cx).unwrap().data(), r.data())
            }),
        ));
        conv_errs.push(rel_error(
            g.input.data(),
            &numeric(cx.data(), |v| {
                let t = Tensor3::new(2, 3, 9, v.to_vec()).unwrap();
                dot(conv.forward(&t).unwrap().data(), r.data())
            }),
        ));
    }
    let elapsed = start.elapsed();
    let dense_max = dense_errs.iter().cloned().fold(0.0, f64::max);
    let conv_max = conv_errs.iter().cloned().fold(0.0, f64::max);
    let pass = full.passed()
        && full.tensors.len() == model.param_names().len()
        && dense_max < GRAD_TOL_LAYER
        && conv_max < GRAD_TOL_LAYER
        && elapsed < GRAD_BUDGET;
    verdict(
        1,
        "gradient correctness",
        pass,
        format!(
            "full PGN4 max rel err {:.2e} over {} tensors (< {GRAD_TOL_FULL:e}), dense {dense_max:.2e}, \
             conv {conv_max:.2e} (< {GRAD_TOL_LAYER:e}), {:.2}s (< {}s)",
            full.max_rel_error(),
            full.tensors.len(),
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs()
        ),
    );
}

#[test]
fn criterion_2_shape_law() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for stride in [1, 2] {
        let conv = Conv1d::new(1, 1, 3, stride).unwrap();
        for len in 4usize..=256 {
            let expect = len.div_ceil(stride);
            let actual = conv.forward(&Tensor3::zeros(1, 1, len)).unwrap().length();
            if conv.output_length(len) != expect || actual != expect {
                bad.push((len, stride));
            }
        }
    }
    let mut rng = Rng::new(0);
    let widths: Vec<usize> = [102, 27, 5]
        .iter()
        .map(|&f| Pgn4Model::init(f, &mut rng, Pgn4Config::default()).unwrap().flatten_width())
        .collect();
    let elapsed = start.elapsed();
    verdict(
        2,
        "shape law",
        bad.is_empty() && widths == [832, 224, 64] && elapsed < SHAPE_BUDGET,
        format!(
            "{} length mismatches over L in [4,256] x strides {{1,2}}; flatten widths {widths:?} \
             (expected [832, 224, 64]); {:.3}s (< 1s)",
            bad.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_optimizer_correctness() {
    let cfg = TrainConfig::default();
    let targets = [3.0, -1.5, 0.25];
    let mut theta = vec![0.5, 2.0, -4.0];
    let mut state = AdamState::new(&[3]);
    // Independent scalar recurrence.
    let mut ref_theta = theta.clone();
    let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
    let mut max_dev: f64 = 0.0;
    let mut first_step_err: f64 = 0.0;
    for t in 1..=10 {
        let grads: Vec<f64> = theta.iter().zip(&targets).map(|(p, c)| 2.0 * (p - c)).collect();
        let before = theta.clone();
        adam_step(&mut [&mut theta[..]], &[grads], &mut state, &cfg).unwrap();
        for i in 0..3 {
            let g = 2.0 * (ref_theta[i] - targets[i]);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = m[i] / (1.0 - cfg.beta1.powi(t));
            let vh = v[i] / (1.0 - cfg.beta2.powi(t));
            ref_theta[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.eps);
            max_dev = max_dev.max((theta[i] - ref_theta[i]).abs());
            if t == 1 {
                let expected = -cfg.learning_rate * g.signum();
                let step = theta[i] - before[i];
                first_step_err = first_step_err.max(((step - expected) / expected).abs());
            }
        }
    }
    verdict(
        3,
        "optimizer correctness",
        max_dev <= ADAM_TRACE_TOL && first_step_err <= ADAM_FIRST_STEP_TOL,
        format!(
            "10-step trace max deviation {max_dev:.1e} (<= {ADAM_TRACE_TOL:e}); first step \
             |Δθ| vs lr·sign(g) rel err {first_step_err:.1e} (<= {ADAM_FIRST_STEP_TOL:e})"
        ),
    );
}

fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Every distinct score as a threshold (predict flagged when score >= t),
/// highest first, plus the recall-0 anchor at the top threshold's precision.
fn brute_pr_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut pts = Vec::new();
    for &t in &thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == 1).count() as f64;
        let predicted = scores.iter().filter(|s| **s >= t).count() as f64;
        pts.push((tp / pos, tp / predicted));
    }
    let mut area = 0.0;
    let mut prev = (0.0, pts[0].1);
    for p in pts {
        area += (p.0 - prev.0) * (p.1 + prev.1) / 2.0;
        prev = p;
    }
    area
}

#[test]
fn criterion_4_metric_oracles() {
    let (mut roc_dev, mut pr_dev): (f64, f64) = (0.0, 0.0);
    let mut tie_heavy = 0;
    for k in 0..METRIC_INSTANCES {
        let mut rng = Rng::new(1000 + k);
        let n = 2 + rng.below(60);
        // Every third instance draws scores from just a few levels.
        let levels = if k % 3 == 0 { 2 + rng.below(4) } else { 0 };
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if levels > 0 {
                    rng.below(levels) as f64 / levels as f64
                } else {
                    rng.next_f64()
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        if levels > 0 {
            tie_heavy += 1;
        }
        roc_dev = roc_dev.max((roc_auc(&scores, &labels).unwrap().0 - mann_whitney(&scores, &labels)).abs());
        pr_dev = pr_dev.max((pr_auc(&scores, &labels).unwrap().0 - brute_pr_auc(&scores, &labels)).abs());
    }
    verdict(
        4,
        "metric oracle equivalence",
        roc_dev <= METRIC_TOL && pr_dev <= METRIC_TOL,
        format!(
            "{METRIC_INSTANCES} instances ({tie_heavy} heavy-tie): max |ROC - Mann-Whitney| {roc_dev:.1e}, \
             max |PR - brute force| {pr_dev:.1e} (<= {METRIC_TOL:e})"
        ),
    );
}

#[test]
fn criterion_5_feature_arrangement() {
    let mut violations = Vec::new();
    for k in 0..ARRANGE_TABLES {
        let mut rng = Rng::new(5000 + k);
        let rows = 20 + rng.below(40);
        let cols = 3 + rng.below(12);
        let x = Matrix::new(rows, cols, rng.normal(rows * cols, 0.0, 1.0).unwrap()).unwrap();
        let mut labels: Vec<u8> = (0..rows).map(|_| (rng.next_u64() & 1) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let names = (0..cols).map(|c| format!("c{c}")).collect();
        let table = DatasetTable::new(names, x.clone(), labels.clone()).unwrap();
        let report = correlation_report(&table).unwrap();
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let mut brute: Vec<(usize, f64)> = (0..cols)
            .map(|c| (c, pearson(&x.column(c), &y).unwrap().r.abs()))
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let n = 1 + rng.below(cols);
        let a = select_and_arrange(&report, n, RankMode::Absolute).unwrap();
        let b = select_and_arrange(&report, n, RankMode::Absolute).unwrap();
        let mut got: Vec<String> = a.ordered_names.clone();
        got.sort();
        let mut want: Vec<String> = brute[..n].iter().map(|(c, _)| format!("c{c}")).collect();
        want.sort();
        if got != want || a.ordered_names[0] != format!("c{}", brute[0].0) || a != b {
            violations.push(k);
        }
    }
    let mut hits = 0;
    for seed in 0..PLANTED_SEEDS {
        let spec = SynthSpec {
            signal_strengths: vec![0.45, 0.40, 0.35, 0.30, 0.25],
            ..SynthSpec::a_like(seed)
        };
        let data = generate(&spec).unwrap();
        let report = correlation_report(&data.table).unwrap();
        let arr = select_and_arrange(&report, 5, RankMode::Absolute).unwrap();
        let mut got: Vec<usize> = arr
            .ordered_names
            .iter()
            .map(|n| data.table.feature_index(n).unwrap())
            .collect();
        got.sort_unstable();
        let mut planted = data.signal_columns.clone();
        planted.sort_unstable();
        hits += usize::from(got == planted);
    }
    verdict(
        5,
        "feature arrangement properties",
        violations.is_empty() && hits >= PLANTED_MIN_HITS,
        format!(
            "{} of {ARRANGE_TABLES} random tables violate permutation/argmax/determinism; planted \
             top-5 recovered on {hits}/{PLANTED_SEEDS} seeds (>= {PLANTED_MIN_HITS})",
            violations.len()
        ),
    );
}

#[test]
fn criterion_6_trainability() {
    // Overfit: 32 rows made of four distinct samples.
    let mut rng = Rng::new(6);
    let base = rng.normal(4 * 8, 0.0, 1.0).unwrap();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..32 {
        data.extend_from_slice(&base[(i % 4) * 8..(i % 4 + 1) * 8]);
        labels.push((i % 2) as u8);
    }
    let names = (0..8).map(|i| format!("f{i}")).collect();
    let tiny = DatasetTable::new(names, Matrix::new(32, 8, data).unwrap(), labels).unwrap();
    let mut model = Pgn4Model::init(8, &mut Rng::new(7), Pgn4Config::default()).unwrap();
    let cfg = TrainConfig {
        epochs: OVERFIT_EPOCHS,
        // The default 2e-4 ends at BCE ~0.012 after 200 epochs; 1e-3 clears it.
        learning_rate: OVERFIT_LR,
        ..Default::default()
    };
    let history = train(&mut model, &tiny, &tiny, &cfg).unwrap();
    let overfit_loss = history.epochs.last().unwrap().train_loss;

    // Full 6-method x 5-count sweep on A-like data.
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        preset: Some(Preset::ALike),
        out: Some(dir.path().to_path_buf()),
        save_models: false,
        ..Default::default()
    };
    let start = Instant::now();
    let result = run_sweep(&config).unwrap();
    let elapsed = start.elapsed();
    let auc = |count| {
        result
            .cell(count, Method::Pgn4)
            .and_then(|c| c.report())
            .map(|r| r.roc_auc)
            .unwrap()
    };
    let (full, five) = (auc(FeatureCount::Full), auc(FeatureCount::N(5)));
    let cells = result.rows.iter().map(|r| r.cells.len()).sum::<usize>();
    let pass = overfit_loss < OVERFIT_LOSS
        && cells == 30
        && result.failed_cells() == 0
        && five >= MIN_PGN4_AUC_AT_5
        && full - five <= MAX_AUC_DROP_FULL_TO_5
        && elapsed < SWEEP_BUDGET;
    verdict(
        6,
        "trainability",
        pass,
        format!(
            "overfit BCE {overfit_loss:.2e} (< {OVERFIT_LOSS}) in {OVERFIT_EPOCHS} epochs at lr {OVERFIT_LR:e}; PGN4 ROC AUC \
             N=5 {five:.4} (>= {MIN_PGN4_AUC_AT_5}), full {full:.4}, drop {:.4} (<= {MAX_AUC_DROP_FULL_TO_5}); \
             {cells} cells in {:.0}s (< {}s)",
            full - five,
            elapsed.as_secs_f64(),
            SWEEP_BUDGET.as_secs()
        ),
    );
}

#[test]
fn criterion_7_baseline_sanity() {
    let fixture = separable_fixture();
    let params = fixture_params();
    let mut accs = Vec::new();
    for m in [Method::Svm, Method::Dt, Method::Rf, Method::Ada, Method::Nn] {
        let model = fit(m, &fixture, &fixture, &params, 11).unwrap().model;
        let scores = model.score(fixture.features()).unwrap();
        let correct = scores
            .iter()
            .zip(fixture.labels())
            .filter(|(s, l)| (**s >= 0.5) == (**l == 1))
            .count();
        accs.push((m, correct as f64 / fixture.n_rows() as f64));
    }
    let mut rng = Rng::new(12);
    let x = Matrix::new(120, 5, rng.normal(600, 0.0, 1.0).unwrap()).unwrap();
    let y: Vec<u8> = (0..120).map(|r| u8::from(x.get(r, 0) - x.get(r, 2) + 0.5 * rng.normal(1, 0.0, 1.0).unwrap()[0] > 0.0)).collect();
    let forest = RandomForest::fit(
        &x,
        &y,
        ForestConfig {
            n_trees: 1,
            bootstrap: false,
            feature_subsampling: false,
            ..Default::default()
        },
    )
    .unwrap();
    let tree = DecisionTree::fit(&x, &y, TreeConfig::default()).unwrap();
    let same = forest.trees[0] == tree && forest.score(&x).unwrap() == tree.score(&x).unwrap();
    verdict(
        7,
        "baseline sanity",
        accs.iter().all(|(_, a)| *a == 1.0) && same,
        format!(
            "training accuracy on the 20-point separable fixture: {}; degenerate forest == tree: {same}",
            accs.iter().map(|(m, a)| format!("{}={a}", m.label())).collect::<Vec<_>>().join(" ")
        ),
    );
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_8_determinism_and_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        preset: Some(Preset::BLike),
        feature_counts: vec![FeatureCount::Full, FeatureCount::N(5)],
        params: MethodParams {
            train: TrainConfig {
                epochs: 3,
                ..Default::default()
            },
            forest: ForestConfig {
                n_trees: 10,
                ..Default::default()
            },
            ..Default::default()
        },
        seed: 8,
        ..Default::default()
    };
    for run in ["a", "b"] {
        run_sweep(&ExperimentConfig {
            out: Some(dir.path().join(run)),
            ..base.clone()
        })
        .unwrap();
    }
    let files = files_under(&dir.path().join("a"));
    let identical = files == files_under(&dir.path().join("b"))
        && files.iter().all(|f| {
            fs::read(dir.path().join("a").join(f)).unwrap() == fs::read(dir.path().join("b").join(f)).unwrap()
        });

    let table = base.load_table().unwrap();
    let mut exact = 0;
    let mut rejected = 0;
    for m in Method::ALL {
        let path = dir.path().join("a").join("models").join(format!("N5_{}.pgn4", m.id()));
        let p = Pipeline::load(&path).unwrap();
        let reloaded = Pipeline::from_bytes(&p.to_bytes().unwrap()).unwrap();
        let s1 = p.score_table(&table).unwrap();
        let s2 = reloaded.score_table(&table).unwrap();
        exact += usize::from(s1.iter().zip(&s2).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut bytes = fs::read(&path).unwrap();
        let k = bytes.len() / 2;
        bytes[k] ^= 0x10;
        rejected += usize::from(matches!(Pipeline::from_bytes(&bytes), Err(Error::Checksum)));
    }
    verdict(
        8,
        "determinism and persistence",
        identical && exact == 6 && rejected == 6,
        format!(
            "{} artifacts byte-identical across two runs: {identical}; bit-exact reload {exact}/6 methods; \
             corrupted files rejected by checksum {rejected}/6",
            files.len()
        ),
    );
}

#[test]
fn criterion_9_synthetic_fidelity() {
    let a = generate(&SynthSpec::a_like(0)).unwrap().table;
    let b = generate(&SynthSpec::b_like(0)).unwrap().table;
    let shapes = [(a.n_rows(), a.n_features()), (b.n_rows(), b.n_features())];

    let dist = ReasonDistribution::default();
    let mut rng = Rng::new(9);
    let codes: Vec<&str> = (0..REASON_SAMPLES).map(|_| dist.sample(&mut rng)).collect();
    let hist = reason_histogram(&codes).unwrap();
    let max_dev = hist
        .iter()
        .map(|(code, f)| (f - dist.probability(code).unwrap()).abs())
        .fold(0.0, f64::max);

    let result = run_sweep(&ExperimentConfig {
        preset: Some(Preset::BLike),
        methods: vec![Method::Dt],
        ..Default::default()
    })
    .unwrap();
    let run: Vec<String> = result.rows.iter().map(|r| r.feature_count.label()).collect();
    let skipped: Vec<String> = result.skipped.iter().map(|s| s.feature_count.label()).collect();
    verdict(
        9,
        "synthetic fidelity",
        shapes == [(4056, 102), (4132, 27)] && max_dev <= REASON_TOL && skipped == ["50"] && run.len() == 4,
        format!(
            "preset shapes {shapes:?}; max reason-frequency deviation {max_dev:.4} at {REASON_SAMPLES} \
             samples (<= {REASON_TOL}); B-like counts run {run:?}, skipped {skipped:?}"
        ),
    );
}
