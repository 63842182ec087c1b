//! Synthetic behavioral datasets with planted, correlation-controlled signal
//! features and responsible-gambling reason codes.
//!
//! Each row has a latent risk `r ~ N(0, 1)`; the rows with the largest `r`
//! (exactly `round(positive_rate * n)` of them) are flagged. Signal feature `k`
//! is `a_k * s + e` with unit Gaussian noise `e`, where `s` is either the flag
//! itself ([`SignalModel::FlagShift`]) or the latent risk
//! ([`SignalModel::LatentRisk`]), and `a_k` is found by bisection so the
//! empirical correlation with the flag hits the requested strength. Every
//! column then gets a random positive scale and offset so nothing arrives
//! pre-standardized.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::{write_csv, DatasetTable, ExtraColumn};
use crate::error::{Error, Result};
use crate::tensor::{derive_seed, Matrix, Rng};

pub const DEFAULT_LABEL_COLUMN: &str = "rg_flag";
pub const REASON_COLUMN: &str = "rg_reason";

/// Bisection stops once the bracket on `a_k` is narrower than this.
pub const CALIBRATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalModel {
    /// Signal features shift with the flag: class-conditional Gaussians.
    #[default]
    FlagShift,
    /// Signal features load on the continuous latent risk. The achievable
    /// correlation with the flag is capped by the point-biserial bound.
    LatentRisk,
}

/// A group of noise features sharing one common factor, giving pairwise
/// correlation `corr` among its members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseClique {
    pub size: usize,
    pub corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_signal: usize,
    /// Target |corr(feature, flag)| per signal feature.
    pub signal_strengths: Vec<f64>,
    /// Cliques take consecutive noise features, in column order.
    pub noise_cliques: Vec<NoiseClique>,
    pub positive_rate: f64,
    pub seed: u64,
    pub emit_reason_codes: bool,
    pub signal_model: SignalModel,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_rows: 1000,
            n_features: 10,
            n_signal: 0,
            signal_strengths: Vec::new(),
            noise_cliques: Vec::new(),
            positive_rate: 0.5,
            seed: 0,
            emit_reason_codes: true,
            signal_model: SignalModel::FlagShift,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ALike,
    BLike,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::ALike => "a-like",
            Preset::BLike => "b-like",
        }
    }

    pub fn spec(self, seed: u64) -> SynthSpec {
        match self {
            Preset::ALike => SynthSpec::a_like(seed),
            Preset::BLike => SynthSpec::b_like(seed),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a-like" | "a" => Ok(Preset::ALike),
            "b-like" | "b" => Ok(Preset::BLike),
            other => Err(Error::invalid(format!(
                "unknown preset '{other}' (expected a-like or b-like)"
            ))),
        }
    }
}

impl SynthSpec {
    /// 4,056 users × 102 features, five planted features at 0.45 … 0.25 and
    /// three correlated noise cliques.
    pub fn a_like(seed: u64) -> Self {
        Self {
            n_rows: 4056,
            n_features: 102,
            n_signal: 5,
            signal_strengths: vec![0.45, 0.40, 0.35, 0.30, 0.25],
            noise_cliques: vec![
                NoiseClique { size: 8, corr: 0.6 },
                NoiseClique { size: 6, corr: 0.4 },
                NoiseClique { size: 4, corr: 0.8 },
            ],
            seed,
            ..Self::default()
        }
    }

    /// 4,132 users × 27 features, five planted features at the magnitudes
    /// observed for the second dataset's top features.
    pub fn b_like(seed: u64) -> Self {
        Self {
            n_rows: 4132,
            n_features: 27,
            n_signal: 5,
            signal_strengths: vec![0.4792, 0.4714, 0.4191, 0.4133, 0.3724],
            noise_cliques: vec![NoiseClique { size: 4, corr: 0.5 }],
            seed,
            ..Self::default()
        }
    }

    /// Number of flagged rows.
    pub fn n_positive(&self) -> usize {
        (self.n_rows as f64 * self.positive_rate + 0.5).floor() as usize
    }

    /// Largest |corr(feature, flag)| the signal model can reach at this
    /// positive rate.
    pub fn strength_bound(&self) -> f64 {
        match self.signal_model {
            SignalModel::FlagShift => 1.0,
            SignalModel::LatentRisk => {
                let p = self.positive_rate;
                let n = Normal::standard();
                n.pdf(n.inverse_cdf(1.0 - p)) / (p * (1.0 - p)).sqrt()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::invalid("n_features must be >= 1"));
        }
        if self.n_signal > self.n_features {
            return Err(Error::invalid(format!(
                "n_signal ({}) exceeds n_features ({})",
                self.n_signal, self.n_features
            )));
        }
        if self.signal_strengths.len() != self.n_signal {
            return Err(Error::invalid(format!(
                "{} signal strengths given for {} signal features",
                self.signal_strengths.len(),
                self.n_signal
            )));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::invalid(format!(
                "positive rate must lie in (0, 1), got {}",
                self.positive_rate
            )));
        }
        let k = self.n_positive();
        if k == 0 || k >= self.n_rows {
            return Err(Error::invalid(format!(
                "{} rows at positive rate {} leave a class empty",
                self.n_rows, self.positive_rate
            )));
        }
        let bound = self.strength_bound();
        for &s in &self.signal_strengths {
            if !(s > 0.0) || s >= bound {
                return Err(Error::invalid(format!(
                    "signal strength {s} is infeasible: must lie in (0, {bound:.4}), the maximum \
                     point-biserial correlation at positive rate {}",
                    self.positive_rate
                )));
            }
        }
        let noise = self.n_features - self.n_signal;
        let in_cliques: usize = self.noise_cliques.iter().map(|c| c.size).sum();
        if in_cliques > noise {
            return Err(Error::invalid(format!(
                "noise cliques cover {in_cliques} features but only {noise} noise features exist"
            )));
        }
        for c in &self.noise_cliques {
            if c.size < 2 || !(0.0..1.0).contains(&c.corr) {
                return Err(Error::invalid(
                    "each noise clique needs size >= 2 and corr in [0, 1)",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub table: DatasetTable,
    /// One code per row; empty for unflagged rows.
    pub reasons: Option<Vec<String>>,
    /// Column index of each planted feature, strongest first.
    pub signal_columns: Vec<usize>,
    /// Empirical correlation of each planted feature with the flag.
    pub achieved_strengths: Vec<f64>,
}

impl SynthData {
    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let extra: Vec<ExtraColumn<'_>> = self
            .reasons
            .iter()
            .map(|r| ExtraColumn {
                name: REASON_COLUMN,
                values: r,
            })
            .collect();
        write_csv(&self.table, path, DEFAULT_LABEL_COLUMN, &extra, comment)
    }
}

struct Moments {
    ss: f64,
    se: f64,
    ee: f64,
    sy: f64,
    ey: f64,
    yy: f64,
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Moments {
    fn new(s: &[f64], e: &[f64], y: &[f64]) -> Self {
        let (s, e, y) = (centered(s), centered(e), centered(y));
        Self {
            ss: dot(&s, &s),
            se: dot(&s, &e),
            ee: dot(&e, &e),
            sy: dot(&s, &y),
            ey: dot(&e, &y),
            yy: dot(&y, &y),
        }
    }

    /// Empirical corr(a·s + e, y).
    fn corr(&self, a: f64) -> f64 {
        let var = a * a * self.ss + 2.0 * a * self.se + self.ee;
        (a * self.sy + self.ey) / (var * self.yy).sqrt()
    }
}

/// Smallest `a >= 0` (to [`CALIBRATION_TOLERANCE`]) with corr(a·s + e, y) >= target.
fn calibrate(m: &Moments, target: f64, bound: f64) -> Result<f64> {
    if m.corr(0.0) >= target {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while m.corr(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::invalid(format!(
                "signal strength {target} is not reachable on this sample (bound {bound:.4})"
            )));
        }
    }
    let mut lo = 0.0;
    while hi - lo > CALIBRATION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if m.corr(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Generates a dataset; a pure function of `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let n = spec.n_rows;
    let f = spec.n_features;

    let risk = Rng::new(derive_seed(spec.seed, 1)).normal(n, 0.0, 1.0)?;
    let mut by_risk: Vec<usize> = (0..n).collect();
    by_risk.sort_by(|&a, &b| risk[b].total_cmp(&risk[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; n];
    for &i in &by_risk[..spec.n_positive()] {
        labels[i] = 1;
    }
    let flag: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();

    let mut columns: Vec<usize> = (0..f).collect();
    Rng::new(derive_seed(spec.seed, 2)).shuffle(&mut columns);
    let signal_columns = columns[..spec.n_signal].to_vec();
    let mut noise_columns = columns[spec.n_signal..].to_vec();
    noise_columns.sort_unstable();

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); f];
    let noise_for = |col: usize| -> Result<Vec<f64>> {
        Rng::new(derive_seed(spec.seed, 1000 + col as u64)).normal(n, 0.0, 1.0)
    };

    let driver = match spec.signal_model {
        SignalModel::FlagShift => &flag,
        SignalModel::LatentRisk => &risk,
    };
    let bound = spec.strength_bound();
    let mut achieved = Vec::with_capacity(spec.n_signal);
    for (&col, &target) in signal_columns.iter().zip(&spec.signal_strengths) {
        let e = noise_for(col)?;
        let m = Moments::new(driver, &e, &flag);
        let a = calibrate(&m, target, bound)?;
        achieved.push(m.corr(a));
        values[col] = driver.iter().zip(&e).map(|(s, e)| a * s + e).collect();
    }

    let mut next = 0;
    for (c, clique) in spec.noise_cliques.iter().enumerate() {
        let g = Rng::new(derive_seed(spec.seed, 500 + c as u64)).normal(n, 0.0, 1.0)?;
        let (wg, we) = (clique.corr.sqrt(), (1.0 - clique.corr).sqrt());
        for &col in &noise_columns[next..next + clique.size] {
            let e = noise_for(col)?;
            values[col] = g.iter().zip(&e).map(|(g, e)| wg * g + we * e).collect();
        }
        next += clique.size;
    }
    for &col in &noise_columns[next..] {
        values[col] = noise_for(col)?;
    }

    let mut affine = Rng::new(derive_seed(spec.seed, 3));
    for col in &mut values {
        let scale = 0.5 + 4.5 * affine.next_f64();
        let offset = -10.0 + 20.0 * affine.next_f64();
        for v in col.iter_mut() {
            *v = offset + scale * *v;
        }
    }

    let mut data = vec![0.0; n * f];
    for (c, col) in values.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            data[r * f + c] = *v;
        }
    }
    let width = f.to_string().len().max(3);
    let names = (1..=f).map(|i| format!("f{i:0width$}")).collect();
    let table = DatasetTable::new(names, Matrix::new(n, f, data)?, labels)?;

    let reasons = spec.emit_reason_codes.then(|| {
        let dist = ReasonDistribution::default();
        let mut rng = Rng::new(derive_seed(spec.seed, 4));
        table
            .labels()
            .iter()
            .map(|&l| {
                if l == 1 {
                    dist.sample(&mut rng).to_string()
                } else {
                    String::new()
                }
            })
            .collect()
    });

    Ok(SynthData {
        table,
        reasons,
        signal_columns,
        achieved_strengths: achieved,
    })
}

/// Reasons a responsible-gambling unit flags an account, with the midpoint
/// of each reported proportion range ("0%–1%" rows use 0.5%).
pub const REASON_TABLE: [(&str, &str, f64); 11] = [
    ("closure_reopening", "Account closure/reopening due to problem gambling", 42.5),
    ("reports_problem", "The user reports a problem", 15.0),
    ("limit_change", "The user requests a limit change", 18.5),
    ("game_block", "The user requests to block one or multiple but not all games", 14.0),
    ("higher_deposit_limit", "The user requests a higher personal deposit limit", 4.5),
    ("fair_play_complaint", "The user heavily complains about fair play", 2.0),
    ("third_party_block", "A third party asks to block the account", 0.5),
    ("cancelled_payout", "The user cancels an out-payment after requesting it", 0.5),
    ("payment_method_block", "The user requests to block an in-payment method", 0.5),
    ("under_age", "The user is under age", 0.5),
    ("other", "Others or unclassified", 0.5),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonDistribution {
    pub codes: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Default for ReasonDistribution {
    /// Midpoints renormalized to sum to one.
    fn default() -> Self {
        let total: f64 = REASON_TABLE.iter().map(|r| r.2).sum();
        Self {
            codes: REASON_TABLE.iter().map(|r| r.0.to_string()).collect(),
            probabilities: REASON_TABLE.iter().map(|r| r.2 / total).collect(),
        }
    }
}

impl ReasonDistribution {
    pub fn probability(&self, code: &str) -> Option<f64> {
        self.codes
            .iter()
            .position(|c| c == code)
            .map(|i| self.probabilities[i])
    }

    pub fn sample(&self, rng: &mut Rng) -> &str {
        let u = rng.next_f64();
        let mut acc = 0.0;
        for (code, p) in self.codes.iter().zip(&self.probabilities) {
            acc += p;
            if u < acc {
                return code;
            }
        }
        self.codes.last().expect("non-empty distribution")
    }
}

/// Empirical frequency of every known reason code, in table order.
pub fn reason_histogram<S: AsRef<str>>(codes: &[S]) -> Result<Vec<(String, f64)>> {
    if codes.is_empty() {
        return Err(Error::invalid("reason histogram needs at least one code"));
    }
    let mut counts = [0usize; REASON_TABLE.len()];
    for code in codes {
        let code = code.as_ref();
        let i = REASON_TABLE
            .iter()
            .position(|r| r.0 == code)
            .ok_or_else(|| Error::invalid(format!("unknown reason code {code:?}")))?;
        counts[i] += 1;
    }
    let n = codes.len() as f64;
    Ok(REASON_TABLE
        .iter()
        .zip(counts)
        .map(|(r, c)| (r.0.to_string(), c as f64 / n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::{correlation_report, RankMode};

    #[test]
    fn presets_have_dataset_shapes() {
        let a = generate(&SynthSpec::a_like(1)).unwrap();
        assert_eq!((a.table.n_rows(), a.table.n_features()), (4056, 102));
        let b = generate(&SynthSpec::b_like(1)).unwrap();
        assert_eq!((b.table.n_rows(), b.table.n_features()), (4132, 27));
        for (got, want) in b.achieved_strengths.iter().zip(&SynthSpec::b_like(1).signal_strengths) {
            assert!((got - want).abs() < 1e-5);
        }
    }

    #[test]
    fn generation_is_deterministic_and_rate_exact() {
        let spec = SynthSpec {
            n_rows: 4000,
            n_features: 6,
            n_signal: 2,
            signal_strengths: vec![0.4, 0.2],
            positive_rate: 0.3,
            seed: 5,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        assert_ne!(a, generate(&SynthSpec { seed: 6, ..spec.clone() }).unwrap());
        let (_, pos) = a.table.class_counts();
        assert_eq!(pos, 1200);
        let reasons = a.reasons.as_ref().unwrap();
        for (r, &l) in reasons.iter().zip(a.table.labels()) {
            assert_eq!(r.is_empty(), l == 0);
        }
    }

    #[test]
    fn null_signal_stays_below_three_sigma() {
        let spec = SynthSpec {
            n_rows: 4000,
            n_features: 20,
            seed: 9,
            ..Default::default()
        };
        let d = generate(&spec).unwrap();
        let rep = correlation_report(&d.table).unwrap();
        // Null sd of r is 1/sqrt(n) ≈ 0.0158; 3σ ≈ 0.047 < 0.1.
        assert!(rep.flag_corr.iter().all(|c| c.abs() < 3.0 / (4000f64).sqrt()));
    }

    #[test]
    fn planted_features_rank_first() {
        let d = generate(&SynthSpec::a_like(3)).unwrap();
        let rep = correlation_report(&d.table).unwrap();
        let mut top: Vec<usize> = rep.ranking(RankMode::Absolute)[..5].to_vec();
        top.sort_unstable();
        let mut planted = d.signal_columns.clone();
        planted.sort_unstable();
        assert_eq!(top, planted);
    }

    #[test]
    fn infeasible_strength_reports_the_bound() {
        let spec = SynthSpec {
            n_signal: 1,
            signal_strengths: vec![0.85],
            signal_model: SignalModel::LatentRisk,
            ..Default::default()
        };
        let err = generate(&spec).unwrap_err().to_string();
        assert!(err.contains("0.7979"), "{err}");
        let spec = SynthSpec {
            signal_strengths: vec![0.7],
            ..spec
        };
        let d = generate(&spec).unwrap();
        assert!((d.achieved_strengths[0] - 0.7).abs() < 1e-5);
    }

    #[test]
    fn reason_distribution_and_histogram() {
        let dist = ReasonDistribution::default();
        assert!((dist.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((dist.probability("closure_reopening").unwrap() - 42.5 / 99.0).abs() < 1e-15);
        let mut rng = Rng::new(11);
        let codes: Vec<&str> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let h = reason_histogram(&codes).unwrap();
        for ((code, freq), p) in h.iter().zip(&dist.probabilities) {
            assert!((freq - p).abs() < 0.02, "{code}");
        }
        let single = reason_histogram(&["under_age"]).unwrap();
        assert_eq!(single.iter().find(|(c, _)| c == "under_age").unwrap().1, 1.0);
        assert!(reason_histogram(&["bogus"]).is_err());
        assert!(reason_histogram::<&str>(&[]).is_err());
    }

    #[test]
    fn csv_round_trip_excludes_reasons() {
        let spec = SynthSpec {
            n_rows: 50,
            n_features: 4,
            n_signal: 1,
            signal_strengths: vec![0.5],
            seed: 2,
            ..Default::default()
        };
        let d = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        d.write_csv(&p, Some("seed=2")).unwrap();
        let back = crate::data::load_csv(&p, DEFAULT_LABEL_COLUMN, &[REASON_COLUMN.into()]).unwrap();
        assert_eq!(back.features(), d.table.features());
        assert_eq!(back.labels(), d.table.labels());
    }
}
