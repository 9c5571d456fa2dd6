//! Accuracy, faithfulness, convergence and timing measurements.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amortized::{amortized_inference, ExplainerNet};
use crate::error::{Result, ShapError};
use crate::exact::exact_shapley;
use crate::game::{Attribution, CoalitionGame};
use crate::models::{masked_game, MaskingRule, TabularModel};
use crate::rng::RandomSource;
use crate::stochastic::{estimate_kernelshap, EstimatorSpec};
use crate::subset::FeatureSubset;

/// Largest game accepted by [`convergence_probe`].
pub const MAX_PROBE_PLAYERS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDistance {
    pub l1: f64,
    pub l2: f64,
}

/// Mean distances with the per-instance breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub l1: f64,
    pub l2: f64,
    pub instances: Vec<InstanceDistance>,
}

fn distance(est: &[f64], truth: &[f64]) -> Result<InstanceDistance> {
    if est.len() != truth.len() {
        return Err(ShapError::Argument(format!(
            "attribution lengths differ: {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    let (mut l1, mut sq) = (0.0, 0.0);
    for (a, b) in est.iter().zip(truth) {
        let delta = a - b;
        l1 += delta.abs();
        sq += delta * delta;
    }
    Ok(InstanceDistance { l1, l2: sq.sqrt() })
}

/// `ℓ1 = Σ|δ_i|`, `ℓ2 = √Σδ_i²`.
pub fn attribution_distance(est: &Attribution, truth: &Attribution) -> Result<DistanceReport> {
    let one = distance(&est.phi, &truth.phi)?;
    Ok(DistanceReport { l1: one.l1, l2: one.l2, instances: vec![one] })
}

/// Mean distance over matched instances.
pub fn mean_distance(est: &[Attribution], truth: &[Attribution]) -> Result<DistanceReport> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(ShapError::Argument(format!(
            "need the same non-zero number of estimates ({}) and references ({})",
            est.len(),
            truth.len()
        )));
    }
    let instances = est
        .iter()
        .zip(truth)
        .map(|(a, b)| distance(&a.phi, &b.phi))
        .collect::<Result<Vec<_>>>()?;
    let n = instances.len() as f64;
    Ok(DistanceReport {
        l1: instances.iter().map(|i| i.l1).sum::<f64>() / n,
        l2: instances.iter().map(|i| i.l2).sum::<f64>() / n,
        instances,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    /// Add features to the baseline, highest attribution first.
    Insertion,
    /// Remove features from the input, highest attribution first.
    Deletion,
}

impl CurveMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "insertion" => Ok(CurveMode::Insertion),
            "deletion" => Ok(CurveMode::Deletion),
            other => Err(ShapError::Config(format!("unknown curve mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub mode: CurveMode,
    pub fractions: Vec<f64>,
    pub scores: Vec<f64>,
    /// Unnormalized scores.
    pub raw_scores: Vec<f64>,
    pub auc: f64,
    /// False when the curve's endpoints coincide and cannot be mapped.
    pub normalized: bool,
}

impl CurveReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,score\n");
        for (f, s) in self.fractions.iter().zip(&self.scores) {
            out.push_str(&format!("{f},{s}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| ShapError::io(path, e))
    }
}

/// Feature order by descending attribution, ties by ascending index.
pub fn attribution_order(phi: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    idx.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
    idx
}

/// Scores after each step along `order`, on the `d + 1` point grid.
///
/// Scores are shifted to start at 0 (insertion) or 1 (deletion) and divided by
/// `|last - first|`, so they end at the opposite convention endpoint whenever
/// the score moves in the expected direction. A curve whose score moves the
/// other way ends at -1 or 2 instead of being flipped.
pub fn curve_for_order(game: &CoalitionGame, order: &[usize], mode: CurveMode) -> Result<CurveReport> {
    let d = game.players();
    if order.len() != d {
        return Err(ShapError::Argument(format!("order has {} entries for {d} features", order.len())));
    }
    let mut s = match mode {
        CurveMode::Insertion => FeatureSubset::empty(d),
        CurveMode::Deletion => FeatureSubset::full(d),
    };
    let mut raw = Vec::with_capacity(d + 1);
    raw.push(game.evaluate(s));
    for &i in order {
        if i >= d {
            return Err(ShapError::Argument(format!("feature {i} out of range")));
        }
        s = match mode {
            CurveMode::Insertion => s.with(i),
            CurveMode::Deletion => s.without(i),
        };
        raw.push(game.evaluate(s));
    }
    let fractions: Vec<f64> = (0..=d).map(|k| k as f64 / d as f64).collect();
    let (first, last) = (raw[0], raw[d]);
    let normalized = first != last;
    let scores: Vec<f64> = if normalized {
        let start = match mode {
            CurveMode::Insertion => 0.0,
            CurveMode::Deletion => 1.0,
        };
        let scale = (last - first).abs();
        raw.iter().map(|&v| start + (v - first) / scale).collect()
    } else {
        raw.clone()
    };
    let auc = trapezoid(&fractions, &scores);
    Ok(CurveReport { mode, fractions, scores, raw_scores: raw, auc, normalized })
}

/// Insertion or deletion curve of `attribution` on the game.
pub fn curve_from_game(game: &CoalitionGame, attribution: &[f64], mode: CurveMode) -> Result<CurveReport> {
    if attribution.len() != game.players() {
        return Err(ShapError::Argument(format!(
            "attribution has {} entries for {} features",
            attribution.len(),
            game.players()
        )));
    }
    curve_for_order(game, &attribution_order(attribution), mode)
}

/// Insertion/deletion curve for a tabular model; removed features take the
/// masking baseline.
pub fn insertion_deletion(
    model: Arc<TabularModel>,
    x: &[f64],
    attribution: &[f64],
    class: usize,
    rule: &MaskingRule,
    mode: CurveMode,
) -> Result<CurveReport> {
    let game = masked_game(model, x, class, rule)?;
    curve_from_game(&game, attribution, mode)
}

/// Mean AUC over `n` uniformly random feature orders.
pub fn random_order_auc(game: &CoalitionGame, mode: CurveMode, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(ShapError::Argument("need at least one random ordering".into()));
    }
    let aucs = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomSource::new(seed, k as u64);
            curve_for_order(game, &rng.permutation(game.players()), mode).map(|c| c.auc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aucs.iter().sum::<f64>() / n as f64)
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / 2.0).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub samples: usize,
    pub mean_l1: f64,
    pub std_l1: f64,
    pub mean_l2: f64,
    pub std_l2: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub estimator: String,
    pub d: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("samples,mean_l1,std_l1,mean_l2,std_l2,seeds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.samples, r.mean_l1, r.std_l1, r.mean_l2, r.std_l2, r.seeds
            ));
        }
        out
    }

    /// Whether mean ℓ2 errors never increase along the sample grid.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_l2 <= w[0].mean_l2)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Errors against `exact_shapley` for every sample count in `grid`,
/// averaged over seeds `base_seed .. base_seed + seeds`.
pub fn convergence_probe(
    spec: &EstimatorSpec,
    game: &CoalitionGame,
    grid: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<ConvergenceTable> {
    let d = game.players();
    if d > MAX_PROBE_PLAYERS {
        return Err(ShapError::Capacity(format!(
            "convergence probes need an exact reference; d={d} exceeds {MAX_PROBE_PLAYERS}"
        )));
    }
    if seeds == 0 {
        return Err(ShapError::Argument("need at least one seed".into()));
    }
    let truth = exact_shapley(game)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &m in grid {
        let dists = (0..seeds as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = RandomSource::new(base_seed + k, 0);
                let est = spec.run(game, m, &mut rng)?;
                distance(&est.phi, &truth.phi)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean_l1, std_l1) = mean_std(&dists.iter().map(|x| x.l1).collect::<Vec<_>>());
        let (mean_l2, std_l2) = mean_std(&dists.iter().map(|x| x.l2).collect::<Vec<_>>());
        rows.push(ConvergenceRow { samples: m, mean_l1, std_l1, mean_l2, std_l2, seeds });
    }
    Ok(ConvergenceTable { estimator: spec.label(), d, rows })
}

/// Host description stored with timing results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub cpu: String,
    pub workers: usize,
    pub os: String,
    pub arch: String,
}

impl Fingerprint {
    pub fn current() -> Self {
        let cpu = fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|text| {
                text.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|s| s.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Self {
            cpu,
            workers: rayon::current_num_threads(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub fingerprint: Fingerprint,
}

impl TimingReport {
    pub fn median(&self, method: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method).map(|r| r.median_ms)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,median_ms,p95_ms,runs\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.method, r.median_ms, r.p95_ms, r.runs));
        }
        out
    }
}

/// A named workload for [`benchmark_timing`].
pub struct TimedCase<'a> {
    pub name: String,
    pub run: Box<dyn FnMut() -> Result<()> + 'a>,
}

impl<'a> TimedCase<'a> {
    pub fn new(name: impl Into<String>, run: impl FnMut() -> Result<()> + 'a) -> Self {
        Self { name: name.into(), run: Box::new(run) }
    }
}

pub const MIN_WARMUP: usize = 3;
pub const MIN_RUNS: usize = 10;

/// Median and 95th percentile wall time per case. At least
/// [`MIN_WARMUP`] discarded warmups and [`MIN_RUNS`] timed runs are used.
pub fn benchmark_timing(cases: Vec<TimedCase<'_>>, warmup: usize, runs: usize) -> Result<TimingReport> {
    let warmup = warmup.max(MIN_WARMUP);
    let runs = runs.max(MIN_RUNS);
    let mut rows = Vec::with_capacity(cases.len());
    for mut case in cases {
        for _ in 0..warmup {
            (case.run)()?;
        }
        let mut times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let start = Instant::now();
            (case.run)()?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        times.sort_by(f64::total_cmp);
        rows.push(TimingRow {
            method: case.name,
            median_ms: percentile(&times, 0.5),
            p95_ms: percentile(&times, 0.95),
            runs,
        });
    }
    Ok(TimingReport { rows, fingerprint: Fingerprint::current() })
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Amortized inference timed against KernelSHAP on one model input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub features: usize,
    pub kernel_samples: usize,
    pub median_amortized_ms: f64,
    pub median_kernelshap_ms: f64,
    /// KernelSHAP median over amortized median.
    pub ratio: f64,
    pub timing: TimingReport,
}

pub const AMORTIZED_CASE: &str = "amortized";
pub const KERNELSHAP_CASE: &str = "kernelshap";

/// Times one explanation of `x` by each method. Every KernelSHAP run starts
/// from a fresh game, so no model evaluation is reused across runs. A
/// normalizing explainer pays for its two model calls per run.
#[allow(clippy::too_many_arguments)]
pub fn amortized_speedup(
    model: &Arc<TabularModel>,
    x: &[f64],
    class: usize,
    rule: &MaskingRule,
    net: &ExplainerNet,
    kernel_samples: usize,
    warmup: usize,
    runs: usize,
    seed: u64,
) -> Result<SpeedReport> {
    if net.input_width() != x.len() || net.players() != x.len() {
        return Err(ShapError::Argument(format!(
            "explainer expects {} inputs and {} players; the model input has {}",
            net.input_width(),
            net.players(),
            x.len()
        )));
    }
    if kernel_samples == 0 {
        return Err(ShapError::Argument("KernelSHAP needs at least one sample".into()));
    }
    let base = rule.baseline(x.len())?;
    let mut run = 0u64;
    let timing = benchmark_timing(
        vec![
            TimedCase::new(AMORTIZED_CASE, || {
                let v_all = if net.objective().normalizes() {
                    let full = model.predict(x)?;
                    let empty = model.predict(&base)?;
                    Some(full.iter().zip(&empty).map(|(a, b)| a - b).collect::<Vec<_>>())
                } else {
                    None
                };
                amortized_inference(net, x, v_all.as_deref()).map(|_| ())
            }),
            TimedCase::new(KERNELSHAP_CASE, || {
                run += 1;
                let game = masked_game(model.clone(), x, class, rule)?;
                estimate_kernelshap(&game, kernel_samples, &mut RandomSource::new(seed, run), false).map(|_| ())
            }),
        ],
        warmup,
        runs,
    )?;
    let fast = timing.median(AMORTIZED_CASE).expect("timed case");
    let slow = timing.median(KERNELSHAP_CASE).expect("timed case");
    Ok(SpeedReport {
        features: x.len(),
        kernel_samples,
        median_amortized_ms: fast,
        median_kernelshap_ms: slow,
        ratio: slow / fast,
        timing,
    })
}

/// Writes `value` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ShapError::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| ShapError::io(path, e))
}
