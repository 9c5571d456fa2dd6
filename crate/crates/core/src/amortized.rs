//! Learnable explainers `g(x;θ)` and their training loops.
//!
//! The explainer maps an input of width `f` to `d·K` outputs; class `c`
//! owns outputs `c·d .. (c+1)·d`. SimSHAP trains against sampled targets
//! under a metric `‖g - φ̂‖²_M`; FastSHAP minimizes the kernel-weighted
//! subset loss, optionally through additive efficient normalization.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::game::{Attribution, CoalitionGame, Method};
use crate::kernel::{kernel_normalizer, KernelWeights};
use crate::nn::{Activation, Mlp, Optimizer, OptimizerKind};
use crate::numeric::{solve_efficiency_constrained, KahanSum};
use crate::rng::RandomSource;
use crate::stochastic::{sample_kernel_subset, simshap_target};
use crate::subset::{enumerate_subsets, FeatureSubset};

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const VALIDATION_STREAM_BASE: u64 = 1 << 32;
const TARGET_STREAM_BASE: u64 = 1 << 40;

/// Divergence threshold relative to the first recorded batch loss.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// `φ - mean(φ)·1 + (v_all/d)·1`.
pub fn additive_efficient_normalization(phi_raw: &[f64], v_all: f64) -> Vec<f64> {
    let d = phi_raw.len();
    if d == 0 {
        return Vec::new();
    }
    let mut sum = KahanSum::new();
    for &p in phi_raw {
        sum.add(p);
    }
    let shift = (v_all - sum.value()) / d as f64;
    phi_raw.iter().map(|p| p + shift).collect()
}

/// Gradient of a loss through [`additive_efficient_normalization`]:
/// `(I - J/d)·grad`.
fn project_gradient(grad: &mut [f64]) {
    let mean = grad.iter().sum::<f64>() / grad.len() as f64;
    grad.iter_mut().for_each(|g| *g -= mean);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    SimShap,
    FastShap,
    /// FastSHAP with additive efficient normalization in the forward pass.
    FastShapNormalized,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::SimShap => "simshap",
            Objective::FastShap => "fastshap",
            Objective::FastShapNormalized => "fastshap-normalized",
        }
    }

    pub fn normalizes(self) -> bool {
        self == Objective::FastShapNormalized
    }

    fn method(self) -> Method {
        match self {
            Objective::SimShap => Method::AmortizedSimShap,
            Objective::FastShap => Method::AmortizedFastShap,
            Objective::FastShapNormalized => Method::AmortizedFastShapNormalized,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A feed-forward explainer with `d·K` unconstrained outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplainerNet {
    mlp: Mlp,
    players: usize,
    classes: usize,
    objective: Objective,
}

impl ExplainerNet {
    /// Hidden widths: three layers of 128 units, or 512 for inputs wider than 64.
    pub fn default_hidden(input_width: usize) -> Vec<usize> {
        let w = if input_width <= 64 { 128 } else { 512 };
        vec![w; 3]
    }

    pub fn new(
        input_width: usize,
        players: usize,
        classes: usize,
        hidden: &[usize],
        activation: Activation,
        objective: Objective,
        seed: u64,
    ) -> Result<Self> {
        if players == 0 || classes == 0 {
            return Err(ShapError::Argument("explainer needs d >= 1 and K >= 1".into()));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_width);
        widths.extend_from_slice(hidden);
        widths.push(players * classes);
        let mut rng = RandomSource::new(seed, INIT_STREAM);
        let mlp = Mlp::init(widths, activation, &mut rng)?;
        Ok(Self { mlp, players, classes, objective })
    }

    pub fn from_mlp(mlp: Mlp, players: usize, classes: usize, objective: Objective) -> Result<Self> {
        if players == 0 || classes == 0 || mlp.output_width() != players * classes {
            return Err(ShapError::Argument(format!(
                "network output width {} does not match d={players} x K={classes}",
                mlp.output_width()
            )));
        }
        Ok(Self { mlp, players, classes, objective })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn input_width(&self) -> usize {
        self.mlp.input_width()
    }

    /// Raw outputs reshaped to one length-`d` row per class.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let out = self.mlp.forward(x)?;
        Ok(out.chunks(self.players).map(<[f64]>::to_vec).collect())
    }

    pub fn to_checkpoint(&self, train_config: Option<&TrainConfig>, seed: u64) -> Checkpoint {
        Checkpoint::new(
            format!("explainer-{}", self.objective.name()),
            &self.mlp,
            self.players,
            self.classes,
            train_config.cloned(),
            seed,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let objective = match ckpt.kind.as_str() {
            "explainer-simshap" => Objective::SimShap,
            "explainer-fastshap" => Objective::FastShap,
            "explainer-fastshap-normalized" => Objective::FastShapNormalized,
            other => {
                return Err(ShapError::Format(format!("checkpoint kind {other:?} is not an explainer")))
            }
        };
        Self::from_mlp(ckpt.to_mlp()?, ckpt.players, ckpt.classes, objective)
    }
}

/// One forward pass per input; no game evaluations.
///
/// Normalizing explainers need `v(N) - v(∅)` for every class in `v_all`;
/// other explainers return their raw outputs and ignore it.
pub fn amortized_inference(net: &ExplainerNet, x: &[f64], v_all: Option<&[f64]>) -> Result<Vec<Attribution>> {
    let rows = net.forward(x)?;
    let method = net.objective.method();
    if net.objective.normalizes() {
        let v_all = v_all.ok_or_else(|| {
            ShapError::Argument("a normalizing explainer needs v(N) - v(∅) for each class".into())
        })?;
        if v_all.len() != net.classes {
            return Err(ShapError::Argument(format!(
                "got {} efficiency totals for {} classes",
                v_all.len(),
                net.classes
            )));
        }
        rows.into_iter()
            .zip(v_all)
            .map(|(row, &total)| Attribution::new(additive_efficient_normalization(&row, total), method, 0, 0))
            .collect()
    } else {
        rows.into_iter().map(|row| Attribution::new(row, method, 0, 0)).collect()
    }
}

/// [`amortized_inference`] over a batch, in input order.
pub fn amortized_inference_batch(
    net: &ExplainerNet,
    xs: &[Vec<f64>],
    v_all: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<Attribution>>> {
    xs.par_iter()
        .enumerate()
        .map(|(k, x)| amortized_inference(net, x, v_all.map(|v| v[k].as_slice())))
        .collect()
}

/// The metric `M` of the loss `(g - φ)ᵀM(g - φ)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricMatrix {
    #[default]
    Identity,
    /// `UᵀWU = ((d-1)/d)·I + B·J` from the Shapley kernel.
    ShapleyLsv,
    /// Row-major `d × d` entries.
    Explicit { d: usize, entries: Vec<f64> },
}

impl MetricMatrix {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(MetricMatrix::Identity),
            "shapley-lsv" | "shapley_lsv" | "lsv" => Ok(MetricMatrix::ShapleyLsv),
            other => Err(ShapError::Config(format!(
                "unknown metric {other:?}; expected identity or shapley-lsv"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricMatrix::Identity => "identity",
            MetricMatrix::ShapleyLsv => "shapley-lsv",
            MetricMatrix::Explicit { .. } => "explicit",
        }
    }

    pub fn dense(&self, d: usize) -> Result<DMatrix<f64>> {
        Ok(match self {
            MetricMatrix::Identity => DMatrix::identity(d, d),
            MetricMatrix::ShapleyLsv => {
                if d < 2 {
                    return Ok(DMatrix::identity(d, d));
                }
                let (a, b) = kernel_normalizer(d)?.gram_entries();
                DMatrix::from_fn(d, d, |i, j| if i == j { a } else { b })
            }
            MetricMatrix::Explicit { d: n, entries } => {
                if *n != d || entries.len() != d * d {
                    return Err(ShapError::Config(format!(
                        "explicit metric is {n}x{n} with {} entries; expected {d}x{d}",
                        entries.len()
                    )));
                }
                DMatrix::from_row_slice(d, d, entries)
            }
        })
    }

    /// Checks symmetry and `xᵀMx >= -1e-10·‖x‖²` through the spectrum.
    pub fn validate(&self, d: usize) -> Result<()> {
        let m = self.dense(d)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(ShapError::Config("metric has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(ShapError::Config("metric matrix is not symmetric".into()));
        }
        let min = m.symmetric_eigenvalues().min();
        if min < -1e-10 * scale {
            return Err(ShapError::Config(format!(
                "metric matrix is not positive semi-definite (eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    fn resolve(&self, d: usize) -> Result<ResolvedMetric> {
        self.validate(d)?;
        Ok(match self {
            MetricMatrix::Identity => ResolvedMetric::Identity,
            MetricMatrix::ShapleyLsv if d >= 2 => {
                let (a, b) = kernel_normalizer(d)?.gram_entries();
                ResolvedMetric::Lsv { diag: a - b, off: b }
            }
            MetricMatrix::ShapleyLsv => ResolvedMetric::Identity,
            MetricMatrix::Explicit { .. } => ResolvedMetric::Dense(self.dense(d)?),
        })
    }

    /// `(g - target)ᵀM(g - target)`.
    pub fn loss(&self, g: &[f64], target: &[f64]) -> Result<f64> {
        if g.len() != target.len() {
            return Err(ShapError::Argument("prediction and target lengths differ".into()));
        }
        let r: Vec<f64> = g.iter().zip(target).map(|(a, b)| a - b).collect();
        let mr = self.resolve(r.len())?.apply(&r);
        Ok(dot(&r, &mr))
    }
}

enum ResolvedMetric {
    Identity,
    Lsv { diag: f64, off: f64 },
    Dense(DMatrix<f64>),
}

impl ResolvedMetric {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self {
            ResolvedMetric::Identity => r.to_vec(),
            ResolvedMetric::Lsv { diag, off } => {
                let total: f64 = r.iter().sum();
                r.iter().map(|v| diag * v + off * total).collect()
            }
            ResolvedMetric::Dense(m) => (m * DVector::from_column_slice(r)).iter().copied().collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer over `g` of `Σ_k (g - t_k)ᵀM(g - t_k)`, optionally subject to `1ᵀg = total`.
pub fn quadratic_minimizer(metric: &MetricMatrix, targets: &[Vec<f64>], total: Option<f64>) -> Result<Vec<f64>> {
    let first = targets
        .first()
        .ok_or_else(|| ShapError::Argument("no targets to average".into()))?;
    let d = first.len();
    let m = metric.dense(d)?;
    let mut sum = DVector::zeros(d);
    for t in targets {
        if t.len() != d {
            return Err(ShapError::Argument("targets differ in length".into()));
        }
        sum += DVector::from_column_slice(t);
    }
    let a = &m * targets.len() as f64;
    let b = &m * sum;
    match total {
        Some(total) => solve_efficiency_constrained(&a, b.as_slice(), total),
        None => {
            let chol = a
                .cholesky()
                .ok_or_else(|| ShapError::Solver("metric must be positive definite".into()))?;
            Ok(chol.solve(&b).iter().copied().collect())
        }
    }
}

/// `Σ_S ω(S)·(v(S) - v(∅) - gᵀ1^S)²` over every proper non-empty `S`.
pub fn weighted_subset_loss(game: &CoalitionGame, g: &[f64]) -> Result<f64> {
    let d = game.players();
    if g.len() != d {
        return Err(ShapError::Argument(format!("g has length {}, game has {d} players", g.len())));
    }
    if d < 2 {
        return Ok(0.0);
    }
    let weights = kernel_normalizer(d)?;
    let v0 = game.v_empty();
    let mut acc = KahanSum::new();
    for s in enumerate_subsets(d, false)? {
        let fit: f64 = s.iter().map(|i| g[i]).sum();
        let r = game.evaluate(s) - v0 - fit;
        acc.add(weights.omega(s.len()) * r * r);
    }
    Ok(acc.value())
}

/// Validation targets use many more subsets than training targets so the
/// tracked loss reflects the explainer rather than target noise.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 4096;

/// Learning rate as a function of the epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `α·(1 + cos(π·e/E))/2` at epoch `e` of `E`.
    Cosine,
}

impl LrSchedule {
    pub fn rate(self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let t = epoch as f64 / epochs.max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// Run parameters shared by both training loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub epochs: usize,
    /// Subsets sampled per input per step.
    pub samples: usize,
    pub paired: bool,
    pub optimizer: OptimizerKind,
    /// Decoupled weight decay.
    pub weight_decay: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Subsets per validation input, drawn once; defaults to
    /// [`DEFAULT_VALIDATION_SAMPLES`] or `samples`, whichever is larger.
    pub validation_samples: Option<usize>,
    /// Supervise every class instead of only the item's class.
    pub all_classes: bool,
    pub early_stop_patience: Option<usize>,
    pub metric: MetricMatrix,
    /// Per-step decay of an exponential parameter average used for
    /// validation and returned as the trained net.
    pub ema_decay: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            schedule: LrSchedule::Cosine,
            batch_size: 16,
            epochs: 100,
            samples: 32,
            paired: true,
            optimizer: OptimizerKind::Adam,
            weight_decay: 0.0,
            seed: 0,
            validation_fraction: 0.1,
            validation_samples: None,
            all_classes: false,
            early_stop_patience: None,
            metric: MetricMatrix::Identity,
            ema_decay: Some(0.999),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ShapError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.samples == 0 {
            return Err(ShapError::Config("samples per input must be at least 1".into()));
        }
        if self.paired && !self.samples.is_multiple_of(2) {
            return Err(ShapError::Config(format!(
                "paired sampling needs an even sample count, got {}",
                self.samples
            )));
        }
        if self.validation_samples == Some(0) || (self.paired && !self.validation_samples().is_multiple_of(2)) {
            return Err(ShapError::Config(format!(
                "validation samples must be positive (and even when paired), got {}",
                self.validation_samples()
            )));
        }
        if self.batch_size == 0 {
            return Err(ShapError::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ShapError::Config(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if let Some(beta) = self.ema_decay {
            if !(0.0..1.0).contains(&beta) {
                return Err(ShapError::Config(format!("EMA decay must lie in [0, 1), got {beta}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(ShapError::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn validation_samples(&self) -> usize {
        self.validation_samples.unwrap_or(DEFAULT_VALIDATION_SAMPLES.max(self.samples))
    }

    fn dump(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{self:?}"))
    }
}

/// Explainer inputs with the class each one is supervised on.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    classes: Vec<usize>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, classes: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(ShapError::Data("training set is empty".into()));
        }
        if inputs.len() != classes.len() {
            return Err(ShapError::Data(format!(
                "{} inputs but {} class labels",
                inputs.len(),
                classes.len()
            )));
        }
        let width = inputs[0].len();
        for (r, x) in inputs.iter().enumerate() {
            if x.len() != width {
                return Err(ShapError::Data(format!("row {r} has {} features, expected {width}", x.len())));
            }
            if let Some(c) = x.iter().position(|v| !v.is_finite()) {
                return Err(ShapError::Data(format!("row {r}, column {c}: non-finite feature")));
            }
        }
        Ok(Self { inputs, classes })
    }

    /// Every input supervised on class 0.
    pub fn single_class(inputs: Vec<Vec<f64>>) -> Result<Self> {
        let n = inputs.len();
        Self::new(inputs, vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    /// Deterministic `(train, validation)` index split.
    pub fn split(&self, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        RandomSource::new(seed, SPLIT_STREAM).shuffle(&mut idx);
        let n_val = ((n as f64 * validation_fraction).round() as usize).min(n.saturating_sub(1));
        let val = idx[..n_val].to_vec();
        let mut train = idx[n_val..].to_vec();
        let mut val_sorted = val;
        train.sort_unstable();
        val_sorted.sort_unstable();
        (train, val_sorted)
    }
}

/// A SimSHAP-style supervised item: input, class and target attribution.
#[derive(Clone, Debug)]
pub struct Supervised<'a> {
    pub x: &'a [f64],
    pub class: usize,
    pub target: Vec<f64>,
}

/// A FastSHAP item: sampled subsets with `v(S) - v(∅)`.
#[derive(Clone, Debug)]
pub struct SubsetBatchItem<'a> {
    pub x: &'a [f64],
    pub class: usize,
    pub v_all: f64,
    pub samples: Vec<(FeatureSubset, f64)>,
}

fn check_class(net: &ExplainerNet, class: usize) -> Result<()> {
    if class >= net.classes {
        return Err(ShapError::Argument(format!(
            "class {class} out of range for an explainer with {} classes",
            net.classes
        )));
    }
    Ok(())
}

/// Items per gradient accumulation chunk. Chunks are summed in batch order,
/// so results do not depend on the worker count.
const GRAD_CHUNK: usize = 8;

fn batch_loss_and_grad<T: Sync>(
    net: &ExplainerNet,
    batch: &[T],
    item: impl Fn(&T, &mut [f64]) -> Result<f64> + Sync,
) -> Result<(f64, Vec<f64>)> {
    let n_params = net.mlp.params().len();
    let parts: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for it in chunk {
                loss += item(it, &mut grad)?;
            }
            Ok((loss, grad))
        })
        .collect();
    let count = batch.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|g| *g /= count);
    Ok((loss / count, grad))
}

/// Mean metric loss `(g - φ̂)ᵀM(g - φ̂)` over the batch and its parameter gradient.
pub fn simshap_loss_and_grad(
    net: &ExplainerNet,
    batch: &[Supervised<'_>],
    metric: &MetricMatrix,
) -> Result<(f64, Vec<f64>)> {
    let d = net.players;
    let resolved = metric.resolve(d)?;
    batch_loss_and_grad(net, batch, |item, grad| {
        check_class(net, item.class)?;
        if item.target.len() != d {
            return Err(ShapError::Argument(format!(
                "target has length {}, explainer has d={d}",
                item.target.len()
            )));
        }
        if item.target.iter().any(|t| !t.is_finite()) {
            return Err(ShapError::Training("non-finite training target".into()));
        }
        let trace = net.mlp.forward_trace(item.x)?;
        let out = &trace.output()[item.class * d..(item.class + 1) * d];
        let r: Vec<f64> = out.iter().zip(&item.target).map(|(g, t)| g - t).collect();
        let mr = resolved.apply(&r);
        let mut grad_out = vec![0.0; net.mlp.output_width()];
        for (slot, v) in grad_out[item.class * d..(item.class + 1) * d].iter_mut().zip(&mr) {
            *slot = 2.0 * v;
        }
        net.mlp.backward(&trace, &grad_out, grad);
        Ok(dot(&r, &mr))
    })
}

/// Mean sampled FastSHAP loss `(1/m)Σ_k (v(S_k) - v(∅) - gᵀ1^{S_k})²` and its gradient.
///
/// Normalizing explainers are corrected by additive efficient
/// normalization before the loss.
pub fn fastshap_loss_and_grad(net: &ExplainerNet, batch: &[SubsetBatchItem<'_>]) -> Result<(f64, Vec<f64>)> {
    let d = net.players;
    batch_loss_and_grad(net, batch, |item, grad| {
        check_class(net, item.class)?;
        if item.samples.is_empty() {
            return Err(ShapError::Argument("FastSHAP item without sampled subsets".into()));
        }
        let trace = net.mlp.forward_trace(item.x)?;
        let raw = &trace.output()[item.class * d..(item.class + 1) * d];
        let g = if net.objective.normalizes() {
            additive_efficient_normalization(raw, item.v_all)
        } else {
            raw.to_vec()
        };
        let inv = 1.0 / item.samples.len() as f64;
        let mut loss = 0.0;
        let mut dg = vec![0.0; d];
        for (s, y) in &item.samples {
            let r = y - s.iter().map(|i| g[i]).sum::<f64>();
            loss += r * r * inv;
            for i in s.iter() {
                dg[i] -= 2.0 * r * inv;
            }
        }
        if net.objective.normalizes() {
            project_gradient(&mut dg);
        }
        let mut grad_out = vec![0.0; net.mlp.output_width()];
        grad_out[item.class * d..(item.class + 1) * d].copy_from_slice(&dg);
        net.mlp.backward(&trace, &grad_out, grad);
        Ok(loss)
    })
}

/// Single writer over the explainer parameters.
#[derive(Clone, Debug)]
pub struct Trainer {
    net: ExplainerNet,
    optimizer: Optimizer,
    config: TrainConfig,
    /// Exponential moving average of the parameters, when enabled.
    average: Option<ExplainerNet>,
}

impl Trainer {
    pub fn new(net: ExplainerNet, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        config.metric.validate(net.players)?;
        let optimizer = Optimizer::new(
            config.optimizer,
            config.learning_rate,
            config.weight_decay,
            net.mlp.params().len(),
        );
        let average = config.ema_decay.map(|_| net.clone());
        Ok(Self { net, optimizer, config, average })
    }

    /// The live parameters being optimized.
    pub fn net(&self) -> &ExplainerNet {
        &self.net
    }

    /// The parameter average if enabled, else the live parameters.
    pub fn evaluation_net(&self) -> &ExplainerNet {
        self.average.as_ref().unwrap_or(&self.net)
    }

    pub fn into_net(self) -> ExplainerNet {
        self.average.unwrap_or(self.net)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One optimizer step on the metric loss; returns the pre-update loss.
    pub fn backward_and_step(&mut self, batch: &[Supervised<'_>], metric: &MetricMatrix) -> Result<f64> {
        let (loss, grad) = simshap_loss_and_grad(&self.net, batch, metric)?;
        self.apply(loss, &grad)
    }

    /// One optimizer step on the sampled FastSHAP loss; returns the pre-update loss.
    pub fn backward_and_step_subsets(&mut self, batch: &[SubsetBatchItem<'_>]) -> Result<f64> {
        let (loss, grad) = fastshap_loss_and_grad(&self.net, batch)?;
        self.apply(loss, &grad)
    }

    fn apply(&mut self, loss: f64, grad: &[f64]) -> Result<f64> {
        if !loss.is_finite() {
            return Err(ShapError::Training(format!(
                "non-finite loss; seed {}; config {}",
                self.config.seed,
                self.config.dump()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(ShapError::Training(format!(
                "non-finite gradient at loss {loss:e}; seed {}; config {}",
                self.config.seed,
                self.config.dump()
            )));
        }
        self.optimizer.step(self.net.mlp.params_mut(), grad);
        if let (Some(avg), Some(beta)) = (self.average.as_mut(), self.config.ema_decay) {
            for (a, p) in avg.mlp.params_mut().iter_mut().zip(self.net.mlp.params()) {
                *a = beta * *a + (1.0 - beta) * p;
            }
        }
        if self.net.mlp.params().iter().any(|p| !p.is_finite()) {
            return Err(ShapError::Training(format!(
                "parameters became non-finite; seed {}; config {}",
                self.config.seed,
                self.config.dump()
            )));
        }
        Ok(loss)
    }
}

/// Per-epoch losses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub epochs: Vec<EpochLoss>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Validation losses, or training losses when there is no validation split.
    pub fn tracked(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.validation.unwrap_or(e.train)).collect()
    }

    /// Trailing means over `window` consecutive epochs.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let values = self.tracked();
        if window == 0 || values.len() < window {
            return Vec::new();
        }
        values.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
    }

    pub fn moving_average_non_increasing(&self, window: usize) -> bool {
        self.moving_average(window).windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,validation_loss\n");
        for e in &self.epochs {
            let val = e.validation.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train, val));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| ShapError::io(path, e))
    }
}

/// A game constructor for `(input, class)`.
pub type GameFactory<'a> = dyn Fn(&[f64], usize) -> Result<CoalitionGame> + Sync + 'a;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: ExplainerNet,
    pub history: LossHistory,
}

enum Loss<'m> {
    Metric(&'m MetricMatrix),
    Subsets,
}

enum Prepared<'a> {
    Metric(Vec<Supervised<'a>>),
    Subsets(Vec<SubsetBatchItem<'a>>),
}

impl Prepared<'_> {
    fn loss(&self, net: &ExplainerNet, metric: &MetricMatrix) -> Result<f64> {
        match self {
            Prepared::Metric(items) => Ok(simshap_loss_and_grad(net, items, metric)?.0),
            Prepared::Subsets(items) => Ok(fastshap_loss_and_grad(net, items)?.0),
        }
    }
}

fn supervised_classes(net: &ExplainerNet, data: &TrainingSet, cfg: &TrainConfig, row: usize) -> Vec<usize> {
    if cfg.all_classes {
        (0..net.classes).collect()
    } else {
        vec![data.classes[row]]
    }
}

fn sample_subsets(
    game: &CoalitionGame,
    weights: &KernelWeights,
    m: usize,
    paired: bool,
    rng: &mut RandomSource,
) -> Vec<(FeatureSubset, f64)> {
    let v0 = game.v_empty();
    let draws = if paired { m / 2 } else { m };
    let mut out = Vec::with_capacity(m);
    for _ in 0..draws {
        for s in sample_kernel_subset(weights, rng, paired).subsets() {
            out.push((s, game.evaluate(s) - v0));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn prepare<'a>(
    loss: &Loss<'_>,
    net: &ExplainerNet,
    data: &'a TrainingSet,
    rows: &[usize],
    factory: &GameFactory<'_>,
    cfg: &TrainConfig,
    samples: usize,
    stream_of: &(dyn Fn(usize, usize) -> u64 + Sync),
) -> Result<Prepared<'a>> {
    let weights = if net.players >= 2 { Some(kernel_normalizer(net.players)?) } else { None };
    let jobs: Vec<(usize, usize, usize)> = rows
        .iter()
        .enumerate()
        .flat_map(|(pos, &row)| {
            supervised_classes(net, data, cfg, row)
                .into_iter()
                .map(move |c| (pos, row, c))
        })
        .collect();
    match loss {
        Loss::Metric(_) => {
            let items = jobs
                .par_iter()
                .map(|&(pos, row, class)| {
                    check_class(net, class)?;
                    let x = data.inputs[row].as_slice();
                    let game = factory(x, class)?;
                    check_players(net, &game)?;
                    let mut rng = RandomSource::new(cfg.seed, stream_of(pos, row) + class as u64);
                    let target = simshap_target(&game, samples, &mut rng, cfg.paired)?.phi;
                    Ok(Supervised { x, class, target })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Prepared::Metric(items))
        }
        Loss::Subsets => {
            let items = jobs
                .par_iter()
                .map(|&(pos, row, class)| {
                    check_class(net, class)?;
                    let x = data.inputs[row].as_slice();
                    let game = factory(x, class)?;
                    check_players(net, &game)?;
                    let mut rng = RandomSource::new(cfg.seed, stream_of(pos, row) + class as u64);
                    let samples = match &weights {
                        Some(w) => sample_subsets(&game, w, samples, cfg.paired, &mut rng),
                        None => vec![(FeatureSubset::full(1), game.v_all())],
                    };
                    Ok(SubsetBatchItem { x, class, v_all: game.v_all(), samples })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Prepared::Subsets(items))
        }
    }
}

fn check_players(net: &ExplainerNet, game: &CoalitionGame) -> Result<()> {
    if game.players() != net.players {
        return Err(ShapError::Argument(format!(
            "game has {} players but the explainer emits d={}",
            game.players(),
            net.players
        )));
    }
    Ok(())
}

fn run_training(
    net: ExplainerNet,
    data: &TrainingSet,
    factory: &GameFactory<'_>,
    cfg: &TrainConfig,
    loss: Loss<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.inputs[0].len() != net.input_width() {
        return Err(ShapError::Argument(format!(
            "inputs have {} features but the explainer expects {}",
            data.inputs[0].len(),
            net.input_width()
        )));
    }
    let metric = match &loss {
        Loss::Metric(m) => (*m).clone(),
        Loss::Subsets => MetricMatrix::Identity,
    };
    let (train_rows, val_rows) = data.split(cfg.validation_fraction, cfg.seed);
    let validation = if val_rows.is_empty() {
        None
    } else {
        let stream = |_pos: usize, row: usize| VALIDATION_STREAM_BASE + (row * net.classes) as u64;
        Some(prepare(&loss, &net, data, &val_rows, factory, cfg, cfg.validation_samples(), &stream)?)
    };
    let mut trainer = Trainer::new(net, cfg.clone())?;
    let mut shuffler = RandomSource::new(cfg.seed, SHUFFLE_STREAM);
    let mut history = LossHistory::default();
    let mut reference: Option<f64> = None;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let n = data.len() as u64;
    let classes = trainer.net.classes as u64;
    for epoch in 0..cfg.epochs {
        trainer
            .optimizer
            .set_learning_rate(cfg.schedule.rate(cfg.learning_rate, epoch, cfg.epochs));
        let mut order = train_rows.clone();
        shuffler.shuffle(&mut order);
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let stream = |_pos: usize, row: usize| {
                TARGET_STREAM_BASE + (epoch as u64 * n + row as u64) * classes
            };
            let prepared = prepare(&loss, &trainer.net, data, chunk, factory, cfg, cfg.samples, &stream)?;
            let batch_loss = match &prepared {
                Prepared::Metric(items) => trainer.backward_and_step(items, &metric)?,
                Prepared::Subsets(items) => trainer.backward_and_step_subsets(items)?,
            };
            let initial = *reference.get_or_insert(batch_loss);
            if initial > 0.0 && batch_loss > DIVERGENCE_FACTOR * initial {
                return Err(ShapError::Training(format!(
                    "training diverged at epoch {epoch}: loss {batch_loss:e} exceeds {DIVERGENCE_FACTOR:e} x initial {initial:e}; seed {}; config {}",
                    cfg.seed,
                    cfg.dump()
                )));
            }
            total += batch_loss * chunk.len() as f64;
            count += chunk.len();
        }
        let train = if count == 0 { 0.0 } else { total / count as f64 };
        let val = match &validation {
            Some(p) => Some(p.loss(trainer.evaluation_net(), &metric)?),
            None => None,
        };
        log::debug!("epoch {epoch}: train {train:e}, validation {val:?}");
        history.epochs.push(EpochLoss { epoch, train, validation: val });
        if let Some(patience) = cfg.early_stop_patience {
            let tracked = val.unwrap_or(train);
            if tracked < best {
                best = tracked;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    log::info!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { net: trainer.into_net(), history })
}

/// SimSHAP training: for each input draw `M` kernel subsets, form the
/// unbiased target with [`simshap_target`] and minimize `‖g - φ̂‖²_M`.
pub fn train_simshap(
    net: ExplainerNet,
    data: &TrainingSet,
    factory: &GameFactory<'_>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let metric = cfg.metric.clone();
    run_training(net, data, factory, cfg, Loss::Metric(&metric))
}

/// FastSHAP training on the kernel-weighted subset loss.
///
/// `normalize` switches the explainer to additive efficient normalization
/// inside the forward pass.
pub fn train_fastshap(
    mut net: ExplainerNet,
    data: &TrainingSet,
    factory: &GameFactory<'_>,
    cfg: &TrainConfig,
    normalize: bool,
) -> Result<TrainOutcome> {
    net.objective = if normalize { Objective::FastShapNormalized } else { Objective::FastShap };
    run_training(net, data, factory, cfg, Loss::Subsets)
}

/// Serialized network container shared by explainers and tabular models.
///
/// Parameters are stored as little-endian `f64` bytes, base64 encoded, so a
/// save/load round trip is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub widths: Vec<usize>,
    pub activation: Activation,
    #[serde(with = "le_f64_base64")]
    pub params: Vec<f64>,
    pub players: usize,
    pub classes: usize,
    pub train_config: Option<TrainConfig>,
    pub seed: u64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

pub const CHECKPOINT_FORMAT: &str = "shapx-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(
        kind: String,
        mlp: &Mlp,
        players: usize,
        classes: usize,
        train_config: Option<TrainConfig>,
        seed: u64,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind,
            widths: mlp.widths().to_vec(),
            activation: mlp.activation(),
            params: mlp.params().to_vec(),
            players,
            classes,
            train_config,
            seed,
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        Mlp::from_params(self.widths.clone(), self.activation, self.params.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| ShapError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| ShapError::Format(format!("invalid checkpoint: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(ShapError::Format(format!("not a checkpoint file (format {:?})", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ShapError::Format(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        ckpt.to_mlp()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| ShapError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ShapError::io(path, e))?;
        Self::from_json(&text)
    }
}

mod le_f64_base64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text.as_bytes()).map_err(D::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(D::Error::custom("parameter bytes are not a multiple of 8"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

#[cfg(test)]
mod tests;
