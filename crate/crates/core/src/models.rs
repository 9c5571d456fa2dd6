//! Value functions: masked-input games over tabular models, the linear
//! closed form, surrogate training and synthetic fixture games.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::amortized::Checkpoint;
use crate::error::{Result, ShapError};
use crate::game::{Attribution, CoalitionGame, Method};
use crate::nn::{Activation, Mlp, Optimizer, OptimizerKind};
use crate::rng::RandomSource;
use crate::subset::{FeatureSubset, MAX_PLAYERS};

/// A numeric table with one label column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, label_name: String, features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(ShapError::Data(format!("{} rows but {} labels", features.len(), labels.len())));
        }
        for (r, row) in features.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(ShapError::Data(format!(
                    "row {} has {} features, expected {}",
                    r + 1,
                    row.len(),
                    feature_names.len()
                )));
            }
        }
        Ok(Self { feature_names, label_name, features, labels })
    }

    /// Parses CSV with a header row; `label` names the label column and every
    /// other column must be numeric. Rows are numbered from 1 after the header.
    pub fn from_csv_reader<R: Read>(reader: R, label: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| ShapError::Data(format!("cannot read CSV header: {e}")))?
            .clone();
        let label_col = headers.iter().position(|h| h == label).ok_or_else(|| {
            ShapError::Data(format!(
                "label column {label:?} not found; columns are {:?}",
                headers.iter().collect::<Vec<_>>()
            ))
        })?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != label_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record.map_err(|e| ShapError::Data(format!("row {row}: {e}")))?;
            if record.len() != headers.len() {
                return Err(ShapError::Data(format!(
                    "row {row}: {} fields, header has {}",
                    record.len(),
                    headers.len()
                )));
            }
            let mut x = Vec::with_capacity(feature_names.len());
            for (c, field) in record.iter().enumerate() {
                let name = &headers[c];
                let value = parse_cell(field).map_err(|why| {
                    ShapError::Data(format!("row {row}, column {} ({name:?}): {why}", c + 1))
                })?;
                if c == label_col {
                    labels.push(value);
                } else {
                    x.push(value);
                }
            }
            features.push(x);
        }
        if features.is_empty() {
            return Err(ShapError::Data("dataset has no rows".into()));
        }
        Self::new(feature_names, label.to_string(), features, labels)
    }

    pub fn from_csv_path(path: &Path, label: &str) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| ShapError::io(path, e))?;
        Self::from_csv_reader(file, label).map_err(|e| match e {
            ShapError::Data(msg) => ShapError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = self.feature_names.clone();
        header.push(self.label_name.clone());
        wtr.write_record(&header).map_err(|e| ShapError::Format(e.to_string()))?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            wtr.write_record(&rec).map_err(|e| ShapError::Format(e.to_string()))?;
        }
        let bytes = wtr.into_inner().map_err(|e| ShapError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| ShapError::Format(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    /// Labels as class indices; they must be non-negative integers.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(r, &y)| {
                if y >= 0.0 && y.fract() == 0.0 && y < u32::MAX as f64 {
                    Ok(y as usize)
                } else {
                    Err(ShapError::Data(format!("row {}: label {y} is not a class index", r + 1)))
                }
            })
            .collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut means = vec![0.0; self.feature_count()];
        for row in &self.features {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

fn parse_cell(field: &str) -> std::result::Result<f64, String> {
    if field.is_empty() || matches!(field.to_ascii_lowercase().as_str(), "na" | "nan" | "null" | "?") {
        return Err("missing value".into());
    }
    let v: f64 = field.parse().map_err(|_| format!("{field:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{field:?} is not finite"));
    }
    Ok(v)
}

/// `n` rows with standard normal features and `y = x·w + bias`.
pub fn synthetic_linear_dataset(n: usize, f: usize, seed: u64) -> (Dataset, Vec<f64>, f64) {
    let mut rng = RandomSource::new(seed, 0);
    let w: Vec<f64> = (0..f).map(|_| rng.normal()).collect();
    let bias = rng.normal();
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.normal()).collect()).collect();
    let labels = features
        .iter()
        .map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + bias)
        .collect();
    let names = (0..f).map(|i| format!("x{i}")).collect();
    let data = Dataset::new(names, "y".into(), features, labels).expect("consistent synthetic shapes");
    (data, w, bias)
}

/// `n` rows labeled by the argmax of `k` random linear scores.
pub fn synthetic_classification_dataset(n: usize, f: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = RandomSource::new(seed, 0);
    let w: Vec<Vec<f64>> = (0..k).map(|_| (0..f).map(|_| rng.normal()).collect()).collect();
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.normal()).collect()).collect();
    let labels = features
        .iter()
        .map(|x| argmax(&w.iter().map(|wc| dot(wc, x)).collect::<Vec<_>>()) as f64)
        .collect();
    let names = (0..f).map(|i| format!("x{i}")).collect();
    Dataset::new(names, "label".into(), features, labels).expect("consistent synthetic shapes")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TabularKind {
    /// Affine outputs, one per class.
    Linear,
    /// Softmax over affine scores.
    Logistic,
    /// Softmax over a ReLU network.
    Mlp,
}

impl TabularKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(TabularKind::Linear),
            "logistic" => Ok(TabularKind::Logistic),
            "mlp" => Ok(TabularKind::Mlp),
            other => Err(ShapError::Config(format!(
                "unknown model kind {other:?}; expected linear, logistic or mlp"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TabularKind::Linear => "linear",
            TabularKind::Logistic => "logistic",
            TabularKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for TabularKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An immutable tabular predictor `f: R^f → R^K`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularModel {
    kind: TabularKind,
    net: Mlp,
}

impl TabularModel {
    /// Linear model with one weight row per class.
    pub fn linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || bias.len() != k {
            return Err(ShapError::Argument("linear model needs matching weight rows and biases".into()));
        }
        let f = weights[0].len();
        if weights.iter().any(|w| w.len() != f) {
            return Err(ShapError::Argument("linear weight rows differ in length".into()));
        }
        let mut params: Vec<f64> = weights.into_iter().flatten().collect();
        params.extend(bias);
        Ok(Self { kind: TabularKind::Linear, net: Mlp::from_params(vec![f, k], Activation::Relu, params)? })
    }

    pub fn from_network(kind: TabularKind, net: Mlp) -> Result<Self> {
        if kind != TabularKind::Mlp && net.widths().len() != 2 {
            return Err(ShapError::Argument(format!("a {kind} model has no hidden layers")));
        }
        Ok(Self { kind, net })
    }

    /// Randomly initialized network; used as a fixed synthetic model.
    pub fn random_mlp(f: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![f];
        widths.extend_from_slice(hidden);
        widths.push(classes);
        let mut rng = RandomSource::new(seed, 0);
        let net = Mlp::init(widths, Activation::Relu, &mut rng)?;
        Ok(Self { kind: TabularKind::Mlp, net })
    }

    pub fn kind(&self) -> TabularKind {
        self.kind
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn input_width(&self) -> usize {
        self.net.input_width()
    }

    pub fn classes(&self) -> usize {
        self.net.output_width()
    }

    /// Weight row and bias of class `class` for linear models.
    pub fn linear_parameters(&self, class: usize) -> Option<(Vec<f64>, f64)> {
        if self.kind != TabularKind::Linear || class >= self.classes() {
            return None;
        }
        let f = self.input_width();
        let p = self.net.params();
        Some((p[class * f..(class + 1) * f].to_vec(), p[self.classes() * f + class]))
    }

    /// Class scores: raw for linear models, probabilities otherwise.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.net.forward(x)?;
        Ok(match self.kind {
            TabularKind::Linear => out,
            TabularKind::Logistic | TabularKind::Mlp => softmax(&out),
        })
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict(x)?))
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut hits = 0usize;
        for (x, &y) in features.iter().zip(labels) {
            if self.predict_class(x)? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / features.len().max(1) as f64)
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        Checkpoint::new(
            format!("tabular-{}", self.kind.name()),
            &self.net,
            self.input_width(),
            self.classes(),
            None,
            seed,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let kind = ckpt
            .kind
            .strip_prefix("tabular-")
            .ok_or_else(|| ShapError::Format(format!("checkpoint kind {:?} is not a tabular model", ckpt.kind)))
            .and_then(|k| TabularKind::parse(k).map_err(|_| ShapError::Format(format!("unknown model kind {k:?}"))))?;
        Self::from_network(kind, ckpt.to_mlp()?)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Values substituted for features outside the coalition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "baseline", content = "values", rename_all = "kebab-case")]
pub enum MaskingRule {
    #[default]
    Zeros,
    TrainingMean(Vec<f64>),
    Fixed(Vec<f64>),
}

impl MaskingRule {
    pub fn name(&self) -> &'static str {
        match self {
            MaskingRule::Zeros => "zeros",
            MaskingRule::TrainingMean(_) => "training-mean",
            MaskingRule::Fixed(_) => "fixed",
        }
    }

    pub fn baseline(&self, f: usize) -> Result<Vec<f64>> {
        match self {
            MaskingRule::Zeros => Ok(vec![0.0; f]),
            MaskingRule::TrainingMean(v) | MaskingRule::Fixed(v) => {
                if v.len() != f {
                    return Err(ShapError::Argument(format!(
                        "{} baseline has {} values for {f} features",
                        self.name(),
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }

    /// `x` on `S`, baseline elsewhere.
    pub fn apply(&self, x: &[f64], s: FeatureSubset) -> Result<Vec<f64>> {
        let base = self.baseline(x.len())?;
        Ok(mask_with(x, &base, s))
    }
}

fn mask_with(x: &[f64], base: &[f64], s: FeatureSubset) -> Vec<f64> {
    x.iter()
        .zip(base)
        .enumerate()
        .map(|(i, (&xi, &bi))| if s.contains(i) { xi } else { bi })
        .collect()
}

/// The game `v(S) = f(x_S, baseline_{N∖S})[class]`, memoized.
pub fn masked_game(model: Arc<TabularModel>, x: &[f64], class: usize, rule: &MaskingRule) -> Result<CoalitionGame> {
    let f = model.input_width();
    if x.len() != f {
        return Err(ShapError::Argument(format!("input has {} features, model expects {f}", x.len())));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(ShapError::Argument(format!("input feature {i} is not finite")));
    }
    if class >= model.classes() {
        return Err(ShapError::Argument(format!(
            "class {class} out of range for a model with {} classes",
            model.classes()
        )));
    }
    if f > MAX_PLAYERS {
        return Err(ShapError::Capacity(format!("{f} features exceed the {MAX_PLAYERS}-player limit")));
    }
    let base = rule.baseline(f)?;
    let x = x.to_vec();
    let game = CoalitionGame::new(f, move |s| {
        let input = mask_with(&x, &base, s);
        model.predict(&input).map(|p| p[class]).unwrap_or(f64::NAN)
    })?;
    Ok(game.memoized())
}

/// `φ_i = w_i·(x_i - baseline_i)`.
/// The bias cancels in every marginal contribution.
pub fn linear_model_shapley(weights: &[f64], _bias: f64, x: &[f64], baseline: &[f64]) -> Result<Attribution> {
    if weights.len() != x.len() || baseline.len() != x.len() {
        return Err(ShapError::Argument(format!(
            "weights ({}), input ({}) and baseline ({}) lengths differ",
            weights.len(),
            x.len(),
            baseline.len()
        )));
    }
    let phi = weights.iter().zip(x).zip(baseline).map(|((w, xi), bi)| w * (xi - bi)).collect();
    Attribution::new(phi, Method::LinearClosedForm, 0, 0)
}

/// Training options for [`train_tabular_classifier`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub weight_decay: f64,
    pub seed: u64,
    /// Replace a uniformly sized random feature subset with the baseline in
    /// every training example, so the model is meaningful on masked inputs.
    pub mask_augmentation: bool,
}

impl Default for TabularHyper {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-2,
            batch_size: 64,
            hidden: vec![64, 64],
            weight_decay: 0.0,
            seed: 0,
            mask_augmentation: true,
        }
    }
}

/// Fits a tabular model. Linear models are fit by least squares on the
/// labels; classifiers minimize cross-entropy with Adam.
pub fn train_tabular_classifier(
    data: &Dataset,
    kind: TabularKind,
    hyper: &TabularHyper,
    rule: &MaskingRule,
) -> Result<TabularModel> {
    if data.is_empty() {
        return Err(ShapError::Data("dataset has no rows".into()));
    }
    match kind {
        TabularKind::Linear => fit_least_squares(data),
        TabularKind::Logistic | TabularKind::Mlp => fit_classifier(data, kind, hyper, rule),
    }
}

fn fit_least_squares(data: &Dataset) -> Result<TabularModel> {
    let (n, f) = (data.len(), data.feature_count());
    if n <= f {
        return Err(ShapError::Data(format!("{n} rows cannot determine {f} weights and a bias")));
    }
    let x = DMatrix::from_fn(n, f + 1, |r, c| if c < f { data.features[r][c] } else { 1.0 });
    let y = DVector::from_column_slice(&data.labels);
    let sol = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| ShapError::Solver(format!("least-squares fit failed: {e}")))?;
    TabularModel::linear(vec![sol.as_slice()[..f].to_vec()], vec![sol[f]])
}

fn fit_classifier(data: &Dataset, kind: TabularKind, hyper: &TabularHyper, rule: &MaskingRule) -> Result<TabularModel> {
    let labels = data.class_labels()?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &y in &labels {
        counts[y] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ShapError::Data("labels take a single value; nothing to classify".into()));
    }
    if let Some((c, n)) = counts.iter().enumerate().find(|&(_, &n)| n < 10) {
        return Err(ShapError::Data(format!("class {c} has {n} rows; at least 10 are required")));
    }
    if hyper.batch_size == 0 || hyper.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(ShapError::Config("batch size and learning rate must be positive".into()));
    }
    let f = data.feature_count();
    let mut widths = vec![f];
    if kind == TabularKind::Mlp {
        widths.extend_from_slice(&hyper.hidden);
    }
    widths.push(k);
    let mut rng = RandomSource::new(hyper.seed, 0);
    let mut net = Mlp::init(widths, Activation::Relu, &mut rng)?;
    let base = rule.baseline(f)?;
    let mut opt = Optimizer::new(OptimizerKind::Adam, hyper.learning_rate, hyper.weight_decay, net.params().len());
    let mut aug = RandomSource::new(hyper.seed, 1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut pool: Vec<usize> = (0..f).collect();
    for _ in 0..hyper.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(hyper.batch_size) {
            let mut grad = vec![0.0; net.params().len()];
            for &r in chunk {
                let x = if hyper.mask_augmentation {
                    let size = aug.below(f + 1);
                    let s = aug.subset_from_pool(f, &mut pool, size);
                    mask_with(&data.features[r], &base, s)
                } else {
                    data.features[r].clone()
                };
                let trace = net.forward_trace(&x)?;
                let mut g = softmax(trace.output());
                g[labels[r]] -= 1.0;
                g.iter_mut().for_each(|v| *v /= chunk.len() as f64);
                net.backward(&trace, &g, &mut grad);
            }
            opt.step(net.params_mut(), &grad);
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(ShapError::Training(format!("classifier diverged; seed {}", hyper.seed)));
        }
    }
    let model = TabularModel { kind, net };
    let acc = model.accuracy(&data.features, &labels)?;
    let majority = *counts.iter().max().expect("k >= 2") as f64 / labels.len() as f64;
    if acc <= majority {
        log::warn!("training accuracy {acc:.3} does not beat the majority baseline {majority:.3}");
    }
    Ok(model)
}

/// Built-in fixture games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// i.i.d. uniform values on [0, 1) per subset, derived from the seed.
    RandomUniform,
    /// `v(S) = min(|S∩L|, |S∩R|)` with `L` the first `max(1, d/3)` players.
    Glove,
    /// `v(S) = 1` when `|S| > d/2`.
    Majority,
    /// `v(S) = Σ_{i∈S} c_i`.
    Additive { coefficients: Vec<f64> },
    /// `v(S) = 1` when `T ⊆ S`.
    Unanimity { coalition: Vec<usize> },
}

impl SyntheticKind {
    /// Names accepted on the command line, with default parameters:
    /// additive uses `c_i = i + 1` and unanimity `T = {0, 1}`.
    pub fn parse(name: &str, d: usize) -> Result<Self> {
        match name {
            "random_uniform" | "random-uniform" => Ok(SyntheticKind::RandomUniform),
            "glove" => Ok(SyntheticKind::Glove),
            "majority" => Ok(SyntheticKind::Majority),
            "additive" => Ok(SyntheticKind::Additive { coefficients: (1..=d).map(|i| i as f64).collect() }),
            "unanimity" => Ok(SyntheticKind::Unanimity { coalition: (0..d.min(2)).collect() }),
            other => Err(ShapError::Config(format!(
                "unknown game {other:?}; expected glove, additive, unanimity, random_uniform or majority"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::RandomUniform => "random_uniform",
            SyntheticKind::Glove => "glove",
            SyntheticKind::Majority => "majority",
            SyntheticKind::Additive { .. } => "additive",
            SyntheticKind::Unanimity { .. } => "unanimity",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn synthetic_game(kind: &SyntheticKind, d: usize, seed: u64) -> Result<CoalitionGame> {
    match kind {
        SyntheticKind::RandomUniform => {
            let key = splitmix64(seed ^ 0x5348_4150_5800_0000);
            CoalitionGame::new(d, move |s| {
                (splitmix64(key ^ splitmix64(s.bits())) >> 11) as f64 / (1u64 << 53) as f64
            })
        }
        SyntheticKind::Glove => {
            let left = (d / 3).max(1);
            let left_mask = if left >= 64 { u64::MAX } else { (1u64 << left) - 1 };
            CoalitionGame::new(d, move |s| {
                let l = (s.bits() & left_mask).count_ones();
                let r = (s.bits() & !left_mask).count_ones();
                l.min(r) as f64
            })
        }
        SyntheticKind::Majority => CoalitionGame::new(d, move |s| if 2 * s.len() > d { 1.0 } else { 0.0 }),
        SyntheticKind::Additive { coefficients } => {
            if coefficients.len() != d {
                return Err(ShapError::Argument(format!(
                    "additive game needs {d} coefficients, got {}",
                    coefficients.len()
                )));
            }
            let c = coefficients.clone();
            CoalitionGame::new(d, move |s| s.iter().fold(0.0, |acc, i| acc + c[i]))
        }
        SyntheticKind::Unanimity { coalition } => {
            let t = FeatureSubset::from_indices(d, coalition)?.bits();
            CoalitionGame::new(d, move |s| if s.bits() & t == t { 1.0 } else { 0.0 })
        }
    }
}

/// Provenance recorded alongside trained surrogates.
pub fn surrogate_metadata(hyper: &TabularHyper, rule: &MaskingRule) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    meta.insert("masking_baseline".into(), rule.name().into());
    meta.insert(
        "mask_distribution".into(),
        if hyper.mask_augmentation { "uniform-size".into() } else { "none".into() },
    );
    meta
}
