use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use shapx_core::amortized::{amortized_inference, LrSchedule, TrainOutcome};
use shapx_core::exact::exact_shapley;
use shapx_core::models::{
    masked_game, synthetic_classification_dataset, synthetic_linear_dataset, train_tabular_classifier, Dataset,
    TabularHyper, TabularKind,
};
use shapx_core::{
    linear_model_shapley, train_fastshap, train_simshap, Activation, ExplainerNet, MetricMatrix, Method, Objective,
    OptimizerKind, TrainConfig, TrainingSet,
};

use crate::args::TrainArgs;
use crate::config::{self, seed_or_env, Resolve};
use crate::error::{CliError, CliResult};
use crate::output;
use crate::source::{load_model, masking_rule};

/// Largest feature count for which validation attributions are checked
/// against exact enumeration when no closed form exists.
const EXACT_REFERENCE_LIMIT: usize = 12;

fn one_of(value: &str, flag: &str, allowed: &[&str]) -> CliResult<()> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("unknown {flag} {value:?}; expected {}", allowed.join(" or "))))
    }
}

impl Resolve for TrainArgs {
    fn fill_defaults(&mut self) -> CliResult<()> {
        let defaults = TrainConfig::default();
        one_of(self.method.get_or_insert_with(|| "simshap".into()), "method", &["simshap", "fastshap"])?;
        self.normalize.get_or_insert(false);
        if self.normalize == Some(true) && self.method.as_deref() == Some("simshap") {
            return Err(CliError::Usage("--normalize applies to --method fastshap".into()));
        }
        match &self.data {
            Some(_) => {
                if self.dataset.is_some() {
                    return Err(CliError::Usage("pass either --data or --dataset, not both".into()));
                }
                self.label.get_or_insert_with(|| "label".into());
            }
            None => {
                let name = self.dataset.get_or_insert_with(|| "synthetic-linear".into()).clone();
                one_of(&name, "dataset", &["synthetic-linear", "synthetic-classification"])?;
                self.rows.get_or_insert(2000);
                self.features.get_or_insert(8);
                if name == "synthetic-classification" {
                    self.dataset_classes.get_or_insert(2);
                }
            }
        }
        if self.model.is_none() {
            let kind = if self.dataset.as_deref() == Some("synthetic-classification") { "mlp" } else { "linear" };
            let kind = self.model_kind.get_or_insert_with(|| kind.into()).clone();
            one_of(&kind, "model kind", &["linear", "logistic", "mlp"])?;
            if kind != "linear" {
                self.model_epochs.get_or_insert(TabularHyper::default().epochs);
            }
        }
        one_of(self.mask.get_or_insert_with(|| "zeros".into()), "mask", &["zeros", "mean"])?;
        self.epochs.get_or_insert(defaults.epochs);
        self.learning_rate.get_or_insert(defaults.learning_rate);
        one_of(self.schedule.get_or_insert_with(|| "cosine".into()), "schedule", &["constant", "cosine"])?;
        self.batch_size.get_or_insert(defaults.batch_size);
        self.samples.get_or_insert(defaults.samples);
        self.paired.get_or_insert(defaults.paired);
        one_of(self.optimizer.get_or_insert_with(|| "adam".into()), "optimizer", &["adam", "sgd"])?;
        self.weight_decay.get_or_insert(defaults.weight_decay);
        self.validation_fraction.get_or_insert(defaults.validation_fraction);
        let samples = self.samples.expect("filled");
        self.validation_samples.get_or_insert(TrainConfig { samples, ..TrainConfig::default() }.validation_samples());
        one_of(self.metric.get_or_insert_with(|| "identity".into()), "metric", &["identity", "lsv"])?;
        one_of(self.activation.get_or_insert_with(|| "elu".into()), "activation", &["relu", "elu"])?;
        self.ema_decay.get_or_insert(defaults.ema_decay.unwrap_or(0.0));
        self.all_classes.get_or_insert(false);
        self.early_stop_patience.get_or_insert(0);
        self.seed = Some(seed_or_env(self.seed)?);
        if self.out_dir.is_none() {
            return Err(CliError::Usage("--out-dir is required".into()));
        }
        Ok(())
    }
}

impl TrainArgs {
    fn train_config(&self) -> CliResult<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.learning_rate.expect("filled"),
            schedule: match self.schedule.as_deref() {
                Some("constant") => LrSchedule::Constant,
                _ => LrSchedule::Cosine,
            },
            batch_size: self.batch_size.expect("filled"),
            epochs: self.epochs.expect("filled"),
            samples: self.samples.expect("filled"),
            paired: self.paired.expect("filled"),
            optimizer: match self.optimizer.as_deref() {
                Some("sgd") => OptimizerKind::Sgd,
                _ => OptimizerKind::Adam,
            },
            weight_decay: self.weight_decay.expect("filled"),
            seed: self.seed.expect("filled"),
            validation_fraction: self.validation_fraction.expect("filled"),
            validation_samples: self.validation_samples,
            all_classes: self.all_classes.expect("filled"),
            early_stop_patience: self.early_stop_patience.filter(|&p| p > 0),
            metric: MetricMatrix::parse(self.metric.as_deref().expect("filled"))?,
            ema_decay: self.ema_decay.filter(|&b| b > 0.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn dataset(&self) -> CliResult<Dataset> {
        let seed = self.seed.expect("filled");
        if let Some(path) = &self.data {
            return Ok(Dataset::from_csv_path(path, self.label.as_deref().expect("filled"))?);
        }
        let (rows, features) = (self.rows.expect("filled"), self.features.expect("filled"));
        if rows == 0 || features == 0 {
            return Err(CliError::Usage("--rows and --features must be at least 1".into()));
        }
        Ok(match self.dataset.as_deref() {
            Some("synthetic-classification") => {
                synthetic_classification_dataset(rows, features, self.dataset_classes.expect("filled"), seed)
            }
            _ => synthetic_linear_dataset(rows, features, seed).0,
        })
    }
}

#[derive(Serialize)]
struct EmittedAttribution {
    row: usize,
    class: usize,
    phi: Vec<f64>,
    method: Method,
    v_all: f64,
    efficiency_gap: f64,
}

#[derive(Serialize)]
struct TrainReport {
    method: String,
    objective: &'static str,
    rows: usize,
    features: usize,
    classes: usize,
    validation_rows: usize,
    epochs_run: usize,
    final_train_loss: Option<f64>,
    final_validation_loss: Option<f64>,
    reference: Option<&'static str>,
    mean_l2: Option<f64>,
    relative_l2: Option<f64>,
    max_abs_efficiency_gap: Option<f64>,
    files: Vec<&'static str>,
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let cfg = args.train_config()?;
    let seed = cfg.seed;
    let data = args.dataset()?;
    let f = data.feature_count();
    let rule = masking_rule(args.mask.as_deref().expect("filled"), Some(&data))?;
    let dir = output::out_dir(args.out_dir.as_deref().expect("filled"))?.to_path_buf();
    let mut files = Vec::new();

    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => {
            let kind = TabularKind::parse(args.model_kind.as_deref().expect("filled"))?;
            let hyper = TabularHyper { epochs: args.model_epochs.unwrap_or(0), seed, ..TabularHyper::default() };
            let model = train_tabular_classifier(&data, kind, &hyper, &rule)?;
            let path = dir.join("model.json");
            let mut ckpt = model.to_checkpoint(seed);
            ckpt.metadata = shapx_core::models::surrogate_metadata(&hyper, &rule);
            ckpt.save(&path)?;
            files.push("model.json");
            model
        }
    };
    if model.input_width() != f {
        return Err(CliError::Usage(format!("model expects {} features, the dataset has {f}", model.input_width())));
    }
    let classes = model.classes();
    let set = if classes == 1 {
        TrainingSet::single_class(data.features.clone())?
    } else {
        let labels = data.class_labels()?;
        if let Some(&c) = labels.iter().find(|&&c| c >= classes) {
            return Err(CliError::Usage(format!("label {c} is out of range for a {classes}-class model")));
        }
        TrainingSet::new(data.features.clone(), labels)?
    };
    let model = Arc::new(model);
    let factory = |x: &[f64], class: usize| masked_game(model.clone(), x, class, &rule);

    let activation = match args.activation.as_deref() {
        Some("relu") => Activation::Relu,
        _ => Activation::Elu,
    };
    let hidden = args.hidden.clone().unwrap_or_else(|| ExplainerNet::default_hidden(f));
    let net = ExplainerNet::new(f, f, classes, &hidden, activation, Objective::SimShap, seed)?;
    let start = Instant::now();
    let TrainOutcome { net, history } = match args.method.as_deref() {
        Some("fastshap") => train_fastshap(net, &set, &factory, &cfg, args.normalize == Some(true))?,
        _ => train_simshap(net, &set, &factory, &cfg)?,
    };
    log::info!("trained {} epochs in {:.1}s", history.len(), start.elapsed().as_secs_f64());

    let explainer_path = dir.join("explainer.json");
    net.to_checkpoint(Some(&cfg), seed).save(&explainer_path)?;
    let loss_path = dir.join("loss.csv");
    history.write_csv(&loss_path)?;
    files.push("explainer.json");
    files.push("loss.csv");

    let (_, validation) = set.split(cfg.validation_fraction, cfg.seed);
    let linear = model.linear_parameters(0);
    let reference = if linear.is_some() {
        Some("linear-closed-form")
    } else if f <= EXACT_REFERENCE_LIMIT {
        Some("exact-shapley")
    } else {
        None
    };
    let baseline = rule.baseline(f)?;
    let mut emitted = Vec::with_capacity(validation.len());
    let (mut err, mut norm, mut gap) = (0.0, 0.0, 0.0f64);
    for &r in &validation {
        let x = &data.features[r];
        let class = set.classes()[r];
        let games = (0..classes).map(|c| factory(x, c)).collect::<shapx_core::Result<Vec<_>>>()?;
        let v_all: Vec<f64> = games.iter().map(|g| g.v_all()).collect();
        let out = amortized_inference(&net, x, net.objective().normalizes().then_some(v_all.as_slice()))?;
        let attr = &out[class];
        let truth = match (&linear, reference) {
            (Some((w, b)), _) => Some(linear_model_shapley(w, *b, x, &baseline)?.phi),
            (None, Some(_)) => Some(exact_shapley(&games[class])?.phi),
            _ => None,
        };
        if let Some(t) = truth {
            err += attr.phi.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            norm += t.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        let efficiency_gap = attr.total() - v_all[class];
        if attr.method.is_efficient() {
            gap = gap.max(efficiency_gap.abs());
        }
        emitted.push(EmittedAttribution {
            row: r,
            class,
            phi: attr.phi.clone(),
            method: attr.method,
            v_all: v_all[class],
            efficiency_gap,
        });
    }
    let attributions_path = dir.join("attributions.json");
    output::write_json(&attributions_path, &emitted)?;
    files.push("attributions.json");
    let config_path = dir.join("config.toml");
    output::write_text(&config_path, &config::render("train", &args)?)?;
    files.push("config.toml");

    let n = validation.len() as f64;
    let scored = reference.is_some() && !validation.is_empty();
    let report = TrainReport {
        method: args.method.clone().expect("filled"),
        objective: net.objective().name(),
        rows: data.len(),
        features: f,
        classes,
        validation_rows: validation.len(),
        epochs_run: history.len(),
        final_train_loss: history.epochs.last().map(|e| e.train),
        final_validation_loss: history.epochs.last().and_then(|e| e.validation),
        reference,
        mean_l2: scored.then(|| err / n),
        relative_l2: (scored && norm > 0.0).then(|| err / norm),
        max_abs_efficiency_gap: net.objective().normalizes().then_some(gap),
        files,
    };
    let report_path = dir.join("report.json");
    output::write_json(&report_path, &report)?;
    println!("wrote {}", report_path.display());
    if let Some(rel) = report.relative_l2 {
        println!("validation relative l2 to {}: {rel:.4}", report.reference.expect("scored"));
    }
    Ok(())
}
