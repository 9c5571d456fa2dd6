use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use shapx_core::eval::{curve_from_game, mean_distance, random_order_auc, ConvergenceTable, CurveReport, DistanceReport};
use shapx_core::exact::exact_shapley;
use shapx_core::{convergence_probe, Attribution, CurveMode, EstimatorSpec, Method, ShapError};

use crate::args::EvalArgs;
use crate::config::{self, seed_or_env, Resolve};
use crate::error::{CliError, CliResult};
use crate::output;
use crate::source;

const METRICS: [&str; 5] = ["l1l2", "insertion", "deletion", "convergence", "bench"];

impl Resolve for EvalArgs {
    fn fill_defaults(&mut self) -> CliResult<()> {
        let metric = self
            .metric
            .clone()
            .ok_or_else(|| CliError::Usage(format!("--metric is required ({})", METRICS.join(", "))))?;
        match metric.as_str() {
            "l1l2" => {
                if self.estimate.is_none() || self.truth.is_none() {
                    return Err(CliError::Usage("--metric l1l2 needs --estimate and --truth".into()));
                }
                self.source.fill_defaults(false)?;
            }
            "insertion" | "deletion" => {
                self.source.fill_defaults(true)?;
                if *self.random_orders.get_or_insert(100) == 0 {
                    return Err(CliError::Usage("--random-orders must be at least 1".into()));
                }
            }
            "convergence" => {
                self.source.fill_defaults(true)?;
                let paired = *self.paired.get_or_insert(false);
                EstimatorSpec::parse(self.method.get_or_insert_with(|| "kernelshap".into()), paired)?;
                let grid = self.grid.get_or_insert_with(|| vec![256, 1024, 4096, 16384]);
                if grid.is_empty() || grid.contains(&0) {
                    return Err(CliError::Usage("--grid needs positive sample counts".into()));
                }
                if *self.seeds.get_or_insert(20) == 0 {
                    return Err(CliError::Usage("--seeds must be at least 1".into()));
                }
            }
            "bench" => self.bench.fill_defaults()?,
            other => {
                return Err(CliError::Usage(format!("unknown metric {other:?}; expected {}", METRICS.join(", "))))
            }
        }
        self.seed = Some(seed_or_env(self.seed)?);
        if self.out_dir.is_none() {
            return Err(CliError::Usage("--out-dir is required".into()));
        }
        Ok(())
    }
}

/// Reads one attribution object, or an array of them, as written by
/// `exact`, `estimate` or `train`.
fn read_attributions(path: &Path) -> CliResult<Vec<Attribution>> {
    let text = fs::read_to_string(path).map_err(|e| ShapError::io(path, e))?;
    let bad = |what: String| CliError::Usage(format!("{}: {what}", path.display()));
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(format!("not JSON: {e}")))?;
    let items = match value {
        Value::Array(items) => items,
        other => vec![other],
    };
    items
        .into_iter()
        .enumerate()
        .map(|(k, item)| {
            let phi: Vec<f64> = item
                .get("phi")
                .cloned()
                .and_then(|p| serde_json::from_value(p).ok())
                .ok_or_else(|| bad(format!("entry {k} has no numeric \"phi\" array")))?;
            let method = item
                .get("method")
                .cloned()
                .and_then(|m| serde_json::from_value(m).ok())
                .unwrap_or(Method::ExactShapley);
            Ok(Attribution::new(phi, method, 0, 0)?)
        })
        .collect()
}

#[derive(Serialize)]
struct DistanceFile<'a> {
    metric: &'static str,
    estimate: String,
    truth: String,
    #[serde(flatten)]
    report: &'a DistanceReport,
}

#[derive(Serialize)]
struct CurveFile<'a> {
    metric: &'a str,
    game: String,
    attribution: String,
    auc: f64,
    random_orders: usize,
    random_mean_auc: f64,
    #[serde(flatten)]
    curve: &'a CurveReport,
}

#[derive(Serialize)]
struct ConvergenceFile<'a> {
    metric: &'static str,
    game: String,
    monotone: bool,
    #[serde(flatten)]
    table: &'a ConvergenceTable,
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let dir = output::out_dir(args.out_dir.as_deref().expect("filled"))?.to_path_buf();
    let seed = args.seed.expect("filled");
    let metric = args.metric.as_deref().expect("filled");
    match metric {
        "l1l2" => {
            let (est_path, truth_path) = (args.estimate.as_deref().expect("filled"), args.truth.as_deref().expect("filled"));
            let report = mean_distance(&read_attributions(est_path)?, &read_attributions(truth_path)?)?;
            let mut csv = String::from("instance,l1,l2\n");
            for (k, i) in report.instances.iter().enumerate() {
                csv.push_str(&format!("{k},{},{}\n", i.l1, i.l2));
            }
            output::write_text(&dir.join("distances.csv"), &csv)?;
            let file = DistanceFile {
                metric: "l1l2",
                estimate: est_path.display().to_string(),
                truth: truth_path.display().to_string(),
                report: &report,
            };
            output::write_json(&dir.join("distances.json"), &file)?;
            println!("mean l1 {}, mean l2 {}", report.l1, report.l2);
        }
        "insertion" | "deletion" => {
            let ex = source::build(&args.source)?;
            let (phi, from) = match &args.attribution {
                Some(path) => {
                    let first = read_attributions(path)?.into_iter().next().expect("at least one entry");
                    (first.phi, path.display().to_string())
                }
                None => (exact_shapley(&ex.game)?.phi, "exact-shapley".to_string()),
            };
            let mode = CurveMode::parse(metric)?;
            let curve = curve_from_game(&ex.game, &phi, mode)?;
            let n = args.random_orders.expect("filled");
            let random_mean_auc = random_order_auc(&ex.game, mode, n, seed)?;
            curve.write_csv(&dir.join("curve.csv"))?;
            let file = CurveFile {
                metric,
                game: ex.description.clone(),
                attribution: from,
                auc: curve.auc,
                random_orders: n,
                random_mean_auc,
                curve: &curve,
            };
            output::write_json(&dir.join("curve.json"), &file)?;
            println!("{metric} AUC {:.6} (random orders {:.6})", curve.auc, random_mean_auc);
        }
        "convergence" => {
            let ex = source::build(&args.source)?;
            let spec = EstimatorSpec::parse(args.method.as_deref().expect("filled"), args.paired.expect("filled"))?;
            let table = convergence_probe(
                &spec,
                &ex.game,
                args.grid.as_deref().expect("filled"),
                args.seeds.expect("filled"),
                seed,
            )?;
            output::write_text(&dir.join("convergence.csv"), &table.to_csv())?;
            let file = ConvergenceFile { metric: "convergence", game: ex.description.clone(), monotone: table.is_monotone(), table: &table };
            output::write_json(&dir.join("convergence.json"), &file)?;
            for r in &table.rows {
                println!("M={} mean l2 {:.6}", r.samples, r.mean_l2);
            }
        }
        _ => {
            let report = super::bench::run(&args.bench, seed)?;
            super::bench::write(&dir, &report)?;
        }
    }
    output::write_text(&dir.join("config.toml"), &config::render("eval", &args)?)
}
