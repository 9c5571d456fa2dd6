mod bench;
mod eval;
mod train;

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use shapx_core::exact::{exact_least_squares, exact_random_order, exact_shapley, exact_unified_expectation};
use shapx_core::{Attribution, EstimatorSpec, RandomSource, TableRow, UnifiedStochasticConfig};

pub use bench::bench;
pub use eval::eval;
pub use train::train;

use crate::args::{EstimateArgs, ExactArgs};
use crate::config::{self, seed_or_env, Resolve};
use crate::error::{CliError, CliResult};
use crate::output::{self, AttributionFile, EstimatorEcho};
use crate::source::{self, Explained};

const EXACT_METHODS: &str = "shapley, random-order, least-squares or unified:<sv|lsv|simshap>";

impl Resolve for ExactArgs {
    fn fill_defaults(&mut self) -> CliResult<()> {
        self.source.fill_defaults(true)?;
        let method = self.method.get_or_insert_with(|| "shapley".into());
        if !matches!(method.as_str(), "shapley" | "random-order" | "least-squares") && !method.starts_with("unified:") {
            return Err(CliError::Usage(format!("unknown exact method {method:?}; expected {EXACT_METHODS}")));
        }
        self.seed = Some(seed_or_env(self.seed)?);
        self.omit_timing.get_or_insert(false);
        Ok(())
    }
}

impl Resolve for EstimateArgs {
    fn fill_defaults(&mut self) -> CliResult<()> {
        self.source.fill_defaults(true)?;
        let method = self.method.get_or_insert_with(|| "kernelshap".into()).clone();
        if *self.samples.get_or_insert(1024) == 0 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        let paired = *self.paired.get_or_insert(false);
        let spec = EstimatorSpec::parse(&method, paired)?;
        if paired && !matches!(spec, EstimatorSpec::KernelShap { .. } | EstimatorSpec::SimShap { .. } | EstimatorSpec::Unified { .. }) {
            return Err(CliError::Usage(format!(
                "--paired applies to kernelshap, simshap-sample and unified methods, not {method}"
            )));
        }
        self.seed = Some(seed_or_env(self.seed)?);
        self.omit_timing.get_or_insert(false);
        Ok(())
    }
}

fn elapsed_ms(start: Instant, omit: bool) -> Option<f64> {
    (!omit).then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// Writes the attribution (or prints it) and its resolved config.
fn emit<A: Serialize>(command: &str, args: &A, output: Option<&Path>, file: &AttributionFile<'_>) -> CliResult<()> {
    let text = output::to_json(file)?;
    match output {
        Some(path) => {
            output::write_text(path, &text)?;
            let cfg = output::config_path_for(path);
            output::write_text(&cfg, &config::render(command, args)?)?;
            println!("wrote {} and {}", path.display(), cfg.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn attribution_file<'a>(ex: &Explained, attr: &'a Attribution, seed: u64, elapsed_ms: Option<f64>) -> AttributionFile<'a> {
    AttributionFile {
        phi: &attr.phi,
        method: attr.method,
        d: ex.game.players(),
        v_empty: ex.game.v_empty(),
        v_full: ex.game.v_full(),
        seed,
        elapsed_ms,
        samples_used: None,
        estimator: None,
        game: ex.description.clone(),
        efficiency_gap: attr.efficiency_gap(&ex.game),
    }
}

pub fn exact(args: ExactArgs) -> CliResult<()> {
    let ex = source::build(&args.source)?;
    let game = &ex.game;
    let start = Instant::now();
    let method = args.method.as_deref().expect("filled");
    let attr = match method {
        "shapley" => exact_shapley(game)?,
        "random-order" => exact_random_order(game)?,
        "least-squares" => exact_least_squares(game)?,
        other => {
            let row = TableRow::parse(other.strip_prefix("unified:").expect("checked"))?;
            exact_unified_expectation(&UnifiedStochasticConfig::table_row(row, game.players())?, game)?
        }
    };
    let seed = args.seed.expect("filled");
    let file = attribution_file(&ex, &attr, seed, elapsed_ms(start, args.omit_timing == Some(true)));
    emit("exact", &args, args.output.as_deref(), &file)
}

pub fn estimate(args: EstimateArgs) -> CliResult<()> {
    let ex = source::build(&args.source)?;
    let method = args.method.clone().expect("filled");
    let (samples, paired, seed) = (args.samples.expect("filled"), args.paired.expect("filled"), args.seed.expect("filled"));
    let spec = EstimatorSpec::parse(&method, paired)?;
    let start = Instant::now();
    let attr = spec.run(&ex.game, samples, &mut RandomSource::new(seed, 0))?;
    let mut file = attribution_file(&ex, &attr, seed, elapsed_ms(start, args.omit_timing == Some(true)));
    file.samples_used = Some(attr.samples_used);
    file.estimator = Some(EstimatorEcho { name: spec.label(), method, samples, paired, seed });
    emit("estimate", &args, args.output.as_deref(), &file)
}
