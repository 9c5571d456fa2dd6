use std::path::Path;

use shapx_core::eval::{amortized_speedup, SpeedReport};
use shapx_core::models::MaskingRule;
use shapx_core::{Activation, Checkpoint, ExplainerNet, Objective};

use crate::args::{BenchArgs, BenchParams};
use crate::config::{self, seed_or_env, Resolve};
use crate::error::{CliError, CliResult};
use crate::output;
use crate::source::fixture_model;

impl BenchParams {
    pub fn fill_defaults(&mut self) -> CliResult<()> {
        if *self.bench_features.get_or_insert(64) == 0 {
            return Err(CliError::Usage("--bench-features must be at least 1".into()));
        }
        if *self.kernel_samples.get_or_insert(2048) == 0 {
            return Err(CliError::Usage("--kernel-samples must be at least 1".into()));
        }
        self.runs.get_or_insert(10);
        self.warmup.get_or_insert(3);
        Ok(())
    }
}

impl Resolve for BenchArgs {
    fn fill_defaults(&mut self) -> CliResult<()> {
        self.params.fill_defaults()?;
        self.seed = Some(seed_or_env(self.seed)?);
        if self.out_dir.is_none() {
            return Err(CliError::Usage("--out-dir is required".into()));
        }
        Ok(())
    }
}

/// Times amortized inference and KernelSHAP on the `mlp` fixture model.
pub fn run(params: &BenchParams, seed: u64) -> CliResult<SpeedReport> {
    let d = params.bench_features.expect("filled");
    let (model, x) = fixture_model(d, seed)?;
    let net = match &params.explainer {
        Some(path) => ExplainerNet::from_checkpoint(&Checkpoint::load(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => ExplainerNet::new(
            d,
            d,
            model.classes(),
            &ExplainerNet::default_hidden(d),
            Activation::Relu,
            Objective::SimShap,
            seed,
        )?,
    };
    Ok(amortized_speedup(
        &model,
        &x,
        0,
        &MaskingRule::Zeros,
        &net,
        params.kernel_samples.expect("filled"),
        params.warmup.expect("filled"),
        params.runs.expect("filled"),
        seed,
    )?)
}

pub fn write(dir: &Path, report: &SpeedReport) -> CliResult<()> {
    output::write_json(&dir.join("bench.json"), report)?;
    output::write_text(&dir.join("timing.csv"), &report.timing.to_csv())?;
    println!(
        "amortized {:.4} ms, kernelshap {:.2} ms, ratio {:.0}x",
        report.median_amortized_ms, report.median_kernelshap_ms, report.ratio
    );
    Ok(())
}

pub fn bench(args: BenchArgs) -> CliResult<()> {
    let dir = output::out_dir(args.out_dir.as_deref().expect("filled"))?.to_path_buf();
    let report = run(&args.params, args.seed.expect("filled"))?;
    write(&dir, &report)?;
    output::write_text(&dir.join("config.toml"), &config::render("bench", &args)?)
}
