//! `ordmargin gen`: synthetic dataset generation with optional label bias.

use ordmargin_core::datagen::{self, BiasSpec, SyntheticSpec};

use super::GenArgs;
use crate::error::{read_json, Result};
use crate::manifest::{sibling_manifest_path, RunManifest, Stopwatch};

pub fn run(args: &GenArgs) -> Result<()> {
    let spec: SyntheticSpec = read_json(&args.spec)?;
    let bias: Option<BiasSpec> = args.bias.as_deref().map(read_json).transpose()?;

    let mut stopwatch = Stopwatch::start();
    let mut dataset = datagen::generate(&spec)?;
    let generate_seconds = stopwatch.lap();
    if let Some(bias) = &bias {
        dataset = datagen::inject_bias(&dataset, bias)?;
    }
    let bias_seconds = stopwatch.lap();

    crate::dataio::save_dataset_csv(&dataset, &args.out)?;

    #[derive(serde::Serialize)]
    struct ConfigSnapshot<'a> {
        spec: &'a SyntheticSpec,
        bias: &'a Option<BiasSpec>,
    }
    let mut manifest = RunManifest::new("gen", spec.seed, &ConfigSnapshot {
        spec: &spec,
        bias: &bias,
    })?;
    manifest.record_input(&args.spec);
    if let Some(path) = &args.bias {
        manifest.record_input(path);
    }
    manifest.record_output(&args.out);
    manifest.record_timing("generate", generate_seconds);
    if bias.is_some() {
        manifest.record_timing("inject_bias", bias_seconds);
    }
    manifest.record_timing("write", stopwatch.lap());
    manifest.save(&sibling_manifest_path(&args.out))?;

    println!(
        "gen: {} samples, {} classes, dim {} -> {}",
        dataset.len(),
        dataset.n_classes,
        dataset.dim,
        args.out.display()
    );
    Ok(())
}
