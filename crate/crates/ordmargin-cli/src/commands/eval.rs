//! `ordmargin eval`: score a checkpoint on a dataset; the report JSON is the
//! entire stdout so it can be piped directly into other tools.

use ordmargin_core::datagen::Dataset;
use ordmargin_core::margins::OrdinalSchema;
use ordmargin_core::metrics;
use ordmargin_core::model::Model;

use super::EvalArgs;
use crate::error::{CliError, Result};
use crate::manifest::{RunManifest, Stopwatch};

/// Reconcile a loaded dataset with a checkpoint: dimensions must match, and
/// the dataset's inferred class count (its largest label) widens to the
/// schema's so a split that happens to miss the top rank still scores against
/// the full confusion matrix.
pub(super) fn align_dataset(dataset: Dataset, model: &Model, schema: &OrdinalSchema) -> Result<Dataset> {
    if dataset.dim != model.config().input_dim {
        return Err(CliError::bad_input(format!(
            "dataset dim {} does not match the checkpoint's input dim {}",
            dataset.dim,
            model.config().input_dim
        )));
    }
    if dataset.n_classes > schema.n_classes() {
        return Err(CliError::bad_input(format!(
            "dataset has {} classes, checkpoint was trained for {}",
            dataset.n_classes,
            schema.n_classes()
        )));
    }
    Dataset::new(dataset.dim, schema.n_classes(), dataset.samples).map_err(CliError::from)
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let checkpoint = crate::checkpoint::load(&args.checkpoint)?;
    let dataset = crate::dataio::load_dataset_csv(&args.data)?;
    let dataset = align_dataset(dataset, &checkpoint.model, &checkpoint.schema)?;

    let mut stopwatch = Stopwatch::start();
    let report = metrics::evaluate(
        &checkpoint.model,
        &dataset,
        args.boundary_norm.into(),
        args.against_clean,
    )?;
    let evaluate_seconds = stopwatch.lap();

    if let Some(manifest_path) = &args.manifest {
        #[derive(serde::Serialize)]
        struct ConfigSnapshot {
            boundary_norm: String,
            against_clean: bool,
        }
        let mut manifest = RunManifest::new("eval", checkpoint.seed, &ConfigSnapshot {
            boundary_norm: format!("{:?}", args.boundary_norm),
            against_clean: args.against_clean,
        })?;
        manifest.record_input(&args.checkpoint);
        manifest.record_input(&args.data);
        manifest.record_timing("evaluate", evaluate_seconds);
        manifest.save(manifest_path)?;
    }

    let text = serde_json::to_string_pretty(&report)
        .map_err(|err| CliError::runtime(format!("serializing report: {err}")))?;
    println!("{text}");
    Ok(())
}
