//! `ordmargin train`: the two-phase pipeline end to end, with flag overrides
//! layered over the JSON config.

use std::path::Path;

use ordmargin_core::margins::MarginActivation;
use ordmargin_core::metrics::margin_report;
use ordmargin_core::train::{self, TrainConfig};

use super::TrainArgs;
use crate::checkpoint::Checkpoint;
use crate::error::{read_file, write_file, CliError, Result};
use crate::manifest::{RunManifest, Stopwatch};

pub fn run(args: &TrainArgs) -> Result<()> {
    let config_text = read_file(&args.config)?;
    let mut config: TrainConfig = serde_json::from_str(&config_text)
        .map_err(|err| CliError::bad_input(format!("{}: {err}", args.config.display())))?;
    apply_overrides(&mut config, args);

    let dataset = crate::dataio::load_dataset_csv(&args.data)?;

    let mut stopwatch = Stopwatch::start();
    let outcome = train::train(&dataset, &config)?;
    let train_seconds = stopwatch.lap();

    std::fs::create_dir_all(&args.outdir)
        .map_err(|err| CliError::runtime(format!("{}: {err}", args.outdir.display())))?;

    let checkpoint_path = args.outdir.join("checkpoint.json");
    let log_path = args.outdir.join("train_log.csv");
    let report_path = args.outdir.join("margin_report.json");

    let report = margin_report(&outcome.margins, &outcome.schema)?;
    let checkpoint = Checkpoint::new(
        config.seed,
        config.clone(),
        outcome.schema.clone(),
        outcome.model.clone(),
        outcome.margins.clone(),
    );
    crate::checkpoint::save(&checkpoint, &checkpoint_path)?;
    crate::dataio::save_train_log_csv(&outcome.log, outcome.schema.n_boundaries(), &log_path)?;
    write_json(&report, &report_path)?;

    let mut manifest = RunManifest::new("train", config.seed, &config)?;
    manifest.record_input(&args.config);
    manifest.record_input(&args.data);
    manifest.record_output(&checkpoint_path);
    manifest.record_output(&log_path);
    manifest.record_output(&report_path);
    manifest.record_timing("train", train_seconds);
    manifest.record_timing("write", stopwatch.lap());
    manifest.save(&args.outdir.join("manifest.json"))?;

    let phase2 = outcome
        .phase2
        .map(|p| format!("phase 2: {} epochs, train acc {:.4}", p.epochs_run, p.final_train_accuracy))
        .unwrap_or_else(|| String::from("phase 2: skipped"));
    println!(
        "train: phase 1: {} epochs, train acc {:.4}; {}; margins [{}] -> {}",
        outcome.phase1.epochs_run,
        outcome.phase1.final_train_accuracy,
        phase2,
        report
            .entries
            .iter()
            .map(|e| format!("{:.4}", e.value))
            .collect::<Vec<_>>()
            .join(", "),
        args.outdir.display()
    );
    Ok(())
}

fn apply_overrides(config: &mut TrainConfig, args: &TrainArgs) {
    if let Some(mode) = &args.margin_mode {
        config.margin_mode = mode.clone();
    }
    config.fixed_margins.extend(args.fix_margin.iter().cloned());
    if args.phase1_only {
        config.phase1_only = true;
    }
    if args.no_precautions {
        // Invert the three collapse precautions: non-smooth activation,
        // near-zero initialization, and no accuracy-based stop.
        config.margin_activation = MarginActivation::Relu;
        config.margin_init = [0.0, 1e-3];
        config.phase1_early_stop = false;
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| CliError::runtime(format!("serializing {}: {err}", path.display())))?;
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ordmargin_core::train::MarginModeConfig;
    use std::path::PathBuf;

    fn base_args() -> TrainArgs {
        TrainArgs {
            config: PathBuf::from("cfg.json"),
            data: PathBuf::from("data.csv"),
            outdir: PathBuf::from("out"),
            margin_mode: None,
            fix_margin: Vec::new(),
            phase1_only: false,
            no_precautions: false,
        }
    }

    #[test]
    fn no_precautions_inverts_all_three_safeguards() {
        let mut config = TrainConfig::default();
        let args = TrainArgs {
            no_precautions: true,
            ..base_args()
        };
        apply_overrides(&mut config, &args);
        assert_eq!(config.margin_activation, MarginActivation::Relu);
        assert_eq!(config.margin_init, [0.0, 1e-3]);
        assert!(!config.phase1_early_stop);
    }

    #[test]
    fn flag_overrides_layer_on_top_of_the_config() {
        let mut config = TrainConfig::default();
        let args = TrainArgs {
            margin_mode: Some(MarginModeConfig::Single),
            fix_margin: vec![ordmargin_core::train::MarginOverride {
                boundary: 2,
                value: 0.8,
            }],
            phase1_only: true,
            ..base_args()
        };
        apply_overrides(&mut config, &args);
        assert_eq!(config.margin_mode, MarginModeConfig::Single);
        assert_eq!(config.fixed_margins.len(), 1);
        assert!(config.phase1_only);
        // Untouched precautions stay at their defaults.
        assert_eq!(config.margin_activation, MarginActivation::Softplus);
    }
}
