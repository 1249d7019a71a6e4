//! Command-line surface: argument definitions and dispatch.

mod check;
mod eval;
mod export;
mod gen;
mod train;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordmargin_core::metrics::BoundaryNorm;
use ordmargin_core::train::{MarginModeConfig, MarginOverride};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "ordmargin",
    version,
    about = "Ordinal classification with learned inter-rank margins",
    long_about = "Generates synthetic ordinal datasets, trains the contrastive \
                  margin model in two phases, evaluates checkpoints, exports \
                  embeddings, and verifies its own numerics.\n\nExit codes: \
                  0 success, 1 runtime failure, 2 bad input, 3 missing artifact."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ordinal dataset CSV from a JSON spec.
    Gen(GenArgs),
    /// Train on a dataset CSV; writes checkpoint, trace, report, manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset; prints a JSON report to stdout.
    Eval(EvalArgs),
    /// Export embeddings and their 2-D projection for a dataset.
    Export(ExportArgs),
    /// Run the built-in numerical verification battery.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON generation spec (class count, dim, per-class count, gaps, noise, seed).
    pub spec: PathBuf,
    /// Output CSV path; a manifest is written next to it.
    pub out: PathBuf,
    /// Optional JSON label-bias spec applied to the generated labels.
    #[arg(long)]
    pub bias: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training config; omitted keys take their defaults.
    pub config: PathBuf,
    /// Training dataset CSV.
    pub data: PathBuf,
    /// Run directory for checkpoint, trace, report, and manifest.
    pub outdir: PathBuf,
    /// Override the config's margin mode: per_pair | single | fixed:<value>.
    #[arg(long, value_parser = parse_margin_mode)]
    pub margin_mode: Option<MarginModeConfig>,
    /// Pin one boundary's margin, as <boundary>=<value>; repeatable.
    #[arg(long = "fix-margin", value_parser = parse_fix_margin)]
    pub fix_margin: Vec<MarginOverride>,
    /// Stop after phase one (margins and model trained jointly).
    #[arg(long)]
    pub phase1_only: bool,
    /// Disable the margin-collapse precautions: switches the margin
    /// activation to relu, initializes margins near zero, and removes the
    /// phase-one accuracy stop. Demonstrates collapse; not for real runs.
    #[arg(long)]
    pub no_precautions: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint JSON produced by `train`.
    pub checkpoint: PathBuf,
    /// Dataset CSV to evaluate on.
    pub data: PathBuf,
    /// Normalizer for per-boundary error rates.
    #[arg(long, value_enum, default_value_t = BoundaryNormArg::PairMass)]
    pub boundary_norm: BoundaryNormArg,
    /// Score against the pre-corruption labels where the dataset carries them.
    #[arg(long)]
    pub against_clean: bool,
    /// Also write a run manifest to this path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Checkpoint JSON produced by `train`.
    pub checkpoint: PathBuf,
    /// Dataset CSV to embed.
    pub data: PathBuf,
    /// Output CSV path (id, label, embedding, 2-D projection).
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Seed for the battery's randomized sweeps.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Boundary-error normalizer names as they appear on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryNormArg {
    /// Divide adjacent confusions by the two ranks' true-label mass.
    PairMass,
    /// Divide by the total sample count.
    Total,
    /// Average the two ranks' per-class confusion rates.
    PerClassMean,
}

impl From<BoundaryNormArg> for BoundaryNorm {
    fn from(arg: BoundaryNormArg) -> Self {
        match arg {
            BoundaryNormArg::PairMass => BoundaryNorm::PairMass,
            BoundaryNormArg::Total => BoundaryNorm::Total,
            BoundaryNormArg::PerClassMean => BoundaryNorm::PerClassMean,
        }
    }
}

fn parse_margin_mode(text: &str) -> std::result::Result<MarginModeConfig, String> {
    match text {
        "per_pair" => Ok(MarginModeConfig::PerPair),
        "single" => Ok(MarginModeConfig::Single),
        other => {
            if let Some(value) = other.strip_prefix("fixed:") {
                let value: f64 = value
                    .parse()
                    .map_err(|err| format!("fixed margin value `{value}`: {err}"))?;
                if !value.is_finite() || value < 0.0 {
                    return Err(format!("fixed margin value must be finite and >= 0, got {value}"));
                }
                Ok(MarginModeConfig::AllFixed { value })
            } else {
                Err(format!(
                    "`{other}` is not a margin mode; expected per_pair, single, or fixed:<value>"
                ))
            }
        }
    }
}

fn parse_fix_margin(text: &str) -> std::result::Result<MarginOverride, String> {
    let (boundary, value) = text
        .split_once('=')
        .ok_or_else(|| format!("`{text}` must look like <boundary>=<value>, e.g. 2=0.8"))?;
    let boundary: usize = boundary
        .parse()
        .map_err(|err| format!("boundary `{boundary}`: {err}"))?;
    if boundary == 0 {
        return Err(String::from("boundaries are numbered from 1"));
    }
    let value: f64 = value
        .parse()
        .map_err(|err| format!("margin value `{value}`: {err}"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("margin value must be finite and >= 0, got {value}"));
    }
    Ok(MarginOverride { boundary, value })
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen::run(&args),
        Command::Train(args) => train::run(&args),
        Command::Eval(args) => eval::run(&args),
        Command::Export(args) => export::run(&args),
        Command::Check(args) => check::run(&args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_mode_strings_cover_all_three_modes() {
        assert_eq!(parse_margin_mode("per_pair").unwrap(), MarginModeConfig::PerPair);
        assert_eq!(parse_margin_mode("single").unwrap(), MarginModeConfig::Single);
        assert_eq!(
            parse_margin_mode("fixed:0.75").unwrap(),
            MarginModeConfig::AllFixed { value: 0.75 }
        );
        assert!(parse_margin_mode("fixed:abc").is_err());
        assert!(parse_margin_mode("fixed:-1").is_err());
        assert!(parse_margin_mode("shared").is_err());
    }

    #[test]
    fn fix_margin_pairs_parse_and_validate() {
        let parsed = parse_fix_margin("2=0.8").unwrap();
        assert_eq!(parsed.boundary, 2);
        assert_eq!(parsed.value, 0.8);
        assert!(parse_fix_margin("2").is_err());
        assert!(parse_fix_margin("0=1.0").is_err());
        assert!(parse_fix_margin("1=nope").is_err());
        assert!(parse_fix_margin("1=-0.5").is_err());
    }

    #[test]
    fn command_line_shape_parses() {
        use clap::Parser as _;
        let cli = Cli::try_parse_from([
            "ordmargin",
            "train",
            "cfg.json",
            "data.csv",
            "out",
            "--margin-mode",
            "single",
            "--fix-margin",
            "1=0.5",
            "--fix-margin",
            "3=0.25",
            "--phase1-only",
        ])
        .unwrap();
        let Command::Train(args) = cli.command else {
            panic!("expected train");
        };
        assert_eq!(args.margin_mode, Some(MarginModeConfig::Single));
        assert_eq!(args.fix_margin.len(), 2);
        assert!(args.phase1_only);
        assert!(!args.no_precautions);
    }
}
