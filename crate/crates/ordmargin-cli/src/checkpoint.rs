//! Versioned JSON checkpoints: model, margins, schema, and the exact
//! training configuration, reloadable bit-for-bit.

use std::path::Path;

use ordmargin_core::margins::{MarginSet, OrdinalSchema};
use ordmargin_core::model::Model;
use ordmargin_core::train::TrainConfig;

use crate::error::{read_file, write_file, CliError, Result};

pub const CHECKPOINT_MAGIC: &str = "ordmargin.checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to evaluate, export, or resume inspection of a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub magic: String,
    pub version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub schema: OrdinalSchema,
    pub model: Model,
    pub margins: MarginSet,
}

impl Checkpoint {
    pub fn new(
        seed: u64,
        config: TrainConfig,
        schema: OrdinalSchema,
        model: Model,
        margins: MarginSet,
    ) -> Self {
        Checkpoint {
            magic: String::from(CHECKPOINT_MAGIC),
            version: CHECKPOINT_VERSION,
            seed,
            config,
            schema,
            model,
            margins,
        }
    }
}

pub fn save(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(checkpoint)
        .map_err(|err| CliError::runtime(format!("serializing checkpoint: {err}")))?;
    text.push('\n');
    write_file(path, &text)
}

/// Load and validate a checkpoint. Absent, unparsable, or structurally
/// inconsistent files all land in the missing-artifact bucket: a checkpoint
/// we cannot trust is as unusable as one that is not there.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let text = read_file(path)?;
    let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|err| {
        CliError::missing_artifact(format!("{}: corrupt checkpoint: {err}", path.display()))
    })?;
    if checkpoint.magic != CHECKPOINT_MAGIC {
        return Err(CliError::missing_artifact(format!(
            "{}: not a checkpoint (magic `{}`)",
            path.display(),
            checkpoint.magic
        )));
    }
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(CliError::missing_artifact(format!(
            "{}: checkpoint version {} unsupported (tool reads {})",
            path.display(),
            checkpoint.version,
            CHECKPOINT_VERSION
        )));
    }
    checkpoint.model.validate().map_err(|err| {
        CliError::missing_artifact(format!("{}: corrupt checkpoint: {err}", path.display()))
    })?;
    if checkpoint.margins.n_boundaries() != checkpoint.schema.n_boundaries() {
        return Err(CliError::missing_artifact(format!(
            "{}: corrupt checkpoint: {} margins for {} boundaries",
            path.display(),
            checkpoint.margins.n_boundaries(),
            checkpoint.schema.n_boundaries()
        )));
    }
    if checkpoint.model.config().n_classes != checkpoint.schema.n_classes() {
        return Err(CliError::missing_artifact(format!(
            "{}: corrupt checkpoint: model emits {} classes, schema has {}",
            path.display(),
            checkpoint.model.config().n_classes,
            checkpoint.schema.n_classes()
        )));
    }
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ordmargin_core::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scratch(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("ordmargin-checkpoint-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let schema = OrdinalSchema::from_class_count(4).unwrap();
        let model = Model::init(ModelConfig::for_data(6, 4), &mut rng).unwrap();
        let margins = MarginSet::all_fixed(&schema, 0.75, 0.0).unwrap();
        Checkpoint::new(5, TrainConfig::default(), schema, model, margins)
    }

    #[test]
    fn roundtrip_restores_the_exact_checkpoint() {
        let checkpoint = sample_checkpoint();
        let path = scratch("roundtrip.json");
        save(&checkpoint, &path).unwrap();
        assert_eq!(load(&path).unwrap(), checkpoint);
    }

    #[test]
    fn garbage_file_is_a_missing_artifact() {
        let path = scratch("garbage.json");
        std::fs::write(&path, "{not json").unwrap();
        let err = load(&path).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("corrupt"), "{err}");
    }

    #[test]
    fn wrong_magic_or_version_is_rejected() {
        let mut checkpoint = sample_checkpoint();
        checkpoint.magic = String::from("something-else");
        let path = scratch("magic.json");
        save(&checkpoint, &path).unwrap();
        assert_eq!(load(&path).unwrap_err().exit_code(), 3);

        let mut checkpoint = sample_checkpoint();
        checkpoint.version = 99;
        let path = scratch("version.json");
        save(&checkpoint, &path).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("version 99"), "{err}");
    }

    #[test]
    fn margin_schema_disagreement_is_rejected() {
        let mut checkpoint = sample_checkpoint();
        checkpoint.schema = OrdinalSchema::from_class_count(6).unwrap();
        let path = scratch("skew.json");
        save(&checkpoint, &path).unwrap();
        let err = load(&path).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("margins"), "{err}");
    }
}
