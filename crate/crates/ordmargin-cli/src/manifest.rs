//! Run manifests: enough recorded context to replay any command.
//!
//! Every artifact-producing command writes one manifest describing the exact
//! inputs, configuration snapshot, seed, outputs, and wall-clock timings of
//! the run. Two runs with equal configuration, seed, and inputs produce
//! byte-identical artifacts; timings are informational and excluded from that
//! guarantee.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::error::{write_file, CliError, Result};

/// Format version of each artifact kind this tool writes, recorded so a
/// future reader can tell what it is looking at.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ArtifactVersions {
    pub checkpoint: u32,
    pub dataset_csv: u32,
    pub train_log_csv: u32,
    pub report_json: u32,
}

impl Default for ArtifactVersions {
    fn default() -> Self {
        ArtifactVersions {
            checkpoint: crate::checkpoint::CHECKPOINT_VERSION,
            dataset_csv: 1,
            train_log_csv: 1,
            report_json: 1,
        }
    }
}

/// A record of one command invocation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub artifact_versions: ArtifactVersions,
    /// Subcommand name.
    pub command: String,
    /// The seed all randomness in the run flowed from.
    pub seed: u64,
    /// Full configuration snapshot (the parsed spec/config after flag
    /// overrides), sufficient to rebuild the exact run.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Stage name to elapsed seconds.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    /// Start a manifest for `command`; the configuration snapshot must
    /// serialize cleanly or the command aborts.
    pub fn new(command: &str, seed: u64, config: &impl serde::Serialize) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|err| CliError::runtime(format!("serializing config snapshot: {err}")))?;
        Ok(RunManifest {
            tool: String::from("ordmargin"),
            tool_version: String::from(env!("CARGO_PKG_VERSION")),
            artifact_versions: ArtifactVersions::default(),
            command: String::from(command),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn record_input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.timings.insert(String::from(stage), seconds);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|err| CliError::runtime(format!("serializing manifest: {err}")))?;
        text.push('\n');
        write_file(path, &text)
    }
}

/// Wall-clock timer for manifest stage timings.
pub struct Stopwatch {
    last: Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch {
            last: Instant::now(),
        }
    }

    /// Seconds since start or the previous lap, and reset the lap marker.
    pub fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let elapsed = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        elapsed
    }
}

/// The manifest path that accompanies a single-file artifact: the artifact
/// path with `.manifest.json` appended.
pub fn sibling_manifest_path(artifact: &Path) -> std::path::PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".manifest.json");
    std::path::PathBuf::from(name)
}
