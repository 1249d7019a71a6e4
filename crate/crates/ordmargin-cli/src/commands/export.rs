//! `ordmargin export`: encode a dataset and write embeddings plus their 2-D
//! principal-component projection for external plotting.

use std::fmt::Write as _;

use ordmargin_core::metrics;

use super::ExportArgs;
use crate::error::{write_file, Result};
use crate::manifest::{sibling_manifest_path, RunManifest, Stopwatch};

pub fn run(args: &ExportArgs) -> Result<()> {
    let checkpoint = crate::checkpoint::load(&args.checkpoint)?;
    let dataset = crate::dataio::load_dataset_csv(&args.data)?;
    let dataset = super::eval::align_dataset(dataset, &checkpoint.model, &checkpoint.schema)?;

    let mut stopwatch = Stopwatch::start();
    let embedded = metrics::embed_dataset(&checkpoint.model, &dataset)?;
    let embed_seconds = stopwatch.lap();

    let mut text = String::from("id,label");
    for j in 1..=embedded.dim {
        let _ = write!(text, ",z{j}");
    }
    text.push_str(",p1,p2\n");
    for (i, sample) in dataset.samples.iter().enumerate() {
        let _ = write!(text, "{},{}", sample.id, sample.label);
        for value in &embedded.embeddings[i * embedded.dim..(i + 1) * embedded.dim] {
            let _ = write!(text, ",{value:.16e}");
        }
        let _ = writeln!(
            text,
            ",{:.16e},{:.16e}",
            embedded.projections[i * 2],
            embedded.projections[i * 2 + 1]
        );
    }
    write_file(&args.out, &text)?;

    #[derive(serde::Serialize)]
    struct ConfigSnapshot {
        embed_dim: usize,
    }
    let mut manifest = RunManifest::new("export", checkpoint.seed, &ConfigSnapshot {
        embed_dim: embedded.dim,
    })?;
    manifest.record_input(&args.checkpoint);
    manifest.record_input(&args.data);
    manifest.record_output(&args.out);
    manifest.record_timing("embed", embed_seconds);
    manifest.record_timing("write", stopwatch.lap());
    manifest.save(&sibling_manifest_path(&args.out))?;

    println!(
        "export: {} rows, embed dim {} -> {}",
        dataset.len(),
        embedded.dim,
        args.out.display()
    );
    Ok(())
}
