//! CSV readers and writers for datasets and training traces.
//!
//! Dataset files carry a header `id,label,f1,...,fD` with an optional final
//! `clean_label` column holding pre-corruption labels. Reals are rendered
//! with 17 significant digits, which round-trips every finite `f64` exactly.
//!
//! Training traces are one row per epoch, `phase,epoch,objective,ce,mm,acc,
//! m_1,...,m_{C-1}`, preceded by `# note:` comment lines carrying the run's
//! free-form notes (phase transitions, sampler adjustments).

use std::fmt::Write as _;
use std::path::Path;

use ordmargin_core::datagen::{Dataset, Sample};
use ordmargin_core::train::{EpochRecord, TrainLog};

use crate::error::{read_file, write_file, CliError, Result};

/// Render a real with 17 significant digits (bit-exact on reparse).
fn format_real(value: f64) -> String {
    format!("{value:.16e}")
}

fn parse_error(path: &Path, line: usize, detail: impl std::fmt::Display) -> CliError {
    CliError::bad_input(format!("{}:{line}: {detail}", path.display()))
}

/// Write a dataset; the `clean_label` column appears only when some sample
/// carries a shadow label (samples without one repeat their own label).
pub fn save_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let with_clean = dataset.has_clean_labels();
    let mut text = String::from("id,label");
    for j in 1..=dataset.dim {
        let _ = write!(text, ",f{j}");
    }
    if with_clean {
        text.push_str(",clean_label");
    }
    text.push('\n');
    for sample in &dataset.samples {
        let _ = write!(text, "{},{}", sample.id, sample.label);
        for value in &sample.features {
            let _ = write!(text, ",{}", format_real(*value));
        }
        if with_clean {
            let _ = write!(text, ",{}", sample.clean_label.unwrap_or(sample.label));
        }
        text.push('\n');
    }
    write_file(path, &text)
}

/// Read a dataset written by [`save_dataset_csv`] (or by hand in the same
/// format). The class count is the largest label present; every malformed
/// line is reported with its 1-based line number.
pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file, expected a header row"))?;

    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "id" || columns[1] != "label" {
        return Err(parse_error(
            path,
            1,
            format!("header must start with `id,label,f1,...`, got `{header}`"),
        ));
    }
    let with_clean = *columns.last().expect("non-empty header") == "clean_label";
    let feature_columns = &columns[2..columns.len() - usize::from(with_clean)];
    for (j, name) in feature_columns.iter().enumerate() {
        let expected = format!("f{}", j + 1);
        if *name != expected {
            return Err(parse_error(
                path,
                1,
                format!("feature column {} must be named `{expected}`, got `{name}`", j + 3),
            ));
        }
    }
    let dim = feature_columns.len();
    if dim == 0 {
        return Err(parse_error(path, 1, "no feature columns"));
    }

    let expected_fields = 2 + dim + usize::from(with_clean);
    let mut samples = Vec::new();
    let mut max_label = 0usize;
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_fields {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {expected_fields} fields, got {}", fields.len()),
            ));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|err| parse_error(path, line_no, format!("id `{}`: {err}", fields[0])))?;
        let label = parse_label(path, line_no, "label", fields[1])?;
        let mut features = Vec::with_capacity(dim);
        for (j, field) in fields[2..2 + dim].iter().enumerate() {
            let value: f64 = field.parse().map_err(|err| {
                parse_error(path, line_no, format!("f{} `{field}`: {err}", j + 1))
            })?;
            if !value.is_finite() {
                return Err(parse_error(path, line_no, format!("f{} is not finite", j + 1)));
            }
            features.push(value);
        }
        let clean_label = if with_clean {
            let clean = parse_label(path, line_no, "clean_label", fields[expected_fields - 1])?;
            max_label = max_label.max(clean);
            Some(clean)
        } else {
            None
        };
        max_label = max_label.max(label);
        samples.push(Sample {
            id,
            features,
            label,
            clean_label,
        });
    }
    if samples.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    Dataset::new(dim, max_label, samples).map_err(CliError::from)
}

fn parse_label(path: &Path, line_no: usize, what: &str, field: &str) -> Result<usize> {
    let label: usize = field
        .parse()
        .map_err(|err| parse_error(path, line_no, format!("{what} `{field}`: {err}")))?;
    if label == 0 {
        return Err(parse_error(
            path,
            line_no,
            format!("{what} must be a 1-based rank, got 0"),
        ));
    }
    Ok(label)
}

/// Write a training trace: `# note:` lines, a header, then one row per epoch
/// with the activated margins in boundary order.
pub fn save_train_log_csv(log: &TrainLog, n_boundaries: usize, path: &Path) -> Result<()> {
    let mut text = String::new();
    for note in &log.notes {
        let _ = writeln!(text, "# note: {note}");
    }
    text.push_str("phase,epoch,objective,ce,mm,acc");
    for h in 1..=n_boundaries {
        let _ = write!(text, ",m_{h}");
    }
    text.push('\n');
    for record in &log.records {
        if record.margins.len() != n_boundaries {
            return Err(CliError::runtime(format!(
                "epoch record carries {} margins, schema has {} boundaries",
                record.margins.len(),
                n_boundaries
            )));
        }
        let _ = write!(
            text,
            "{},{},{},{},{},{}",
            record.phase,
            record.epoch,
            format_real(record.objective),
            format_real(record.ce),
            format_real(record.mm),
            format_real(record.train_accuracy),
        );
        for margin in &record.margins {
            let _ = write!(text, ",{}", format_real(*margin));
        }
        text.push('\n');
    }
    write_file(path, &text)
}

/// Read a training trace written by [`save_train_log_csv`].
pub fn load_train_log_csv(path: &Path) -> Result<TrainLog> {
    let text = read_file(path)?;
    let mut log = TrainLog::default();
    let mut n_boundaries = None;
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(note) = line.strip_prefix("# note: ") {
            log.notes.push(String::from(note));
            continue;
        }
        if line.starts_with("phase,") {
            let fields = line.split(',').count();
            if fields < 6 {
                return Err(parse_error(path, line_no, "header too short"));
            }
            n_boundaries = Some(fields - 6);
            continue;
        }
        let Some(n_boundaries) = n_boundaries else {
            return Err(parse_error(path, line_no, "data row before header"));
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 + n_boundaries {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {} fields, got {}", 6 + n_boundaries, fields.len()),
            ));
        }
        let real = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|err| parse_error(path, line_no, format!("column {}: {err}", i + 1)))
        };
        let record = EpochRecord {
            phase: fields[0]
                .parse()
                .map_err(|err| parse_error(path, line_no, format!("phase: {err}")))?,
            epoch: fields[1]
                .parse()
                .map_err(|err| parse_error(path, line_no, format!("epoch: {err}")))?,
            objective: real(2)?,
            ce: real(3)?,
            mm: real(4)?,
            train_accuracy: real(5)?,
            margins: (6..6 + n_boundaries).map(real).collect::<Result<_>>()?,
        };
        log.records.push(record);
    }
    if n_boundaries.is_none() {
        return Err(parse_error(path, 1, "no header row"));
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scratch(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("ordmargin-dataio-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn random_dataset(with_clean: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = (0..12)
            .map(|i| Sample {
                id: i,
                features: (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect(),
                label: rng.gen_range(1..=3),
                clean_label: with_clean.then(|| rng.gen_range(1..=3)),
            })
            .collect();
        Dataset::new(3, 3, samples).unwrap()
    }

    #[test]
    fn roundtrip_reproduces_every_value_bitwise() {
        let dataset = random_dataset(true);
        let path = scratch("roundtrip.csv");
        save_dataset_csv(&dataset, &path).unwrap();
        let loaded = load_dataset_csv(&path).unwrap();
        assert_eq!(loaded, dataset);
    }

    #[test]
    fn roundtrip_without_clean_labels_omits_the_column() {
        let dataset = random_dataset(false);
        let path = scratch("no-clean.csv");
        save_dataset_csv(&dataset, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,label,f1,f2,f3\n"));
        assert_eq!(load_dataset_csv(&path).unwrap(), dataset);
    }

    #[test]
    fn hand_written_file_parses_field_for_field() {
        let path = scratch("hand.csv");
        std::fs::write(
            &path,
            "id,label,f1,f2\n7,1,0.5,-1.25\n8,2,3.0,4.5\n9,2,1e-3,2.5e2\n",
        )
        .unwrap();
        let dataset = load_dataset_csv(&path).unwrap();
        assert_eq!(dataset.dim, 2);
        assert_eq!(dataset.n_classes, 2);
        assert_eq!(dataset.samples[0].id, 7);
        assert_eq!(dataset.samples[0].features, vec![0.5, -1.25]);
        assert_eq!(dataset.samples[2].features, vec![1e-3, 2.5e2]);
        assert_eq!(dataset.samples[2].label, 2);
        assert_eq!(dataset.samples[0].clean_label, None);
    }

    #[test]
    fn zero_label_is_rejected_with_its_line_number() {
        let path = scratch("zero-label.csv");
        std::fs::write(&path, "id,label,f1\n1,1,0.0\n2,0,1.0\n").unwrap();
        let err = load_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ragged_row_is_rejected_with_its_line_number() {
        let path = scratch("ragged.csv");
        std::fs::write(&path, "id,label,f1,f2\n1,1,0.0,1.0\n2,2,3.5\n").unwrap();
        let err = load_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
        assert!(err.to_string().contains("expected 4 fields"), "{err}");
    }

    #[test]
    fn misnamed_feature_column_is_rejected() {
        let path = scratch("badheader.csv");
        std::fs::write(&path, "id,label,x1\n1,1,0.0\n").unwrap();
        let err = load_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains("must be named `f1`"), "{err}");
    }

    #[test]
    fn train_log_roundtrip_preserves_notes_and_margins() {
        let log = TrainLog {
            notes: vec![String::from("phase 2: optimizer reset")],
            records: vec![
                EpochRecord {
                    phase: 1,
                    epoch: 1,
                    objective: 1.5,
                    ce: 1.0,
                    mm: 0.5,
                    train_accuracy: 0.625,
                    margins: vec![0.75, 0.5],
                },
                EpochRecord {
                    phase: 2,
                    epoch: 1,
                    objective: 0.25,
                    ce: 0.25,
                    mm: 0.0,
                    train_accuracy: 1.0,
                    margins: vec![0.75, 0.5],
                },
            ],
        };
        let path = scratch("log.csv");
        save_train_log_csv(&log, 2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# note: phase 2: optimizer reset"));
        assert!(text.contains("phase,epoch,objective,ce,mm,acc,m_1,m_2"));
        assert_eq!(load_train_log_csv(&path).unwrap(), log);
    }
}
