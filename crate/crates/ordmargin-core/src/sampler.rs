//! Stratified batch construction.
//!
//! Each batch draws a fixed number of samples from each of several ranks, so
//! every anchor is guaranteed same-rank positives and other-rank negatives.
//! An epoch plan covers every sample at least once: per-rank queues are
//! shuffled, then batches repeatedly take the ranks with the most remaining
//! samples and pop from their queues, padding exhausted or undersized ranks
//! by sampling with replacement (recorded as a note).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::Dataset;
use crate::error::{Error, Result};

/// Batch geometry and the seed of the epoch shuffles.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BatchSpec {
    /// Distinct ranks per batch; clamped to the ranks actually present.
    pub ranks_per_batch: usize,
    /// Samples drawn from each selected rank.
    pub samples_per_rank: usize,
    pub seed: u64,
}

impl BatchSpec {
    /// Default geometry: all classes per batch, four samples each.
    pub fn for_classes(n_classes: usize, seed: u64) -> Self {
        BatchSpec {
            ranks_per_batch: n_classes,
            samples_per_rank: 4,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ranks_per_batch < 2 {
            return Err(Error::InvalidSpec {
                detail: format!(
                    "batches need at least 2 ranks, spec asks for {}",
                    self.ranks_per_batch
                ),
            });
        }
        if self.samples_per_rank < 2 {
            return Err(Error::InvalidSpec {
                detail: format!(
                    "batches need at least 2 samples per rank, spec asks for {}",
                    self.samples_per_rank
                ),
            });
        }
        Ok(())
    }
}

/// One drawn sample: its dataset index and label at draw time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchItem {
    pub index: usize,
    pub rank: usize,
}

/// One batch of stratified draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

impl Batch {
    pub fn indices(&self) -> Vec<usize> {
        self.items.iter().map(|it| it.index).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.items.iter().map(|it| it.rank).collect()
    }
}

/// All batches of one epoch plus notes about padding events.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub batches: Vec<Batch>,
    pub notes: Vec<String>,
}

/// Check the structural guarantees every training batch must satisfy: at
/// least two distinct ranks, and every anchor has at least one same-rank
/// other sample and at least two other-rank samples.
pub fn validate_batch(batch: &Batch) -> Result<()> {
    let n = batch.items.len();
    let mut ranks: Vec<usize> = batch.items.iter().map(|it| it.rank).collect();
    ranks.sort_unstable();
    ranks.dedup();
    if ranks.len() < 2 {
        return Err(Error::InvalidBatch {
            detail: format!("batch holds {} distinct ranks, need at least 2", ranks.len()),
        });
    }
    for &rank in &ranks {
        let same = batch.items.iter().filter(|it| it.rank == rank).count();
        if same < 2 {
            return Err(Error::InvalidBatch {
                detail: format!("rank {rank} appears {same} times; anchors there have no positive"),
            });
        }
        if n - same < 2 {
            return Err(Error::InvalidBatch {
                detail: format!(
                    "rank {rank} leaves only {} negatives, need at least 2",
                    n - same
                ),
            });
        }
    }
    Ok(())
}

/// Build the batches of one epoch. The permutation is a pure function of
/// `(spec.seed, epoch)`, so re-running an epoch reproduces its batches.
pub fn build_epoch_batches(dataset: &Dataset, spec: &BatchSpec, epoch: u64) -> Result<EpochPlan> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(epoch);

    // Queues of shuffled indices per present rank.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes];
    for (i, sample) in dataset.samples.iter().enumerate() {
        members[sample.label - 1].push(i);
    }
    let present: Vec<usize> = (0..dataset.n_classes).filter(|&c| !members[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::InvalidSpec {
            detail: format!(
                "stratified batches need samples from at least 2 ranks, found {}",
                present.len()
            ),
        });
    }

    let ranks_per_batch = spec.ranks_per_batch.min(present.len());
    let mut notes = Vec::new();
    if ranks_per_batch < spec.ranks_per_batch {
        notes.push(format!(
            "epoch {epoch}: only {} ranks present, batches hold {} instead of {}",
            present.len(),
            ranks_per_batch,
            spec.ranks_per_batch
        ));
    }

    let mut queues: Vec<Vec<usize>> = Vec::new();
    for &class0 in &present {
        let mut queue = members[class0].clone();
        queue.shuffle(&mut rng);
        if queue.len() < spec.samples_per_rank {
            notes.push(format!(
                "epoch {epoch}: rank {} holds {} samples, topped up to {} with replacement",
                class0 + 1,
                queue.len(),
                spec.samples_per_rank
            ));
        }
        queues.push(queue);
    }
    let mut remaining: Vec<usize> = queues.iter().map(Vec::len).collect();
    let mut padded: Vec<bool> = vec![false; present.len()];

    let mut batches = Vec::new();
    while remaining.iter().any(|&r| r > 0) {
        // Ranks with the most unserved samples first; rank order breaks ties.
        let mut order: Vec<usize> = (0..present.len()).collect();
        order.sort_by_key(|&q| (usize::MAX - remaining[q], present[q]));
        order.truncate(ranks_per_batch);

        let mut items = Vec::with_capacity(ranks_per_batch * spec.samples_per_rank);
        for &q in &order {
            let rank = present[q] + 1;
            for _ in 0..spec.samples_per_rank {
                let index = if remaining[q] > 0 {
                    remaining[q] -= 1;
                    queues[q][remaining[q]]
                } else {
                    padded[q] = true;
                    members[present[q]][rng.gen_range(0..members[present[q]].len())]
                };
                items.push(BatchItem { index, rank });
            }
        }
        let batch = Batch { items };
        validate_batch(&batch)?;
        batches.push(batch);
    }

    for (q, was_padded) in padded.iter().enumerate() {
        if *was_padded && members[present[q]].len() >= spec.samples_per_rank {
            notes.push(format!(
                "epoch {epoch}: rank {} exhausted mid-epoch, padded with replacement",
                present[q] + 1
            ));
        }
    }

    Ok(EpochPlan { batches, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, SyntheticSpec};

    fn dataset(per_class: &[usize]) -> Dataset {
        use crate::datagen::Sample;
        let mut samples = Vec::new();
        let mut id = 0;
        for (class0, &count) in per_class.iter().enumerate() {
            for _ in 0..count {
                samples.push(Sample {
                    id,
                    features: vec![id as f64, class0 as f64],
                    label: class0 + 1,
                    clean_label: None,
                });
                id += 1;
            }
        }
        Dataset::new(2, per_class.len(), samples).unwrap()
    }

    #[test]
    fn balanced_data_yields_exact_full_coverage() {
        let data = dataset(&[8, 8, 8]);
        let spec = BatchSpec {
            ranks_per_batch: 3,
            samples_per_rank: 4,
            seed: 5,
        };
        let plan = build_epoch_batches(&data, &spec, 0).unwrap();
        assert_eq!(plan.batches.len(), 2);
        assert!(plan.notes.is_empty());

        let mut seen = vec![0usize; data.len()];
        for batch in &plan.batches {
            assert_eq!(batch.items.len(), 12);
            for item in &batch.items {
                assert_eq!(data.samples[item.index].label, item.rank);
                seen[item.index] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "each sample exactly once");
    }

    #[test]
    fn plans_are_deterministic_per_epoch_and_differ_across_epochs() {
        let data = generate(&SyntheticSpec {
            n_classes: 4,
            dim: 3,
            per_class: 10,
            gaps: vec![1.0; 3],
            noise: 0.1,
            seed: 0,
        })
        .unwrap();
        let spec = BatchSpec {
            ranks_per_batch: 4,
            samples_per_rank: 2,
            seed: 42,
        };
        let a = build_epoch_batches(&data, &spec, 3).unwrap();
        let b = build_epoch_batches(&data, &spec, 3).unwrap();
        assert_eq!(a, b);
        let c = build_epoch_batches(&data, &spec, 4).unwrap();
        assert_ne!(a.batches, c.batches);
    }

    #[test]
    fn uneven_classes_recycle_with_a_note() {
        let data = dataset(&[9, 3]);
        let spec = BatchSpec {
            ranks_per_batch: 2,
            samples_per_rank: 3,
            seed: 1,
        };
        let plan = build_epoch_batches(&data, &spec, 0).unwrap();
        assert_eq!(plan.batches.len(), 3);
        assert!(plan
            .notes
            .iter()
            .any(|n| n.contains("rank 2") && n.contains("padded with replacement")));

        let mut seen = vec![false; data.len()];
        for batch in &plan.batches {
            for item in &batch.items {
                seen[item.index] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "every sample appears at least once");
    }

    #[test]
    fn tiny_class_is_topped_up_with_replacement() {
        let data = dataset(&[6, 1]);
        let spec = BatchSpec {
            ranks_per_batch: 2,
            samples_per_rank: 2,
            seed: 9,
        };
        let plan = build_epoch_batches(&data, &spec, 0).unwrap();
        assert!(plan
            .notes
            .iter()
            .any(|n| n.contains("rank 2 holds 1 samples")));
        let lone = data.len() - 1;
        for batch in &plan.batches {
            validate_batch(batch).unwrap();
            let dupes = batch.items.iter().filter(|it| it.index == lone).count();
            assert!(dupes == 0 || dupes >= 2, "padding must keep positives available");
        }
    }

    #[test]
    fn subset_batches_hold_exactly_the_requested_ranks() {
        let data = dataset(&[10, 10, 10, 10, 10]);
        let spec = BatchSpec {
            ranks_per_batch: 3,
            samples_per_rank: 2,
            seed: 2,
        };
        let plan = build_epoch_batches(&data, &spec, 1).unwrap();
        let mut seen = vec![false; data.len()];
        for batch in &plan.batches {
            let mut ranks = batch.ranks();
            ranks.sort_unstable();
            ranks.dedup();
            assert_eq!(ranks.len(), 3);
            assert_eq!(batch.items.len(), 6);
            for item in &batch.items {
                seen[item.index] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn oversized_rank_request_clamps_with_a_note() {
        let data = dataset(&[4, 4]);
        let spec = BatchSpec {
            ranks_per_batch: 5,
            samples_per_rank: 2,
            seed: 0,
        };
        let plan = build_epoch_batches(&data, &spec, 0).unwrap();
        assert!(plan.notes.iter().any(|n| n.contains("only 2 ranks present")));
        assert!(plan.batches.iter().all(|b| b.items.len() == 4));
    }

    #[test]
    fn data_with_one_populated_rank_is_rejected() {
        // Two classes in the schema, but every sample sits in rank 1.
        let data = dataset(&[10, 0]);
        let spec = BatchSpec {
            ranks_per_batch: 2,
            samples_per_rank: 2,
            seed: 0,
        };
        assert!(matches!(
            build_epoch_batches(&data, &spec, 0),
            Err(Error::InvalidSpec { .. })
        ));
    }

    #[test]
    fn validator_names_each_violated_guarantee() {
        // Rank 3 appears once, so its anchor has no same-rank positive
        // (ranks 1 and 2 satisfy every guarantee and pass first).
        let lonely = Batch {
            items: vec![
                BatchItem { index: 0, rank: 1 },
                BatchItem { index: 1, rank: 1 },
                BatchItem { index: 2, rank: 2 },
                BatchItem { index: 3, rank: 2 },
                BatchItem { index: 4, rank: 3 },
            ],
        };
        let err = validate_batch(&lonely).unwrap_err();
        assert!(format!("{err}").contains("no positive"), "{err}");

        // Rank 1 dominates the batch and leaves a single negative.
        let starved = Batch {
            items: vec![
                BatchItem { index: 0, rank: 1 },
                BatchItem { index: 1, rank: 1 },
                BatchItem { index: 2, rank: 1 },
                BatchItem { index: 3, rank: 2 },
            ],
        };
        let err = validate_batch(&starved).unwrap_err();
        assert!(format!("{err}").contains("negatives"), "{err}");

        let narrow = Batch {
            items: vec![
                BatchItem { index: 0, rank: 1 },
                BatchItem { index: 1, rank: 1 },
                BatchItem { index: 2, rank: 2 },
                BatchItem { index: 3, rank: 2 },
            ],
        };
        // Two ranks, two samples each: every anchor keeps 2 negatives.
        validate_batch(&narrow).unwrap();

        let flat = Batch {
            items: vec![
                BatchItem { index: 0, rank: 2 },
                BatchItem { index: 1, rank: 2 },
            ],
        };
        assert!(validate_batch(&flat).is_err());
    }
}
