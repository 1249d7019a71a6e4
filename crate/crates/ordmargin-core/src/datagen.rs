//! Datasets and synthetic data generation.
//!
//! The synthetic generator places class centers along one random unit
//! direction in feature space, spaced by configurable per-boundary gaps, and
//! adds isotropic Gaussian noise. Off-axis coordinates therefore carry no
//! class signal; the axis spacing alone controls boundary difficulty, so the
//! optimal achievable accuracy has a closed form.
//!
//! [`inject_bias`] simulates a noisy labeling process at one chosen boundary
//! by flipping a deterministic fraction of labels across it, keeping the
//! original label in a shadow field so evaluations can score against either.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::margins::OrdinalSchema;

/// One labeled feature vector. `label` is a 1-based rank; `clean_label`
/// preserves the pre-corruption rank when label noise was injected.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: usize,
    pub clean_label: Option<usize>,
}

/// A feature matrix with 1-based ordinal labels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub n_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, n_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        let dataset = Dataset {
            dim,
            n_classes,
            samples,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec {
                detail: String::from("dataset feature dimension must be positive"),
            });
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidSpec {
                detail: format!("dataset needs at least 2 classes, got {}", self.n_classes),
            });
        }
        for (i, sample) in self.samples.iter().enumerate() {
            if sample.features.len() != self.dim {
                return Err(Error::InvalidSpec {
                    detail: format!(
                        "sample {} (id {}) has {} features, dataset dim is {}",
                        i,
                        sample.id,
                        sample.features.len(),
                        self.dim
                    ),
                });
            }
            if sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("features of sample {} (id {})", i, sample.id),
                });
            }
            for (what, label) in [("label", Some(sample.label)), ("clean label", sample.clean_label)]
            {
                if let Some(label) = label {
                    if label < 1 || label > self.n_classes {
                        return Err(Error::InvalidRank {
                            detail: format!(
                                "{what} {label} of sample {} (id {}) outside 1..={}",
                                i, sample.id, self.n_classes
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-rank sample counts; index 0 holds rank 1.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for sample in &self.samples {
            counts[sample.label - 1] += 1;
        }
        counts
    }

    /// Row-major feature matrix of the selected samples.
    pub fn features_of(&self, indices: &[usize]) -> Vec<f64> {
        let mut flat = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            flat.extend_from_slice(&self.samples[i].features);
        }
        flat
    }

    /// Labels of the selected samples.
    pub fn ranks_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.samples[i].label).collect()
    }

    /// All labels in sample order; `clean` prefers the shadow label where set.
    pub fn labels(&self, clean: bool) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| {
                if clean {
                    s.clean_label.unwrap_or(s.label)
                } else {
                    s.label
                }
            })
            .collect()
    }

    /// Whether any sample carries a shadow (pre-corruption) label.
    pub fn has_clean_labels(&self) -> bool {
        self.samples.iter().any(|s| s.clean_label.is_some())
    }

    pub fn schema(&self) -> Result<OrdinalSchema> {
        OrdinalSchema::from_class_count(self.n_classes)
    }
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub dim: usize,
    /// Samples generated per class.
    pub per_class: usize,
    /// Center-to-center distance per adjacent pair, length `n_classes - 1`.
    pub gaps: Vec<f64>,
    /// Isotropic Gaussian noise standard deviation.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidSpec {
                detail: format!("need at least 2 classes, got {}", self.n_classes),
            });
        }
        if self.dim == 0 || self.per_class == 0 {
            return Err(Error::InvalidSpec {
                detail: format!(
                    "dim and per_class must be positive, got dim {} per_class {}",
                    self.dim, self.per_class
                ),
            });
        }
        if self.gaps.len() != self.n_classes - 1 {
            return Err(Error::InvalidSpec {
                detail: format!(
                    "{} classes need {} gaps, got {}",
                    self.n_classes,
                    self.n_classes - 1,
                    self.gaps.len()
                ),
            });
        }
        if self.gaps.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return Err(Error::InvalidSpec {
                detail: format!("gaps must be finite and positive, got {:?}", self.gaps),
            });
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidSpec {
                detail: format!("noise must be finite and nonnegative, got {}", self.noise),
            });
        }
        Ok(())
    }
}

/// Geometry underlying a generated dataset: the unit direction the centers
/// sit on, and each class's scalar position along it (rank 1 first).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticLayout {
    pub direction: Vec<f64>,
    pub positions: Vec<f64>,
}

/// Generate a dataset and the geometry it was drawn from.
pub fn generate_with_layout(spec: &SyntheticSpec) -> Result<(Dataset, SyntheticLayout)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let standard = Normal::new(0.0, 1.0).expect("unit normal is well-formed");
    let direction = loop {
        let raw: Vec<f64> = (0..spec.dim).map(|_| standard.sample(&mut rng)).collect();
        let norm = libm::sqrt(raw.iter().map(|v| v * v).sum());
        if norm > 1e-12 {
            break raw.iter().map(|v| v / norm).collect::<Vec<f64>>();
        }
    };

    let mut positions = Vec::with_capacity(spec.n_classes);
    let mut at = 0.0;
    positions.push(at);
    for &gap in &spec.gaps {
        at += gap;
        positions.push(at);
    }

    let mut samples = Vec::with_capacity(spec.n_classes * spec.per_class);
    let mut next_id = 0u64;
    for (class0, &position) in positions.iter().enumerate() {
        let center: Vec<f64> = direction.iter().map(|d| d * position).collect();
        for _ in 0..spec.per_class {
            let features = if spec.noise == 0.0 {
                center.clone()
            } else {
                center
                    .iter()
                    .map(|&c| c + spec.noise * standard.sample(&mut rng))
                    .collect()
            };
            samples.push(Sample {
                id: next_id,
                features,
                label: class0 + 1,
                clean_label: None,
            });
            next_id += 1;
        }
    }

    let dataset = Dataset::new(spec.dim, spec.n_classes, samples)?;
    Ok((dataset, SyntheticLayout { direction, positions }))
}

/// Generate a dataset, discarding the geometry.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    Ok(generate_with_layout(spec)?.0)
}

/// Label-noise injection at a single boundary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BiasSpec {
    /// 1-based boundary index: boundary `h` sits between ranks `h` and `h+1`.
    pub boundary: usize,
    /// Fraction of rank-`h` samples relabeled upward to `h+1`.
    pub p_up: f64,
    /// Fraction of rank-`h+1` samples relabeled downward to `h`.
    pub p_down: f64,
    pub seed: u64,
}

impl BiasSpec {
    fn validate(&self, n_classes: usize) -> Result<()> {
        if self.boundary < 1 || self.boundary >= n_classes {
            return Err(Error::InvalidSpec {
                detail: format!(
                    "boundary {} outside 1..={} for {} classes",
                    self.boundary,
                    n_classes - 1,
                    n_classes
                ),
            });
        }
        for (name, p) in [("p_up", self.p_up), ("p_down", self.p_down)] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec {
                    detail: format!("{name} must lie in [0, 1], got {p}"),
                });
            }
        }
        Ok(())
    }
}

/// Flip labels across one boundary: `round(p_up * n_h)` rank-`h` samples
/// become `h+1` and `round(p_down * n_{h+1})` rank-`h+1` samples become `h`,
/// both counted and chosen (without replacement) on the original labels.
/// Every sample in the result carries its pre-existing label in
/// `clean_label`; labels already shadowed keep their original shadow.
pub fn inject_bias(dataset: &Dataset, spec: &BiasSpec) -> Result<Dataset> {
    dataset.validate()?;
    spec.validate(dataset.n_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut samples: Vec<Sample> = dataset
        .samples
        .iter()
        .map(|s| Sample {
            clean_label: Some(s.clean_label.unwrap_or(s.label)),
            ..s.clone()
        })
        .collect();

    let lower = spec.boundary;
    let upper = spec.boundary + 1;
    for (from, to, p) in [(lower, upper, spec.p_up), (upper, lower, spec.p_down)] {
        let members: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == from)
            .map(|(i, _)| i)
            .collect();
        let count = libm::round(p * members.len() as f64) as usize;
        for pick in rand::seq::index::sample(&mut rng, members.len(), count) {
            samples[members[pick]].label = to;
        }
    }

    Dataset::new(dataset.dim, dataset.n_classes, samples)
}
