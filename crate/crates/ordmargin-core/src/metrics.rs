//! Evaluation: accuracy, rank MAE, confusion counts, per-boundary error
//! rates, margin summaries, and embedding-space diagnostics (principal
//! components and a rank-ordering score along the leading component).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::margins::{MarginSet, OrdinalSchema};
use crate::model::Model;

/// How per-boundary adjacent-confusion counts are normalized into rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryNorm {
    /// Divide by the number of true samples in the two classes the boundary
    /// separates (the population that could cross it). The default.
    PairMass,
    /// Divide by the full evaluation-set size.
    Total,
    /// Average the two directional rates `conf[h][h+1] / n_h` and
    /// `conf[h+1][h] / n_{h+1}`; absent if either class is empty.
    PerClassMean,
}

/// Aggregate evaluation of predictions against 1-based true ranks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    /// Mean absolute rank error.
    pub mae: f64,
    /// `confusion[t][p]` counts samples of true rank `t+1` predicted `p+1`.
    pub confusion: Vec<Vec<u64>>,
    pub boundary_norm: BoundaryNorm,
    /// Adjacent-confusion rate per boundary (index 0 separates ranks 1 and
    /// 2); `None` where the chosen normalizer has no mass.
    pub boundary_errors: Vec<Option<f64>>,
}

/// Fraction of positions where the two rank sequences agree.
pub fn accuracy_of(truths: &[usize], predictions: &[usize]) -> f64 {
    if truths.is_empty() {
        return 0.0;
    }
    let hits = truths
        .iter()
        .zip(predictions)
        .filter(|(t, p)| t == p)
        .count();
    hits as f64 / truths.len() as f64
}

/// Score a prediction sequence against true ranks.
pub fn report_from_predictions(
    truths: &[usize],
    predictions: &[usize],
    n_classes: usize,
    norm: BoundaryNorm,
) -> Result<EvalReport> {
    if truths.is_empty() {
        return Err(Error::InvalidSpec {
            detail: String::from("cannot evaluate an empty prediction set"),
        });
    }
    if truths.len() != predictions.len() {
        return Err(Error::InvalidSpec {
            detail: format!(
                "{} truths vs {} predictions",
                truths.len(),
                predictions.len()
            ),
        });
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let mut abs_sum = 0.0;
    for (&t, &p) in truths.iter().zip(predictions) {
        for (what, rank) in [("true rank", t), ("predicted rank", p)] {
            if rank < 1 || rank > n_classes {
                return Err(Error::InvalidRank {
                    detail: format!("{what} {rank} outside 1..={n_classes}"),
                });
            }
        }
        confusion[t - 1][p - 1] += 1;
        abs_sum += (t as f64 - p as f64).abs();
    }
    let n = truths.len();
    let class_mass: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();

    let boundary_errors = (0..n_classes - 1)
        .map(|h0| {
            let up = confusion[h0][h0 + 1] as f64;
            let down = confusion[h0 + 1][h0] as f64;
            let lower_mass = class_mass[h0] as f64;
            let upper_mass = class_mass[h0 + 1] as f64;
            match norm {
                BoundaryNorm::PairMass => {
                    let mass = lower_mass + upper_mass;
                    (mass > 0.0).then(|| (up + down) / mass)
                }
                BoundaryNorm::Total => Some((up + down) / n as f64),
                BoundaryNorm::PerClassMean => (lower_mass > 0.0 && upper_mass > 0.0)
                    .then(|| 0.5 * (up / lower_mass + down / upper_mass)),
            }
        })
        .collect();

    Ok(EvalReport {
        n,
        accuracy: accuracy_of(truths, predictions),
        mae: abs_sum / n as f64,
        confusion,
        boundary_norm: norm,
        boundary_errors,
    })
}

/// Predicted 1-based ranks for the whole dataset, in sample order.
pub fn predictions(model: &Model, dataset: &Dataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(dataset.len());
    for chunk in (0..dataset.len()).collect::<Vec<_>>().chunks(256) {
        let features = dataset.features_of(chunk);
        out.extend(model.predict(&features, chunk.len())?);
    }
    Ok(out)
}

/// Evaluate a model on a dataset. `against_clean` scores against the shadow
/// (pre-corruption) labels where present instead of the training labels.
pub fn evaluate(
    model: &Model,
    dataset: &Dataset,
    norm: BoundaryNorm,
    against_clean: bool,
) -> Result<EvalReport> {
    dataset.validate()?;
    let preds = predictions(model, dataset)?;
    report_from_predictions(&dataset.labels(against_clean), &preds, dataset.n_classes, norm)
}

/// One boundary's margin in a [`MarginReport`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarginReportEntry {
    /// 1-based boundary index.
    pub boundary: usize,
    /// Human-readable boundary name, e.g. `"2-3"`.
    pub name: String,
    /// `"learned"`, `"learned_shared"`, or `"fixed"`.
    pub kind: String,
    pub value: f64,
}

/// Snapshot of the per-boundary margins with the argmax called out.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarginReport {
    pub entries: Vec<MarginReportEntry>,
    pub mean: f64,
    pub largest_value: f64,
    /// All 1-based boundaries attaining the largest value.
    pub largest_boundaries: Vec<usize>,
    pub tie: bool,
}

/// Summarize activated margins against their schema.
pub fn margin_report(margins: &MarginSet, schema: &OrdinalSchema) -> Result<MarginReport> {
    if margins.n_boundaries() != schema.n_boundaries() {
        return Err(Error::InvalidSpec {
            detail: format!(
                "{} margins for a schema with {} boundaries",
                margins.n_boundaries(),
                schema.n_boundaries()
            ),
        });
    }
    let values = margins.activated();
    let mut entries = Vec::with_capacity(values.len());
    for (h0, &value) in values.iter().enumerate() {
        entries.push(MarginReportEntry {
            boundary: h0 + 1,
            name: schema.boundary_name(h0 + 1)?,
            kind: String::from(margins.boundary_kind(h0 + 1)),
            value,
        });
    }
    let largest_value = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let largest_boundaries: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == largest_value)
        .map(|(h0, _)| h0 + 1)
        .collect();
    Ok(MarginReport {
        mean: margins.mean_activated(),
        tie: largest_boundaries.len() > 1,
        entries,
        largest_value,
        largest_boundaries,
    })
}

/// Embeddings of a dataset plus their projections onto the top two principal
/// components (the second is zero when the embedding is one-dimensional).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDataset {
    pub dim: usize,
    /// Row-major `[n, dim]`.
    pub embeddings: Vec<f64>,
    /// Row-major `[n, 2]`.
    pub projections: Vec<f64>,
}

/// Encode the whole dataset and project it for plotting/inspection.
pub fn embed_dataset(model: &Model, dataset: &Dataset) -> Result<EmbeddedDataset> {
    dataset.validate()?;
    let dim = model.config().embed_dim;
    let mut embeddings = Vec::with_capacity(dataset.len() * dim);
    for chunk in (0..dataset.len()).collect::<Vec<_>>().chunks(256) {
        let features = dataset.features_of(chunk);
        embeddings.extend(model.encode(&features, chunk.len())?);
    }
    let k = 2.min(dim);
    let components = principal_components(&embeddings, dataset.len(), dim, k)?;
    let centered = center_columns(&embeddings, dataset.len(), dim);
    let mut projections = vec![0.0; dataset.len() * 2];
    for i in 0..dataset.len() {
        for (j, component) in components.iter().enumerate() {
            projections[i * 2 + j] = dot(&centered[i * dim..(i + 1) * dim], component);
        }
    }
    Ok(EmbeddedDataset {
        dim,
        embeddings,
        projections,
    })
}

/// How monotonically class centroids line up in embedding space: the absolute
/// Spearman correlation between rank and centroid position along the top
/// principal component of the centroids. `None` when undefined (a class has
/// no samples, or the centroids collapse to indistinguishable positions).
pub fn ordering_score(model: &Model, dataset: &Dataset) -> Result<Option<f64>> {
    dataset.validate()?;
    let dim = model.config().embed_dim;
    let mut embeddings = Vec::with_capacity(dataset.len() * dim);
    for chunk in (0..dataset.len()).collect::<Vec<_>>().chunks(256) {
        let features = dataset.features_of(chunk);
        embeddings.extend(model.encode(&features, chunk.len())?);
    }
    ordering_score_from_embeddings(&embeddings, dataset.len(), dim, &dataset.labels(false), dataset.n_classes)
}

/// [`ordering_score`] on precomputed embeddings.
pub fn ordering_score_from_embeddings(
    embeddings: &[f64],
    rows: usize,
    dim: usize,
    labels: &[usize],
    n_classes: usize,
) -> Result<Option<f64>> {
    if embeddings.len() != rows * dim || labels.len() != rows {
        return Err(Error::ShapeMismatch {
            op: "ordering_score",
            detail: format!(
                "{} embedding values, {} labels for {rows} rows of width {dim}",
                embeddings.len(),
                labels.len()
            ),
        });
    }
    let mut centroids = vec![0.0; n_classes * dim];
    let mut counts = vec![0usize; n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label < 1 || label > n_classes {
            return Err(Error::InvalidRank {
                detail: format!("label {label} outside 1..={n_classes}"),
            });
        }
        counts[label - 1] += 1;
        for j in 0..dim {
            centroids[(label - 1) * dim + j] += embeddings[i * dim + j];
        }
    }
    if counts.iter().any(|&c| c == 0) {
        return Ok(None);
    }
    for (c, &count) in counts.iter().enumerate() {
        for j in 0..dim {
            centroids[c * dim + j] /= count as f64;
        }
    }
    let component = match principal_components(&centroids, n_classes, dim, 1) {
        Ok(mut comps) => comps.remove(0),
        Err(_) => return Ok(None),
    };
    let centered = center_columns(&centroids, n_classes, dim);
    let along: Vec<f64> = (0..n_classes)
        .map(|c| dot(&centered[c * dim..(c + 1) * dim], &component))
        .collect();
    let ranks: Vec<f64> = (1..=n_classes).map(|r| r as f64).collect();
    Ok(spearman(&along, &ranks).map(f64::abs))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn center_columns(data: &[f64], rows: usize, dim: usize) -> Vec<f64> {
    let mut means = vec![0.0; dim];
    for i in 0..rows {
        for j in 0..dim {
            means[j] += data[i * dim + j];
        }
    }
    for m in &mut means {
        *m /= rows as f64;
    }
    let mut centered = data.to_vec();
    for i in 0..rows {
        for j in 0..dim {
            centered[i * dim + j] -= means[j];
        }
    }
    centered
}

/// Top-`k` principal components of row-major `[rows, dim]` data, each a unit
/// vector of length `dim`, ordered by decreasing variance. Signs follow a
/// fixed convention: the largest-magnitude coordinate is nonnegative.
pub fn principal_components(
    data: &[f64],
    rows: usize,
    dim: usize,
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    if rows == 0 || dim == 0 || data.len() != rows * dim {
        return Err(Error::ShapeMismatch {
            op: "principal_components",
            detail: format!("{} values for [{rows}, {dim}]", data.len()),
        });
    }
    if k > dim {
        return Err(Error::InvalidSpec {
            detail: format!("asked for {k} components of {dim}-dimensional data"),
        });
    }
    let centered = center_columns(data, rows, dim);
    let mut cov = vec![0.0; dim * dim];
    for i in 0..rows {
        let row = &centered[i * dim..(i + 1) * dim];
        for a in 0..dim {
            for b in a..dim {
                cov[a * dim + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            cov[a * dim + b] /= rows as f64;
            cov[b * dim + a] = cov[a * dim + b];
        }
    }

    let (eigenvalues, vectors) = jacobi_symmetric(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).expect("finite eigenvalues"));

    Ok(order[..k]
        .iter()
        .map(|&col| {
            let mut component: Vec<f64> = (0..dim).map(|row| vectors[row * dim + col]).collect();
            let lead = component
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite component"))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if component[lead] < 0.0 {
                component.iter_mut().for_each(|v| *v = -*v);
            }
            component
        })
        .collect())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major
/// `[dim, dim]`). Returns eigenvalues and a matrix whose columns are the
/// corresponding eigenvectors.
fn jacobi_symmetric(mut a: Vec<f64>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    let tol = 1e-24 * total.max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let off: f64 = (0..dim)
            .flat_map(|p| (0..dim).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * dim + q] * a[p * dim + q])
            .sum();
        if off <= tol {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * dim + q] - a[p * dim + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;

                let app = a[p * dim + p];
                let aqq = a[q * dim + q];
                a[p * dim + p] = app - t * apq;
                a[q * dim + q] = aqq + t * apq;
                a[p * dim + q] = 0.0;
                a[q * dim + p] = 0.0;
                for k in 0..dim {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * dim + p];
                    let akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[p * dim + k] = a[k * dim + p];
                    a[k * dim + q] = s * akp + c * akq;
                    a[q * dim + k] = a[k * dim + q];
                }
                for k in 0..dim {
                    let vkp = v[k * dim + p];
                    let vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues = (0..dim).map(|i| a[i * dim + i]).collect();
    (eigenvalues, v)
}

/// Average ranks (1-based, ties averaged) of the values.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side has no rank variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - mean_a) * (y - mean_b);
        var_a += (x - mean_a) * (x - mean_a);
        var_b += (y - mean_b) * (y - mean_b);
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some(cov / libm::sqrt(var_a * var_b))
}
