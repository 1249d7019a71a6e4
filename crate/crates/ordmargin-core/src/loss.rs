//! Contrastive and classification losses.
//!
//! The heart of the method is a multi-margin n-pair hinge: for an anchor
//! embedding `z` of rank `y`, positives `z_j` (same rank) and negatives `z_k`
//! (any other rank), with cosine similarity `psi`, the anchor's loss is
//!
//! ```text
//! sum over j, k of  max(0, m(y, y_k) + psi(z, z_k) - psi(z, z_j))
//! ```
//!
//! where `m(y, y_k)` is the cumulative margin between the two ranks. Each
//! anchor's hinge terms are summed, not averaged, over its pairs; the batch
//! objective is the mean over anchors of `CE + MM`, with an optional weight
//! on the MM term that defaults to `1.0` (the plain unweighted sum).
//!
//! [`mmnp_reference`] and [`ce_reference`] recompute the same quantities by
//! direct summation over plain slices, sharing none of the graph machinery;
//! they exist so the graph path can be cross-checked mechanically and are
//! also wired into the CLI's self-check command.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Graph, TensorId};
use crate::error::{Error, Result};
use crate::margins::{MarginNodes, MarginSet};

/// One anchor with its positive and negative embedding sets, all nodes in
/// the same graph. Ranks are 1-based.
#[derive(Debug, Clone)]
pub struct PairSets {
    pub anchor: TensorId,
    pub anchor_rank: usize,
    /// Embeddings sharing the anchor's rank (the anchor itself excluded).
    pub positives: Vec<TensorId>,
    /// Embeddings of every other rank, tagged with their rank.
    pub negatives: Vec<(TensorId, usize)>,
}

/// The three scalar nodes of one batch objective.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveParts {
    /// `ce + mm` (the value optimized).
    pub total: TensorId,
    /// Mean cross-entropy over anchors.
    pub ce: TensorId,
    /// Mean (weighted) multi-margin hinge over anchors.
    pub mm: TensorId,
}

/// Split the indices of a rank vector into positives and negatives of one
/// anchor: positions sharing the anchor's rank (anchor excluded) and
/// positions with any other rank. Exclusion is by position, so duplicated
/// feature vectors still count as distinct samples.
pub fn split_pair_indices(ranks: &[usize], anchor: usize) -> (Vec<usize>, Vec<usize>) {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (i, &rank) in ranks.iter().enumerate() {
        if i == anchor {
            continue;
        }
        if rank == ranks[anchor] {
            positives.push(i);
        } else {
            negatives.push(i);
        }
    }
    (positives, negatives)
}

/// Multi-margin n-pair hinge loss of a single anchor (a plain sum over its
/// positive/negative pairs).
pub fn mmnp_loss(
    graph: &mut Graph,
    pairs: &PairSets,
    margins: &MarginSet,
    nodes: &MarginNodes,
) -> Result<TensorId> {
    if pairs.positives.is_empty() {
        return Err(Error::InvalidBatch {
            detail: format!("anchor of rank {} has no positives", pairs.anchor_rank),
        });
    }
    if pairs.negatives.is_empty() {
        return Err(Error::InvalidBatch {
            detail: format!("anchor of rank {} has no negatives", pairs.anchor_rank),
        });
    }
    for &(_, rank) in &pairs.negatives {
        if rank == pairs.anchor_rank {
            return Err(Error::InvalidRank {
                detail: format!("negative with the anchor's rank {rank}"),
            });
        }
    }

    let positive_sims: Vec<TensorId> = pairs
        .positives
        .iter()
        .map(|&zj| graph.cosine(pairs.anchor, zj))
        .collect::<Result<_>>()?;
    let negative_sims: Vec<(TensorId, TensorId)> = pairs
        .negatives
        .iter()
        .map(|&(zk, yk)| {
            let sim = graph.cosine(pairs.anchor, zk)?;
            let cum = margins.cumulative_on(graph, nodes, pairs.anchor_rank, yk)?;
            Ok((sim, cum))
        })
        .collect::<Result<_>>()?;

    let mut terms = Vec::with_capacity(positive_sims.len() * negative_sims.len());
    for &sim_pos in &positive_sims {
        for &(sim_neg, cum) in &negative_sims {
            let gap = graph.sub(sim_neg, sim_pos)?;
            let violation = graph.add(cum, gap)?;
            terms.push(graph.relu(violation));
        }
    }
    graph.sum_list(&terms)
}

/// The combined batch objective from already-computed embeddings and logits:
/// mean over anchors of `CE_i + mm_weight * MM_i`, where every batch element
/// anchors exactly once against the rest of the batch.
///
/// `embeddings` is `[n, d]`, `logits` is `[n, C]`, and `ranks` holds the `n`
/// 1-based rank labels.
pub fn batch_objective(
    graph: &mut Graph,
    embeddings: TensorId,
    logits: TensorId,
    ranks: &[usize],
    margins: &MarginSet,
    nodes: &MarginNodes,
    mm_weight: f64,
) -> Result<ObjectiveParts> {
    let n = ranks.len();
    let zshape = graph.shape(embeddings).to_vec();
    let lshape = graph.shape(logits).to_vec();
    if zshape.len() != 2 || zshape[0] != n || lshape.len() != 2 || lshape[0] != n {
        return Err(Error::ShapeMismatch {
            op: "batch_objective",
            detail: format!(
                "embeddings {zshape:?} / logits {lshape:?} vs {n} ranks"
            ),
        });
    }
    let n_classes = margins.n_boundaries() + 1;
    if lshape[1] != n_classes {
        return Err(Error::ShapeMismatch {
            op: "batch_objective",
            detail: format!("logits have {} columns for {n_classes} ranks", lshape[1]),
        });
    }
    for &rank in ranks {
        if rank == 0 || rank > n_classes {
            return Err(Error::InvalidRank {
                detail: format!("rank {rank} out of range 1..={n_classes}"),
            });
        }
    }

    // Cross-entropy: fused row-wise op over 0-based class indices.
    let labels0: Vec<usize> = ranks.iter().map(|&r| r - 1).collect();
    let per_anchor_ce = graph.softmax_cross_entropy_rows(logits, &labels0)?;
    let ce_mean = graph.mean(per_anchor_ce);

    // Contrastive term: every element anchors once against the rest.
    let rows: Vec<TensorId> = (0..n)
        .map(|i| graph.row(embeddings, i))
        .collect::<Result<_>>()?;
    // Cosine similarity is symmetric; compute each unordered pair once.
    let mut sim_cache: Vec<Option<TensorId>> = vec![None; n * n];
    let mut sim = |graph: &mut Graph, i: usize, j: usize| -> Result<TensorId> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if let Some(id) = sim_cache[a * n + b] {
            return Ok(id);
        }
        let id = graph.cosine(rows[a], rows[b])?;
        sim_cache[a * n + b] = Some(id);
        Ok(id)
    };
    // Likewise each unordered rank pair's cumulative margin.
    let mut cum_cache: Vec<Option<TensorId>> = vec![None; n_classes * n_classes];
    let mut cum = |graph: &mut Graph, y: usize, yk: usize| -> Result<TensorId> {
        let (a, b) = if y < yk { (y, yk) } else { (yk, y) };
        let key = (a - 1) * n_classes + (b - 1);
        if let Some(id) = cum_cache[key] {
            return Ok(id);
        }
        let id = margins.cumulative_on(graph, nodes, y, yk)?;
        cum_cache[key] = Some(id);
        Ok(id)
    };

    let mut anchor_losses = Vec::with_capacity(n);
    for i in 0..n {
        let (positives, negatives) = split_pair_indices(ranks, i);
        if positives.is_empty() {
            return Err(Error::InvalidBatch {
                detail: format!("batch element {i} (rank {}) has no positives", ranks[i]),
            });
        }
        if negatives.is_empty() {
            return Err(Error::InvalidBatch {
                detail: format!("batch element {i} (rank {}) has no negatives", ranks[i]),
            });
        }
        let mut terms = Vec::with_capacity(positives.len() * negatives.len());
        for &j in &positives {
            let sim_pos = sim(graph, i, j)?;
            for &k in &negatives {
                let sim_neg = sim(graph, i, k)?;
                let cum_ik = cum(graph, ranks[i], ranks[k])?;
                let gap = graph.sub(sim_neg, sim_pos)?;
                let violation = graph.add(cum_ik, gap)?;
                terms.push(graph.relu(violation));
            }
        }
        anchor_losses.push(graph.sum_list(&terms)?);
    }
    let mm_sum = graph.sum_list(&anchor_losses)?;
    let mm_mean = graph.mul_scalar(mm_sum, 1.0 / n as f64);
    let mm = graph.mul_scalar(mm_mean, mm_weight);

    let total = graph.add(ce_mean, mm)?;
    Ok(ObjectiveParts {
        total,
        ce: ce_mean,
        mm,
    })
}

// ---- reference implementations (independent of the graph) -----------------

fn cosine_reference(a: &[f64], b: &[f64]) -> Result<f64> {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut asq, mut bsq) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        asq += x * x;
        bsq += y * y;
    }
    if asq == 0.0 || bsq == 0.0 {
        return Err(Error::ZeroNorm { op: "cosine_reference" });
    }
    Ok(dot / (libm::sqrt(asq) * libm::sqrt(bsq)))
}

/// Triple-loop reference for the multi-margin n-pair loss, computed directly
/// from slices and the activated margin vector. Used to cross-check
/// [`mmnp_loss`]; shares none of its code.
pub fn mmnp_reference(
    anchor: &[f64],
    anchor_rank: usize,
    positives: &[&[f64]],
    negatives: &[(&[f64], usize)],
    activated_margins: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for positive in positives {
        let sim_pos = cosine_reference(anchor, positive)?;
        for &(negative, neg_rank) in negatives {
            let sim_neg = cosine_reference(anchor, negative)?;
            let lo = anchor_rank.min(neg_rank) - 1;
            let hi = anchor_rank.max(neg_rank) - 1;
            let cum: f64 = activated_margins[lo..hi].iter().sum();
            let violation = cum + sim_neg - sim_pos;
            if violation > 0.0 {
                total += violation;
            }
        }
    }
    Ok(total)
}

/// Cross-entropy of a logit row against a 0-based label by direct summation:
/// `ln(sum_c e^{x_c}) - x_y`, no max-subtraction. A numerically naive
/// reference for moderate logits.
pub fn ce_reference(logits: &[f64], label: usize) -> f64 {
    let denom: f64 = logits.iter().map(|&x| libm::exp(x)).sum();
    libm::log(denom) - logits[label]
}
