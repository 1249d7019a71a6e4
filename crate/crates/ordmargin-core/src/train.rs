//! Two-phase training.
//!
//! Phase 1 jointly optimizes the model and learnable margins and stops early
//! once training accuracy reaches a target (margins shrink only while
//! constraints are violated, so prolonging phase 1 past a good fit only
//! erodes them). Phase 2 freezes the margins — structurally, by sharing the
//! set immutably — resets the optimizer state, and keeps refining the model
//! until training accuracy stops improving for a patience window.
//!
//! Every randomized choice (model init, margin init, per-epoch batch
//! shuffles) derives from the single config seed through disjoint stream
//! tags, so a run is a pure function of `(dataset, config)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Graph;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::loss::batch_objective;
use crate::margins::{MarginActivation, MarginMode, MarginSet, OrdinalSchema};
use crate::metrics::{accuracy_of, predictions};
use crate::model::{Model, ModelConfig};
use crate::sampler::{build_epoch_batches, validate_batch, Batch, BatchSpec};

/// Epoch-shuffle stream tag for phase-1 epoch `e` is `PHASE1_STREAM_BASE + e`
/// (0-based). Public so auditors can replay any epoch's batch plan with
/// [`build_epoch_batches`] and the run's [`TrainConfig`].
pub const PHASE1_STREAM_BASE: u64 = 0;
/// Epoch-shuffle stream tag for phase-2 epoch `e` is `PHASE2_STREAM_BASE + e`.
pub const PHASE2_STREAM_BASE: u64 = 1 << 32;
/// Model and margin initialization use streams beyond both epoch windows so
/// no consumer shares a stream.
const MODEL_INIT_STREAM: u64 = 1 << 33;
const MARGIN_INIT_STREAM: u64 = (1 << 33) + 1;
const HOLDOUT_SPLIT_STREAM: u64 = (1 << 33) + 2;

/// Margin structure selection in a training config.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginModeConfig {
    /// One learnable margin per adjacent rank pair.
    PerPair,
    /// A single learnable margin shared by all boundaries.
    Single,
    /// Every margin fixed to one constant; nothing margin-side is learned.
    AllFixed { value: f64 },
}

/// Pin one boundary's margin to a constant while others stay learnable.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginOverride {
    /// 1-based boundary index.
    pub boundary: usize,
    pub value: f64,
}

/// Everything a training run needs besides the dataset. Deserializes from
/// JSON with per-field defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Epoch cap applied to each phase separately.
    pub max_epochs: usize,
    /// Training accuracy at which phase 1 stops.
    pub phase1_target_accuracy: f64,
    /// Disable to run phase 1 to the epoch cap regardless of accuracy.
    pub phase1_early_stop: bool,
    /// Skip phase 2 entirely.
    pub phase1_only: bool,
    /// Phase 2 stops after this many epochs without a training-accuracy
    /// improvement.
    pub phase2_patience: usize,
    /// When positive, this fraction of every class is held out of training
    /// and phase 2 monitors accuracy on it instead of on the trained set,
    /// keeping the phase-1 model unless fine-tuning beats it out of sample.
    pub phase2_holdout_fraction: f64,
    /// Weight of the margin term in the objective.
    pub mm_weight: f64,
    pub margin_mode: MarginModeConfig,
    pub margin_activation: MarginActivation,
    /// Floor `rho` under every margin.
    pub margin_floor: f64,
    /// Initial activated margins are drawn uniformly from this half-open
    /// range (shifted above the floor when necessary).
    pub margin_init: [f64; 2],
    /// Boundaries pinned to constants within an otherwise learnable mode.
    pub fixed_margins: Vec<MarginOverride>,
    pub samples_per_rank: usize,
    /// Distinct ranks per batch; defaults to every class.
    pub ranks_per_batch: Option<usize>,
    pub encoder_hidden: Vec<usize>,
    pub embed_dim: usize,
    /// Classifier intermediate width; defaults to `embed_dim`.
    pub classifier_hidden: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 500,
            phase1_target_accuracy: 0.95,
            phase1_early_stop: true,
            phase1_only: false,
            phase2_patience: 10,
            phase2_holdout_fraction: 0.0,
            mm_weight: 1.0,
            margin_mode: MarginModeConfig::PerPair,
            margin_activation: MarginActivation::Softplus,
            margin_floor: 0.0,
            margin_init: [0.5, 1.0],
            fixed_margins: Vec::new(),
            samples_per_rank: 4,
            ranks_per_batch: None,
            encoder_hidden: vec![64, 64],
            embed_dim: 16,
            classifier_hidden: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig {
                detail: format!("learning rate must be finite and positive, got {}", self.learning_rate),
            });
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig {
                detail: String::from("max_epochs must be at least 1"),
            });
        }
        if !self.phase1_target_accuracy.is_finite()
            || self.phase1_target_accuracy <= 0.0
            || self.phase1_target_accuracy > 1.0
        {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "phase 1 target accuracy must lie in (0, 1], got {}",
                    self.phase1_target_accuracy
                ),
            });
        }
        if self.phase2_patience == 0 {
            return Err(Error::InvalidConfig {
                detail: String::from("phase 2 patience must be at least 1"),
            });
        }
        if !self.phase2_holdout_fraction.is_finite()
            || self.phase2_holdout_fraction < 0.0
            || self.phase2_holdout_fraction >= 0.5
        {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "phase 2 holdout fraction must lie in [0, 0.5), got {}",
                    self.phase2_holdout_fraction
                ),
            });
        }
        if !self.mm_weight.is_finite() || self.mm_weight < 0.0 {
            return Err(Error::InvalidConfig {
                detail: format!("margin-term weight must be finite and >= 0, got {}", self.mm_weight),
            });
        }
        if self.samples_per_rank < 2 {
            return Err(Error::InvalidConfig {
                detail: format!("samples per rank must be at least 2, got {}", self.samples_per_rank),
            });
        }
        if let Some(r) = self.ranks_per_batch {
            if r < 2 {
                return Err(Error::InvalidConfig {
                    detail: format!("ranks per batch must be at least 2, got {r}"),
                });
            }
        }
        Ok(())
    }
}

/// Adam moment-decay and stabilization constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam first/second-moment state over a fixed registry of parameter slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    params: AdamParams,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(slot_sizes: &[usize]) -> Self {
        AdamState::with_params(slot_sizes, AdamParams::default())
    }

    pub fn with_params(slot_sizes: &[usize], params: AdamParams) -> Self {
        AdamState {
            params,
            t: 0,
            m: slot_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: slot_sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// One Adam update across all slots. Gradients must be finite; a non-finite
/// gradient aborts the step untouched rather than poisoning the parameters.
pub fn adam_step(
    slots: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    if slots.len() != grads.len() || slots.len() != state.m.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            detail: format!(
                "{} slots, {} gradients, optimizer state for {}",
                slots.len(),
                grads.len(),
                state.m.len()
            ),
        });
    }
    for (i, (slot, grad)) in slots.iter().zip(grads).enumerate() {
        if slot.len() != grad.len() || slot.len() != state.m[i].len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                detail: format!(
                    "slot {i}: {} values, {} gradients, state {}",
                    slot.len(),
                    grad.len(),
                    state.m[i].len()
                ),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gradient of optimizer slot {i}"),
            });
        }
    }

    let AdamParams { beta1, beta2, epsilon } = state.params;
    state.t += 1;
    let bias1 = 1.0 - libm::pow(beta1, state.t as f64);
    let bias2 = 1.0 - libm::pow(beta2, state.t as f64);
    for ((slot, grad), (m, v)) in slots
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for k in 0..slot.len() {
            let g = grad[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            slot[k] -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
    }
    Ok(())
}

/// One epoch's averaged training telemetry plus a margin snapshot.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub phase: u8,
    /// 1-based epoch index within its phase.
    pub epoch: usize,
    pub objective: f64,
    pub ce: f64,
    pub mm: f64,
    pub train_accuracy: f64,
    /// Activated margins at epoch end.
    pub margins: Vec<f64>,
}

/// Notes and per-epoch records of a whole run.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainLog {
    pub notes: Vec<String>,
    pub records: Vec<EpochRecord>,
}

/// How one phase ended.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseSummary {
    pub epochs_run: usize,
    pub final_train_accuracy: f64,
    /// Whether the phase ended before its epoch cap (target reached or
    /// patience exhausted).
    pub stopped_early: bool,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Snapshot of the model as phase 1 left it.
    pub phase1_model: Model,
    pub margins: MarginSet,
    pub schema: OrdinalSchema,
    pub log: TrainLog,
    pub phase1: PhaseSummary,
    pub phase2: Option<PhaseSummary>,
}

/// Forward/backward results of one batch; gradients follow
/// [`Model::parameters`] order, margins last.
struct BatchStep {
    objective: f64,
    ce: f64,
    mm: f64,
    model_grads: Vec<Vec<f64>>,
    margin_grad: Option<Vec<f64>>,
}

fn batch_step(
    model: &Model,
    margins: &MarginSet,
    learn_margins: bool,
    dataset: &Dataset,
    batch: &Batch,
    mm_weight: f64,
) -> Result<BatchStep> {
    let mut graph = Graph::new();
    let model_nodes = model.graph_leaves(&mut graph, true);
    let margin_nodes = margins.graph_leaves(&mut graph, learn_margins)?;

    let indices = batch.indices();
    let ranks = batch.ranks();
    let features = dataset.features_of(&indices);
    let x = graph.constant(features, vec![indices.len(), dataset.dim])?;
    let z = model.encode_on(&mut graph, &model_nodes, x)?;
    let logits = model.classify_on(&mut graph, &model_nodes, z)?;
    let parts = batch_objective(&mut graph, z, logits, &ranks, margins, &margin_nodes, mm_weight)?;

    let objective = graph.scalar_value(parts.total);
    if !objective.is_finite() {
        return Err(Error::NonFinite {
            context: format!("batch objective ({objective})"),
        });
    }
    let ce = graph.scalar_value(parts.ce);
    let mm = graph.scalar_value(parts.mm);
    graph.backward(parts.total)?;

    let model_grads = model_nodes
        .leaves()
        .iter()
        .map(|&id| graph.grad(id).expect("trainable model leaf has a gradient").to_vec())
        .collect();
    let margin_grad = if learn_margins {
        margin_nodes
            .raw
            .map(|id| graph.grad(id).expect("learnable margin leaf has a gradient").to_vec())
    } else {
        None
    };
    Ok(BatchStep {
        objective,
        ce,
        mm,
        model_grads,
        margin_grad,
    })
}

fn apply_step(
    model: &mut Model,
    margin_raw: Option<&mut [f64]>,
    step: BatchStep,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    let mut slots: Vec<&mut [f64]> = model
        .parameters_mut()
        .into_iter()
        .map(|t| t.data.as_mut_slice())
        .collect();
    let mut grads = step.model_grads;
    match (margin_raw, step.margin_grad) {
        (Some(raw), Some(grad)) => {
            slots.push(raw);
            grads.push(grad);
        }
        (None, None) => {}
        _ => {
            return Err(Error::Invariant {
                detail: String::from("margin slot and margin gradient must appear together"),
            });
        }
    }
    adam_step(&mut slots, &grads, state, learning_rate)
}

/// With the softplus activation, every activated margin exceeds the floor by
/// construction; the trainer still verifies it after each step so a violation
/// aborts the run instead of silently training on collapsed margins.
fn check_margin_floor(margins: &MarginSet) -> Result<()> {
    let floor = margins.rho();
    for (h0, value) in margins.activated().into_iter().enumerate() {
        let pinned = margins.is_boundary_fixed(h0 + 1);
        if !pinned && value <= floor {
            return Err(Error::Invariant {
                detail: format!(
                    "margin {} fell to {value}, at or below its floor {floor}",
                    h0 + 1
                ),
            });
        }
    }
    Ok(())
}

fn batch_spec(dataset: &Dataset, cfg: &TrainConfig) -> BatchSpec {
    BatchSpec {
        ranks_per_batch: cfg.ranks_per_batch.unwrap_or(dataset.n_classes),
        samples_per_rank: cfg.samples_per_rank,
        seed: cfg.seed,
    }
}

/// Split off a per-class monitoring holdout: `round(fraction * n_c)` (at
/// least one) samples of every class move to the second dataset, chosen by a
/// seeded draw so the split is a pure function of `(dataset order, fraction,
/// seed)`. The first dataset keeps everything else, both in original order.
pub fn monitor_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    dataset.validate()?;
    if !fraction.is_finite() || fraction <= 0.0 || fraction >= 0.5 {
        return Err(Error::InvalidConfig {
            detail: format!("holdout fraction must lie in (0, 0.5), got {fraction}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(HOLDOUT_SPLIT_STREAM);

    let mut held = vec![false; dataset.len()];
    for class in 1..=dataset.n_classes {
        let members: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let count = (libm::round(members.len() as f64 * fraction) as usize).max(1);
        // Training needs at least two samples of every present rank.
        if members.len() - count < 2 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "holdout fraction {fraction} leaves {} of {} rank-{class} samples to train on",
                    members.len() - count,
                    members.len()
                ),
            });
        }
        for &index in members.choose_multiple(&mut rng, count) {
            held[index] = true;
        }
    }

    let picked = |keep_held: bool| -> Vec<_> {
        dataset
            .samples
            .iter()
            .zip(&held)
            .filter(|(_, &h)| h == keep_held)
            .map(|(s, _)| s.clone())
            .collect()
    };
    Ok((
        Dataset::new(dataset.dim, dataset.n_classes, picked(false))?,
        Dataset::new(dataset.dim, dataset.n_classes, picked(true))?,
    ))
}

fn push_note(log: &mut TrainLog, note: String) {
    if !log.notes.contains(&note) {
        log.notes.push(note);
    }
}

/// Phase 1: joint optimization of model and margins, stopping early at the
/// training-accuracy target.
pub fn run_phase_one(
    model: &mut Model,
    margins: &mut MarginSet,
    dataset: &Dataset,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<PhaseSummary> {
    let learn = margins.n_learnable() > 0;
    let mut sizes: Vec<usize> = model.parameters().iter().map(|t| t.numel()).collect();
    if learn {
        sizes.push(margins.raw().len());
    }
    let mut adam = AdamState::new(&sizes);
    let spec = batch_spec(dataset, cfg);
    let labels = dataset.labels(false);
    let guard_floor = learn && margins.activation() == MarginActivation::Softplus;

    let mut summary = PhaseSummary {
        epochs_run: 0,
        final_train_accuracy: 0.0,
        stopped_early: false,
    };
    for epoch in 0..cfg.max_epochs {
        let plan = build_epoch_batches(dataset, &spec, PHASE1_STREAM_BASE + epoch as u64)?;
        if epoch == 0 {
            // Padding behavior is identical across epochs; one report suffices.
            for note in plan.notes.iter() {
                push_note(log, format!("phase 1, {note}"));
            }
        }
        let mut sums = [0.0f64; 3];
        for batch in &plan.batches {
            validate_batch(batch)?;
            let step = batch_step(model, margins, learn, dataset, batch, cfg.mm_weight)?;
            sums[0] += step.objective;
            sums[1] += step.ce;
            sums[2] += step.mm;
            let margin_slot = if learn { Some(margins.raw_mut()) } else { None };
            apply_step(model, margin_slot, step, &mut adam, cfg.learning_rate)?;
            if guard_floor {
                check_margin_floor(margins)?;
            }
        }
        let n_batches = plan.batches.len() as f64;
        let accuracy = accuracy_of(&labels, &predictions(model, dataset)?);
        log.records.push(EpochRecord {
            phase: 1,
            epoch: epoch + 1,
            objective: sums[0] / n_batches,
            ce: sums[1] / n_batches,
            mm: sums[2] / n_batches,
            train_accuracy: accuracy,
            margins: margins.activated(),
        });
        summary.epochs_run = epoch + 1;
        summary.final_train_accuracy = accuracy;
        if cfg.phase1_early_stop && accuracy >= cfg.phase1_target_accuracy {
            summary.stopped_early = true;
            push_note(
                log,
                format!(
                    "phase 1: stopped after epoch {} (train accuracy {:.4} reached target {:.4})",
                    epoch + 1,
                    accuracy,
                    cfg.phase1_target_accuracy
                ),
            );
            break;
        }
    }
    if !summary.stopped_early {
        push_note(
            log,
            format!(
                "phase 1: ran to the epoch cap ({}; final train accuracy {:.4})",
                summary.epochs_run, summary.final_train_accuracy
            ),
        );
    }
    Ok(summary)
}

/// Phase 2: the margins are frozen (shared immutably) and the optimizer
/// state starts fresh; the model keeps training under the fixed geometry
/// until the monitored accuracy stops improving, and the best-monitored
/// model is what the phase returns (patience keeps training in case the
/// monitored accuracy recovers; when it does not, later epochs are drift,
/// not progress).
///
/// The monitor is training accuracy on `dataset` itself, or accuracy on
/// `monitor` when one is given. A monitored phase 2 starts from the incoming
/// model's score, so it keeps the phase-1 model outright unless fine-tuning
/// beats it on the monitor.
pub fn run_phase_two(
    model: &mut Model,
    margins: &MarginSet,
    dataset: &Dataset,
    monitor: Option<&Dataset>,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<PhaseSummary> {
    let sizes: Vec<usize> = model.parameters().iter().map(|t| t.numel()).collect();
    let mut adam = AdamState::new(&sizes);
    push_note(
        log,
        String::from("phase 2: margins frozen; optimizer state reset at the phase boundary"),
    );
    let spec = batch_spec(dataset, cfg);
    let labels = dataset.labels(false);
    let metric = if monitor.is_some() {
        "holdout accuracy"
    } else {
        "train accuracy"
    };
    let monitored = |model: &Model| -> Result<f64> {
        let target = monitor.unwrap_or(dataset);
        Ok(accuracy_of(&target.labels(false), &predictions(model, target)?))
    };

    let mut summary = PhaseSummary {
        epochs_run: 0,
        final_train_accuracy: 0.0,
        stopped_early: false,
    };
    // Against a holdout the incoming model competes as the baseline; the
    // trained set it has already fit would make that comparison vacuous.
    let mut best_score = match monitor {
        Some(_) => monitored(model)?,
        None => f64::NEG_INFINITY,
    };
    let mut best_model: Option<Model> = monitor.map(|_| model.clone());
    let mut best_epoch = 0usize;
    let mut epochs_since_best = 0usize;
    for epoch in 0..cfg.max_epochs {
        let plan = build_epoch_batches(dataset, &spec, PHASE2_STREAM_BASE + epoch as u64)?;
        let mut sums = [0.0f64; 3];
        for batch in &plan.batches {
            validate_batch(batch)?;
            let step = batch_step(model, margins, false, dataset, batch, cfg.mm_weight)?;
            sums[0] += step.objective;
            sums[1] += step.ce;
            sums[2] += step.mm;
            apply_step(model, None, step, &mut adam, cfg.learning_rate)?;
        }
        let n_batches = plan.batches.len() as f64;
        let accuracy = accuracy_of(&labels, &predictions(model, dataset)?);
        log.records.push(EpochRecord {
            phase: 2,
            epoch: epoch + 1,
            objective: sums[0] / n_batches,
            ce: sums[1] / n_batches,
            mm: sums[2] / n_batches,
            train_accuracy: accuracy,
            margins: margins.activated(),
        });
        summary.epochs_run = epoch + 1;
        summary.final_train_accuracy = accuracy;
        let score = match monitor {
            Some(_) => monitored(model)?,
            None => accuracy,
        };
        if score > best_score {
            best_score = score;
            best_model = Some(model.clone());
            best_epoch = epoch + 1;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.phase2_patience {
                summary.stopped_early = true;
                push_note(
                    log,
                    format!(
                        "phase 2: stopped after epoch {} (no {metric} gain for {} epochs)",
                        epoch + 1,
                        cfg.phase2_patience
                    ),
                );
                break;
            }
        }
    }
    if !summary.stopped_early {
        push_note(
            log,
            format!(
                "phase 2: ran to the epoch cap ({}; final train accuracy {:.4})",
                summary.epochs_run, summary.final_train_accuracy
            ),
        );
    }
    if let Some(best) = best_model {
        *model = best;
        summary.final_train_accuracy = accuracy_of(&labels, &predictions(model, dataset)?);
        let kept = if best_epoch == 0 {
            String::from("the phase-1 model")
        } else {
            format!("the epoch-{best_epoch} model")
        };
        push_note(
            log,
            format!("phase 2: kept {kept} ({metric} {best_score:.4})"),
        );
    }
    Ok(summary)
}

/// Run the full two-phase procedure on a dataset.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    dataset.validate()?;
    cfg.validate()?;
    let schema = dataset.schema()?;

    let mut margin_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    margin_rng.set_stream(MARGIN_INIT_STREAM);
    let mut margins = match cfg.margin_mode {
        MarginModeConfig::PerPair => MarginSet::init(
            &schema,
            MarginMode::PerPair,
            cfg.margin_activation,
            cfg.margin_floor,
            (cfg.margin_init[0], cfg.margin_init[1]),
            &mut margin_rng,
        )?,
        MarginModeConfig::Single => MarginSet::init(
            &schema,
            MarginMode::Single,
            cfg.margin_activation,
            cfg.margin_floor,
            (cfg.margin_init[0], cfg.margin_init[1]),
            &mut margin_rng,
        )?,
        MarginModeConfig::AllFixed { value } => {
            MarginSet::all_fixed(&schema, value, cfg.margin_floor)?
        }
    };
    for pin in &cfg.fixed_margins {
        margins.set_fixed_override(pin.boundary, pin.value)?;
    }

    let mut model_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    model_rng.set_stream(MODEL_INIT_STREAM);
    let model_config = ModelConfig {
        input_dim: dataset.dim,
        encoder_hidden: cfg.encoder_hidden.clone(),
        embed_dim: cfg.embed_dim,
        classifier_hidden: cfg.classifier_hidden.unwrap_or(cfg.embed_dim),
        n_classes: dataset.n_classes,
    };
    let mut model = Model::init(model_config, &mut model_rng)?;

    let mut log = TrainLog {
        notes: margins.notes().to_vec(),
        records: Vec::new(),
    };

    let split = if cfg.phase2_holdout_fraction > 0.0 {
        let halves = monitor_split(dataset, cfg.phase2_holdout_fraction, cfg.seed)?;
        push_note(
            &mut log,
            format!(
                "monitor split: training on {} samples, phase 2 scored on {} held out",
                halves.0.len(),
                halves.1.len()
            ),
        );
        Some(halves)
    } else {
        None
    };
    let trained: &Dataset = split.as_ref().map_or(dataset, |(kept, _)| kept);
    let monitor: Option<&Dataset> = split.as_ref().map(|(_, held)| held);

    let phase1 = run_phase_one(&mut model, &mut margins, trained, cfg, &mut log)?;
    let phase1_model = model.clone();
    let phase2 = if cfg.phase1_only {
        None
    } else {
        Some(run_phase_two(&mut model, &margins, trained, monitor, cfg, &mut log)?)
    };

    Ok(TrainOutcome {
        model,
        phase1_model,
        margins,
        schema,
        log,
        phase1,
        phase2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, SyntheticSpec};

    #[test]
    fn adam_first_step_matches_the_closed_form() {
        let mut value = [1.0f64];
        let mut slots: Vec<&mut [f64]> = vec![&mut value];
        let grads = vec![vec![0.5]];
        let mut state = AdamState::new(&[1]);
        adam_step(&mut slots, &grads, &mut state, 0.001).unwrap();
        // After one step both bias corrections cancel: m_hat = g, v_hat = g^2.
        let expected = 1.0 - 0.001 * 0.5 / ((0.5f64 * 0.5).sqrt() + 1e-8);
        assert!((value[0] - expected).abs() < 1e-15, "{} vs {expected}", value[0]);
        assert_eq!(state.steps_taken(), 1);
    }

    #[test]
    fn adam_leaves_parameters_alone_under_zero_gradients() {
        let mut a = [0.25f64, -3.5];
        let mut slots: Vec<&mut [f64]> = vec![&mut a];
        let mut state = AdamState::new(&[2]);
        for _ in 0..5 {
            let mut views: Vec<&mut [f64]> = slots.iter_mut().map(|s| &mut s[..]).collect();
            adam_step(&mut views, &[vec![0.0, 0.0]], &mut state, 0.1).unwrap();
        }
        assert_eq!(a, [0.25, -3.5]);
    }

    #[test]
    fn adam_gives_equal_coordinates_equal_updates() {
        let mut a = [2.0f64, 2.0];
        let mut slots: Vec<&mut [f64]> = vec![&mut a];
        let mut state = AdamState::new(&[2]);
        adam_step(&mut slots, &[vec![0.3, 0.3]], &mut state, 0.01).unwrap();
        assert_eq!(a[0], a[1]);
        assert!(a[0] < 2.0);
    }

    #[test]
    fn adam_rejects_non_finite_gradients_and_shape_mismatches() {
        let mut a = [1.0f64];
        let mut slots: Vec<&mut [f64]> = vec![&mut a];
        let mut state = AdamState::new(&[1]);
        let err = adam_step(&mut slots, &[vec![f64::NAN]], &mut state, 0.01).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(a, [1.0], "a rejected step must not touch parameters");

        let mut b = [1.0f64];
        let mut slots: Vec<&mut [f64]> = vec![&mut b];
        assert!(adam_step(&mut slots, &[vec![0.1, 0.2]], &mut state, 0.01).is_err());
        let mut c = [1.0f64];
        let mut slots: Vec<&mut [f64]> = vec![&mut c];
        assert!(adam_step(&mut slots, &[], &mut state, 0.01).is_err());
    }

    #[test]
    fn config_deserializes_with_defaults_and_rejects_unknown_keys() {
        let cfg: TrainConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, TrainConfig::default());

        let cfg: TrainConfig =
            serde_json::from_str(r#"{"margin_mode": {"all_fixed": {"value": 0.5}}, "seed": 7}"#)
                .unwrap();
        assert_eq!(cfg.margin_mode, MarginModeConfig::AllFixed { value: 0.5 });
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.max_epochs, 500);

        let cfg: TrainConfig = serde_json::from_str(r#"{"margin_mode": "single"}"#).unwrap();
        assert_eq!(cfg.margin_mode, MarginModeConfig::Single);

        assert!(serde_json::from_str::<TrainConfig>(r#"{"learning_rat": 0.1}"#).is_err());
    }

    #[test]
    fn config_validation_rejects_out_of_range_values() {
        let mut cfg = TrainConfig::default();
        cfg.learning_rate = -0.5;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.samples_per_rank = 1;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.phase1_target_accuracy = 1.5;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.mm_weight = f64::INFINITY;
        assert!(cfg.validate().is_err());
    }

    fn toy_dataset() -> Dataset {
        generate(&SyntheticSpec {
            n_classes: 3,
            dim: 2,
            per_class: 12,
            gaps: vec![2.0, 2.0],
            noise: 0.05,
            seed: 1,
        })
        .unwrap()
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 60,
            samples_per_rank: 3,
            encoder_hidden: vec![16],
            embed_dim: 4,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_run_stops_early_and_is_deterministic() {
        let data = toy_dataset();
        let cfg = toy_config();
        let outcome = train(&data, &cfg).unwrap();

        assert!(outcome.phase1.stopped_early, "phase 1 should hit 95% on a separable toy");
        assert!(outcome.phase1.final_train_accuracy >= 0.95);
        assert!(outcome.phase1.epochs_run < cfg.max_epochs);
        let phase2 = outcome.phase2.expect("two-phase run");
        assert!(phase2.epochs_run >= 1);
        assert!(outcome.margins.activated().iter().all(|&m| m > 0.0));

        let again = train(&data, &cfg).unwrap();
        assert_eq!(outcome.model, again.model);
        assert_eq!(outcome.margins, again.margins);
        assert_eq!(outcome.log.records, again.log.records);
    }

    #[test]
    fn phase_two_returns_its_best_epoch_not_its_last() {
        let data = toy_dataset();
        let cfg = toy_config();
        let outcome = train(&data, &cfg).unwrap();
        let phase2 = outcome.phase2.expect("two-phase run");

        let best_recorded = outcome
            .log
            .records
            .iter()
            .filter(|r| r.phase == 2)
            .map(|r| r.train_accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(phase2.final_train_accuracy, best_recorded);

        // The returned model actually scores that accuracy on the train set.
        let labels = data.labels(false);
        let accuracy = accuracy_of(&labels, &predictions(&outcome.model, &data).unwrap());
        assert_eq!(accuracy, phase2.final_train_accuracy);
        assert!(outcome
            .log
            .notes
            .iter()
            .any(|n| n.contains("kept the epoch-")));
    }

    #[test]
    fn monitor_split_is_deterministic_proportional_and_disjoint() {
        let data = toy_dataset();
        let (kept, held) = monitor_split(&data, 0.25, 9).unwrap();
        assert_eq!(kept.class_counts(), vec![9, 9, 9]);
        assert_eq!(held.class_counts(), vec![3, 3, 3]);

        let ids = |d: &Dataset| d.samples.iter().map(|s| s.id).collect::<Vec<_>>();
        let mut all = ids(&kept);
        all.extend(ids(&held));
        all.sort_unstable();
        assert_eq!(all, (0..36).collect::<Vec<_>>(), "split must partition the dataset");

        let (kept_again, held_again) = monitor_split(&data, 0.25, 9).unwrap();
        assert_eq!(ids(&kept), ids(&kept_again));
        assert_eq!(ids(&held), ids(&held_again));
        let (_, held_other_seed) = monitor_split(&data, 0.25, 10).unwrap();
        assert_ne!(ids(&held), ids(&held_other_seed));
    }

    #[test]
    fn monitor_split_rejects_fractions_that_starve_a_class() {
        let data = toy_dataset();
        for bad in [0.0, 0.5, f64::NAN] {
            assert!(matches!(
                monitor_split(&data, bad, 1),
                Err(Error::InvalidConfig { .. })
            ));
        }
        // Two samples per class: any holdout starves training of a rank.
        let tiny = generate(&SyntheticSpec {
            n_classes: 2,
            dim: 2,
            per_class: 2,
            gaps: vec![2.0],
            noise: 0.0,
            seed: 1,
        })
        .unwrap();
        assert!(matches!(
            monitor_split(&tiny, 0.49, 1),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn holdout_monitored_phase_two_never_regresses_on_the_holdout() {
        let data = toy_dataset();
        let mut cfg = toy_config();
        cfg.phase2_holdout_fraction = 0.25;
        let outcome = train(&data, &cfg).unwrap();
        outcome.phase2.as_ref().expect("two-phase run");

        let (_, held) = monitor_split(&data, cfg.phase2_holdout_fraction, cfg.seed).unwrap();
        let labels = held.labels(false);
        let phase1_score =
            accuracy_of(&labels, &predictions(&outcome.phase1_model, &held).unwrap());
        let final_score = accuracy_of(&labels, &predictions(&outcome.model, &held).unwrap());
        assert!(
            final_score >= phase1_score,
            "phase 2 kept a model scoring {final_score} under the phase-1 model's {phase1_score}"
        );
        assert!(outcome
            .log
            .notes
            .iter()
            .any(|n| n.contains("monitor split: training on 27 samples")));
        assert!(outcome.log.notes.iter().any(|n| n.contains("holdout accuracy")));
    }

    #[test]
    fn margins_never_grow_during_phase_one() {
        let data = toy_dataset();
        let mut cfg = toy_config();
        cfg.phase1_only = true;
        let outcome = train(&data, &cfg).unwrap();
        let phase1: Vec<&EpochRecord> = outcome
            .log
            .records
            .iter()
            .filter(|r| r.phase == 1)
            .collect();
        assert!(!phase1.is_empty());
        for pair in phase1.windows(2) {
            for (before, after) in pair[0].margins.iter().zip(&pair[1].margins) {
                assert!(
                    after <= &(before + 1e-12),
                    "margin rose from {before} to {after}"
                );
            }
        }
    }

    #[test]
    fn phase_two_leaves_margins_bitwise_untouched() {
        let data = toy_dataset();
        let cfg = toy_config();
        let outcome = train(&data, &cfg).unwrap();
        let last_phase1 = outcome
            .log
            .records
            .iter()
            .filter(|r| r.phase == 1)
            .last()
            .unwrap()
            .clone();
        let phase2_records: Vec<&EpochRecord> = outcome
            .log
            .records
            .iter()
            .filter(|r| r.phase == 2)
            .collect();
        assert!(!phase2_records.is_empty());
        for record in phase2_records {
            assert_eq!(record.margins, last_phase1.margins);
        }
        assert_eq!(outcome.margins.activated(), last_phase1.margins);
        assert!(outcome
            .log
            .notes
            .iter()
            .any(|n| n.contains("optimizer state reset")));
    }

    #[test]
    fn all_fixed_margins_stay_constant_and_train_the_model_only() {
        let data = toy_dataset();
        let mut cfg = toy_config();
        cfg.margin_mode = MarginModeConfig::AllFixed { value: 0.5 };
        let outcome = train(&data, &cfg).unwrap();
        assert_eq!(outcome.margins.activated(), vec![0.5, 0.5]);
        assert!(outcome.phase1.final_train_accuracy >= 0.95);
    }

    #[test]
    fn pinned_boundary_stays_exactly_while_others_learn() {
        let data = toy_dataset();
        let mut cfg = toy_config();
        cfg.fixed_margins = vec![MarginOverride {
            boundary: 2,
            value: 1.25,
        }];
        cfg.phase1_only = true;
        let outcome = train(&data, &cfg).unwrap();
        let final_margins = outcome.margins.activated();
        assert_eq!(final_margins[1], 1.25);
        for record in &outcome.log.records {
            assert_eq!(record.margins[1], 1.25);
        }
    }

    #[test]
    fn phase1_model_snapshot_differs_from_the_final_model_after_phase_two() {
        let data = toy_dataset();
        let outcome = train(&data, &toy_config()).unwrap();
        // Phase 2 ran at least one epoch of updates, so parameters moved.
        assert_ne!(outcome.model, outcome.phase1_model);
    }
}
