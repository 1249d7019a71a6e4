//! Rank schema and learnable inter-rank margins.
//!
//! For `C` ordered classes there are `C - 1` boundaries, one between each
//! adjacent pair of ranks. Each boundary `h` carries a margin
//! `m_h = rho + activation(theta_h)`: the raw parameter `theta_h` is
//! unconstrained and the activation keeps the margin above the floor `rho`
//! structurally, with no projection step. The required separation between two
//! arbitrary ranks is *cumulative*: the sum of the activated margins of every
//! boundary strictly between them, looking left or right symmetrically.
//!
//! The default activation is softplus. A ReLU activation also exists, but
//! only to demonstrate the margin-collapse failure mode (ReLU is flat at zero,
//! so a margin pushed to the floor stops receiving gradient and never
//! recovers); default configurations never use it.
//!
//! Margins are evaluated two ways that must agree bit-for-bit: a plain path
//! (logs, reports, checkpoints) and a graph path (inside the loss, so the raw
//! parameters receive gradients).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Graph, Tensor, TensorId};
use crate::error::{Error, Result};
use crate::num;

/// Ordered label set. Ranks are 1-based everywhere in the public API: rank
/// `r` means `labels()[r - 1]`, and boundary `h` (also 1-based) separates
/// ranks `h` and `h + 1`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OrdinalSchema {
    labels: Vec<String>,
}

impl OrdinalSchema {
    /// Schema with labels `"1"`, `"2"`, ... `"{n}"`.
    pub fn from_class_count(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig {
                detail: format!("an ordinal schema needs at least 2 classes, got {n}"),
            });
        }
        Ok(OrdinalSchema {
            labels: (1..=n).map(|i| i.to_string()).collect(),
        })
    }

    /// Schema with explicit ordered labels.
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "an ordinal schema needs at least 2 classes, got {}",
                    labels.len()
                ),
            });
        }
        Ok(OrdinalSchema { labels })
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_boundaries(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Human-readable name of 1-based boundary `h`, e.g. `"3-4"`.
    pub fn boundary_name(&self, boundary: usize) -> Result<String> {
        if boundary == 0 || boundary > self.n_boundaries() {
            return Err(Error::InvalidRank {
                detail: format!(
                    "boundary {boundary} out of range 1..={}",
                    self.n_boundaries()
                ),
            });
        }
        Ok(format!(
            "{}-{}",
            self.labels[boundary - 1],
            self.labels[boundary]
        ))
    }

    pub fn validate_rank(&self, rank: usize) -> Result<()> {
        if rank == 0 || rank > self.n_classes() {
            return Err(Error::InvalidRank {
                detail: format!("rank {rank} out of range 1..={}", self.n_classes()),
            });
        }
        Ok(())
    }
}

/// How margin parameters are shared across boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    /// One raw parameter per boundary (the default).
    PerPair,
    /// A single raw parameter shared by every boundary.
    Single,
    /// No raw parameters; every boundary is a fixed constant.
    AllFixed,
}

/// Activation mapping raw parameters to margins above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginActivation {
    /// `m = rho + softplus(theta)`: strictly above `rho`, gradient never dies.
    Softplus,
    /// `m = rho + max(0, theta)`: collapse-demonstration mode only.
    Relu,
}

/// Graph-side handles produced by [`MarginSet::graph_leaves`].
#[derive(Debug, Clone, Copy)]
pub struct MarginNodes {
    /// Activated margin vector, shape `[n_boundaries]`.
    pub activated: TensorId,
    /// The raw-parameter leaf, when the set has learnable parameters.
    pub raw: Option<TensorId>,
}

/// The per-boundary margin parameters of one model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarginSet {
    mode: MarginMode,
    activation: MarginActivation,
    rho: f64,
    /// Raw parameters: one per boundary (`PerPair`), one shared (`Single`),
    /// or none (`AllFixed`).
    raw: Vec<f64>,
    /// Per-boundary overrides. An overridden boundary reports the override
    /// verbatim and its raw slot receives no gradient.
    fixed: Vec<Option<f64>>,
    /// Notable events from construction (initialization-range shifts), so
    /// runs can surface them in logs.
    notes: Vec<String>,
}

impl MarginSet {
    /// Initialize learnable margins by drawing each target margin uniformly
    /// from `init_range` and inverting the activation analytically, so
    /// training starts from healthy mid-sized margins rather than from raw
    /// parameters near an activation's dead zone.
    ///
    /// With the default range `[0.5, 1.0)`: if `rho` overlaps the range (the
    /// inversion would be impossible), the draw shifts to
    /// `[rho + 0.5, rho + 1.0)` and the shift is recorded in `notes`.
    pub fn init<R: Rng>(
        schema: &OrdinalSchema,
        mode: MarginMode,
        activation: MarginActivation,
        rho: f64,
        init_range: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::InvalidConfig {
                detail: format!("margin floor rho must be finite and >= 0, got {rho}"),
            });
        }
        let (mut lo, mut hi) = init_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0) {
            return Err(Error::InvalidConfig {
                detail: format!("margin init range [{lo}, {hi}) is not a valid range"),
            });
        }
        let mut notes = Vec::new();
        // The inversion needs target - rho inside the activation's image:
        // strictly positive for softplus, non-negative for relu.
        let unreachable_floor = match activation {
            MarginActivation::Softplus => lo <= rho,
            MarginActivation::Relu => lo < rho,
        };
        if unreachable_floor {
            lo = rho + 0.5;
            hi = rho + 1.0;
            notes.push(format!(
                "margin init range shifted to [{lo}, {hi}) because rho = {rho} overlaps the requested range"
            ));
        }

        let n_raw = match mode {
            MarginMode::PerPair => schema.n_boundaries(),
            MarginMode::Single => 1,
            MarginMode::AllFixed => {
                return Err(Error::InvalidConfig {
                    detail: String::from(
                        "all-fixed margins have no parameters to initialize; use MarginSet::all_fixed",
                    ),
                })
            }
        };
        let raw = (0..n_raw)
            .map(|_| {
                let target = rng.gen_range(lo..hi);
                match activation {
                    MarginActivation::Softplus => num::softplus_inv(target - rho),
                    MarginActivation::Relu => target - rho,
                }
            })
            .collect();
        Ok(MarginSet {
            mode,
            activation,
            rho,
            raw,
            fixed: vec![None; schema.n_boundaries()],
            notes,
        })
    }

    /// Every boundary fixed to the same constant; no learnable parameters.
    pub fn all_fixed(schema: &OrdinalSchema, value: f64, rho: f64) -> Result<Self> {
        check_fixed_value(value)?;
        Ok(MarginSet {
            mode: MarginMode::AllFixed,
            activation: MarginActivation::Softplus,
            rho,
            raw: Vec::new(),
            fixed: vec![Some(value); schema.n_boundaries()],
            notes: Vec::new(),
        })
    }

    /// Pin one boundary (1-based) to a constant. The value is reported
    /// verbatim and the boundary is excluded from gradient flow.
    pub fn set_fixed_override(&mut self, boundary: usize, value: f64) -> Result<()> {
        check_fixed_value(value)?;
        if boundary == 0 || boundary > self.fixed.len() {
            return Err(Error::InvalidRank {
                detail: format!("boundary {boundary} out of range 1..={}", self.fixed.len()),
            });
        }
        self.fixed[boundary - 1] = Some(value);
        Ok(())
    }

    pub fn mode(&self) -> MarginMode {
        self.mode
    }

    pub fn activation(&self) -> MarginActivation {
        self.activation
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_boundaries(&self) -> usize {
        self.fixed.len()
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Number of learnable raw parameters (0 for `AllFixed`).
    pub fn n_learnable(&self) -> usize {
        self.raw.len()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Mutable raw parameters, for the optimizer only. The activation keeps
    /// any raw value's margin above `rho`, so no projection is needed after
    /// an update.
    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.raw
    }

    /// Whether a 1-based boundary is pinned by an override (or by the
    /// all-fixed mode).
    pub fn is_boundary_fixed(&self, boundary: usize) -> bool {
        boundary >= 1 && boundary <= self.fixed.len() && self.fixed[boundary - 1].is_some()
    }

    /// Reporting label for a 1-based boundary's parameter treatment.
    pub fn boundary_kind(&self, boundary: usize) -> &'static str {
        if self.is_boundary_fixed(boundary) {
            "fixed"
        } else {
            match self.mode {
                MarginMode::PerPair => "learned",
                MarginMode::Single => "learned_shared",
                MarginMode::AllFixed => "fixed",
            }
        }
    }

    fn raw_for_boundary(&self, index: usize) -> f64 {
        match self.mode {
            MarginMode::PerPair => self.raw[index],
            MarginMode::Single => self.raw[0],
            MarginMode::AllFixed => unreachable!("all-fixed margins have every boundary overridden"),
        }
    }

    /// Activated margin of every boundary, in boundary order (plain path).
    pub fn activated(&self) -> Vec<f64> {
        (0..self.fixed.len())
            .map(|h| match self.fixed[h] {
                Some(v) => v,
                None => {
                    let theta = self.raw_for_boundary(h);
                    let core = match self.activation {
                        MarginActivation::Softplus => num::softplus(theta),
                        MarginActivation::Relu => num::relu(theta),
                    };
                    core + self.rho
                }
            })
            .collect()
    }

    /// Mean of the activated margins (the collapse diagnostic).
    pub fn mean_activated(&self) -> f64 {
        let act = self.activated();
        act.iter().sum::<f64>() / act.len() as f64
    }

    /// Cumulative margin between two distinct 1-based ranks: the sum of the
    /// activated margins of every boundary strictly between them. Symmetric
    /// in its arguments by construction.
    pub fn cumulative(&self, rank_a: usize, rank_b: usize) -> Result<f64> {
        let (lo, hi) = self.cumulative_span(rank_a, rank_b)?;
        Ok(self.activated()[lo..hi].iter().sum())
    }

    fn cumulative_span(&self, rank_a: usize, rank_b: usize) -> Result<(usize, usize)> {
        let n_classes = self.fixed.len() + 1;
        for rank in [rank_a, rank_b] {
            if rank == 0 || rank > n_classes {
                return Err(Error::InvalidRank {
                    detail: format!("rank {rank} out of range 1..={n_classes}"),
                });
            }
        }
        if rank_a == rank_b {
            return Err(Error::InvalidRank {
                detail: format!("cumulative margin needs two distinct ranks, got {rank_a} twice"),
            });
        }
        let lo = rank_a.min(rank_b) - 1;
        let hi = rank_a.max(rank_b) - 1;
        Ok((lo, hi))
    }

    /// Insert this margin set into a graph: the raw parameters become a leaf
    /// (gradient-requiring iff `learnable`) and the returned `activated` node
    /// evaluates to exactly the same values as [`MarginSet::activated`].
    ///
    /// Fixed overrides are spliced in through a constant mask, so their
    /// boundaries contribute no gradient to the raw leaf.
    pub fn graph_leaves(&self, graph: &mut Graph, learnable: bool) -> Result<MarginNodes> {
        let n = self.fixed.len();
        if self.raw.is_empty() {
            let activated = graph.constant(self.activated(), vec![n])?;
            return Ok(MarginNodes { activated, raw: None });
        }

        let mut raw_tensor = Tensor::new(self.raw.clone(), vec![self.raw.len()])?;
        raw_tensor.requires_grad = learnable;
        let raw_leaf = graph.leaf(&raw_tensor);

        let expanded = match self.mode {
            MarginMode::Single => graph.repeat(raw_leaf, n)?,
            _ => raw_leaf,
        };
        let core = match self.activation {
            MarginActivation::Softplus => graph.softplus(expanded),
            MarginActivation::Relu => graph.relu(expanded),
        };
        let shifted = graph.add_scalar(core, self.rho);

        let activated = if self.fixed.iter().any(Option::is_some) {
            let mask: Vec<f64> = self
                .fixed
                .iter()
                .map(|f| if f.is_some() { 0.0 } else { 1.0 })
                .collect();
            let values: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
            let mask = graph.constant(mask, vec![n])?;
            let values = graph.constant(values, vec![n])?;
            let masked = graph.mul(shifted, mask)?;
            graph.add(masked, values)?
        } else {
            shifted
        };
        Ok(MarginNodes {
            activated,
            raw: Some(raw_leaf),
        })
    }

    /// Graph-side cumulative margin between two distinct 1-based ranks.
    pub fn cumulative_on(
        &self,
        graph: &mut Graph,
        nodes: &MarginNodes,
        rank_a: usize,
        rank_b: usize,
    ) -> Result<TensorId> {
        let (lo, hi) = self.cumulative_span(rank_a, rank_b)?;
        graph.sum_range(nodes.activated, lo, hi)
    }
}

fn check_fixed_value(value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidConfig {
            detail: format!("fixed margin values must be finite and >= 0, got {value}"),
        });
    }
    Ok(())
}
