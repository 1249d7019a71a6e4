//! Define-by-run reverse-mode automatic differentiation on dense `f64`
//! tensors.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its result
//! and enough information to push adjoints back to its parents. Graphs are
//! built fresh for each training step and never reused across steps; a
//! [`Tensor`] is the owned value type that lives *outside* graphs (model
//! parameters, detached results) and is inserted as a leaf when needed.
//!
//! Conventions, chosen once and relied on everywhere:
//!
//! * all math is `f64`; there is no type parameter;
//! * shapes are at most 2-D (`[n]` vectors, `[r, c]` row-major matrices) and
//!   there is no broadcasting beyond the explicit `add_row` op;
//! * `relu` (and the hinge it implements) has gradient `0` at the kink;
//! * cosine similarity of a zero-norm vector is a hard [`Error::ZeroNorm`],
//!   not an epsilon-smoothed value;
//! * `backward` accumulates: calling it twice without building a new graph
//!   doubles every leaf gradient.
//!
//! `Graph` holds no interior mutability and no shared pointers, so graphs and
//! tensors are `Send` and independent graphs may be driven from separate
//! threads.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::num;

/// Handle to a node in a [`Graph`]. Only meaningful for the graph that
/// created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

/// An owned dense tensor: the value type for parameters and detached results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Populated by [`Graph::backward`] for leaves that require gradients
    /// (via [`Graph::leaf_grad`] read-back); never serialized.
    #[serde(skip)]
    pub grad: Option<Vec<f64>>,
    #[serde(default)]
    pub requires_grad: bool,
}

impl Tensor {
    /// A tensor from raw parts; the element count must match the shape.
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                detail: format!("shape {shape:?} wants {expect} elements, got {}", data.len()),
            });
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
            requires_grad: false,
        })
    }

    /// A gradient-requiring tensor (a trainable parameter).
    pub fn param(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let mut t = Tensor::new(data, shape)?;
        t.requires_grad = true;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Recorded operation of a node; parents are earlier node ids.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    AddScalar { input: TensorId },
    MulScalar { input: TensorId, factor: f64 },
    /// Fault-injection variant of `MulScalar`: forward multiplies by
    /// `factor`, backward deliberately multiplies by `factor * grad_factor`.
    /// Exists so the gradient checker can be shown to fail on a wrong rule.
    MulScalarSkewed { input: TensorId, factor: f64, grad_factor: f64 },
    Add { lhs: TensorId, rhs: TensorId },
    Sub { lhs: TensorId, rhs: TensorId },
    Mul { lhs: TensorId, rhs: TensorId },
    AddRow { matrix: TensorId, row: TensorId },
    MatMul { lhs: TensorId, rhs: TensorId, m: usize, k: usize, n: usize },
    Relu { input: TensorId },
    Softplus { input: TensorId },
    Ln { input: TensorId },
    Exp { input: TensorId },
    Sum { input: TensorId },
    Mean { input: TensorId },
    Norm { input: TensorId },
    Dot { lhs: TensorId, rhs: TensorId },
    /// Saved values: `[norm_lhs, norm_rhs, cosine]`.
    Cosine { lhs: TensorId, rhs: TensorId },
    Row { input: TensorId, index: usize, width: usize },
    SumList { inputs: Vec<TensorId> },
    SumRange { input: TensorId, lo: usize, hi: usize },
    Repeat { input: TensorId, n: usize },
    /// Saved values: the softmax probabilities (length `C`).
    CrossEntropy { logits: TensorId, label: usize },
    /// Saved values: row-major softmax probabilities (`n * C`).
    CrossEntropyRows { logits: TensorId, labels: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
    /// Op-specific forward values reused by the backward rule.
    saved: Vec<f64>,
}

/// A define-by-run computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(
        &mut self,
        shape: Vec<usize>,
        data: Vec<f64>,
        op: Op,
        requires_grad: bool,
        saved: Vec<f64>,
    ) -> TensorId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            requires_grad,
            op,
            saved,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn node(&self, id: TensorId) -> &Node {
        &self.nodes[id.0]
    }

    fn requires(&self, id: TensorId) -> bool {
        self.node(id).requires_grad
    }

    // ---- leaves and accessors ----------------------------------------

    /// Insert an owned tensor as a leaf, keeping its `requires_grad` flag.
    pub fn leaf(&mut self, tensor: &Tensor) -> TensorId {
        self.push(
            tensor.shape.clone(),
            tensor.data.clone(),
            Op::Leaf,
            tensor.requires_grad,
            Vec::new(),
        )
    }

    /// A leaf that does not require gradients.
    pub fn constant(&mut self, data: Vec<f64>, shape: Vec<usize>) -> Result<TensorId> {
        let t = Tensor::new(data, shape)?;
        Ok(self.leaf(&t))
    }

    /// A gradient-requiring leaf.
    pub fn variable(&mut self, data: Vec<f64>, shape: Vec<usize>) -> Result<TensorId> {
        let t = Tensor::param(data, shape)?;
        Ok(self.leaf(&t))
    }

    pub fn scalar_constant(&mut self, value: f64) -> TensorId {
        self.push(vec![1], vec![value], Op::Leaf, false, Vec::new())
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.node(id).shape
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.node(id).data
    }

    /// The single element of a scalar node.
    ///
    /// # Panics
    /// If the node is not scalar; callers use this on ops defined to produce
    /// scalars.
    pub fn scalar_value(&self, id: TensorId) -> f64 {
        let node = self.node(id);
        assert_eq!(node.data.len(), 1, "scalar_value on non-scalar node");
        node.data[0]
    }

    /// Accumulated gradient of a node, if `backward` has reached it.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.node(id).grad.as_deref()
    }

    /// Detach a node into an owned [`Tensor`] (gradient included if present).
    pub fn detach(&self, id: TensorId) -> Tensor {
        let node = self.node(id);
        Tensor {
            shape: node.shape.clone(),
            data: node.data.clone(),
            grad: node.grad.clone(),
            requires_grad: node.requires_grad,
        }
    }

    // ---- elementwise and scalar ops ----------------------------------

    fn check_same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<()> {
        if self.node(a).shape != self.node(b).shape {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!(
                    "{:?} vs {:?}",
                    self.node(a).shape,
                    self.node(b).shape
                ),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        self.check_same_shape("add", lhs, rhs)?;
        let data = self
            .node(lhs)
            .data
            .iter()
            .zip(&self.node(rhs).data)
            .map(|(a, b)| a + b)
            .collect();
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push(self.node(lhs).shape.clone(), data, Op::Add { lhs, rhs }, rg, Vec::new()))
    }

    pub fn sub(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        self.check_same_shape("sub", lhs, rhs)?;
        let data = self
            .node(lhs)
            .data
            .iter()
            .zip(&self.node(rhs).data)
            .map(|(a, b)| a - b)
            .collect();
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push(self.node(lhs).shape.clone(), data, Op::Sub { lhs, rhs }, rg, Vec::new()))
    }

    /// Elementwise (Hadamard) product of equal-shaped tensors.
    pub fn mul(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        self.check_same_shape("mul", lhs, rhs)?;
        let data = self
            .node(lhs)
            .data
            .iter()
            .zip(&self.node(rhs).data)
            .map(|(a, b)| a * b)
            .collect();
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push(self.node(lhs).shape.clone(), data, Op::Mul { lhs, rhs }, rg, Vec::new()))
    }

    pub fn add_scalar(&mut self, input: TensorId, value: f64) -> TensorId {
        let data = self.node(input).data.iter().map(|x| x + value).collect();
        let rg = self.requires(input);
        self.push(self.node(input).shape.clone(), data, Op::AddScalar { input }, rg, Vec::new())
    }

    pub fn mul_scalar(&mut self, input: TensorId, factor: f64) -> TensorId {
        let data = self.node(input).data.iter().map(|x| x * factor).collect();
        let rg = self.requires(input);
        self.push(
            self.node(input).shape.clone(),
            data,
            Op::MulScalar { input, factor },
            rg,
            Vec::new(),
        )
    }

    /// `mul_scalar` with a deliberately skewed backward rule (the adjoint is
    /// additionally multiplied by `grad_factor`).
    ///
    /// This is a diagnostic for the gradient checker: with
    /// `grad_factor != 1.0` the analytic gradient is wrong by construction
    /// and [`gradient_check`] must report a failure. It has no other use.
    pub fn mul_scalar_skewed(
        &mut self,
        input: TensorId,
        factor: f64,
        grad_factor: f64,
    ) -> TensorId {
        let data = self.node(input).data.iter().map(|x| x * factor).collect();
        let rg = self.requires(input);
        self.push(
            self.node(input).shape.clone(),
            data,
            Op::MulScalarSkewed { input, factor, grad_factor },
            rg,
            Vec::new(),
        )
    }

    /// Add a row vector `[m]` to every row of a matrix `[n, m]` (the bias
    /// broadcast an affine layer needs).
    pub fn add_row(&mut self, matrix: TensorId, row: TensorId) -> Result<TensorId> {
        let mshape = self.node(matrix).shape.clone();
        let rshape = self.node(row).shape.clone();
        if mshape.len() != 2 || rshape.len() != 1 || mshape[1] != rshape[0] {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                detail: format!("matrix {mshape:?} vs row {rshape:?}"),
            });
        }
        let (n, m) = (mshape[0], mshape[1]);
        let mut data = self.node(matrix).data.clone();
        let rdata = &self.node(row).data;
        for i in 0..n {
            for j in 0..m {
                data[i * m + j] += rdata[j];
            }
        }
        let rg = self.requires(matrix) || self.requires(row);
        Ok(self.push(mshape, data, Op::AddRow { matrix, row }, rg, Vec::new()))
    }

    /// Row-major matrix product `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        let lshape = self.node(lhs).shape.clone();
        let rshape = self.node(rhs).shape.clone();
        if lshape.len() != 2 || rshape.len() != 2 || lshape[1] != rshape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                detail: format!("{lshape:?} x {rshape:?}"),
            });
        }
        let (m, k, n) = (lshape[0], lshape[1], rshape[1]);
        let mut data = vec![0.0; m * n];
        {
            let a = &self.node(lhs).data;
            let b = &self.node(rhs).data;
            for i in 0..m {
                for t in 0..k {
                    let a_it = a[i * k + t];
                    if a_it == 0.0 {
                        continue;
                    }
                    let brow = &b[t * n..(t + 1) * n];
                    let crow = &mut data[i * n..(i + 1) * n];
                    for j in 0..n {
                        crow[j] += a_it * brow[j];
                    }
                }
            }
        }
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push(vec![m, n], data, Op::MatMul { lhs, rhs, m, k, n }, rg, Vec::new()))
    }

    // ---- nonlinearities ------------------------------------------------

    /// `max(0, x)` elementwise; the gradient at the kink (`x == 0`) is `0`.
    pub fn relu(&mut self, input: TensorId) -> TensorId {
        let data = self.node(input).data.iter().map(|&x| num::relu(x)).collect();
        let rg = self.requires(input);
        self.push(self.node(input).shape.clone(), data, Op::Relu { input }, rg, Vec::new())
    }

    /// `ln(1 + e^x)` elementwise, overflow-stable.
    pub fn softplus(&mut self, input: TensorId) -> TensorId {
        let data = self.node(input).data.iter().map(|&x| num::softplus(x)).collect();
        let rg = self.requires(input);
        self.push(self.node(input).shape.clone(), data, Op::Softplus { input }, rg, Vec::new())
    }

    /// Natural log elementwise. Non-positive inputs produce IEEE NaN/-inf,
    /// which downstream finiteness checks reject.
    pub fn ln(&mut self, input: TensorId) -> TensorId {
        let data = self.node(input).data.iter().map(|&x| num::ln(x)).collect();
        let rg = self.requires(input);
        self.push(self.node(input).shape.clone(), data, Op::Ln { input }, rg, Vec::new())
    }

    pub fn exp(&mut self, input: TensorId) -> TensorId {
        let data = self.node(input).data.iter().map(|&x| num::exp(x)).collect();
        let rg = self.requires(input);
        self.push(self.node(input).shape.clone(), data, Op::Exp { input }, rg, Vec::new())
    }

    // ---- reductions and structure ---------------------------------------

    /// Sum of all elements, producing a scalar.
    pub fn sum(&mut self, input: TensorId) -> TensorId {
        let total: f64 = self.node(input).data.iter().sum();
        let rg = self.requires(input);
        self.push(vec![1], vec![total], Op::Sum { input }, rg, Vec::new())
    }

    /// Mean of all elements, producing a scalar.
    pub fn mean(&mut self, input: TensorId) -> TensorId {
        let n = self.node(input).data.len().max(1);
        let total: f64 = self.node(input).data.iter().sum();
        let rg = self.requires(input);
        self.push(vec![1], vec![total / n as f64], Op::Mean { input }, rg, Vec::new())
    }

    /// L2 norm over all elements. The gradient of the all-zero tensor is
    /// taken as `0` (same subgradient convention as `relu`).
    pub fn norm(&mut self, input: TensorId) -> TensorId {
        let sq: f64 = self.node(input).data.iter().map(|x| x * x).sum();
        let rg = self.requires(input);
        self.push(vec![1], vec![num::sqrt(sq)], Op::Norm { input }, rg, Vec::new())
    }

    /// Dot product of two equal-length vectors.
    pub fn dot(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        if self.node(lhs).shape.len() != 1 || self.node(rhs).shape.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "dot",
                detail: format!(
                    "requires vectors, got {:?} and {:?}",
                    self.node(lhs).shape,
                    self.node(rhs).shape
                ),
            });
        }
        self.check_same_shape("dot", lhs, rhs)?;
        let value: f64 = self
            .node(lhs)
            .data
            .iter()
            .zip(&self.node(rhs).data)
            .map(|(a, b)| a * b)
            .sum();
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push(vec![1], vec![value], Op::Dot { lhs, rhs }, rg, Vec::new()))
    }

    /// Cosine similarity of two equal-length vectors.
    ///
    /// A zero-norm operand is a hard [`Error::ZeroNorm`]; similarity of
    /// degenerate embeddings is undefined and must not be smoothed over.
    pub fn cosine(&mut self, lhs: TensorId, rhs: TensorId) -> Result<TensorId> {
        if self.node(lhs).shape.len() != 1 || self.node(rhs).shape.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "cosine",
                detail: format!(
                    "requires vectors, got {:?} and {:?}",
                    self.node(lhs).shape,
                    self.node(rhs).shape
                ),
            });
        }
        self.check_same_shape("cosine", lhs, rhs)?;
        let (mut dot, mut asq, mut bsq) = (0.0, 0.0, 0.0);
        for (a, b) in self.node(lhs).data.iter().zip(&self.node(rhs).data) {
            dot += a * b;
            asq += a * a;
            bsq += b * b;
        }
        let (na, nb) = (num::sqrt(asq), num::sqrt(bsq));
        if na == 0.0 || nb == 0.0 {
            return Err(Error::ZeroNorm { op: "cosine" });
        }
        let psi = dot / (na * nb);
        let rg = self.requires(lhs) || self.requires(rhs);
        Ok(self.push(vec![1], vec![psi], Op::Cosine { lhs, rhs }, rg, vec![na, nb, psi]))
    }

    /// Extract row `index` of a matrix as a vector.
    pub fn row(&mut self, input: TensorId, index: usize) -> Result<TensorId> {
        let shape = self.node(input).shape.clone();
        if shape.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "row",
                detail: format!("requires a matrix, got {shape:?}"),
            });
        }
        let (n, width) = (shape[0], shape[1]);
        if index >= n {
            return Err(Error::ShapeMismatch {
                op: "row",
                detail: format!("row {index} out of range for {n} rows"),
            });
        }
        let data = self.node(input).data[index * width..(index + 1) * width].to_vec();
        let rg = self.requires(input);
        Ok(self.push(vec![width], data, Op::Row { input, index, width }, rg, Vec::new()))
    }

    /// Elementwise sum of any number of equal-shaped tensors. Mostly used to
    /// accumulate lists of scalar loss terms in one node.
    pub fn sum_list(&mut self, inputs: &[TensorId]) -> Result<TensorId> {
        let first = *inputs.first().ok_or(Error::ShapeMismatch {
            op: "sum_list",
            detail: String::from("needs at least one input"),
        })?;
        for &other in &inputs[1..] {
            self.check_same_shape("sum_list", first, other)?;
        }
        let mut data = self.node(first).data.clone();
        for &other in &inputs[1..] {
            for (d, x) in data.iter_mut().zip(&self.node(other).data) {
                *d += x;
            }
        }
        let rg = inputs.iter().any(|&t| self.requires(t));
        Ok(self.push(
            self.node(first).shape.clone(),
            data,
            Op::SumList { inputs: inputs.to_vec() },
            rg,
            Vec::new(),
        ))
    }

    /// Sum of the elements `lo..hi` of a vector, producing a scalar.
    pub fn sum_range(&mut self, input: TensorId, lo: usize, hi: usize) -> Result<TensorId> {
        let shape = self.node(input).shape.clone();
        if shape.len() != 1 || lo >= hi || hi > shape[0] {
            return Err(Error::ShapeMismatch {
                op: "sum_range",
                detail: format!("range {lo}..{hi} on shape {shape:?}"),
            });
        }
        let value: f64 = self.node(input).data[lo..hi].iter().sum();
        let rg = self.requires(input);
        Ok(self.push(vec![1], vec![value], Op::SumRange { input, lo, hi }, rg, Vec::new()))
    }

    /// Repeat a scalar into a vector of length `n`.
    pub fn repeat(&mut self, input: TensorId, n: usize) -> Result<TensorId> {
        if self.node(input).data.len() != 1 || n == 0 {
            return Err(Error::ShapeMismatch {
                op: "repeat",
                detail: format!(
                    "requires a scalar and n >= 1, got shape {:?}, n = {n}",
                    self.node(input).shape
                ),
            });
        }
        let v = self.node(input).data[0];
        let rg = self.requires(input);
        Ok(self.push(vec![n], vec![v; n], Op::Repeat { input, n }, rg, Vec::new()))
    }

    // ---- fused softmax cross-entropy -------------------------------------

    fn softmax_stable(row: &[f64]) -> Vec<f64> {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = row.iter().map(|&x| num::exp(x - max)).collect();
        let denom: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= denom;
        }
        probs
    }

    fn cross_entropy_value(row: &[f64], label: usize) -> f64 {
        // ln(sum exp(x - max)) + max - x[label]; stable under large logits.
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse: f64 = row.iter().map(|&x| num::exp(x - max)).sum();
        num::ln(lse) + max - row[label]
    }

    /// Fused softmax + cross-entropy of a logit vector `[C]` against a
    /// 0-based class index; numerically stable via max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: TensorId, label: usize) -> Result<TensorId> {
        let shape = self.node(logits).shape.clone();
        if shape.len() != 1 || label >= shape[0] {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!("logits {shape:?}, label {label}"),
            });
        }
        let row = &self.node(logits).data;
        let value = Self::cross_entropy_value(row, label);
        let probs = Self::softmax_stable(row);
        let rg = self.requires(logits);
        Ok(self.push(vec![1], vec![value], Op::CrossEntropy { logits, label }, rg, probs))
    }

    /// Row-wise fused softmax cross-entropy: logits `[n, C]` and `n` 0-based
    /// labels produce the per-row loss vector `[n]`.
    pub fn softmax_cross_entropy_rows(
        &mut self,
        logits: TensorId,
        labels: &[usize],
    ) -> Result<TensorId> {
        let shape = self.node(logits).shape.clone();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy_rows",
                detail: format!("logits {shape:?} vs {} labels", labels.len()),
            });
        }
        let (n, c) = (shape[0], shape[1]);
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy_rows",
                detail: format!("label {bad} out of range for {c} classes"),
            });
        }
        let mut values = Vec::with_capacity(n);
        let mut saved = Vec::with_capacity(n * c);
        for (i, &label) in labels.iter().enumerate() {
            let row = &self.node(logits).data[i * c..(i + 1) * c];
            values.push(Self::cross_entropy_value(row, label));
            saved.extend(Self::softmax_stable(row));
        }
        let rg = self.requires(logits);
        Ok(self.push(
            vec![n],
            values,
            Op::CrossEntropyRows { logits, labels: labels.to_vec() },
            rg,
            saved,
        ))
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse-mode sweep from a scalar root.
    ///
    /// Adjoints are computed into fresh buffers and then *added* to each
    /// gradient-requiring node's persistent `grad`, so repeated calls
    /// accumulate additively. Every gradient-requiring leaf at or before the
    /// root ends up with a populated (possibly zero) gradient.
    pub fn backward(&mut self, root: TensorId) -> Result<()> {
        if self.node(root).data.len() != 1 {
            return Err(Error::NonScalarRoot {
                elements: self.node(root).data.len(),
            });
        }
        let mut adjoint: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adjoint[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(out_grad) = adjoint[i].take() else {
                // Gradient-requiring node not reached from the root: record a
                // zero gradient for leaves so read-back is uniform.
                if matches!(self.nodes[i].op, Op::Leaf) {
                    let len = self.nodes[i].data.len();
                    accumulate(self.nodes[i].grad.get_or_insert_with(|| vec![0.0; len]), &[]);
                }
                continue;
            };

            // Propagate to parents first, then persist this node's adjoint.
            let op = self.nodes[i].op.clone();
            self.propagate(&op, i, &out_grad, &mut adjoint)?;

            let node = &mut self.nodes[i];
            let len = node.data.len();
            accumulate(node.grad.get_or_insert_with(|| vec![0.0; len]), &out_grad);
        }
        Ok(())
    }

    fn propagate(
        &self,
        op: &Op,
        node_index: usize,
        out_grad: &[f64],
        adjoint: &mut [Option<Vec<f64>>],
    ) -> Result<()> {
        let this = &self.nodes[node_index];
        let send = |id: TensorId, contribution: Vec<f64>, adjoint: &mut [Option<Vec<f64>>]| {
            if !self.nodes[id.0].requires_grad {
                return;
            }
            let buf = adjoint[id.0]
                .get_or_insert_with(|| vec![0.0; self.nodes[id.0].data.len()]);
            accumulate(buf, &contribution);
        };

        match op {
            Op::Leaf => {}
            Op::AddScalar { input } => {
                send(*input, out_grad.to_vec(), adjoint);
            }
            Op::MulScalar { input, factor } => {
                send(*input, out_grad.iter().map(|g| g * factor).collect(), adjoint);
            }
            Op::MulScalarSkewed { input, factor, grad_factor } => {
                // Deliberately wrong when grad_factor != 1; see the op docs.
                send(
                    *input,
                    out_grad.iter().map(|g| g * factor * grad_factor).collect(),
                    adjoint,
                );
            }
            Op::Add { lhs, rhs } => {
                send(*lhs, out_grad.to_vec(), adjoint);
                send(*rhs, out_grad.to_vec(), adjoint);
            }
            Op::Sub { lhs, rhs } => {
                send(*lhs, out_grad.to_vec(), adjoint);
                send(*rhs, out_grad.iter().map(|g| -g).collect(), adjoint);
            }
            Op::Mul { lhs, rhs } => {
                let l = &self.nodes[lhs.0].data;
                let r = &self.nodes[rhs.0].data;
                send(*lhs, out_grad.iter().zip(r).map(|(g, b)| g * b).collect(), adjoint);
                send(*rhs, out_grad.iter().zip(l).map(|(g, a)| g * a).collect(), adjoint);
            }
            Op::AddRow { matrix, row } => {
                send(*matrix, out_grad.to_vec(), adjoint);
                let width = self.nodes[row.0].data.len();
                let rows = out_grad.len() / width;
                let mut rgrad = vec![0.0; width];
                for i in 0..rows {
                    for j in 0..width {
                        rgrad[j] += out_grad[i * width + j];
                    }
                }
                send(*row, rgrad, adjoint);
            }
            Op::MatMul { lhs, rhs, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let a = &self.nodes[lhs.0].data;
                let b = &self.nodes[rhs.0].data;
                if self.nodes[lhs.0].requires_grad {
                    // dA = G . B^T
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for t in 0..k {
                            let mut acc = 0.0;
                            let grow = &out_grad[i * n..(i + 1) * n];
                            let brow = &b[t * n..(t + 1) * n];
                            for j in 0..n {
                                acc += grow[j] * brow[j];
                            }
                            da[i * k + t] = acc;
                        }
                    }
                    send(*lhs, da, adjoint);
                }
                if self.nodes[rhs.0].requires_grad {
                    // dB = A^T . G
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for t in 0..k {
                            let a_it = a[i * k + t];
                            if a_it == 0.0 {
                                continue;
                            }
                            let grow = &out_grad[i * n..(i + 1) * n];
                            let drow = &mut db[t * n..(t + 1) * n];
                            for j in 0..n {
                                drow[j] += a_it * grow[j];
                            }
                        }
                    }
                    send(*rhs, db, adjoint);
                }
            }
            Op::Relu { input } => {
                let x = &self.nodes[input.0].data;
                send(
                    *input,
                    out_grad
                        .iter()
                        .zip(x)
                        .map(|(g, &xi)| if xi > 0.0 { *g } else { 0.0 })
                        .collect(),
                    adjoint,
                );
            }
            Op::Softplus { input } => {
                let x = &self.nodes[input.0].data;
                send(
                    *input,
                    out_grad.iter().zip(x).map(|(g, &xi)| g * num::sigmoid(xi)).collect(),
                    adjoint,
                );
            }
            Op::Ln { input } => {
                let x = &self.nodes[input.0].data;
                send(*input, out_grad.iter().zip(x).map(|(g, &xi)| g / xi).collect(), adjoint);
            }
            Op::Exp { input } => {
                // d e^x = e^x dx, reusing the forward output.
                let y = &this.data;
                send(*input, out_grad.iter().zip(y).map(|(g, &yi)| g * yi).collect(), adjoint);
            }
            Op::Sum { input } => {
                let g = out_grad[0];
                let len = self.nodes[input.0].data.len();
                send(*input, vec![g; len], adjoint);
            }
            Op::Mean { input } => {
                let len = self.nodes[input.0].data.len().max(1);
                let g = out_grad[0] / len as f64;
                send(*input, vec![g; len], adjoint);
            }
            Op::Norm { input } => {
                let out = this.data[0];
                let x = &self.nodes[input.0].data;
                let contribution = if out == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().map(|&xi| out_grad[0] * xi / out).collect()
                };
                send(*input, contribution, adjoint);
            }
            Op::Dot { lhs, rhs } => {
                let g = out_grad[0];
                let l = &self.nodes[lhs.0].data;
                let r = &self.nodes[rhs.0].data;
                send(*lhs, r.iter().map(|&b| g * b).collect(), adjoint);
                send(*rhs, l.iter().map(|&a| g * a).collect(), adjoint);
            }
            Op::Cosine { lhs, rhs } => {
                let g = out_grad[0];
                let (na, nb, psi) = (this.saved[0], this.saved[1], this.saved[2]);
                let a = &self.nodes[lhs.0].data;
                let b = &self.nodes[rhs.0].data;
                let cross = na * nb;
                send(
                    *lhs,
                    a.iter()
                        .zip(b)
                        .map(|(&ai, &bi)| g * (bi / cross - psi * ai / (na * na)))
                        .collect(),
                    adjoint,
                );
                send(
                    *rhs,
                    a.iter()
                        .zip(b)
                        .map(|(&ai, &bi)| g * (ai / cross - psi * bi / (nb * nb)))
                        .collect(),
                    adjoint,
                );
            }
            Op::Row { input, index, width } => {
                let mut full = vec![0.0; self.nodes[input.0].data.len()];
                full[index * width..(index + 1) * width].copy_from_slice(out_grad);
                send(*input, full, adjoint);
            }
            Op::SumList { inputs } => {
                for &input in inputs {
                    send(input, out_grad.to_vec(), adjoint);
                }
            }
            Op::SumRange { input, lo, hi } => {
                let mut full = vec![0.0; self.nodes[input.0].data.len()];
                for slot in &mut full[*lo..*hi] {
                    *slot = out_grad[0];
                }
                send(*input, full, adjoint);
            }
            Op::Repeat { input, n } => {
                let total: f64 = out_grad.iter().take(*n).sum();
                send(*input, vec![total], adjoint);
            }
            Op::CrossEntropy { logits, label } => {
                let g = out_grad[0];
                let probs = &this.saved;
                send(
                    *logits,
                    probs
                        .iter()
                        .enumerate()
                        .map(|(c, &p)| g * (p - if c == *label { 1.0 } else { 0.0 }))
                        .collect(),
                    adjoint,
                );
            }
            Op::CrossEntropyRows { logits, labels } => {
                let c = self.nodes[logits.0].shape[1];
                let mut full = vec![0.0; labels.len() * c];
                for (i, &label) in labels.iter().enumerate() {
                    let g = out_grad[i];
                    for j in 0..c {
                        let p = this.saved[i * c + j];
                        full[i * c + j] = g * (p - if j == label { 1.0 } else { 0.0 });
                    }
                }
                send(*logits, full, adjoint);
            }
        }
        Ok(())
    }

}

fn accumulate(target: &mut [f64], source: &[f64]) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += s;
    }
}

// ---- finite-difference gradient checking ---------------------------------

/// Worst coordinate of one checked parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamGradReport {
    pub param: usize,
    pub max_relative_error: f64,
    pub worst_coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Result of [`gradient_check`].
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamGradReport>,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Denominator floor for relative errors: below this scale the comparison is
/// effectively absolute, keeping finite-difference roundoff from flagging
/// near-zero gradients.
const REL_ERROR_SCALE_FLOOR: f64 = 1e-3;

/// Check the reverse-mode gradients of an arbitrary scalar-valued graph
/// builder against central finite differences.
///
/// `build` receives a fresh graph plus one leaf per entry of `params` and
/// must return a scalar root; it must be deterministic. Every coordinate of
/// every parameter is perturbed by `±step`, and the relative error uses
/// `|a - n| / max(|a|, |n|, 1e-3)`.
///
/// Functions with kinks (`relu`, the hinge) are only meaningfully checkable
/// when no kink argument lies within roughly `10 * step` of zero, since the
/// central difference straddles the kink there; callers choose inputs
/// accordingly.
///
/// Any non-finite loss or gradient is a hard error rather than a failed
/// comparison.
pub fn gradient_check<F>(
    params: &[Tensor],
    step: f64,
    tolerance: f64,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[TensorId]) -> Result<TensorId>,
{
    // Analytic pass.
    let mut graph = Graph::new();
    let ids: Vec<TensorId> = params
        .iter()
        .map(|p| {
            let mut as_param = p.clone();
            as_param.requires_grad = true;
            as_param.grad = None;
            graph.leaf(&as_param)
        })
        .collect();
    let root = build(&mut graph, &ids)?;
    if !graph.scalar_value(root).is_finite() {
        return Err(Error::NonFinite {
            context: String::from("gradient check loss value"),
        });
    }
    graph.backward(root)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| graph.grad(id).expect("leaf gradient populated").to_vec())
        .collect();

    // Numeric pass: rebuild the graph per perturbed coordinate.
    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<TensorId> = perturbed
            .iter()
            .map(|p| {
                let mut frozen = p.clone();
                frozen.requires_grad = false;
                frozen.grad = None;
                g.leaf(&frozen)
            })
            .collect();
        let root = build(&mut g, &ids)?;
        let v = g.scalar_value(root);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: String::from("gradient check finite-difference probe"),
            });
        }
        Ok(v)
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    let mut overall = 0.0_f64;
    for (pi, param) in params.iter().enumerate() {
        let mut worst = ParamGradReport {
            param: pi,
            max_relative_error: 0.0,
            worst_coordinate: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for ci in 0..param.data.len() {
            let original = work[pi].data[ci];
            work[pi].data[ci] = original + step;
            let up = eval(&work)?;
            work[pi].data[ci] = original - step;
            let down = eval(&work)?;
            work[pi].data[ci] = original;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic[pi][ci];
            if !a.is_finite() || !numeric.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("gradient check param {pi} coordinate {ci}"),
                });
            }
            let scale = a.abs().max(numeric.abs()).max(REL_ERROR_SCALE_FLOOR);
            let rel = (a - numeric).abs() / scale;
            if rel > worst.max_relative_error {
                worst.max_relative_error = rel;
                worst.worst_coordinate = ci;
                worst.analytic = a;
                worst.numeric = numeric;
            }
        }
        overall = overall.max(worst.max_relative_error);
        per_param.push(worst);
    }

    Ok(GradCheckReport {
        per_param,
        max_relative_error: overall,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecf(v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    #[test]
    fn tensors_and_graphs_are_send() {
        fn assert_send<T: Send>() {}
        assert_send::<Tensor>();
        assert_send::<Graph>();
    }

    #[test]
    fn tensor_rejects_mismatched_shape() {
        assert!(matches!(
            Tensor::new(vec![1.0, 2.0, 3.0], vec![2, 2]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn add_requires_equal_shapes() {
        let mut g = Graph::new();
        let a = g.constant(vecf(&[1.0, 2.0]), vec![2]).unwrap();
        let b = g.constant(vecf(&[1.0, 2.0, 3.0]), vec![3]).unwrap();
        assert!(matches!(g.add(a, b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn matmul_matches_hand_computation() {
        let mut g = Graph::new();
        let a = g.constant(vecf(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), vec![2, 3]).unwrap();
        let b = g.constant(vecf(&[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]), vec![3, 2]).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.shape(c), &[2, 2]);
        assert_eq!(g.data(c), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_backward_matches_hand_computation() {
        // f = sum(A . B); df/dA = ones . B^T, df/dB = A^T . ones.
        let mut g = Graph::new();
        let a = g.variable(vecf(&[1.0, 2.0, 3.0, 4.0]), vec![2, 2]).unwrap();
        let b = g.variable(vecf(&[5.0, 6.0, 7.0, 8.0]), vec![2, 2]).unwrap();
        let c = g.matmul(a, b).unwrap();
        let f = g.sum(c);
        g.backward(f).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[11.0, 15.0, 11.0, 15.0]);
        assert_eq!(g.grad(b).unwrap(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn relu_gradient_is_zero_at_kink() {
        let mut g = Graph::new();
        let x = g.variable(vecf(&[-1.0, 0.0, 2.0]), vec![3]).unwrap();
        let y = g.relu(x);
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert_eq!(g.data(y), &[0.0, 0.0, 2.0]);
        assert_eq!(g.grad(x).unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn softplus_value_and_slope() {
        let mut g = Graph::new();
        let x = g.variable(vecf(&[0.0, 2.0]), vec![2]).unwrap();
        let y = g.softplus(x);
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert!((g.data(y)[0] - core::f64::consts::LN_2).abs() < 1e-15);
        let slope_at_two = 1.0 / (1.0 + (-2.0_f64).exp());
        assert!((g.grad(x).unwrap()[1] - slope_at_two).abs() < 1e-12);
    }

    #[test]
    fn mean_gradient_is_uniform() {
        let mut g = Graph::new();
        let x = g.variable(vecf(&[1.0, 2.0, 3.0, 4.0]), vec![4]).unwrap();
        let m = g.mean(x);
        g.backward(m).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn cosine_of_a_vector_with_itself_is_one_with_zero_gradient() {
        let mut g = Graph::new();
        let a = g.variable(vecf(&[0.3, -1.2, 2.0]), vec![3]).unwrap();
        let b = g.variable(vecf(&[0.3, -1.2, 2.0]), vec![3]).unwrap();
        let c = g.cosine(a, b).unwrap();
        assert!((g.scalar_value(c) - 1.0).abs() < 1e-15);
        g.backward(c).unwrap();
        // At psi = 1 with identical inputs the two gradient terms cancel.
        for &gi in g.grad(a).unwrap() {
            assert!(gi.abs() < 1e-15);
        }
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        let mut g = Graph::new();
        let a = g.constant(vecf(&[1.0, 0.0]), vec![2]).unwrap();
        let b = g.constant(vecf(&[0.0, 5.0]), vec![2]).unwrap();
        let c = g.cosine(a, b).unwrap();
        assert_eq!(g.scalar_value(c), 0.0);
    }

    #[test]
    fn cosine_rejects_zero_norm() {
        let mut g = Graph::new();
        let a = g.constant(vecf(&[0.0, 0.0]), vec![2]).unwrap();
        let b = g.constant(vecf(&[1.0, 2.0]), vec![2]).unwrap();
        assert!(matches!(g.cosine(a, b), Err(Error::ZeroNorm { .. })));
    }

    #[test]
    fn row_extracts_and_scatters() {
        let mut g = Graph::new();
        let m = g.variable(vecf(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), vec![3, 2]).unwrap();
        let r = g.row(m, 1).unwrap();
        assert_eq!(g.data(r), &[3.0, 4.0]);
        let s = g.sum(r);
        g.backward(s).unwrap();
        assert_eq!(g.grad(m).unwrap(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn sum_range_takes_partial_span() {
        let mut g = Graph::new();
        let v = g.variable(vecf(&[1.0, 10.0, 100.0, 1000.0]), vec![4]).unwrap();
        let s = g.sum_range(v, 1, 3).unwrap();
        assert_eq!(g.scalar_value(s), 110.0);
        g.backward(s).unwrap();
        assert_eq!(g.grad(v).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn repeat_backward_sums_upstream() {
        let mut g = Graph::new();
        let v = g.variable(vecf(&[2.0]), vec![1]).unwrap();
        let r = g.repeat(v, 3).unwrap();
        let w = g.constant(vecf(&[1.0, 10.0, 100.0]), vec![3]).unwrap();
        let p = g.mul(r, w).unwrap();
        let s = g.sum(p);
        g.backward(s).unwrap();
        assert_eq!(g.grad(v).unwrap(), &[111.0]);
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_ln_c() {
        for c in [2usize, 3, 5, 8] {
            let mut g = Graph::new();
            let logits = g.variable(vec![0.7; c], vec![c]).unwrap();
            let loss = g.softmax_cross_entropy(logits, 1).unwrap();
            assert!(
                (g.scalar_value(loss) - (c as f64).ln()).abs() < 1e-12,
                "C = {c}"
            );
            g.backward(loss).unwrap();
            let grad = g.grad(logits).unwrap();
            for (j, &gj) in grad.iter().enumerate() {
                let expect = 1.0 / c as f64 - if j == 1 { 1.0 } else { 0.0 };
                assert!((gj - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_entropy_is_stable_under_large_logits() {
        let mut g = Graph::new();
        let logits = g.constant(vecf(&[1000.0, 1001.0, 999.0]), vec![3]).unwrap();
        let loss = g.softmax_cross_entropy(logits, 1).unwrap();
        assert!(g.scalar_value(loss).is_finite());
        assert!(g.scalar_value(loss) < 1.0);
    }

    #[test]
    fn cross_entropy_rows_matches_single_row_op() {
        let mut g = Graph::new();
        let logits = g
            .constant(vecf(&[0.1, -0.5, 2.0, 1.0, 1.0, -3.0]), vec![2, 3])
            .unwrap();
        let rows = g.softmax_cross_entropy_rows(logits, &[2, 0]).unwrap();
        let r0 = g.constant(vecf(&[0.1, -0.5, 2.0]), vec![3]).unwrap();
        let r1 = g.constant(vecf(&[1.0, 1.0, -3.0]), vec![3]).unwrap();
        let l0 = g.softmax_cross_entropy(r0, 2).unwrap();
        let l1 = g.softmax_cross_entropy(r1, 0).unwrap();
        assert!((g.data(rows)[0] - g.scalar_value(l0)).abs() < 1e-15);
        assert!((g.data(rows)[1] - g.scalar_value(l1)).abs() < 1e-15);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut g = Graph::new();
        let v = g.variable(vecf(&[1.0, 2.0]), vec![2]).unwrap();
        assert!(matches!(g.backward(v), Err(Error::NonScalarRoot { elements: 2 })));
    }

    #[test]
    fn repeated_backward_accumulates_additively() {
        let mut g = Graph::new();
        let x = g.variable(vecf(&[3.0, -1.0]), vec![2]).unwrap();
        let y = g.mul_scalar(x, 2.0);
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 2.0]);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.0, 4.0]);
    }

    #[test]
    fn shared_subgraph_accumulates_both_paths() {
        // f = sum(x * x) => df/dx = 2x via two Mul branches into one node.
        let mut g = Graph::new();
        let x = g.variable(vecf(&[1.5, -2.0]), vec![2]).unwrap();
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[3.0, -4.0]);
    }

    #[test]
    fn gradient_check_accepts_a_correct_composite() {
        let x = Tensor::param(vecf(&[0.4, -1.3, 0.9]), vec![3]).unwrap();
        let w = Tensor::param(vecf(&[1.1, 0.2, -0.7]), vec![3]).unwrap();
        let report = gradient_check(&[x, w], 1e-5, 1e-6, |g, ids| {
            let d = g.dot(ids[0], ids[1])?;
            let sp = g.softplus(d);
            let e = g.exp(sp);
            Ok(g.sum(e))
        })
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_relative_error);
    }

    #[test]
    fn gradient_check_rejects_a_corrupted_rule() {
        let x = Tensor::param(vecf(&[0.5, 1.5]), vec![2]).unwrap();
        let report = gradient_check(&[x], 1e-5, 1e-6, |g, ids| {
            let y = g.mul_scalar_skewed(ids[0], 3.0, 1.5);
            Ok(g.sum(y))
        })
        .unwrap();
        assert!(!report.passed());
        assert!(report.max_relative_error > 0.1);
    }

    #[test]
    fn gradient_check_flags_non_finite_losses() {
        let x = Tensor::param(vecf(&[-2.0]), vec![1]).unwrap();
        let err = gradient_check(&[x], 1e-5, 1e-6, |g, ids| {
            let y = g.ln(ids[0]);
            Ok(g.sum(y))
        });
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }
}
