//! The trainable model: an MLP encoder producing embeddings, plus a small
//! classifier head producing logits.
//!
//! The encoder maps `[n, input_dim]` features through hidden ReLU layers to
//! `[n, embed_dim]` embeddings. Embeddings are *not* normalized at the model
//! boundary: the contrastive loss uses cosine similarity, which supplies its
//! own scale invariance, and the raw coordinates stay exportable. The
//! classifier is two linear layers with a ReLU between them.
//!
//! Inference (`encode`, `predict`) runs through the same graph ops as
//! training forward passes, so a value computed during training and the same
//! value recomputed from a reloaded checkpoint agree bit-for-bit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Graph, Tensor, TensorId};
use crate::error::{Error, Result};

/// Layer widths of a model.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Hidden widths of the encoder; may be empty for a single linear map.
    pub encoder_hidden: Vec<usize>,
    pub embed_dim: usize,
    /// Width of the classifier's intermediate layer.
    pub classifier_hidden: usize,
    pub n_classes: usize,
}

impl ModelConfig {
    /// Default geometry for the given data: two hidden layers of 64, a
    /// 16-dimensional embedding, and a classifier as wide as the embedding.
    pub fn for_data(input_dim: usize, n_classes: usize) -> Self {
        ModelConfig {
            input_dim,
            encoder_hidden: vec![64, 64],
            embed_dim: 16,
            classifier_hidden: 16,
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embed_dim == 0 || self.classifier_hidden == 0 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "zero-width layer: input {}, embed {}, classifier hidden {}",
                    self.input_dim, self.embed_dim, self.classifier_hidden
                ),
            });
        }
        if self.encoder_hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig {
                detail: format!("zero-width encoder hidden layer in {:?}", self.encoder_hidden),
            });
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig {
                detail: format!("model needs at least 2 classes, got {}", self.n_classes),
            });
        }
        Ok(())
    }
}

/// One affine layer: `y = x W + b` with `W` row-major `[fan_in, fan_out]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Uniform fan-in initialization: weights and bias drawn from
    /// `U[-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    fn init<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let weight_data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let bias_data = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
        Ok(Linear {
            weight: Tensor::param(weight_data, vec![fan_in, fan_out])?,
            bias: Tensor::param(bias_data, vec![fan_out])?,
        })
    }

    fn fan_in(&self) -> usize {
        self.weight.shape[0]
    }

    fn fan_out(&self) -> usize {
        self.weight.shape[1]
    }
}

/// Graph-side handles of one inserted model: `(weight, bias)` per layer.
#[derive(Debug, Clone)]
pub struct ModelNodes {
    encoder: Vec<(TensorId, TensorId)>,
    classifier: Vec<(TensorId, TensorId)>,
}

impl ModelNodes {
    /// All leaves in the same order as [`Model::parameters`].
    pub fn leaves(&self) -> Vec<TensorId> {
        self.encoder
            .iter()
            .chain(&self.classifier)
            .flat_map(|&(w, b)| [w, b])
            .collect()
    }
}

/// Encoder + classifier with their configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Model {
    config: ModelConfig,
    encoder: Vec<Linear>,
    classifier: Vec<Linear>,
}

impl Model {
    /// Build a model with seeded uniform fan-in initialization.
    pub fn init<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut encoder = Vec::new();
        let mut width = config.input_dim;
        for &hidden in &config.encoder_hidden {
            encoder.push(Linear::init(width, hidden, rng)?);
            width = hidden;
        }
        encoder.push(Linear::init(width, config.embed_dim, rng)?);

        let classifier = vec![
            Linear::init(config.embed_dim, config.classifier_hidden, rng)?,
            Linear::init(config.classifier_hidden, config.n_classes, rng)?,
        ];
        Ok(Model {
            config,
            encoder,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Verify that the stored layer shapes are mutually consistent and match
    /// the configuration (a reloaded checkpoint may not be).
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mut expected = self.config.input_dim;
        let widths: Vec<usize> = self
            .config
            .encoder_hidden
            .iter()
            .copied()
            .chain([self.config.embed_dim])
            .collect();
        if self.encoder.len() != widths.len() || self.classifier.len() != 2 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "layer count mismatch: encoder {} (want {}), classifier {} (want 2)",
                    self.encoder.len(),
                    widths.len(),
                    self.classifier.len()
                ),
            });
        }
        for (layer, &want_out) in self.encoder.iter().chain(&self.classifier).zip(
            widths
                .iter()
                .chain([self.config.classifier_hidden, self.config.n_classes].iter()),
        ) {
            if layer.fan_in() != expected
                || layer.fan_out() != want_out
                || layer.bias.shape != vec![want_out]
                || layer.weight.numel() != expected * want_out
            {
                return Err(Error::InvalidConfig {
                    detail: format!(
                        "layer shape mismatch: weight {:?}, bias {:?}, expected [{expected}, {want_out}]",
                        layer.weight.shape, layer.bias.shape
                    ),
                });
            }
            expected = want_out;
        }
        Ok(())
    }

    /// All parameter tensors in optimization order: encoder layers then
    /// classifier layers, weight before bias.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.encoder
            .iter()
            .chain(&self.classifier)
            .flat_map(|layer| [&layer.weight, &layer.bias])
            .collect()
    }

    /// Mutable view of the parameters, in the same order as
    /// [`Model::parameters`].
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.encoder
            .iter_mut()
            .chain(self.classifier.iter_mut())
            .flat_map(|layer| [&mut layer.weight, &mut layer.bias])
            .collect()
    }

    /// Total scalar parameter count.
    pub fn n_parameters(&self) -> usize {
        self.parameters().iter().map(|t| t.numel()).sum()
    }

    /// Insert every parameter as a graph leaf (gradient-requiring iff
    /// `trainable`), in [`Model::parameters`] order.
    pub fn graph_leaves(&self, graph: &mut Graph, trainable: bool) -> ModelNodes {
        let mut insert = |layer: &Linear| {
            let mut weight = layer.weight.clone();
            let mut bias = layer.bias.clone();
            weight.requires_grad = trainable;
            bias.requires_grad = trainable;
            weight.grad = None;
            bias.grad = None;
            (graph.leaf(&weight), graph.leaf(&bias))
        };
        ModelNodes {
            encoder: self.encoder.iter().map(&mut insert).collect(),
            classifier: self.classifier.iter().map(&mut insert).collect(),
        }
    }

    /// Encoder forward pass: `[n, input_dim] -> [n, embed_dim]`, ReLU between
    /// layers, no activation after the final embedding layer.
    pub fn encode_on(
        &self,
        graph: &mut Graph,
        nodes: &ModelNodes,
        features: TensorId,
    ) -> Result<TensorId> {
        let mut x = features;
        let last = nodes.encoder.len() - 1;
        for (i, &(w, b)) in nodes.encoder.iter().enumerate() {
            let affine = graph.matmul(x, w)?;
            x = graph.add_row(affine, b)?;
            if i < last {
                x = graph.relu(x);
            }
        }
        Ok(x)
    }

    /// Classifier forward pass: `[n, embed_dim] -> [n, n_classes]` logits.
    pub fn classify_on(
        &self,
        graph: &mut Graph,
        nodes: &ModelNodes,
        embeddings: TensorId,
    ) -> Result<TensorId> {
        let (w1, b1) = nodes.classifier[0];
        let (w2, b2) = nodes.classifier[1];
        let affine = graph.matmul(embeddings, w1)?;
        let hidden = graph.add_row(affine, b1)?;
        let active = graph.relu(hidden);
        let out = graph.matmul(active, w2)?;
        graph.add_row(out, b2)
    }

    fn forward_values(&self, features: &[f64], rows: usize, with_logits: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        if rows == 0 || features.len() != rows * self.config.input_dim {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: format!(
                    "{} feature values for {rows} rows of width {}",
                    features.len(),
                    self.config.input_dim
                ),
            });
        }
        let mut graph = Graph::new();
        let nodes = self.graph_leaves(&mut graph, false);
        let x = graph.constant(features.to_vec(), vec![rows, self.config.input_dim])?;
        let z = self.encode_on(&mut graph, &nodes, x)?;
        let z_values = graph.data(z).to_vec();
        let logits = if with_logits {
            let v = self.classify_on(&mut graph, &nodes, z)?;
            graph.data(v).to_vec()
        } else {
            Vec::new()
        };
        Ok((z_values, logits))
    }

    /// Embeddings of `rows` feature rows, flat `[n * embed_dim]`.
    pub fn encode(&self, features: &[f64], rows: usize) -> Result<Vec<f64>> {
        Ok(self.forward_values(features, rows, false)?.0)
    }

    /// Logits of `rows` feature rows, flat `[n * n_classes]`.
    pub fn logits(&self, features: &[f64], rows: usize) -> Result<Vec<f64>> {
        Ok(self.forward_values(features, rows, true)?.1)
    }

    /// Predicted 1-based ranks: argmax of the logits, ties broken toward the
    /// lower rank.
    pub fn predict(&self, features: &[f64], rows: usize) -> Result<Vec<usize>> {
        let logits = self.logits(features, rows)?;
        let c = self.config.n_classes;
        Ok((0..rows)
            .map(|i| argmax_lowest(&logits[i * c..(i + 1) * c]) + 1)
            .collect())
    }
}

/// Index of the largest value; the earliest index wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            input_dim: 2,
            encoder_hidden: vec![3],
            embed_dim: 2,
            classifier_hidden: 2,
            n_classes: 3,
        }
    }

    #[test]
    fn init_respects_fan_in_bounds_and_seed() {
        let model = Model::init(ModelConfig::for_data(8, 5), &mut rng(42)).unwrap();
        for layer in model.encoder.iter().chain(&model.classifier) {
            let bound = 1.0 / (layer.fan_in() as f64).sqrt();
            for &w in layer.weight.data.iter().chain(&layer.bias.data) {
                assert!(w.abs() <= bound, "weight {w} beyond bound {bound}");
            }
        }
        let again = Model::init(ModelConfig::for_data(8, 5), &mut rng(42)).unwrap();
        assert_eq!(model, again);
        let other = Model::init(ModelConfig::for_data(8, 5), &mut rng(43)).unwrap();
        assert_ne!(model, other);
    }

    #[test]
    fn parameter_count_matches_geometry() {
        let model = Model::init(tiny_config(), &mut rng(0)).unwrap();
        // Encoder 2x3 + 3 and 3x2 + 2; classifier 2x2 + 2 and 2x3 + 3.
        assert_eq!(model.n_parameters(), 6 + 3 + 6 + 2 + 4 + 2 + 6 + 3);
        assert_eq!(model.parameters().len(), 8);
    }

    #[test]
    fn zeroed_weights_produce_zero_embeddings_and_lowest_rank() {
        let mut model = Model::init(tiny_config(), &mut rng(1)).unwrap();
        for p in model.parameters_mut() {
            p.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let z = model.encode(&[1.0, -2.0, 0.5, 3.0], 2).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        // All logits tie at zero; ties resolve to the lowest rank.
        assert_eq!(model.predict(&[1.0, -2.0], 1).unwrap(), vec![1]);
    }

    #[test]
    fn single_linear_encoder_with_identity_weights_is_identity() {
        let mut model = Model::init(
            ModelConfig {
                input_dim: 2,
                encoder_hidden: vec![],
                embed_dim: 2,
                classifier_hidden: 2,
                n_classes: 2,
            },
            &mut rng(2),
        )
        .unwrap();
        model.encoder[0].weight.data = vec![1.0, 0.0, 0.0, 1.0];
        model.encoder[0].bias.data = vec![0.0, 0.0];
        let z = model.encode(&[0.25, -1.5, 3.0, 0.125], 2).unwrap();
        assert_eq!(z, vec![0.25, -1.5, 3.0, 0.125]);
    }

    #[test]
    fn encoder_matches_hand_computed_affine_chain() {
        let mut model = Model::init(tiny_config(), &mut rng(3)).unwrap();
        model.encoder[0].weight.data = vec![1.0, 0.0, 2.0, 0.5, -1.0, 1.0]; // [2,3]
        model.encoder[0].bias.data = vec![0.1, 0.0, -0.2];
        model.encoder[1].weight.data = vec![1.0, 0.5, 0.0, 1.0, -1.0, 0.0]; // [3,2]
        model.encoder[1].bias.data = vec![0.0, 1.0];
        // x = [1, 2]: affine1 = [1*1+2*0.5 + 0.1, -2 + 0, 2+2 - 0.2] = [2.1, -2.0, 3.8]
        // relu -> [2.1, 0, 3.8]; affine2 = [2.1 - 3.8, 1.05 + 1] = [-1.7, 2.05].
        let z = model.encode(&[1.0, 2.0], 1).unwrap();
        assert!((z[0] - -1.7).abs() < 1e-12);
        assert!((z[1] - 2.05).abs() < 1e-12);
    }

    #[test]
    fn prediction_breaks_ties_toward_lower_rank() {
        assert_eq!(argmax_lowest(&[0.3, 0.9, 0.9]), 1);
        assert_eq!(argmax_lowest(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[-1.0, -0.5, -0.6]), 1);
    }

    #[test]
    fn graph_and_convenience_paths_agree_bitwise() {
        let model = Model::init(ModelConfig::for_data(4, 3), &mut rng(9)).unwrap();
        let features: Vec<f64> = (0..12).map(|i| (i as f64) * 0.37 - 2.0).collect();

        let mut graph = Graph::new();
        let nodes = model.graph_leaves(&mut graph, true);
        let x = graph.constant(features.clone(), vec![3, 4]).unwrap();
        let z = model.encode_on(&mut graph, &nodes, x).unwrap();
        let v = model.classify_on(&mut graph, &nodes, z).unwrap();

        assert_eq!(graph.data(z), model.encode(&features, 3).unwrap().as_slice());
        assert_eq!(graph.data(v), model.logits(&features, 3).unwrap().as_slice());
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let model = Model::init(ModelConfig::for_data(6, 4), &mut rng(17)).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let reloaded: Model = serde_json::from_str(&json).unwrap();
        reloaded.validate().unwrap();
        assert_eq!(model, reloaded);
        let features: Vec<f64> = (0..18).map(|i| ((i * 7 % 11) as f64) * 0.3 - 1.5).collect();
        assert_eq!(
            model.encode(&features, 3).unwrap(),
            reloaded.encode(&features, 3).unwrap()
        );
    }

    #[test]
    fn validate_rejects_inconsistent_layers() {
        let mut model = Model::init(tiny_config(), &mut rng(5)).unwrap();
        model.encoder[0].weight = Tensor::param(vec![0.0; 8], vec![2, 4]).unwrap();
        assert!(model.validate().is_err());
    }
}
