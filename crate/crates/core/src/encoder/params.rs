use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Architecture;
use crate::error::{Error, Result};
use crate::tensorfile::{self, NamedTensor};

/// Weights of one pre-norm transformer block. Biases and norm parameters are `1 × n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_gamma: Array2<f64>,
    pub ln1_beta: Array2<f64>,
    pub w_q: Array2<f64>,
    pub b_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub b_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub b_v: Array2<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array2<f64>,
    pub ln2_gamma: Array2<f64>,
    pub ln2_beta: Array2<f64>,
    pub w_ff1: Array2<f64>,
    pub b_ff1: Array2<f64>,
    pub w_ff2: Array2<f64>,
    pub b_ff2: Array2<f64>,
}

const LAYER_TENSOR_NAMES: [&str; 16] = [
    "ln1_gamma", "ln1_beta", "w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o", "ln2_gamma",
    "ln2_beta", "w_ff1", "b_ff1", "w_ff2", "b_ff2",
];

impl LayerParams {
    fn tensors(&self) -> [&Array2<f64>; 16] {
        [
            &self.ln1_gamma, &self.ln1_beta, &self.w_q, &self.b_q, &self.w_k, &self.b_k, &self.w_v,
            &self.b_v, &self.w_o, &self.b_o, &self.ln2_gamma, &self.ln2_beta, &self.w_ff1,
            &self.b_ff1, &self.w_ff2, &self.b_ff2,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Array2<f64>; 16] {
        [
            &mut self.ln1_gamma, &mut self.ln1_beta, &mut self.w_q, &mut self.b_q, &mut self.w_k,
            &mut self.b_k, &mut self.w_v, &mut self.b_v, &mut self.w_o, &mut self.b_o,
            &mut self.ln2_gamma, &mut self.ln2_beta, &mut self.w_ff1, &mut self.b_ff1,
            &mut self.w_ff2, &mut self.b_ff2,
        ]
    }
}

/// All encoder weights, including the masked-token output projection.
///
/// The same type doubles as a gradient accumulator (see [`EncoderParams::zeros_like`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub arch: Architecture,
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub final_gamma: Array2<f64>,
    pub final_beta: Array2<f64>,
    pub mlm_weight: Array2<f64>,
    pub mlm_bias: Array2<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, fan_in, fan_out, bound)
}

impl EncoderParams {
    /// Random initialization, deterministic in `seed`.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = arch.embed_dim;
        let f = arch.feedforward_dim;
        let v = arch.vocab_size;
        let emb_bound = 3f64.sqrt() * 0.5;
        let token_embedding = uniform(&mut rng, v, d, emb_bound);
        let position_embedding = uniform(&mut rng, arch.max_seq_len, d, emb_bound);
        let layers = (0..arch.num_layers)
            .map(|_| LayerParams {
                ln1_gamma: Array2::ones((1, d)),
                ln1_beta: Array2::zeros((1, d)),
                w_q: xavier(&mut rng, d, d),
                b_q: Array2::zeros((1, d)),
                w_k: xavier(&mut rng, d, d),
                b_k: Array2::zeros((1, d)),
                w_v: xavier(&mut rng, d, d),
                b_v: Array2::zeros((1, d)),
                w_o: xavier(&mut rng, d, d),
                b_o: Array2::zeros((1, d)),
                ln2_gamma: Array2::ones((1, d)),
                ln2_beta: Array2::zeros((1, d)),
                w_ff1: xavier(&mut rng, d, f),
                b_ff1: Array2::zeros((1, f)),
                w_ff2: xavier(&mut rng, f, d),
                b_ff2: Array2::zeros((1, d)),
            })
            .collect();
        Ok(Self {
            arch,
            token_embedding,
            position_embedding,
            layers,
            final_gamma: Array2::ones((1, d)),
            final_beta: Array2::zeros((1, d)),
            mlm_weight: xavier(&mut rng, d, v),
            mlm_bias: Array2::zeros((1, v)),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.1.fill(0.0);
        }
        out
    }

    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("token_embedding".to_string(), &self.token_embedding),
            ("position_embedding".to_string(), &self.position_embedding),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_TENSOR_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_gamma".to_string(), &self.final_gamma));
        out.push(("final_beta".to_string(), &self.final_beta));
        out.push(("mlm_weight".to_string(), &self.mlm_weight));
        out.push(("mlm_bias".to_string(), &self.mlm_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![
            ("token_embedding".to_string(), &mut self.token_embedding),
            ("position_embedding".to_string(), &mut self.position_embedding),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in LAYER_TENSOR_NAMES.iter().zip(layer.tensors_mut()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_gamma".to_string(), &mut self.final_gamma));
        out.push(("final_beta".to_string(), &mut self.final_beta));
        out.push(("mlm_weight".to_string(), &mut self.mlm_weight));
        out.push(("mlm_bias".to_string(), &mut self.mlm_bias));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(alpha, src);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, t) in self.tensors_mut() {
            *t *= alpha;
        }
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn to_named_tensors(&self) -> Vec<NamedTensor> {
        self.tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor::new(name, t.shape().to_vec(), t.iter().copied().collect()))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::json!({ "kind": "encoder", "architecture": self.arch });
        tensorfile::encode(&meta, &self.to_named_tensors())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, tensors) = tensorfile::decode(bytes)?;
        if meta.get("kind").and_then(|k| k.as_str()) != Some("encoder") {
            return Err(Error::Format {
                what: "encoder file",
                detail: "metadata kind is not 'encoder'".into(),
            });
        }
        let arch: Architecture = serde_json::from_value(meta["architecture"].clone())?;
        let mut params = Self::init(arch, 0)?;
        let slots = params.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Format {
                what: "encoder file",
                detail: format!("expected {} tensors, found {}", slots.len(), tensors.len()),
            });
        }
        for ((name, slot), tensor) in slots.into_iter().zip(tensors) {
            if name != tensor.name || slot.shape() != tensor.shape.as_slice() {
                return Err(Error::Format {
                    what: "encoder file",
                    detail: format!("tensor '{}' does not match expected '{name}'", tensor.name),
                });
            }
            slot.as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&tensor.data);
        }
        Ok(params)
    }
}
