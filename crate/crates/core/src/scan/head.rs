use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::softmax;
use crate::encoder::{forward_trace, with_cls, EncoderParams};
use crate::error::{Error, Result};
use crate::tensorfile::{self, NamedTensor};

/// Linear clustering head on the `[CLS]` state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHead {
    /// `embed_dim × k`
    pub weight: Array2<f64>,
    /// `1 × k`
    pub bias: Array2<f64>,
}

impl ClusterHead {
    /// Random weights, deterministic in `seed`.
    pub fn init(embed_dim: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 clusters, got {k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (6.0 / (embed_dim + k) as f64).sqrt();
        Ok(Self {
            weight: Array2::from_shape_simple_fn((embed_dim, k), || rng.random_range(-bound..bound)),
            bias: Array2::zeros((1, k)),
        })
    }

    pub fn zeros(embed_dim: usize, k: usize) -> Self {
        Self {
            weight: Array2::zeros((embed_dim, k)),
            bias: Array2::zeros((1, k)),
        }
    }

    pub fn k(&self) -> usize {
        self.weight.ncols()
    }

    pub fn logits(&self, cls: ArrayView1<'_, f64>) -> Vec<f64> {
        (cls.dot(&self.weight) + &self.bias.row(0)).to_vec()
    }

    pub fn probs(&self, cls: ArrayView1<'_, f64>) -> Vec<f64> {
        softmax(&self.logits(cls))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::json!({ "kind": "cluster_head", "k": self.k() });
        tensorfile::encode(
            &meta,
            &[
                NamedTensor::new("weight", self.weight.shape().to_vec(), self.weight.iter().copied().collect()),
                NamedTensor::new("bias", self.bias.shape().to_vec(), self.bias.iter().copied().collect()),
            ],
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, tensors) = tensorfile::decode(bytes)?;
        let bad = |detail: &str| Error::Format {
            what: "cluster head file",
            detail: detail.to_string(),
        };
        if meta.get("kind").and_then(|k| k.as_str()) != Some("cluster_head") {
            return Err(bad("metadata kind is not 'cluster_head'"));
        }
        let [weight, bias]: [NamedTensor; 2] = tensors.try_into().map_err(|_| bad("expected 2 tensors"))?;
        let to_array = |t: NamedTensor| {
            let [r, c]: [usize; 2] = t.shape.try_into().map_err(|_| bad("tensor is not 2-D"))?;
            Array2::from_shape_vec((r, c), t.data).map_err(|_| bad("shape mismatch"))
        };
        let head = Self {
            weight: to_array(weight)?,
            bias: to_array(bias)?,
        };
        if head.bias.dim() != (1, head.k()) {
            return Err(bad("bias shape does not match weight"));
        }
        Ok(head)
    }
}

/// Per-window soft cluster assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub window_id: usize,
    pub cluster: usize,
    pub confidence: f64,
    pub probs: Vec<f64>,
}

impl ClusterAssignment {
    /// Argmax (lowest index on ties) and its probability.
    pub fn from_probs(window_id: usize, probs: Vec<f64>) -> Self {
        let (cluster, confidence) = probs
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best });
        Self {
            window_id,
            cluster,
            confidence,
            probs,
        }
    }
}

/// Softmax over the head's logits on the window's `[CLS]` state.
pub fn cluster_probs(params: &EncoderParams, head: &ClusterHead, token_ids: &[u32]) -> Result<Vec<f64>> {
    if head.weight.nrows() != params.arch.embed_dim {
        return Err(Error::invalid("cluster head does not match encoder width"));
    }
    let trace = forward_trace(params, &with_cls(token_ids))?;
    Ok(head.probs(trace.cls()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Architecture;

    fn params() -> EncoderParams {
        EncoderParams::init(
            Architecture {
                vocab_size: 10,
                embed_dim: 8,
                num_layers: 1,
                num_heads: 2,
                feedforward_dim: 16,
                max_seq_len: 6,
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn zero_head_is_uniform() {
        let probs = cluster_probs(&params(), &ClusterHead::zeros(8, 5), &[4, 5, 6]).unwrap();
        assert!(probs.iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn random_head_is_normalized_and_stable() {
        let head = ClusterHead::init(8, 4, 2).unwrap();
        let a = cluster_probs(&params(), &head, &[4, 9, 6, 7]).unwrap();
        let b = cluster_probs(&params(), &head, &[4, 9, 6, 7]).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a, b);
        let ca = ClusterAssignment::from_probs(0, a);
        assert_eq!(ca.cluster, ClusterAssignment::from_probs(0, b).cluster);
    }

    #[test]
    fn head_needs_two_clusters() {
        assert!(ClusterHead::init(8, 1, 0).is_err());
    }

    #[test]
    fn head_round_trips() {
        let head = ClusterHead::init(8, 3, 9).unwrap();
        assert_eq!(ClusterHead::from_bytes(&head.to_bytes()).unwrap(), head);
    }
}
