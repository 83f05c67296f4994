use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::head::{ClusterAssignment, ClusterHead};
use super::loss::{scan_loss, scan_loss_and_grad, softmax_backward};
use crate::corpus::Window;
use crate::encoder::{backward, forward_trace, with_cls, EncoderParams, EpochLoss, Trace, GRAD_CHUNK};
use crate::error::{Error, Result};
use crate::neighbors::NeighborGraph;
use crate::optim::{clip_global_norm, Sgd};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub k: usize,
    /// Weight of the entropy term.
    pub lambda: f64,
    pub epochs: usize,
    /// Step size of the clustering head.
    pub learning_rate: f64,
    /// Step size of the encoder; ignored when `update_encoder` is false.
    pub encoder_learning_rate: f64,
    pub update_encoder: bool,
    /// Initial epochs that train only the head on cached embeddings.
    pub head_warmup_epochs: usize,
    /// Independently initialized heads trained side by side.
    pub heads: usize,
    pub momentum: f64,
    pub grad_clip: Option<f64>,
    pub batch_size: usize,
    /// Neighbors drawn per anchor at every step.
    pub neighbors_per_anchor: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            k: 20,
            lambda: 2.0,
            epochs: 30,
            learning_rate: 0.5,
            encoder_learning_rate: 0.001,
            update_encoder: true,
            head_warmup_epochs: 20,
            heads: 5,
            momentum: 0.9,
            grad_clip: Some(5.0),
            batch_size: 128,
            neighbors_per_anchor: 1,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("need at least 2 clusters, got {}", self.k)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.batch_size == 0 || self.neighbors_per_anchor == 0 || self.heads == 0 {
            return Err(Error::invalid("batch size, neighbors per anchor and heads must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("learning rate must be positive and momentum in [0, 1)"));
        }
        Ok(())
    }
}

/// Sequences (with `[CLS]`) and the (anchor, neighbor) index pairs over them.
#[derive(Debug, Clone, Default)]
pub struct ScanBatch {
    pub sequences: Vec<Vec<u32>>,
    pub pairs: Vec<(usize, usize)>,
}

impl ScanBatch {
    pub fn push_pair(&mut self, anchor: &[u32], neighbor: &[u32]) {
        let a = self.sequences.len();
        self.sequences.push(with_cls(anchor));
        self.sequences.push(with_cls(neighbor));
        self.pairs.push((a, a + 1));
    }
}

#[derive(Debug, Clone)]
pub struct ScanGrads {
    pub encoder: EncoderParams,
    pub head: ClusterHead,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub params: EncoderParams,
    pub head: ClusterHead,
    /// Per-epoch training loss of the selected head.
    pub losses: Vec<EpochLoss>,
    /// Whole-graph SCAN loss of every trained head.
    pub head_losses: Vec<f64>,
    pub selected_head: usize,
    pub assignments: Vec<ClusterAssignment>,
}

fn batch_probs(params: &EncoderParams, head: &ClusterHead, batch: &ScanBatch) -> Result<(Vec<Trace>, Vec<Vec<f64>>)> {
    let traces = batch
        .sequences
        .par_iter()
        .map(|ids| forward_trace(params, ids))
        .collect::<Result<Vec<_>>>()?;
    let probs = traces.iter().map(|t| head.probs(t.cls())).collect();
    Ok((traces, probs))
}

/// SCAN loss of a batch, forward pass only.
pub fn scan_batch_loss(params: &EncoderParams, head: &ClusterHead, batch: &ScanBatch, lambda: f64) -> Result<f64> {
    let (_, probs) = batch_probs(params, head, batch)?;
    let pairs: Vec<(&[f64], &[f64])> = batch
        .pairs
        .iter()
        .map(|&(a, n)| (probs[a].as_slice(), probs[n].as_slice()))
        .collect();
    scan_loss(&pairs, lambda)
}

/// Loss, head gradient and per-sequence logit gradients given `[CLS]` states and their probabilities.
fn head_grad(
    head: &ClusterHead,
    cls: &[ArrayView1<'_, f64>],
    probs: &[Vec<f64>],
    index_pairs: &[(usize, usize)],
    lambda: f64,
) -> Result<(f64, ClusterHead, Vec<Array1<f64>>)> {
    let pairs: Vec<(&[f64], &[f64])> = index_pairs
        .iter()
        .map(|&(a, n)| (probs[a].as_slice(), probs[n].as_slice()))
        .collect();
    let (loss, pair_grads) = scan_loss_and_grad(&pairs, lambda)?;

    let k = head.k();
    let mut d_probs = vec![vec![0.0; k]; probs.len()];
    for (&(a, n), (da, dn)) in index_pairs.iter().zip(&pair_grads) {
        d_probs[a].iter_mut().zip(da).for_each(|(acc, v)| *acc += v);
        d_probs[n].iter_mut().zip(dn).for_each(|(acc, v)| *acc += v);
    }
    let d_logits: Vec<Array1<f64>> = probs
        .iter()
        .zip(&d_probs)
        .map(|(p, d)| Array1::from(softmax_backward(p, d)))
        .collect();

    let mut grad = ClusterHead::zeros(head.weight.nrows(), k);
    for (c, dl) in cls.iter().zip(&d_logits) {
        Zip::from(&mut grad.weight)
            .and_broadcast(&c.insert_axis(Axis(1)))
            .and_broadcast(&dl.view().insert_axis(Axis(0)))
            .for_each(|g, &c, &d| *g += c * d);
        let mut b = grad.bias.row_mut(0);
        b += dl;
    }
    Ok((loss, grad, d_logits))
}

/// SCAN loss of a batch and its gradient w.r.t. the head and (optionally) the encoder.
pub fn scan_batch_grad(
    params: &EncoderParams,
    head: &ClusterHead,
    batch: &ScanBatch,
    lambda: f64,
    with_encoder: bool,
) -> Result<(f64, ScanGrads)> {
    let (traces, probs) = batch_probs(params, head, batch)?;
    let cls: Vec<ArrayView1<'_, f64>> = traces.iter().map(Trace::cls).collect();
    let (loss, head_grad, d_logits) = head_grad(head, &cls, &probs, &batch.pairs, lambda)?;

    let mut encoder_grad = params.zeros_like();
    if with_encoder {
        let idx: Vec<usize> = (0..traces.len()).collect();
        let partials: Vec<EncoderParams> = idx
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut g = params.zeros_like();
                for &i in chunk {
                    let mut d_hidden = Array2::zeros(traces[i].hidden.raw_dim());
                    d_hidden.row_mut(0).assign(&head.weight.dot(&d_logits[i]));
                    backward(params, &traces[i], &d_hidden, &mut g);
                }
                g
            })
            .collect();
        for g in &partials {
            encoder_grad.add_scaled(1.0, g);
        }
    }
    Ok((
        loss,
        ScanGrads {
            encoder: encoder_grad,
            head: head_grad,
        },
    ))
}

fn cls_embeddings(params: &EncoderParams, windows: &[Window]) -> Result<HashMap<usize, Array1<f64>>> {
    windows
        .par_iter()
        .map(|w| Ok((w.window_id, forward_trace(params, &with_cls(&w.token_ids))?.cls().to_owned())))
        .collect()
}

/// SCAN loss of `head` over every (anchor, neighbor) edge of the graph.
pub fn graph_scan_loss(
    head: &ClusterHead,
    embeddings: &HashMap<usize, Array1<f64>>,
    graph: &NeighborGraph,
    lambda: f64,
) -> Result<f64> {
    let missing = |id: usize| Error::invalid(format!("no embedding for window {id}"));
    let mut probs: HashMap<usize, Vec<f64>> = HashMap::with_capacity(embeddings.len());
    for node in &graph.nodes {
        for &id in std::iter::once(&node.window_id).chain(&node.neighbors) {
            if !probs.contains_key(&id) {
                let e = embeddings.get(&id).ok_or_else(|| missing(id))?;
                probs.insert(id, head.probs(e.view()));
            }
        }
    }
    let pairs: Vec<(&[f64], &[f64])> = graph
        .nodes
        .iter()
        .flat_map(|node| {
            node.neighbors
                .iter()
                .map(|n| (probs[&node.window_id].as_slice(), probs[n].as_slice()))
        })
        .collect();
    scan_loss(&pairs, lambda)
}

/// Fine-tunes the encoder and `config.heads` fresh random clustering heads under the SCAN objective.
///
/// Anchors are the graph's nodes; each step pairs every anchor with
/// `neighbors_per_anchor` neighbors drawn uniformly from its list. The encoder
/// follows the summed loss of all heads. The head with the lowest SCAN loss
/// over the whole graph is kept and used to assign every window in `windows`.
pub fn fine_tune_scan(
    params: &EncoderParams,
    graph: &NeighborGraph,
    windows: &[Window],
    config: &ScanConfig,
) -> Result<ScanOutcome> {
    config.validate()?;
    let by_id: HashMap<usize, &Window> = windows.iter().map(|w| (w.window_id, w)).collect();
    let lookup = |id: usize| {
        by_id
            .get(&id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("neighbor graph references unknown window {id}")))
    };
    for node in &graph.nodes {
        lookup(node.window_id)?;
        for &n in &node.neighbors {
            lookup(n)?;
        }
    }

    let mut params = params.clone();
    let mut heads = (0..config.heads)
        .map(|h| ClusterHead::init(params.arch.embed_dim, config.k, derive_seed(config.seed, &[10, h as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut head_opts: Vec<Sgd> = (0..config.heads)
        .map(|_| Sgd::new(config.learning_rate, config.momentum))
        .collect();
    let mut encoder_opt = Sgd::new(config.encoder_learning_rate, config.momentum);
    let mut history: Vec<Vec<EpochLoss>> = vec![Vec::with_capacity(config.epochs); config.heads];
    let mut order: Vec<usize> = graph
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.neighbors.is_empty())
        .map(|(i, _)| i)
        .collect();
    let mut cache = if !config.update_encoder || config.head_warmup_epochs > 0 {
        Some(cls_embeddings(&params, windows)?)
    } else {
        None
    };

    for epoch in 0..config.epochs {
        let frozen = !config.update_encoder || epoch < config.head_warmup_epochs;
        if !frozen {
            cache = None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[11, epoch as u64]));
        order.shuffle(&mut rng);
        let mut epoch_loss = vec![0.0; config.heads];
        let mut weight = 0usize;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut pairs = Vec::with_capacity(chunk.len() * config.neighbors_per_anchor);
            let mut ids = Vec::with_capacity(2 * pairs.capacity());
            for &node_idx in chunk {
                let node = &graph.nodes[node_idx];
                for r in 0..config.neighbors_per_anchor {
                    let seed = derive_seed(config.seed, &[12, epoch as u64, node.window_id as u64, r as u64]);
                    let pick = ChaCha8Rng::seed_from_u64(seed).random_range(0..node.neighbors.len());
                    pairs.push((ids.len(), ids.len() + 1));
                    ids.push(node.window_id);
                    ids.push(node.neighbors[pick]);
                }
            }

            let traces = if frozen {
                Vec::new()
            } else {
                ids.par_iter()
                    .map(|&id| forward_trace(&params, &with_cls(&lookup(id)?.token_ids)))
                    .collect::<Result<Vec<_>>>()?
            };
            let cls: Vec<ArrayView1<'_, f64>> = match &cache {
                Some(cache) => ids.iter().map(|id| cache[id].view()).collect(),
                None => traces.iter().map(Trace::cls).collect(),
            };

            let mut d_cls = Array2::<f64>::zeros((ids.len(), params.arch.embed_dim));
            for (h, head) in heads.iter_mut().enumerate() {
                let probs: Vec<Vec<f64>> = cls.iter().map(|c| head.probs(c.view())).collect();
                let (loss, mut grad, d_logits) = head_grad(head, &cls, &probs, &pairs, config.lambda)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, step, value: loss });
                }
                if !frozen {
                    for (mut row, dl) in d_cls.rows_mut().into_iter().zip(&d_logits) {
                        row += &head.weight.dot(dl);
                    }
                }
                if let Some(max_norm) = config.grad_clip {
                    clip_global_norm(vec![&mut grad.weight, &mut grad.bias], max_norm);
                }
                head_opts[h].step(vec![&mut head.weight, &mut head.bias], vec![&grad.weight, &grad.bias]);
                epoch_loss[h] += loss * pairs.len() as f64;
            }

            if !frozen {
                let idx: Vec<usize> = (0..traces.len()).collect();
                let partials: Vec<EncoderParams> = idx
                    .par_chunks(GRAD_CHUNK)
                    .map(|chunk| {
                        let mut g = params.zeros_like();
                        for &i in chunk {
                            let mut d_hidden = Array2::zeros(traces[i].hidden.raw_dim());
                            d_hidden.row_mut(0).assign(&d_cls.row(i));
                            backward(&params, &traces[i], &d_hidden, &mut g);
                        }
                        g
                    })
                    .collect();
                let mut grad = params.zeros_like();
                for g in &partials {
                    grad.add_scaled(1.0, g);
                }
                drop(traces);
                if let Some(max_norm) = config.grad_clip {
                    clip_global_norm(grad.tensors_mut().into_iter().map(|(_, t)| t).collect(), max_norm);
                }
                encoder_opt.step(
                    params.tensors_mut().into_iter().map(|(_, t)| t).collect(),
                    grad.tensors().into_iter().map(|(_, t)| t).collect(),
                );
            }
            weight += pairs.len();
        }
        for (h, total) in epoch_loss.iter().enumerate() {
            history[h].push(EpochLoss {
                epoch,
                loss: total / weight.max(1) as f64,
            });
        }
        tracing::info!(epoch, loss = history[0][epoch].loss, "SCAN fine-tuning epoch");
    }

    let embeddings = match cache {
        Some(cache) => cache,
        None => cls_embeddings(&params, windows)?,
    };
    let head_losses = heads
        .iter()
        .map(|head| graph_scan_loss(head, &embeddings, graph, config.lambda))
        .collect::<Result<Vec<_>>>()?;
    let selected = head_losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let head = heads.swap_remove(selected);
    let assignments = windows
        .iter()
        .map(|w| ClusterAssignment::from_probs(w.window_id, head.probs(embeddings[&w.window_id].view())))
        .collect();
    Ok(ScanOutcome {
        params,
        head,
        losses: history.swap_remove(selected),
        head_losses,
        selected_head: selected,
        assignments,
    })
}

/// Cluster assignment of every window, order preserved.
pub fn assign_all(params: &EncoderParams, head: &ClusterHead, windows: &[Window]) -> Result<Vec<ClusterAssignment>> {
    if head.weight.nrows() != params.arch.embed_dim {
        return Err(Error::invalid("cluster head does not match encoder width"));
    }
    windows
        .par_iter()
        .map(|w| {
            let trace = forward_trace(params, &with_cls(&w.token_ids))?;
            Ok(ClusterAssignment::from_probs(w.window_id, head.probs(trace.cls())))
        })
        .collect()
}
