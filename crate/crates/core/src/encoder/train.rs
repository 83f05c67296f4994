use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::EncoderConfig;
use super::loss::mlm_loss_and_grad;
use super::mask::{apply_mask, MaskedSequence};
use super::model::{backward, forward_trace, mlm_head_backward, mlm_logits_row};
use super::params::EncoderParams;
use crate::corpus::{Window, CLS_ID};
use crate::error::{Error, Result};
use crate::optim::{clip_global_norm, Sgd};
use crate::seed::derive_seed;

/// Sequences per parallel gradient chunk. Fixed so the reduction order never depends on thread count.
pub(crate) const GRAD_CHUNK: usize = 4;

/// Fixed-dimension summary of one window: the final `[CLS]` state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub window_id: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: EncoderParams,
    pub losses: Vec<EpochLoss>,
}

/// Masked-token loss of one sequence; accumulates its gradient into `grads`.
pub fn accumulate_mlm_grad(
    params: &EncoderParams,
    masked: &MaskedSequence,
    grads: &mut EncoderParams,
) -> Result<f64> {
    let trace = forward_trace(params, &masked.input_ids)?;
    let rows: Vec<_> = masked
        .positions
        .iter()
        .map(|&p| mlm_logits_row(params, trace.hidden.row(p)))
        .collect();
    let mut logits = Array2::zeros((rows.len(), params.arch.vocab_size));
    for (i, row) in rows.iter().enumerate() {
        logits.row_mut(i).assign(row);
    }
    let local: Vec<usize> = (0..rows.len()).collect();
    let (loss, d_logits) = mlm_loss_and_grad(logits.view(), &masked.targets, &local)?;
    let d_hidden = mlm_head_backward(params, trace.hidden.view(), &masked.positions, &d_logits, grads);
    backward(params, &trace, &d_hidden, grads);
    Ok(loss)
}

/// Mean loss and mean gradient over a batch, reduced in a fixed order.
pub fn batch_mlm_grad(params: &EncoderParams, batch: &[MaskedSequence]) -> Result<(f64, EncoderParams)> {
    let partials: Vec<Result<(f64, EncoderParams)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            for masked in chunk {
                loss += accumulate_mlm_grad(params, masked, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect();
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for partial in partials {
        let (l, g) = partial?;
        loss += l;
        total.add_scaled(1.0, &g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((loss / n, total))
}

pub(crate) fn with_cls(tokens: &[u32]) -> Vec<u32> {
    let mut ids = Vec::with_capacity(tokens.len() + 1);
    ids.push(CLS_ID);
    ids.extend_from_slice(tokens);
    ids
}

/// Pre-trains from random initialization with the masked-token objective.
pub fn train_mlm(windows: &[Window], config: &EncoderConfig) -> Result<PretrainOutcome> {
    let init = EncoderParams::init(config.architecture(), config.seed)?;
    train_mlm_from(init, windows, config)
}

/// Continues masked-token training from `params`.
pub fn train_mlm_from(
    mut params: EncoderParams,
    windows: &[Window],
    config: &EncoderConfig,
) -> Result<PretrainOutcome> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::invalid("no training windows"));
    }
    let mut optimizer = Sgd::new(config.learning_rate, config.momentum);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..windows.len()).collect();

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[1, epoch as u64]));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, batch_idx) in order.chunks(config.batch_size).enumerate() {
            let batch = batch_idx
                .iter()
                .map(|&i| {
                    let w = &windows[i];
                    let seed = derive_seed(config.seed, &[2, epoch as u64, w.window_id as u64]);
                    apply_mask(&w.token_ids, config.mask_fraction, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, mut grads) = batch_mlm_grad(&params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, value: loss });
            }
            if let Some(max_norm) = config.grad_clip {
                clip_global_norm(grads.tensors_mut().into_iter().map(|(_, t)| t).collect(), max_norm);
            }
            optimizer.step(
                params.tensors_mut().into_iter().map(|(_, t)| t).collect(),
                grads.tensors().into_iter().map(|(_, t)| t).collect(),
            );
            epoch_loss += loss * batch.len() as f64;
        }
        let mean = epoch_loss / windows.len() as f64;
        tracing::info!(epoch, loss = mean, "masked-token pre-training epoch");
        losses.push(EpochLoss { epoch, loss: mean });
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs,
            step: 0,
            value: f64::NAN,
        });
    }
    Ok(PretrainOutcome { params, losses })
}

/// `[CLS]` embedding of every window, order preserved, without masking.
pub fn embed_all(params: &EncoderParams, windows: &[Window]) -> Result<Vec<EmbeddingVector>> {
    windows
        .par_iter()
        .map(|w| {
            let trace = forward_trace(params, &with_cls(&w.token_ids))?;
            Ok(EmbeddingVector {
                window_id: w.window_id,
                values: trace.cls().to_vec(),
            })
        })
        .collect()
}
