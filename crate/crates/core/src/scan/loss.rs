//! SCAN objective: neighbor consistency plus a batch-entropy balance term.

use crate::error::{Error, Result};

/// Floor applied inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-ln <anchor, neighbor>`, the log-probability that both land in the same cluster.
pub fn consistency_loss(anchor: &[f64], neighbor: &[f64]) -> f64 {
    -dot(anchor, neighbor).max(LOG_CLAMP).ln()
}

/// `Σ P_k ln P_k` of the batch-mean assignment distribution.
///
/// This is the negated entropy: minimizing it pushes the batch toward
/// uniform cluster usage. Ranges over `[-ln k, 0]`.
pub fn entropy_term(mean_probs: &[f64]) -> f64 {
    mean_probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum()
}

/// Element-wise mean of the anchor probability vectors.
pub fn mean_distribution<'a>(probs: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for p in probs {
        if sum.is_empty() {
            sum = vec![0.0; p.len()];
        }
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
        count += 1;
    }
    sum.iter_mut().for_each(|s| *s /= count.max(1) as f64);
    sum
}

/// Mean consistency over pairs plus `lambda` times the entropy term of the mean anchor distribution.
pub fn scan_loss(pairs: &[(&[f64], &[f64])], lambda: f64) -> Result<f64> {
    Ok(scan_loss_and_grad(pairs, lambda)?.0)
}

/// Loss plus its gradient w.r.t. each pair's anchor and neighbor probabilities.
#[allow(clippy::type_complexity)]
pub fn scan_loss_and_grad(
    pairs: &[(&[f64], &[f64])],
    lambda: f64,
) -> Result<(f64, Vec<(Vec<f64>, Vec<f64>)>)> {
    if pairs.is_empty() {
        return Err(Error::invalid("SCAN loss needs at least one pair"));
    }
    let k = pairs[0].0.len();
    if pairs.iter().any(|(a, n)| a.len() != k || n.len() != k) {
        return Err(Error::invalid("probability vectors differ in length"));
    }
    let b = pairs.len() as f64;
    let mean = mean_distribution(pairs.iter().map(|p| p.0));
    let entropy_grad: Vec<f64> = mean
        .iter()
        .map(|&p| lambda * (p.max(LOG_CLAMP).ln() + 1.0) / b)
        .collect();

    let mut consistency = 0.0;
    let mut grads = Vec::with_capacity(pairs.len());
    for (anchor, neighbor) in pairs {
        let inner = dot(anchor, neighbor);
        consistency -= inner.max(LOG_CLAMP).ln();
        let (mut da, dn) = if inner > LOG_CLAMP {
            (
                neighbor.iter().map(|v| -v / (inner * b)).collect::<Vec<_>>(),
                anchor.iter().map(|v| -v / (inner * b)).collect::<Vec<_>>(),
            )
        } else {
            (vec![0.0; k], vec![0.0; k])
        };
        for (d, e) in da.iter_mut().zip(&entropy_grad) {
            *d += e;
        }
        grads.push((da, dn));
    }
    Ok((consistency / b + lambda * entropy_term(&mean), grads))
}

/// Pulls a gradient w.r.t. softmax probabilities back to the logits.
pub fn softmax_backward(probs: &[f64], d_probs: &[f64]) -> Vec<f64> {
    let inner = dot(probs, d_probs);
    probs.iter().zip(d_probs).map(|(p, d)| p * (d - inner)).collect()
}
