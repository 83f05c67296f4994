//! Finite-difference gradient checks shared by the test targets.

use pdl_core::encoder::{accumulate_mlm_grad, apply_mask, forward, mlm_loss, Architecture, EncoderParams};
use pdl_core::scan::{scan_batch_grad, scan_batch_loss, ClusterHead, ScanBatch};

pub fn tiny_arch() -> Architecture {
    Architecture {
        vocab_size: 12,
        embed_dim: 8,
        num_layers: 2,
        num_heads: 2,
        feedforward_dim: 32,
        max_seq_len: 6,
    }
}

/// Norm-wise relative error of a parameter group.
///
/// Groups whose true gradient is identically zero (the key bias: it shifts a
/// whole score row, which softmax ignores) only carry finite-difference noise,
/// so below an absolute norm of 1e-7 the absolute difference is returned.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-7 { diff } else { diff / scale }
}

const EPS: f64 = 1e-5;

fn numeric_grad(params: &EncoderParams, idx: usize, loss_at: impl Fn(&EncoderParams) -> f64) -> Vec<f64> {
    let len = params.tensors()[idx].1.len();
    (0..len)
        .map(|j| {
            let mut plus = params.clone();
            plus.tensors_mut()[idx].1.as_slice_mut().unwrap()[j] += EPS;
            let mut minus = params.clone();
            minus.tensors_mut()[idx].1.as_slice_mut().unwrap()[j] -= EPS;
            (loss_at(&plus) - loss_at(&minus)) / (2.0 * EPS)
        })
        .collect()
}

/// Relative error of the masked-token gradient for every parameter group.
pub fn mlm_gradient_errors() -> Vec<(String, f64)> {
    let params = EncoderParams::init(tiny_arch(), 11).unwrap();
    let window = [4u32, 7, 9, 5, 11];
    let masked = apply_mask(&window, 0.45, 3).unwrap();
    assert_eq!(masked.positions.len(), 2);

    let mut grads = params.zeros_like();
    accumulate_mlm_grad(&params, &masked, &mut grads).unwrap();
    let loss_at = |p: &EncoderParams| {
        let out = forward(p, &masked.input_ids).unwrap();
        mlm_loss(out.logits.view(), &masked.targets, &masked.positions).unwrap()
    };
    params
        .tensors()
        .into_iter()
        .enumerate()
        .map(|(idx, (name, _))| {
            let numeric = numeric_grad(&params, idx, loss_at);
            let analytic: Vec<f64> = grads.tensors()[idx].1.iter().copied().collect();
            (name, relative_error(&analytic, &numeric))
        })
        .collect()
}

/// Relative error of the SCAN gradient for every encoder group and the head.
pub fn scan_gradient_errors() -> Vec<(String, f64)> {
    let params = EncoderParams::init(tiny_arch(), 5).unwrap();
    let head = ClusterHead::init(8, 3, 8).unwrap();
    let mut batch = ScanBatch::default();
    batch.push_pair(&[4, 5, 6, 7, 8], &[4, 5, 6, 9, 8]);
    batch.push_pair(&[10, 11, 10, 11, 4], &[11, 10, 11, 10, 4]);
    batch.push_pair(&[6, 6, 7, 7, 5], &[4, 5, 6, 7, 8]);
    let lambda = 2.0;

    let (_, grads) = scan_batch_grad(&params, &head, &batch, lambda, true).unwrap();
    let mut errors = Vec::new();
    for (idx, (name, _)) in params.tensors().into_iter().enumerate() {
        if name.starts_with("mlm_") {
            continue;
        }
        let numeric = numeric_grad(&params, idx, |p| scan_batch_loss(p, &head, &batch, lambda).unwrap());
        let analytic: Vec<f64> = grads.encoder.tensors()[idx].1.iter().copied().collect();
        errors.push((name, relative_error(&analytic, &numeric)));
    }

    let perturb = |which: &str, j: usize, delta: f64| {
        let mut h = head.clone();
        let t = if which == "weight" { &mut h.weight } else { &mut h.bias };
        t.as_slice_mut().unwrap()[j] += delta;
        h
    };
    for which in ["weight", "bias"] {
        let len = if which == "weight" { head.weight.len() } else { head.bias.len() };
        let numeric: Vec<f64> = (0..len)
            .map(|j| {
                (scan_batch_loss(&params, &perturb(which, j, EPS), &batch, lambda).unwrap()
                    - scan_batch_loss(&params, &perturb(which, j, -EPS), &batch, lambda).unwrap())
                    / (2.0 * EPS)
            })
            .collect();
        let analytic: Vec<f64> = if which == "weight" {
            grads.head.weight.iter().copied().collect()
        } else {
            grads.head.bias.iter().copied().collect()
        };
        errors.push((format!("head_{which}"), relative_error(&analytic, &numeric)));
    }
    errors
}
