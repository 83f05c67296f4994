//! Pre-norm transformer encoder with hand-written backpropagation.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::{EncoderParams, LayerParams};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Logits over the vocabulary at every position and the final `[CLS]` state.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Array2<f64>,
    pub cls_embedding: Array1<f64>,
}

struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

struct LayerTrace {
    ln1: LayerNormCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    context: Array2<f64>,
    ln2: LayerNormCache,
    h2: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
}

/// Activations kept from a forward pass for the backward pass.
pub struct Trace {
    ids: Vec<usize>,
    layers: Vec<LayerTrace>,
    final_ln: LayerNormCache,
    /// Final normalized hidden states, `seq_len × embed_dim`.
    pub hidden: Array2<f64>,
}

impl Trace {
    pub fn cls(&self) -> ArrayView1<'_, f64> {
        self.hidden.row(0)
    }

    pub fn seq_len(&self) -> usize {
        self.ids.len()
    }
}

fn layer_norm(x: &Array2<f64>, gamma: &Array2<f64>, beta: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mean = x.mean_axis(Axis(1)).expect("non-empty rows");
    let mut xhat = x - &mean.view().insert_axis(Axis(1));
    let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    xhat *= &inv_std.view().insert_axis(Axis(1));
    let y = &xhat * gamma + beta;
    (y, LayerNormCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    gamma: &Array2<f64>,
    d_gamma: &mut Array2<f64>,
    d_beta: &mut Array2<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    *d_gamma += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *d_beta += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * gamma;
    let sum_dxhat = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
    let mut dx = dxhat * d - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
    dx *= &(cache.inv_std.view().insert_axis(Axis(1)).mapv(|v| v / d));
    dx
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn softmax_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    m
}

fn linear(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// Accumulates parameter gradients of `y = x w + b` and returns `dx`.
fn linear_backward(
    dy: &Array2<f64>,
    x: &Array2<f64>,
    w: &Array2<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    ndarray::linalg::general_mat_mul(1.0, &x.t(), dy, 1.0, dw);
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    dy.dot(&w.t())
}

fn check_ids(params: &EncoderParams, ids: &[u32]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    if ids.len() > params.arch.max_seq_len {
        return Err(Error::SequenceTooLong {
            len: ids.len(),
            max: params.arch.max_seq_len,
        });
    }
    ids.iter()
        .map(|&id| {
            let id = id as usize;
            if id < params.arch.vocab_size {
                Ok(id)
            } else {
                Err(Error::TokenOutOfRange {
                    id,
                    vocab_size: params.arch.vocab_size,
                })
            }
        })
        .collect()
}

fn layer_forward(p: &LayerParams, x: Array2<f64>, num_heads: usize) -> (Array2<f64>, LayerTrace) {
    let t = x.nrows();
    let d = x.ncols();
    let dh = d / num_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let (h1, ln1) = layer_norm(&x, &p.ln1_gamma, &p.ln1_beta);
    let q = linear(&h1, &p.w_q, &p.b_q);
    let k = linear(&h1, &p.w_k, &p.b_k);
    let v = linear(&h1, &p.w_v, &p.b_v);
    let mut context = Array2::zeros((t, d));
    let mut probs = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        let p_h = softmax_rows(scores);
        context.slice_mut(cols).assign(&p_h.dot(&v.slice(cols)));
        probs.push(p_h);
    }
    let x_mid = x + linear(&context, &p.w_o, &p.b_o);

    let (h2, ln2) = layer_norm(&x_mid, &p.ln2_gamma, &p.ln2_beta);
    let pre_act = linear(&h2, &p.w_ff1, &p.b_ff1);
    let act = pre_act.mapv(gelu);
    let out = &x_mid + &linear(&act, &p.w_ff2, &p.b_ff2);

    let trace = LayerTrace {
        ln1,
        h1,
        q,
        k,
        v,
        probs,
        context,
        ln2,
        h2,
        pre_act,
        act,
    };
    (out, trace)
}

fn layer_backward(
    p: &LayerParams,
    g: &mut LayerParams,
    tr: &LayerTrace,
    d_out: Array2<f64>,
    num_heads: usize,
) -> Array2<f64> {
    let t = d_out.nrows();
    let d = d_out.ncols();
    let dh = d / num_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // feed-forward sublayer
    let d_act = linear_backward(&d_out, &tr.act, &p.w_ff2, &mut g.w_ff2, &mut g.b_ff2);
    let d_pre = d_act * &tr.pre_act.mapv(gelu_grad);
    let d_h2 = linear_backward(&d_pre, &tr.h2, &p.w_ff1, &mut g.w_ff1, &mut g.b_ff1);
    let d_mid = d_out + layer_norm_backward(&d_h2, &tr.ln2, &p.ln2_gamma, &mut g.ln2_gamma, &mut g.ln2_beta);

    // attention sublayer
    let d_context = linear_backward(&d_mid, &tr.context, &p.w_o, &mut g.w_o, &mut g.b_o);
    let mut dq = Array2::zeros((t, d));
    let mut dk = Array2::zeros((t, d));
    let mut dv = Array2::zeros((t, d));
    for h in 0..num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let p_h = &tr.probs[h];
        let d_ctx = d_context.slice(cols);
        let d_probs = d_ctx.dot(&tr.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p_h.t().dot(&d_ctx));
        let row_dot = (&d_probs * p_h).sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_scores = (d_probs - &row_dot) * p_h * scale;
        dq.slice_mut(cols).assign(&d_scores.dot(&tr.k.slice(cols)));
        dk.slice_mut(cols).assign(&d_scores.t().dot(&tr.q.slice(cols)));
    }
    let mut d_h1 = linear_backward(&dq, &tr.h1, &p.w_q, &mut g.w_q, &mut g.b_q);
    d_h1 += &linear_backward(&dk, &tr.h1, &p.w_k, &mut g.w_k, &mut g.b_k);
    d_h1 += &linear_backward(&dv, &tr.h1, &p.w_v, &mut g.w_v, &mut g.b_v);
    d_mid + layer_norm_backward(&d_h1, &tr.ln1, &p.ln1_gamma, &mut g.ln1_gamma, &mut g.ln1_beta)
}

/// Runs the encoder and keeps the activations needed by [`backward`].
pub fn forward_trace(params: &EncoderParams, ids: &[u32]) -> Result<Trace> {
    let ids = check_ids(params, ids)?;
    let d = params.arch.embed_dim;
    let mut x = Array2::zeros((ids.len(), d));
    for (i, &id) in ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row.assign(&params.token_embedding.row(id));
        row += &params.position_embedding.row(i);
    }
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (next, trace) = layer_forward(layer, x, params.arch.num_heads);
        layers.push(trace);
        x = next;
    }
    let (hidden, final_ln) = layer_norm(&x, &params.final_gamma, &params.final_beta);
    Ok(Trace {
        ids,
        layers,
        final_ln,
        hidden,
    })
}

/// Backpropagates `d_hidden` (gradient w.r.t. [`Trace::hidden`]) into `grads`.
pub fn backward(params: &EncoderParams, trace: &Trace, d_hidden: &Array2<f64>, grads: &mut EncoderParams) {
    let mut dx = layer_norm_backward(
        d_hidden,
        &trace.final_ln,
        &params.final_gamma,
        &mut grads.final_gamma,
        &mut grads.final_beta,
    );
    for ((p, g), tr) in params
        .layers
        .iter()
        .zip(grads.layers.iter_mut())
        .zip(trace.layers.iter())
        .rev()
    {
        dx = layer_backward(p, g, tr, dx, params.arch.num_heads);
    }
    for (i, &id) in trace.ids.iter().enumerate() {
        let row = dx.row(i);
        let mut tok = grads.token_embedding.row_mut(id);
        tok += &row;
        let mut pos = grads.position_embedding.row_mut(i);
        pos += &row;
    }
}

/// Output-head logits for one hidden row.
pub fn mlm_logits_row(params: &EncoderParams, hidden_row: ArrayView1<'_, f64>) -> Array1<f64> {
    hidden_row.dot(&params.mlm_weight) + &params.mlm_bias.row(0)
}

/// Full forward pass: logits at every position plus the `[CLS]` embedding.
pub fn forward(params: &EncoderParams, ids: &[u32]) -> Result<ForwardOutput> {
    let trace = forward_trace(params, ids)?;
    let logits = trace.hidden.dot(&params.mlm_weight) + &params.mlm_bias;
    Ok(ForwardOutput {
        logits,
        cls_embedding: trace.cls().to_owned(),
    })
}

/// Backpropagates output-head logit gradients at selected positions.
///
/// Returns `d_hidden` and accumulates the head's parameter gradients.
pub fn mlm_head_backward(
    params: &EncoderParams,
    hidden: ArrayView2<'_, f64>,
    positions: &[usize],
    d_logits: &[Array1<f64>],
    grads: &mut EncoderParams,
) -> Array2<f64> {
    let mut d_hidden = Array2::zeros(hidden.raw_dim());
    for (&pos, dl) in positions.iter().zip(d_logits) {
        let h = hidden.row(pos);
        Zip::from(&mut grads.mlm_weight)
            .and_broadcast(&h.insert_axis(Axis(1)))
            .and_broadcast(&dl.view().insert_axis(Axis(0)))
            .for_each(|g, &a, &b| *g += a * b);
        let mut bias = grads.mlm_bias.row_mut(0);
        bias += dl;
        let mut row = d_hidden.row_mut(pos);
        row += &params.mlm_weight.dot(dl);
    }
    d_hidden
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::config::Architecture;

    fn tiny() -> EncoderParams {
        EncoderParams::init(
            Architecture {
                vocab_size: 12,
                embed_dim: 8,
                num_layers: 2,
                num_heads: 2,
                feedforward_dim: 16,
                max_seq_len: 6,
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn shapes_and_determinism() {
        let params = tiny();
        let a = forward(&params, &[2, 4, 5, 6]).unwrap();
        let b = forward(&params, &[2, 4, 5, 6]).unwrap();
        assert_eq!(a.logits.dim(), (4, 12));
        assert_eq!(a.cls_embedding.len(), 8);
        assert_eq!(a, b);
    }

    #[test]
    fn positions_matter() {
        let params = tiny();
        let a = forward(&params, &[2, 4, 5, 6, 7]).unwrap();
        let b = forward(&params, &[2, 5, 4, 6, 7]).unwrap();
        assert_ne!(a.logits, b.logits);
        assert_ne!(a.cls_embedding, b.cls_embedding);
    }

    #[test]
    fn rejects_bad_inputs() {
        let params = tiny();
        assert!(matches!(forward(&params, &[2, 12]), Err(Error::TokenOutOfRange { .. })));
        assert!(matches!(forward(&params, &[2; 7]), Err(Error::SequenceTooLong { .. })));
        assert!(forward(&params, &[]).is_err());
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
