use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn log_softmax(row: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row.mapv(|v| v - log_sum)
}

/// Mean negative log-probability of the true tokens at the masked positions.
pub fn mlm_loss(logits: ArrayView2<'_, f64>, targets: &[u32], positions: &[usize]) -> Result<f64> {
    Ok(mlm_loss_and_grad(logits, targets, positions)?.0)
}

/// Loss plus its gradient w.r.t. the logit row at each masked position.
pub fn mlm_loss_and_grad(
    logits: ArrayView2<'_, f64>,
    targets: &[u32],
    positions: &[usize],
) -> Result<(f64, Vec<Array1<f64>>)> {
    if positions.is_empty() {
        return Err(Error::invalid("masked-token loss needs at least one masked position"));
    }
    if positions.len() != targets.len() {
        return Err(Error::invalid("positions and targets differ in length"));
    }
    let m = positions.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(positions.len());
    for (&pos, &target) in positions.iter().zip(targets) {
        if pos >= logits.nrows() || target as usize >= logits.ncols() {
            return Err(Error::invalid(format!("position {pos} or target {target} out of range")));
        }
        let logp = log_softmax(logits.row(pos));
        loss -= logp[target as usize];
        let mut g = logp.mapv(f64::exp);
        g[target as usize] -= 1.0;
        g /= m;
        grads.push(g);
    }
    Ok((loss / m, grads))
}
