use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    /// Metric on the full set of units.
    pub estimate: f64,
    /// Mean over bootstrap replicates.
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
}

impl BootstrapCi {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Linear-interpolation percentile of sorted values, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile 95% interval from resampling `units` (e.g. test days) with replacement.
pub fn bootstrap_ci<U, F>(units: &[U], metric: F, replicates: usize, seed: u64) -> Result<BootstrapCi>
where
    U: Sync,
    F: Fn(&[&U]) -> f64 + Sync,
{
    if replicates < 100 {
        return Err(Error::invalid(format!("need at least 100 replicates, got {replicates}")));
    }
    if units.is_empty() {
        return Err(Error::invalid("bootstrap over zero units"));
    }
    let all: Vec<&U> = units.iter().collect();
    let estimate = metric(&all);
    if units.len() < 2 {
        tracing::warn!("fewer than 2 bootstrap units; interval degenerates to the point estimate");
        return Ok(BootstrapCi {
            estimate,
            mean: estimate,
            lower: estimate,
            upper: estimate,
            replicates,
        });
    }
    let mut values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
            let sample: Vec<&U> = (0..units.len())
                .map(|_| &units[rng.random_range(0..units.len())])
                .collect();
            metric(&sample)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / replicates as f64;
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        estimate,
        mean,
        lower: percentile(&values, 0.025),
        upper: percentile(&values, 0.975),
        replicates,
    })
}
