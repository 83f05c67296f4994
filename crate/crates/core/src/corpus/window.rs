use std::collections::HashMap;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::events::SensorEvent;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// A fixed-length run of consecutive sensor tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub window_id: usize,
    #[serde(rename = "day")]
    pub day_key: NaiveDate,
    #[serde(rename = "start")]
    pub start_event_index: usize,
    #[serde(rename = "end")]
    pub end_event_index: usize,
    pub token_ids: Vec<u32>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn event_range(&self) -> std::ops::RangeInclusive<usize> {
        self.start_event_index..=self.end_event_index
    }
}

/// Number of windows a stream of `n` events yields.
pub fn window_count(n: usize, l: usize, stride: usize) -> usize {
    if l == 0 || stride == 0 || n < l {
        0
    } else {
        (n - l) / stride + 1
    }
}

/// Slides a window of `l` events over the stream with the given stride.
///
/// Returns an empty list (with a warning) when the stream is shorter than `l`.
pub fn make_windows(
    events: &[SensorEvent],
    vocab: &Vocabulary,
    l: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    if l == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if events.len() < l {
        tracing::warn!(events = events.len(), l, "fewer events than window length; no windows");
        return Ok(Vec::new());
    }
    let ids = vocab.encode_all(events);
    let windows = (0..window_count(events.len(), l, stride))
        .map(|window_id| {
            let start = window_id * stride;
            Window {
                window_id,
                day_key: events[start].day_key(),
                start_event_index: start,
                end_event_index: start + l - 1,
                token_ids: ids[start..start + l].to_vec(),
            }
        })
        .collect();
    Ok(windows)
}

/// Uniform sample without replacement of `floor(fraction * n)` windows, in original order.
pub fn sample_windows(windows: &[Window], fraction: f64, seed: u64) -> Result<Vec<Window>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "sample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(windows.to_vec());
    }
    let n = windows.len();
    let amount = ((fraction * n as f64).floor() as usize).clamp(n.min(1), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| windows[i].clone()).collect())
}

/// Majority truth label over the window's events.
///
/// Ties go to the tied label that occurs latest in the window. `None` when no
/// event carries a label.
pub fn window_truth(window: &Window, events: &[SensorEvent]) -> Option<String> {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for idx in window.event_range() {
        if let Some(label) = events[idx].truth_label.as_deref() {
            let entry = counts.entry(label).or_insert((0, idx));
            entry.0 += 1;
            entry.1 = idx;
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(_, (count, last))| (count, last))
        .map(|(label, _)| label.to_string())
}
