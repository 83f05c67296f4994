use serde::{Deserialize, Serialize};

use crate::corpus::{SensorEvent, Window};
use crate::error::{Error, Result};
use crate::layout::Activation;
use crate::scan::ClusterAssignment;

/// A high-confidence window shown to raters as representative of its cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidSample {
    pub window_id: usize,
    pub cluster: usize,
    pub confidence: f64,
    #[serde(default)]
    pub events: Vec<SensorEvent>,
}

impl CentroidSample {
    /// Activations with millisecond offsets from the first event, in time order.
    pub fn activations(&self) -> Vec<Activation> {
        let mut events: Vec<&SensorEvent> = self.events.iter().collect();
        events.sort_by_key(|e| e.timestamp);
        let Some(first) = events.first().map(|e| e.timestamp) else {
            return Vec::new();
        };
        events
            .iter()
            .map(|e| Activation {
                sensor_id: e.sensor_id.clone(),
                value: e.value.clone(),
                offset_ms: (e.timestamp - first).num_milliseconds(),
            })
            .collect()
    }
}

/// The `m` most confident windows of every cluster, ties to the lower window id.
///
/// Output is grouped by cluster, most confident first. Clusters with fewer than
/// `m` members contribute all of them.
pub fn select_centroids(assignments: &[ClusterAssignment], m: usize) -> Result<Vec<CentroidSample>> {
    if m == 0 {
        return Err(Error::invalid("m must be positive"));
    }
    let k = assignments.first().map_or(0, |a| a.probs.len());
    let mut per: Vec<Vec<&ClusterAssignment>> = vec![Vec::new(); k];
    for a in assignments {
        if a.probs.len() != k || a.cluster >= k {
            return Err(Error::invalid("assignments disagree on the number of clusters"));
        }
        per[a.cluster].push(a);
    }
    let mut out = Vec::with_capacity(k * m);
    for (cluster, members) in per.iter_mut().enumerate() {
        if members.len() < m {
            tracing::warn!(cluster, size = members.len(), m, "cluster has fewer members than m");
        }
        members.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.window_id.cmp(&b.window_id)));
        out.extend(members.iter().take(m).map(|a| CentroidSample {
            window_id: a.window_id,
            cluster,
            confidence: a.confidence,
            events: Vec::new(),
        }));
    }
    Ok(out)
}

/// Fills each sample's event payload from the window's event range.
pub fn attach_events(samples: &mut [CentroidSample], windows: &[Window], events: &[SensorEvent]) -> Result<()> {
    for s in samples {
        let w = windows
            .binary_search_by_key(&s.window_id, |w| w.window_id)
            .ok()
            .map(|i| &windows[i])
            .ok_or_else(|| Error::invalid(format!("no window {}", s.window_id)))?;
        let range = w.event_range();
        if *range.end() >= events.len() {
            return Err(Error::invalid(format!("window {} runs past the event stream", w.window_id)));
        }
        s.events = events[range].to_vec();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(window_id: usize, cluster: usize, confidence: f64) -> ClusterAssignment {
        let mut probs = vec![(1.0 - confidence) / 2.0; 3];
        probs[cluster] = confidence;
        ClusterAssignment {
            window_id,
            cluster,
            confidence,
            probs,
        }
    }

    #[test]
    fn top_m_per_cluster_with_ties_to_lower_id() {
        let a = vec![
            assignment(0, 0, 0.5),
            assignment(1, 0, 0.9),
            assignment(2, 0, 0.9),
            assignment(3, 0, 0.4),
            assignment(4, 1, 0.6),
        ];
        let s = select_centroids(&a, 2).unwrap();
        let ids: Vec<usize> = s.iter().map(|c| c.window_id).collect();
        assert_eq!(ids, [1, 2, 4]);
        assert!(select_centroids(&a, 0).is_err());
    }

    #[test]
    fn adding_less_confident_windows_keeps_selection() {
        let mut a: Vec<_> = (0..10).map(|i| assignment(i, i % 3, 0.4 + i as f64 * 0.05)).collect();
        let before = select_centroids(&a, 2).unwrap();
        a.extend((10..20).map(|i| assignment(i, i % 3, 0.35)));
        assert_eq!(select_centroids(&a, 2).unwrap(), before);
    }
}
