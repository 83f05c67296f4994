use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{SensorEvent, Window, NO_LABEL};
use crate::error::{Error, Result};
use crate::evalmap::ClusterLabelMap;
use crate::scan::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub window_id: usize,
    pub cluster: usize,
    pub confidence: f64,
    pub label: String,
}

/// Gives every assigned window its cluster's label.
pub fn propagate(map: &ClusterLabelMap, assignments: &[ClusterAssignment]) -> Result<Vec<WindowLabel>> {
    assignments
        .iter()
        .map(|a| {
            let label = map
                .label(a.cluster)
                .ok_or_else(|| Error::invalid(format!("cluster {} is unmapped", a.cluster)))?;
            Ok(WindowLabel {
                window_id: a.window_id,
                cluster: a.cluster,
                confidence: a.confidence,
                label: label.to_string(),
            })
        })
        .collect()
}

struct Vote<'a> {
    label: &'a str,
    count: usize,
    best_confidence: f64,
    latest_start: usize,
}

impl Vote<'_> {
    fn beats(&self, other: &Self) -> bool {
        (self.count, self.best_confidence, self.latest_start) > (other.count, other.best_confidence, other.latest_start)
    }
}

/// Label of each event by majority over the labeled windows covering it.
///
/// Ties go to the label whose covering window has the highest confidence, then
/// to the one whose window starts latest. Uncovered events get "No Label".
pub fn reannotate_events(labels: &[WindowLabel], windows: &[Window], events: &[SensorEvent]) -> Result<Vec<String>> {
    let mut votes: Vec<Vec<Vote<'_>>> = (0..events.len()).map(|_| Vec::new()).collect();
    for wl in labels {
        let w = windows
            .binary_search_by_key(&wl.window_id, |w| w.window_id)
            .ok()
            .map(|i| &windows[i])
            .ok_or_else(|| Error::invalid(format!("labeled window {} is not in the window list", wl.window_id)))?;
        if w.end_event_index >= events.len() || w.start_event_index > w.end_event_index {
            return Err(Error::invalid(format!("window {} has an invalid event range", w.window_id)));
        }
        for slot in &mut votes[w.event_range()] {
            match slot.iter_mut().find(|v| v.label == wl.label) {
                Some(v) => {
                    v.count += 1;
                    v.best_confidence = v.best_confidence.max(wl.confidence);
                    v.latest_start = v.latest_start.max(w.start_event_index);
                }
                None => slot.push(Vote {
                    label: &wl.label,
                    count: 1,
                    best_confidence: wl.confidence,
                    latest_start: w.start_event_index,
                }),
            }
        }
    }
    Ok(votes
        .iter()
        .map(|slot| {
            slot.iter()
                .fold(None::<&Vote<'_>>, |best, v| match best {
                    Some(b) if !v.beats(b) => Some(b),
                    _ => Some(v),
                })
                .map_or_else(|| NO_LABEL.to_string(), |v| v.label.to_string())
        })
        .collect())
}

/// Writes `timestamp,sensor,value,truth_label,discovered_label` rows.
pub fn write_reannotated_csv<W: Write>(writer: W, events: &[SensorEvent], discovered: &[String]) -> Result<()> {
    if events.len() != discovered.len() {
        return Err(Error::invalid("one discovered label per event is required"));
    }
    let csv_err = |e: csv::Error| Error::Format {
        what: "re-annotated CSV",
        detail: e.to_string(),
    };
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["timestamp", "sensor", "value", "truth_label", "discovered_label"])
        .map_err(csv_err)?;
    for (e, label) in events.iter().zip(discovered) {
        let ts = e.timestamp.format("%Y-%m-%d %H:%M:%S%.f").to_string();
        out.write_record([
            ts.as_str(),
            &e.sensor_id,
            &e.value,
            e.truth_label.as_deref().unwrap_or(""),
            label,
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Format {
        what: "re-annotated CSV",
        detail: e.to_string(),
    })
}
