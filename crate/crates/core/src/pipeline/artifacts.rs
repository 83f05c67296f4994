//! File names of the artifacts in an output directory, plus their codecs.

use serde::{Deserialize, Serialize};

use crate::corpus::SensorEvent;
use crate::encoder::{EmbeddingVector, EpochLoss};
use crate::error::{Error, Result};
use crate::tensorfile::{self, NamedTensor};

pub const EVENTS: &str = "events.csv";
pub const VOCAB: &str = "vocab.json";
pub const WINDOWS: &str = "windows.jsonl";
pub const SPLIT: &str = "split.json";
pub const SAMPLE: &str = "sample.json";
pub const INGEST_REPORT: &str = "ingest_report.json";

pub const ENCODER: &str = "encoder.bin";
pub const PRETRAIN_LOSS: &str = "pretrain_loss.csv";
pub const EMBEDDINGS: &str = "embeddings.bin";

pub const NEIGHBORS: &str = "neighbors.jsonl";

pub const SCAN_ENCODER: &str = "scan_encoder.bin";
pub const SCAN_HEAD: &str = "scan_head.bin";
pub const SCAN_LOSS: &str = "scan_loss.csv";
pub const SCAN_REPORT: &str = "scan_report.json";
pub const ASSIGNMENTS: &str = "assignments.jsonl";

pub const KMEANS_ASSIGNMENTS: &str = "kmeans_assignments.jsonl";
pub const KMEANS_REPORT: &str = "kmeans_report.json";

pub const CENTROIDS: &str = "centroids.json";
pub const LAYOUT: &str = "layout.json";

pub const CLUSTER_LABELS: &str = "cluster_labels.json";
pub const WINDOW_LABELS: &str = "window_labels.jsonl";
pub const REANNOTATED: &str = "reannotated.csv";
pub const AGREEMENT: &str = "agreement.json";

pub const METRICS: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SWEEP_K: &str = "sweep_k.csv";

pub const TRENDS: &str = "trends.json";
pub const TRENDS_TRUTH_CSV: &str = "trends_truth.csv";
pub const TRENDS_DISCOVERED_CSV: &str = "trends_discovered.csv";

pub const SYNTH_LOG: &str = "synthetic.log";
pub const SYNTH_CONFIG: &str = "synth_config.json";

/// Session file of `id`, relative to the output directory.
pub fn session_file(id: &str) -> String {
    format!("sessions/{id}.json")
}

/// Windows drawn for pre-training and fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub fraction: f64,
    pub seed: u64,
    pub window_ids: Vec<usize>,
}

/// Hard k-means assignment of one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardAssignment {
    pub window_id: usize,
    pub cluster: usize,
}

fn csv_error(what: &'static str, e: csv::Error) -> Error {
    Error::Format {
        what,
        detail: e.to_string(),
    }
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| csv_error("CSV output", e))?;
    }
    w.into_inner().map_err(|e| Error::Format {
        what: "CSV output",
        detail: e.to_string(),
    })
}

pub fn events_to_csv(events: &[SensorEvent]) -> Result<Vec<u8>> {
    csv_bytes(events)
}

pub fn events_from_csv(bytes: &[u8]) -> Result<Vec<SensorEvent>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error("events file", e))
}

pub fn loss_csv(losses: &[EpochLoss]) -> Result<Vec<u8>> {
    csv_bytes(losses)
}

pub fn embeddings_to_bytes(embeddings: &[EmbeddingVector]) -> Vec<u8> {
    let dim = embeddings.first().map_or(0, |e| e.values.len());
    let ids: Vec<usize> = embeddings.iter().map(|e| e.window_id).collect();
    let data: Vec<f64> = embeddings.iter().flat_map(|e| e.values.iter().copied()).collect();
    tensorfile::encode(
        &serde_json::json!({ "kind": "embeddings", "window_ids": ids }),
        &[NamedTensor::new("embeddings", vec![embeddings.len(), dim], data)],
    )
}

pub fn embeddings_from_bytes(bytes: &[u8]) -> Result<Vec<EmbeddingVector>> {
    let bad = |detail: &str| Error::Format {
        what: "embeddings file",
        detail: detail.to_string(),
    };
    let (meta, tensors) = tensorfile::decode(bytes)?;
    let ids: Vec<usize> = serde_json::from_value(meta["window_ids"].clone()).map_err(|_| bad("missing window_ids"))?;
    let t = tensors.first().ok_or_else(|| bad("no tensor"))?;
    if t.shape.len() != 2 || t.shape[0] != ids.len() {
        return Err(bad("shape does not match window_ids"));
    }
    let dim = t.shape[1];
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, window_id)| EmbeddingVector {
            window_id,
            values: t.data[i * dim..(i + 1) * dim].to_vec(),
        })
        .collect())
}
