//! Stage-by-stage orchestration over an output directory.
//!
//! Every stage reads the artifacts of earlier stages from the output
//! directory, writes its own atomically and leaves a
//! `<stage>.manifest.json` with the SHA-256 of everything it read and wrote.

pub mod artifacts;
mod config;
mod run;
mod stages;

pub use config::PipelineConfig;
pub use run::{manifest_name, Manifest, OutputLock, StageRun, CONFIG_FILE, LOCK_FILE};
pub use stages::{
    centroids, cluster, evaluate, evaluation_windows, ingest, kmeans_stage, neighbors, pretrain, propagate_session,
    propagate_stage, reannotated_csv, score_clusters, sweep_k, synth, trends, AgreementReport, ClusteringScores,
    EvalWindow, IngestReport, KMeansReport, Metrics, Propagation, ScanReport, ScoresAndPredictions, SweepRow,
    TrendReport,
};

use crate::error::Result;

/// The stages in the order a full run executes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Pretrain,
    Neighbors,
    Cluster,
    KMeans,
    Centroids,
    Propagate,
    Evaluate,
    SweepK,
    Trends,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Pretrain => "pretrain",
            Stage::Neighbors => "neighbors",
            Stage::Cluster => "cluster",
            Stage::KMeans => "kmeans",
            Stage::Centroids => "centroids",
            Stage::Propagate => "propagate",
            Stage::Evaluate => "evaluate",
            Stage::SweepK => "sweep-k",
            Stage::Trends => "trends",
        }
    }

    pub fn run(self, config: &PipelineConfig) -> Result<Manifest> {
        match self {
            Stage::Synth => synth(config),
            Stage::Ingest => ingest(config),
            Stage::Pretrain => pretrain(config),
            Stage::Neighbors => neighbors(config),
            Stage::Cluster => cluster(config),
            Stage::KMeans => kmeans_stage(config),
            Stage::Centroids => centroids(config),
            Stage::Propagate => propagate_stage(config),
            Stage::Evaluate => evaluate(config),
            Stage::SweepK => sweep_k(config),
            Stage::Trends => trends(config),
        }
    }
}
