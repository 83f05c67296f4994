//! Clustering head fine-tuned with the SCAN objective.

mod head;
mod loss;
mod train;

pub use head::{cluster_probs, ClusterAssignment, ClusterHead};
pub use loss::{
    consistency_loss, entropy_term, mean_distribution, scan_loss, scan_loss_and_grad, softmax,
    softmax_backward, LOG_CLAMP,
};
pub use train::{
    assign_all, fine_tune_scan, graph_scan_loss, scan_batch_grad, scan_batch_loss, ScanBatch, ScanConfig, ScanGrads,
    ScanOutcome,
};
