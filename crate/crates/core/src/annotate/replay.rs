use serde::{Deserialize, Serialize};

use super::session::SessionSample;
use crate::evalmap::{HierarchyNode, LabelHierarchy, OTHER};
use crate::layout::Activation;

pub const REPLAY_VERSION: u32 = 1;

/// One sample prepared for temporal playback in the annotation tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayPayload {
    pub v: u32,
    pub sample_id: usize,
    pub cluster_id: usize,
    pub activations: Vec<Activation>,
    /// Selectable labels: the hierarchy tree followed by a bare "Other" node.
    pub label_options: Vec<HierarchyNode>,
}

pub fn label_options(hierarchy: &LabelHierarchy) -> Vec<HierarchyNode> {
    let mut nodes = hierarchy.roots().to_vec();
    nodes.push(HierarchyNode {
        label: OTHER.to_string(),
        children: Vec::new(),
    });
    nodes
}

pub fn replay_payload(sample: &SessionSample, hierarchy: &LabelHierarchy) -> ReplayPayload {
    ReplayPayload {
        v: REPLAY_VERSION,
        sample_id: sample.sample_id,
        cluster_id: sample.sample.cluster,
        activations: sample.sample.activations(),
        label_options: label_options(hierarchy),
    }
}
