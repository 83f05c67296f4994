//! Exact h-nearest-neighbor graph under cosine similarity.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingVector;
use crate::error::{Error, Result};

/// Ordered neighbor list of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub window_id: usize,
    pub neighbors: Vec<usize>,
    pub sims: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    /// Neighbors per node after any degradation for small populations.
    pub h: usize,
    pub nodes: Vec<NeighborList>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, window_id: usize) -> Option<&NeighborList> {
        self.nodes
            .binary_search_by_key(&window_id, |n| n.window_id)
            .ok()
            .map(|i| &self.nodes[i])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn finish(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// `a·b / (‖a‖‖b‖)`, rejecting zero-norm or mismatched vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero-norm vector"));
    }
    Ok(finish(dot(a, b), na, nb))
}

/// Total order on candidate neighbors: similarity descending, then window id ascending.
pub fn neighbor_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Exact kNN graph. Nodes are emitted sorted by window id.
///
/// When `h` is not below the population, every node gets all other nodes as
/// neighbors and a warning is logged.
pub fn build_knn(embeddings: &[EmbeddingVector], h: usize) -> Result<NeighborGraph> {
    if embeddings.len() < 2 {
        return Err(Error::invalid("need at least 2 embeddings for a neighbor graph"));
    }
    if h == 0 {
        return Err(Error::invalid("h must be at least 1"));
    }
    let dim = embeddings[0].values.len();
    if embeddings.iter().any(|e| e.values.len() != dim) {
        return Err(Error::invalid("embeddings differ in dimension"));
    }
    let mut sorted: Vec<&EmbeddingVector> = embeddings.iter().collect();
    sorted.sort_by_key(|e| e.window_id);
    if sorted.windows(2).any(|p| p[0].window_id == p[1].window_id) {
        return Err(Error::invalid("duplicate window ids"));
    }
    let norms: Vec<f64> = sorted.iter().map(|e| norm(&e.values)).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::invalid(format!(
            "window {} has a zero-norm embedding",
            sorted[i].window_id
        )));
    }
    let n = sorted.len();
    let effective_h = if h >= n {
        tracing::warn!(h, population = n, "h not below population; using all other nodes");
        n - 1
    } else {
        h
    };

    let nodes = (0..n)
        .into_par_iter()
        .map(|i| {
            let query = &sorted[i].values;
            let mut candidates: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let sim = finish(dot(query, &sorted[j].values), norms[i], norms[j]);
                    (sim, sorted[j].window_id)
                })
                .collect();
            if effective_h < candidates.len() {
                candidates.select_nth_unstable_by(effective_h - 1, neighbor_order);
                candidates.truncate(effective_h);
            }
            candidates.sort_unstable_by(neighbor_order);
            NeighborList {
                window_id: sorted[i].window_id,
                neighbors: candidates.iter().map(|c| c.1).collect(),
                sims: candidates.iter().map(|c| c.0).collect(),
            }
        })
        .collect();
    Ok(NeighborGraph {
        h: effective_h,
        nodes,
    })
}
