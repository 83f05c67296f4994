use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::NO_LABEL;
use crate::error::{Error, Result};

use super::hierarchy::OTHER;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub cluster: usize,
    pub label: String,
    pub votes: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabelMap {
    pub clusters: Vec<ClusterLabel>,
}

impl ClusterLabelMap {
    pub fn label(&self, cluster: usize) -> Option<&str> {
        self.clusters.get(cluster).map(|c| c.label.as_str())
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }
}

/// Modal label among `candidates`, ties broken by `global` frequency then lexicographically.
pub(crate) fn modal<'a>(
    counts: &BTreeMap<&'a str, usize>,
    global: &BTreeMap<&str, usize>,
) -> Option<(&'a str, usize)> {
    counts
        .iter()
        .max_by(|(la, ca), (lb, cb)| {
            ca.cmp(cb)
                .then_with(|| global.get(*la).cmp(&global.get(*lb)))
                .then_with(|| lb.cmp(la))
        })
        .map(|(l, c)| (*l, *c))
}

/// Maps each of `k` clusters to the most common truth label among its windows.
pub fn majority_vote_mapping<T: AsRef<str>>(
    clusters: &[usize],
    truth: &[T],
    k: usize,
) -> Result<ClusterLabelMap> {
    if clusters.len() != truth.len() {
        return Err(Error::invalid("assignment and truth lengths differ"));
    }
    if let Some(&c) = clusters.iter().find(|&&c| c >= k) {
        return Err(Error::invalid(format!("cluster {c} out of range for k={k}")));
    }
    let mut global: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); k];
    for (&c, t) in clusters.iter().zip(truth) {
        *global.entry(t.as_ref()).or_default() += 1;
        *per[c].entry(t.as_ref()).or_default() += 1;
    }
    let clusters = per
        .iter()
        .enumerate()
        .map(|(cluster, counts)| match modal(counts, &global) {
            Some((label, votes)) => ClusterLabel {
                cluster,
                label: label.to_string(),
                votes,
                total: counts.values().sum(),
            },
            None => ClusterLabel {
                cluster,
                label: OTHER.to_string(),
                votes: 0,
                total: 0,
            },
        })
        .collect();
    Ok(ClusterLabelMap { clusters })
}

/// Predicted label per window under a cluster map.
pub fn mapped_predictions(map: &ClusterLabelMap, clusters: &[usize]) -> Result<Vec<String>> {
    clusters
        .iter()
        .map(|&c| {
            map.label(c)
                .map(str::to_string)
                .ok_or_else(|| Error::invalid(format!("cluster {c} has no mapped label")))
        })
        .collect()
}

/// Per-dataset translation of native activity names into a shared label set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelUnification {
    pub map: BTreeMap<String, String>,
}

impl LabelUnification {
    pub fn bundled(dataset: &str) -> Option<Self> {
        let text = match dataset.to_ascii_lowercase().as_str() {
            "milan" => include_str!("../../data/labelmaps/milan.json"),
            "aruba" => include_str!("../../data/labelmaps/aruba.json"),
            "cairo" => include_str!("../../data/labelmaps/cairo.json"),
            _ => return None,
        };
        Some(serde_json::from_str(text).expect("bundled label map is valid"))
    }

    /// Unmapped native labels fall into [`OTHER`]; "No Label" passes through.
    pub fn unify<'a>(&'a self, label: &'a str) -> &'a str {
        if label == NO_LABEL {
            return NO_LABEL;
        }
        self.map.get(label).map_or(OTHER, String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_majority() {
        let mut truth = vec!["Cook"; 7];
        truth.extend(["Eat"; 3]);
        let m = majority_vote_mapping(&[0; 10], &truth, 1).unwrap();
        assert_eq!(m.clusters[0].label, "Cook");
        assert_eq!((m.clusters[0].votes, m.clusters[0].total), (7, 10));
    }

    #[test]
    fn tie_goes_to_globally_frequent_then_lexicographic() {
        let mut clusters = vec![0; 10];
        let mut truth = vec!["Eat"; 5];
        truth.extend(["Cook"; 5]);
        clusters.push(1);
        truth.push("Cook");
        let m = majority_vote_mapping(&clusters, &truth, 2).unwrap();
        assert_eq!(m.clusters[0].label, "Cook");

        let m = majority_vote_mapping(&[0, 0], &["b", "a"], 1).unwrap();
        assert_eq!(m.clusters[0].label, "a");
    }

    #[test]
    fn empty_cluster_is_other_and_unlabeled_is_no_label() {
        let m = majority_vote_mapping(&[0, 0], &[NO_LABEL, NO_LABEL], 2).unwrap();
        assert_eq!(m.clusters[0].label, NO_LABEL);
        assert_eq!(m.clusters[1].label, OTHER);
        assert_eq!(m.clusters[1].votes, 0);
    }

    #[test]
    fn unification_tables() {
        let milan = LabelUnification::bundled("Milan").unwrap();
        assert_eq!(milan.unify("Kitchen_Activity"), "Cook");
        assert_eq!(milan.unify("Read"), "Relax");
        assert_eq!(milan.unify(NO_LABEL), NO_LABEL);
        assert_eq!(milan.unify("Juggling"), OTHER);
        assert!(LabelUnification::bundled("nowhere").is_none());
    }
}
