use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::centroids::CentroidSample;
use crate::error::{Error, Result};
use crate::evalmap::{
    cohens_kappa, fleiss_kappa, rating_counts, ClusterLabel, ClusterLabelMap, LabelHierarchy, OTHER,
};
use crate::io;

pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub sample_id: usize,
    pub rater_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSample {
    pub sample_id: usize,
    #[serde(flatten)]
    pub sample: CentroidSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Pending,
    Partial,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub v: u32,
    pub session_id: String,
    pub dataset_id: String,
    pub rater_count: usize,
    pub k: usize,
    /// Samples in presentation order; `sample_id` is the position.
    pub samples: Vec<SessionSample>,
    pub submissions: Vec<RatingRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub samples: usize,
    pub scheduled: usize,
    pub submitted: usize,
    pub complete_samples: usize,
    pub per_rater: BTreeMap<String, usize>,
    pub done: bool,
}

/// Shuffles the samples of a `k`-cluster run deterministically and schedules `rater_count` ratings for each.
pub fn create_session(
    session_id: impl Into<String>,
    dataset_id: impl Into<String>,
    samples: Vec<CentroidSample>,
    k: usize,
    rater_count: usize,
    seed: u64,
) -> Result<AnnotationSession> {
    if samples.is_empty() {
        return Err(Error::invalid("a session needs at least one sample"));
    }
    if rater_count == 0 {
        return Err(Error::invalid("rater count must be at least 1"));
    }
    if let Some(s) = samples.iter().find(|s| s.cluster >= k) {
        return Err(Error::invalid(format!("sample cluster {} out of range for k={k}", s.cluster)));
    }
    let mut samples = samples;
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(AnnotationSession {
        v: SESSION_VERSION,
        session_id: session_id.into(),
        dataset_id: dataset_id.into(),
        rater_count,
        k,
        samples: samples
            .into_iter()
            .enumerate()
            .map(|(sample_id, sample)| SessionSample { sample_id, sample })
            .collect(),
        submissions: Vec::new(),
    })
}

impl AnnotationSession {
    pub fn scheduled(&self) -> usize {
        self.samples.len() * self.rater_count
    }

    pub fn sample(&self, sample_id: usize) -> Result<&SessionSample> {
        self.samples.get(sample_id).ok_or(Error::UnknownSample(sample_id))
    }

    pub fn ratings_for(&self, sample_id: usize) -> impl Iterator<Item = &RatingRecord> {
        self.submissions.iter().filter(move |r| r.sample_id == sample_id)
    }

    pub fn status(&self, sample_id: usize) -> SampleStatus {
        match self.ratings_for(sample_id).count() {
            0 => SampleStatus::Pending,
            n if n < self.rater_count => SampleStatus::Partial,
            _ => SampleStatus::Complete,
        }
    }

    /// Records a label, replacing any earlier label by the same rater.
    ///
    /// Returns the replaced label, if any.
    pub fn record_label(
        &mut self,
        sample_id: usize,
        rater_id: &str,
        label: &str,
        hierarchy: &LabelHierarchy,
    ) -> Result<Option<String>> {
        self.sample(sample_id)?;
        if rater_id.trim().is_empty() {
            return Err(Error::invalid("rater id must not be empty"));
        }
        if !hierarchy.contains(label) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        if let Some(prev) = self
            .submissions
            .iter_mut()
            .find(|r| r.sample_id == sample_id && r.rater_id == rater_id)
        {
            return Ok(Some(std::mem::replace(&mut prev.label, label.to_string())));
        }
        if self.status(sample_id) == SampleStatus::Complete {
            return Err(Error::invalid(format!(
                "sample {sample_id} already has {} ratings",
                self.rater_count
            )));
        }
        self.submissions.push(RatingRecord {
            sample_id,
            rater_id: rater_id.to_string(),
            label: label.to_string(),
        });
        Ok(None)
    }

    /// First sample in presentation order that still needs a rating and that `rater_id` has not rated.
    pub fn next_for(&self, rater_id: &str) -> Option<&SessionSample> {
        self.samples.iter().find(|s| {
            self.status(s.sample_id) != SampleStatus::Complete
                && !self.ratings_for(s.sample_id).any(|r| r.rater_id == rater_id)
        })
    }

    pub fn progress(&self) -> Progress {
        let mut per_rater = BTreeMap::new();
        for r in &self.submissions {
            *per_rater.entry(r.rater_id.clone()).or_default() += 1;
        }
        let complete_samples = (0..self.samples.len())
            .filter(|&i| self.status(i) == SampleStatus::Complete)
            .count();
        Progress {
            samples: self.samples.len(),
            scheduled: self.scheduled(),
            submitted: self.submissions.len(),
            complete_samples,
            per_rater,
            done: complete_samples == self.samples.len(),
        }
    }

    /// Clusters that have centroid samples but no rating yet.
    pub fn unmapped_clusters(&self) -> Vec<usize> {
        let rated: BTreeSet<usize> = self
            .submissions
            .iter()
            .filter_map(|r| self.samples.get(r.sample_id))
            .map(|s| s.sample.cluster)
            .collect();
        let sampled: BTreeSet<usize> = self.samples.iter().map(|s| s.sample.cluster).collect();
        sampled.difference(&rated).copied().collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let session: Self = io::read_json(path)?;
        if session.v != SESSION_VERSION {
            return Err(Error::Format {
                what: "annotation session",
                detail: format!("unsupported version {}", session.v),
            });
        }
        Ok(session)
    }

    /// Every rating label grouped by cluster, optionally leveled up once.
    pub fn cluster_ratings(&self, hierarchy: &LabelHierarchy, level_up: bool) -> Result<Vec<Vec<String>>> {
        let mut per = vec![Vec::new(); self.k];
        for r in &self.submissions {
            let cluster = self.sample(r.sample_id)?.sample.cluster;
            let label = if level_up {
                hierarchy.level_up(&r.label)?.to_string()
            } else {
                r.label.clone()
            };
            per[cluster].push(label);
        }
        Ok(per)
    }
}

/// Per-cluster modal rating.
///
/// A tie is resolved by leveling up each tied candidate that is not itself an
/// ancestor of another tied candidate, remapping those ratings and recounting
/// once; a remaining tie goes to the lexicographically smallest label.
/// Clusters without ratings map to "Other" with zero votes.
pub fn cluster_majority_labels(session: &AnnotationSession, hierarchy: &LabelHierarchy) -> Result<ClusterLabelMap> {
    let progress = session.progress();
    if !progress.done {
        tracing::warn!(
            submitted = progress.submitted,
            scheduled = progress.scheduled,
            "deriving cluster labels from a partial session"
        );
    }
    let ratings = session.cluster_ratings(hierarchy, false)?;
    let clusters = ratings
        .iter()
        .enumerate()
        .map(|(cluster, labels)| {
            if labels.is_empty() {
                tracing::warn!(cluster, "cluster has no ratings; mapped to Other");
                return Ok(ClusterLabel {
                    cluster,
                    label: OTHER.to_string(),
                    votes: 0,
                    total: 0,
                });
            }
            let (label, votes) = majority_with_level_up(labels, hierarchy)?;
            Ok(ClusterLabel {
                cluster,
                label,
                votes,
                total: labels.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterLabelMap { clusters })
}

fn counts(labels: &[String]) -> BTreeMap<&str, usize> {
    let mut c = BTreeMap::new();
    for l in labels {
        *c.entry(l.as_str()).or_default() += 1;
    }
    c
}

fn top(counts: &BTreeMap<&str, usize>) -> (Vec<String>, usize) {
    let best = counts.values().copied().max().unwrap_or(0);
    let tied = counts
        .iter()
        .filter(|(_, &c)| c == best)
        .map(|(l, _)| l.to_string())
        .collect();
    (tied, best)
}

fn majority_with_level_up(labels: &[String], hierarchy: &LabelHierarchy) -> Result<(String, usize)> {
    let (tied, best) = top(&counts(labels));
    if tied.len() == 1 {
        return Ok((tied[0].clone(), best));
    }
    let mut remap = BTreeMap::new();
    for cand in &tied {
        let is_ancestor = tied
            .iter()
            .map(|other| hierarchy.is_ancestor(cand, other))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .any(|b| b);
        let target = if is_ancestor { cand.as_str() } else { hierarchy.level_up(cand)? };
        remap.insert(cand.clone(), target.to_string());
    }
    let leveled: Vec<String> = labels
        .iter()
        .map(|l| remap.get(l).cloned().unwrap_or_else(|| l.clone()))
        .collect();
    let (tied, best) = top(&counts(&leveled));
    // BTreeMap order makes the first tied label the lexicographically smallest.
    Ok((tied[0].clone(), best))
}

/// Agreement statistics for one granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub cohens_kappa: Option<f64>,
    pub fleiss_kappa: Option<f64>,
    /// Samples with at least two ratings.
    pub rated_pairs: usize,
    /// Clusters entering the Fleiss computation.
    pub fleiss_items: usize,
}

/// Cohen's kappa over the first two raters of every doubly rated sample and
/// Fleiss' kappa over clusters (items) carrying the most common rating count.
pub fn session_agreement(session: &AnnotationSession, hierarchy: &LabelHierarchy, level_up: bool) -> Result<Agreement> {
    let lift = |l: &str| -> Result<String> {
        Ok(if level_up {
            hierarchy.level_up(l)?.to_string()
        } else {
            l.to_string()
        })
    };
    let mut pairs = Vec::new();
    for s in &session.samples {
        let rated: Vec<&RatingRecord> = session.ratings_for(s.sample_id).take(2).collect();
        if let [a, b] = rated.as_slice() {
            pairs.push((lift(&a.label)?, lift(&b.label)?));
        }
    }
    let cohens = if pairs.is_empty() {
        None
    } else {
        Some(cohens_kappa(&pairs)?)
    };

    let per_cluster = session.cluster_ratings(hierarchy, level_up)?;
    let mut sizes = BTreeMap::new();
    for r in per_cluster.iter().filter(|r| r.len() >= 2) {
        *sizes.entry(r.len()).or_insert(0usize) += 1;
    }
    let common = sizes
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(&n, _)| n);
    let items: Vec<Vec<String>> = per_cluster
        .into_iter()
        .filter(|r| Some(r.len()) == common)
        .collect();
    let skipped = session.k - items.len();
    if skipped > 0 && common.is_some() {
        tracing::warn!(skipped, "clusters with a different rating count left out of Fleiss' kappa");
    }
    let fleiss = if items.is_empty() {
        None
    } else {
        let (_, matrix) = rating_counts(&items);
        Some(fleiss_kappa(&matrix)?)
    };
    Ok(Agreement {
        cohens_kappa: cohens,
        fleiss_kappa: fleiss,
        rated_pairs: pairs.len(),
        fleiss_items: items.len(),
    })
}

/// Distinct labels used in the session, sorted.
pub fn used_labels(session: &AnnotationSession) -> BTreeSet<&str> {
    session.submissions.iter().map(|r| r.label.as_str()).collect()
}
