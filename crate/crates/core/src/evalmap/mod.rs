//! Baselines and evaluation metrics.

mod bootstrap;
mod f1;
mod hierarchy;
mod kappa;
mod kmeans;
mod mapping;
mod matching;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapCi, DEFAULT_REPLICATES};
pub use f1::{f1_score, per_class_f1, ClassF1, F1Mode};
pub use hierarchy::{HierarchyFile, HierarchyNode, LabelHierarchy, OTHER};
pub use kappa::{cohens_kappa, fleiss_kappa, rating_counts};
pub use kmeans::{kmeans, predict, KMeansResult};
pub use mapping::{
    majority_vote_mapping, mapped_predictions, ClusterLabel, ClusterLabelMap, LabelUnification,
};
pub use matching::{hungarian, matched_accuracy};
