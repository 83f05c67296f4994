//! Centroid annotation sessions and label propagation.

mod centroids;
mod propagate;
mod replay;
mod session;

pub use centroids::{attach_events, select_centroids, CentroidSample};
pub use propagate::{propagate, reannotate_events, write_reannotated_csv, WindowLabel};
pub use replay::{label_options, replay_payload, ReplayPayload, REPLAY_VERSION};
pub use session::{
    cluster_majority_labels, create_session, session_agreement, used_labels, Agreement, AnnotationSession,
    Progress, RatingRecord, SampleStatus, SessionSample, SESSION_VERSION,
};
